#include "powermarket/prices.hpp"

#include "powermarket/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace powermarket {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> fields;
    if (line.find(',') != std::string::npos) {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            fields.push_back(trim(field));
        }
    } else {
        std::istringstream ss(line);
        std::string field;
        while (ss >> field) {
            fields.push_back(field);
        }
    }
    return fields;
}

double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void validate(const PriceSourceSpec& spec)
{
    std::visit(overloaded{
                   [](const price::Constant& c) {
                       if (!std::isfinite(c.value)) {
                           throw config_error("price.value must be finite");
                       }
                   },
                   [](const price::IidGaussian& g) {
                       if (!std::isfinite(g.mean)) {
                           throw config_error("price.mean must be finite");
                       }
                       if (!(g.sigma >= 0.0) || !std::isfinite(g.sigma)) {
                           throw config_error("price.sigma must be >= 0");
                       }
                   },
                   [](const price::Langevin& l) {
                       if (!std::isfinite(l.mean)) {
                           throw config_error("price.mean must be finite");
                       }
                       if (!(l.v0 > 0.0 && l.v0 < 2.0)) {
                           throw config_error("price.v0 must lie in (0, 2)");
                       }
                       if (!(l.sigma0 >= 0.0) || !std::isfinite(l.sigma0)) {
                           throw config_error("price.sigma0 must be >= 0");
                       }
                   },
                   [](const price::FileSeries& fs) {
                       if (fs.path.empty()) {
                           throw config_error("price.path must be set for file series");
                       }
                       if (fs.column < 0) {
                           throw config_error("price.column must be >= 0");
                       }
                       if (fs.detrend_window && *fs.detrend_window < 1) {
                           throw config_error("price.detrend_window must be >= 1");
                       }
                       if (fs.rescale && fs.rescale->target_sd && !(*fs.rescale->target_sd >= 0.0)) {
                           throw config_error("price.rescale.sd must be >= 0");
                       }
                   },
               },
               spec);
}

double stationary_sd(const PriceSourceSpec& spec)
{
    return std::visit(overloaded{
                          [](const price::Constant&) { return 0.0; },
                          [](const price::IidGaussian& g) { return g.sigma; },
                          [](const price::Langevin& l) { return l.sigma0 / std::sqrt(2.0 * l.v0 - l.v0 * l.v0); },
                          [](const price::FileSeries&) -> double {
                              throw config_error("stationary_sd is undefined for file series; use the empirical sd");
                          },
                      },
                      spec);
}

double stationary_mean(const PriceSourceSpec& spec)
{
    return std::visit(overloaded{
                          [](const price::Constant& c) { return c.value; },
                          [](const price::IidGaussian& g) { return g.mean; },
                          [](const price::Langevin& l) { return l.mean; },
                          [](const price::FileSeries& fs) {
                              return mean_of(load_file_series(fs.path, fs.column, fs.rescale, fs.detrend_window));
                          },
                      },
                      spec);
}

std::vector<double> detrend_moving_average(const std::vector<double>& values, int window)
{
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    if (window < 1) {
        throw config_error("price.detrend_window must be >= 1");
    }
    if (window > n) {
        throw config_error("price.detrend_window (" + std::to_string(window) + ") exceeds series length (" +
                           std::to_string(n) + ")");
    }
    // prefix sums in long double keep long windows accurate
    std::vector<long double> prefix(values.size() + 1, 0.0L);
    for (std::size_t i = 0; i < values.size(); ++i) {
        prefix[i + 1] = prefix[i] + values[i];
    }
    const std::ptrdiff_t before = window / 2;
    const std::ptrdiff_t after = window - 1 - before;
    std::vector<double> out(values.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - before);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, i + after + 1);
        const long double avg = (prefix[hi] - prefix[lo]) / static_cast<long double>(hi - lo);
        if (avg == 0.0L) {
            throw ingestion_error("moving average is zero at sample " + std::to_string(i) + "; cannot detrend");
        }
        out[i] = static_cast<double>(values[i] / avg);
    }
    return out;
}

std::vector<double> rescale_series(const std::vector<double>& values, const price::Rescale& rescale)
{
    const double m = mean_of(values);
    std::vector<double> out(values.size());
    if (rescale.target_sd) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - m) * (v - m);
        }
        const double sd = std::sqrt(ss / static_cast<double>(values.size()));
        if (sd == 0.0) {
            throw config_error("price.rescale.sd given but the series has zero variance");
        }
        const double scale = *rescale.target_sd / sd;
        std::transform(values.begin(), values.end(), out.begin(),
                       [&](double v) { return rescale.target_mean + (v - m) * scale; });
    } else {
        if (m == 0.0) {
            throw config_error("price.rescale.mean given but the series has zero mean");
        }
        const double scale = rescale.target_mean / m;
        std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return v * scale; });
    }
    return out;
}

std::vector<double> load_file_series(const std::string& path, int column,
                                     const std::optional<price::Rescale>& rescale,
                                     std::optional<int> detrend_window)
{
    std::ifstream in(path);
    if (!in) {
        throw ingestion_error("cannot open price file '" + path + "'");
    }
    std::vector<double> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(line);
        if (body.empty() || body.front() == '#') {
            continue;
        }
        const auto fields = split_fields(body);
        if (column >= static_cast<int>(fields.size())) {
            throw ingestion_error(path + ":" + std::to_string(line_no) + ": no column " + std::to_string(column));
        }
        const std::string& field = fields[static_cast<std::size_t>(column)];
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(field.c_str(), &end);
        if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) {
            throw ingestion_error(path + ":" + std::to_string(line_no) + ": cannot parse '" + field + "' as a number");
        }
        values.push_back(v);
    }
    if (values.empty()) {
        throw ingestion_error("price file '" + path + "' contains no values");
    }
    if (detrend_window) {
        values = detrend_moving_average(values, *detrend_window);
    }
    if (rescale) {
        values = rescale_series(values, *rescale);
    }
    return values;
}

PriceSource::PriceSource(PriceSourceSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed)
{
    validate(spec_);
    if (const auto* l = std::get_if<price::Langevin>(&spec_)) {
        // start in the stationary distribution
        current_ = l->mean + stationary_sd(spec_) * normal_(rng_);
    } else if (const auto* fs = std::get_if<price::FileSeries>(&spec_)) {
        series_ = std::make_shared<const std::vector<double>>(
            load_file_series(fs->path, fs->column, fs->rescale, fs->detrend_window));
    }
    if (!series_) {
        series_ = std::make_shared<const std::vector<double>>();
    }
}

double PriceSource::next()
{
    switch (spec_.index()) {
    case 0: return std::get<price::Constant>(spec_).value;
    case 1: {
        const auto& g = std::get<price::IidGaussian>(spec_);
        return g.mean + g.sigma * normal_(rng_);
    }
    case 2: {
        const auto& l = std::get<price::Langevin>(spec_);
        const double emitted = current_;
        current_ = current_ - l.v0 * (current_ - l.mean) + l.sigma0 * normal_(rng_);
        return emitted;
    }
    default: {
        const double v = (*series_)[cursor_];
        cursor_ = cursor_ + 1 == series_->size() ? 0 : cursor_ + 1;
        return v;
    }
    }
}

PriceSource create_source(const PriceSourceSpec& spec, std::uint64_t seed)
{
    return PriceSource(spec, seed);
}

}  // namespace powermarket
