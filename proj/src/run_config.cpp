#include "powermarket/run_config.hpp"

#include "powermarket/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace powermarket {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys = {
        "n_agents", "t_steps", "warmup", "f", "seed", "engine",
        "price.kind", "price.value", "price.mean", "price.sigma", "price.v0", "price.sigma0",
        "price.path", "price.column", "price.rescale.mean", "price.rescale.sd", "price.detrend_window",
        "bins.threshold.bins", "bins.price.bins", "bins.price.lo", "bins.price.hi",
        "bins.demand.bins_per_decade", "bins.demand.decades", "bins.demand.anchor",
        "intervals", "out.dir", "out.timeseries_stride",
        "sweep.axis", "sweep.values", "sweep.parallelism",
    };
    return keys;
}

const std::map<std::string, std::set<std::string>>& price_keys_by_kind()
{
    static const std::map<std::string, std::set<std::string>> keys = {
        {"constant", {"price.value"}},
        {"gaussian", {"price.mean", "price.sigma"}},
        {"langevin", {"price.mean", "price.v0", "price.sigma0"}},
        {"file", {"price.path", "price.column", "price.rescale.mean", "price.rescale.sd", "price.detrend_window"}},
    };
    return keys;
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") {
        return inf;
    }
    if (t == "-inf") {
        return -inf;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw config_error(key + ": expected a number, got '" + text + "'");
    }
    return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec == std::errc{} && ptr == t.data() + t.size() && !t.empty()) {
        return v;
    }
    // accept integral scientific notation such as 1e6
    const double d = parse_double(key, text);
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e18) {
        return static_cast<std::int64_t>(d);
    }
    throw config_error(key + ": expected an integer, got '" + text + "'");
}

std::uint64_t parse_seed(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw config_error(key + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!trim(item).empty()) {
            out.push_back(parse_double(key, item));
        }
    }
    return out;
}

// "lo:hi; lo:hi"
std::vector<PriceInterval> parse_intervals(const std::string& key, const std::string& text)
{
    std::vector<PriceInterval> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw config_error(key + ": expected 'lo:hi' entries separated by ';', got '" + item + "'");
        }
        PriceInterval iv{parse_double(key, item.substr(0, colon)), parse_double(key, item.substr(colon + 1))};
        if (!(iv.lo < iv.hi)) {
            throw config_error(key + ": interval '" + item + "' must have lo < hi");
        }
        out.push_back(iv);
    }
    return out;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

nlohmann::ordered_json bound_json(double v)
{
    if (std::isinf(v)) {
        return v < 0 ? "-inf" : "inf";
    }
    return v;
}

nlohmann::ordered_json histogram_json(const HistogramSpec& spec)
{
    return std::visit(overloaded{
                          [](const LinearBins& b) {
                              return nlohmann::ordered_json{{"kind", "linear"}, {"lo", b.lo}, {"hi", b.hi}, {"bins", b.bins}};
                          },
                          [](const LogBins& b) {
                              return nlohmann::ordered_json{{"kind", "log"},
                                                            {"bins_per_decade", b.bins_per_decade},
                                                            {"decades", b.decades},
                                                            {"anchor", b.anchor}};
                          },
                      },
                      spec);
}

nlohmann::ordered_json price_json(const PriceSourceSpec& spec)
{
    return std::visit(overloaded{
                          [](const price::Constant& c) {
                              return nlohmann::ordered_json{{"kind", "constant"}, {"value", c.value}};
                          },
                          [](const price::IidGaussian& g) {
                              return nlohmann::ordered_json{{"kind", "gaussian"}, {"mean", g.mean}, {"sigma", g.sigma}};
                          },
                          [](const price::Langevin& l) {
                              return nlohmann::ordered_json{
                                  {"kind", "langevin"}, {"mean", l.mean}, {"v0", l.v0}, {"sigma0", l.sigma0}};
                          },
                          [](const price::FileSeries& fs) {
                              nlohmann::ordered_json j{{"kind", "file"}, {"path", fs.path}, {"column", fs.column}};
                              if (fs.rescale) {
                                  j["rescale_mean"] = fs.rescale->target_mean;
                                  if (fs.rescale->target_sd) {
                                      j["rescale_sd"] = *fs.rescale->target_sd;
                                  }
                              }
                              if (fs.detrend_window) {
                                  j["detrend_window"] = *fs.detrend_window;
                              }
                              return j;
                          },
                      },
                      spec);
}

}  // namespace

Settings read_settings_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot read config file '" + path + "'");
    }
    Settings settings;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        settings[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return settings;
}

RunConfig parse_config(const Settings& settings)
{
    for (const auto& [key, value] : settings) {
        if (!known_keys().contains(key)) {
            throw config_error("unknown key '" + key + "'");
        }
    }
    const auto get = [&](const std::string& key) -> const std::string* {
        const auto it = settings.find(key);
        return it == settings.end() ? nullptr : &it->second;
    };

    RunConfig c;
    if (const auto* v = get("n_agents")) c.n_agents = parse_int("n_agents", *v);
    if (const auto* v = get("t_steps")) c.t_steps = parse_int("t_steps", *v);
    if (const auto* v = get("warmup")) c.warmup = parse_int("warmup", *v);
    if (const auto* v = get("f")) c.f = parse_double("f", *v);
    if (const auto* v = get("seed")) c.seed = parse_seed("seed", *v);
    if (const auto* v = get("engine")) {
        try {
            c.engine = engine_kind_from_string(trim(*v));
        } catch (const config_error& e) {
            throw config_error(std::string("engine: ") + e.what());
        }
    }

    const std::string kind = get("price.kind") ? trim(*get("price.kind")) : "langevin";
    const auto allowed = price_keys_by_kind().find(kind);
    if (allowed == price_keys_by_kind().end()) {
        throw config_error("price.kind: expected constant, gaussian, langevin or file, got '" + kind + "'");
    }
    for (const auto& [key, value] : settings) {
        if (key.starts_with("price.") && key != "price.kind" && !allowed->second.contains(key)) {
            throw config_error(key + ": does not apply to price.kind = " + kind);
        }
    }
    const auto num = [&](const char* key, double fallback) {
        const auto* v = get(key);
        return v ? parse_double(key, *v) : fallback;
    };
    if (kind == "constant") {
        c.price = price::Constant{num("price.value", 1.0)};
    } else if (kind == "gaussian") {
        c.price = price::IidGaussian{num("price.mean", 1.0), num("price.sigma", 1.0 / 6.0)};
    } else if (kind == "langevin") {
        c.price = price::Langevin{num("price.mean", 1.0), num("price.v0", 0.2), num("price.sigma0", 0.1)};
    } else {
        price::FileSeries fs;
        if (const auto* v = get("price.path")) fs.path = trim(*v);
        if (const auto* v = get("price.column")) fs.column = static_cast<int>(parse_int("price.column", *v));
        if (get("price.rescale.mean") || get("price.rescale.sd")) {
            price::Rescale r;
            r.target_mean = num("price.rescale.mean", 1.0);
            if (const auto* v = get("price.rescale.sd")) r.target_sd = parse_double("price.rescale.sd", *v);
            fs.rescale = r;
        }
        if (const auto* v = get("price.detrend_window")) {
            fs.detrend_window = static_cast<int>(parse_int("price.detrend_window", *v));
        }
        c.price = fs;
    }

    if (const auto* v = get("bins.threshold.bins")) {
        c.bins.threshold = LinearBins{0.0, 1.0, static_cast<int>(parse_int("bins.threshold.bins", *v))};
    }
    if (const auto* v = get("bins.price.bins")) c.bins.price_bins = static_cast<int>(parse_int("bins.price.bins", *v));
    if (const auto* v = get("bins.price.lo")) c.bins.price_lo = parse_double("bins.price.lo", *v);
    if (const auto* v = get("bins.price.hi")) c.bins.price_hi = parse_double("bins.price.hi", *v);
    if (const auto* v = get("bins.demand.bins_per_decade")) {
        c.bins.demand.bins_per_decade = static_cast<int>(parse_int("bins.demand.bins_per_decade", *v));
    }
    if (const auto* v = get("bins.demand.decades")) {
        c.bins.demand.decades = static_cast<int>(parse_int("bins.demand.decades", *v));
    }
    if (const auto* v = get("bins.demand.anchor")) c.bins.demand.anchor = parse_double("bins.demand.anchor", *v);
    if (const auto* v = get("intervals")) c.intervals = parse_intervals("intervals", *v);
    if (const auto* v = get("out.dir")) c.outputs.dir = trim(*v);
    if (const auto* v = get("out.timeseries_stride")) {
        c.outputs.timeseries_stride = parse_int("out.timeseries_stride", *v);
    }

    validate(c);
    return c;
}

RunConfig parse_config(const std::optional<std::string>& path, const Settings& overrides)
{
    Settings merged = path ? read_settings_file(*path) : Settings{};
    for (const auto& [key, value] : overrides) {
        merged[key] = value;
    }
    return parse_config(merged);
}

SweepConfig parse_sweep_config(const Settings& settings)
{
    SweepConfig s;
    s.base = parse_config(settings);
    const auto axis = settings.find("sweep.axis");
    if (axis == settings.end()) {
        throw config_error("sweep.axis: required for sweeps");
    }
    s.axis = trim(axis->second);
    static const std::set<std::string> axes = {"f", "sigma", "sigma0", "v0", "n_agents"};
    if (!axes.contains(s.axis)) {
        throw config_error("sweep.axis: expected f, sigma, sigma0, v0 or n_agents, got '" + s.axis + "'");
    }
    const auto values = settings.find("sweep.values");
    if (values == settings.end()) {
        throw config_error("sweep.values: required for sweeps");
    }
    s.values = parse_list("sweep.values", values->second);
    if (s.values.empty()) {
        throw config_error("sweep.values: must not be empty");
    }
    if (const auto it = settings.find("sweep.parallelism"); it != settings.end()) {
        s.parallelism = static_cast<int>(parse_int("sweep.parallelism", it->second));
    }
    if (s.parallelism < 1) {
        throw config_error("sweep.parallelism: must be >= 1");
    }
    // every point must be a valid run
    for (double v : s.values) {
        (void)apply_axis(s.base, s.axis, v);
    }
    return s;
}

void validate(const RunConfig& c)
{
    if (c.n_agents < 1) throw config_error("n_agents: must be >= 1");
    if (c.t_steps < 1) throw config_error("t_steps: must be >= 1");
    if (c.warmup < 0) throw config_error("warmup: must be >= 0");
    if (!(c.f >= 0.0 && c.f <= 1.0)) throw config_error("f: must lie in [0, 1]");
    if (c.outputs.timeseries_stride < 0) throw config_error("out.timeseries_stride: must be >= 0");
    if (c.outputs.dir.empty()) throw config_error("out.dir: must not be empty");
    if (c.bins.price_bins < 1) throw config_error("bins.price.bins: must be >= 1");
    if (c.bins.price_lo && c.bins.price_hi && !(*c.bins.price_lo < *c.bins.price_hi)) {
        throw config_error("bins.price.lo: must be below bins.price.hi");
    }
    validate(c.bins.threshold, "bins.threshold");
    validate(c.bins.demand, "bins.demand");
    validate(c.price);
}

std::pair<double, double> price_moments(const PriceSourceSpec& spec)
{
    if (const auto* fs = std::get_if<price::FileSeries>(&spec)) {
        const auto series = load_file_series(fs->path, fs->column, fs->rescale, fs->detrend_window);
        const double n = static_cast<double>(series.size());
        const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : series) {
            ss += (v - mean) * (v - mean);
        }
        return {mean, std::sqrt(ss / n)};
    }
    return {stationary_mean(spec), stationary_sd(spec)};
}

StatsConfig resolve_stats_config(const RunConfig& config)
{
    const auto [mean, sd] = price_moments(config.price);
    // a degenerate price process still needs a non-empty binning range
    const double half_width = sd > 0.0 ? 5.0 * sd : 1.0;
    StatsConfig s;
    s.threshold_bins = config.bins.threshold;
    s.price_bins = LinearBins{config.bins.price_lo.value_or(mean - half_width),
                              config.bins.price_hi.value_or(mean + half_width), config.bins.price_bins};
    validate(s.price_bins, "bins.price");
    s.demand_bins = config.bins.demand;
    s.intervals = config.intervals ? *config.intervals : default_intervals(config.price);
    return s;
}

std::vector<PriceInterval> default_intervals(const PriceSourceSpec& spec)
{
    const auto [mean, sd] = price_moments(spec);
    return {{-inf, mean - 3.0 * sd}, {mean - sd, mean}, {mean - sd, mean + sd}};
}

nlohmann::ordered_json to_json(const RunConfig& config)
{
    const StatsConfig stats = resolve_stats_config(config);
    nlohmann::ordered_json j;
    j["n_agents"] = config.n_agents;
    j["t_steps"] = config.t_steps;
    j["warmup"] = config.warmup;
    j["f"] = config.f;
    j["seed"] = config.seed;
    j["engine"] = std::string(to_string(config.engine));
    j["price"] = price_json(config.price);
    j["bins"] = {{"threshold", histogram_json(stats.threshold_bins)},
                 {"price", histogram_json(stats.price_bins)},
                 {"demand", histogram_json(stats.demand_bins)}};
    auto intervals = nlohmann::ordered_json::array();
    for (const auto& iv : stats.intervals) {
        intervals.push_back({bound_json(iv.lo), bound_json(iv.hi)});
    }
    j["intervals"] = intervals;
    j["timeseries_stride"] = config.outputs.timeseries_stride;
    return j;
}

std::string config_hash(const RunConfig& config)
{
    const std::string text = to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig apply_axis(const RunConfig& base, const std::string& axis, double value)
{
    RunConfig c = base;
    if (axis == "f") {
        c.f = value;
    } else if (axis == "n_agents") {
        if (value != std::floor(value)) {
            throw config_error("sweep.values: n_agents must be integral");
        }
        c.n_agents = static_cast<std::int64_t>(value);
    } else if (axis == "sigma") {
        auto* g = std::get_if<price::IidGaussian>(&c.price);
        if (!g) {
            throw config_error("sweep.axis: sigma requires price.kind = gaussian");
        }
        g->sigma = value;
    } else if (axis == "sigma0" || axis == "v0") {
        auto* l = std::get_if<price::Langevin>(&c.price);
        if (!l) {
            throw config_error("sweep.axis: " + axis + " requires price.kind = langevin");
        }
        (axis == "v0" ? l->v0 : l->sigma0) = value;
    } else {
        throw config_error("sweep.axis: unknown axis '" + axis + "'");
    }
    try {
        validate(c);
    } catch (const config_error& e) {
        throw config_error(std::string("sweep.values: ") + e.what());
    }
    return c;
}

std::uint64_t sweep_run_seed(std::uint64_t master, std::size_t index)
{
    // "sweep" tag keeps run seeds apart from the per-run sub-streams
    return derive_seed(master ^ 0x0000007377656570ULL, index);
}

}  // namespace powermarket
