#include "powermarket/histogram.hpp"

#include "powermarket/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace powermarket {

void validate(const HistogramSpec& spec, const char* name)
{
    if (const auto* lin = std::get_if<LinearBins>(&spec)) {
        if (!(lin->lo < lin->hi) || !std::isfinite(lin->lo) || !std::isfinite(lin->hi)) {
            throw config_error(std::string(name) + ": requires lo < hi");
        }
        if (lin->bins < 1) {
            throw config_error(std::string(name) + ": bins must be >= 1");
        }
    } else {
        const auto& log = std::get<LogBins>(spec);
        if (log.bins_per_decade < 1 || log.decades < 1) {
            throw config_error(std::string(name) + ": bins_per_decade and decades must be >= 1");
        }
        if (!(log.anchor > 0.0) || !std::isfinite(log.anchor)) {
            throw config_error(std::string(name) + ": anchor must be > 0");
        }
    }
}

Histogram::Histogram(HistogramSpec spec) : spec_(spec)
{
    validate(spec_, "histogram");
    std::size_t n = 0;
    if (const auto* lin = std::get_if<LinearBins>(&spec_)) {
        n = static_cast<std::size_t>(lin->bins);
        origin_ = lin->lo;
        scale_ = lin->bins / (lin->hi - lin->lo);
        for (std::size_t i = 0; i < n; ++i) {
            edges_.push_back(lin->lo + (lin->hi - lin->lo) * static_cast<double>(i) / static_cast<double>(lin->bins));
        }
        edges_.push_back(lin->hi);
    } else {
        const auto& log = std::get<LogBins>(spec_);
        linear_ = false;
        n = static_cast<std::size_t>(log.bins_per_decade) * static_cast<std::size_t>(log.decades);
        origin_ = log.anchor;
        scale_ = log.bins_per_decade;
        for (std::size_t i = 0; i <= n; ++i) {
            edges_.push_back(log.anchor * std::pow(10.0, static_cast<double>(i) / log.bins_per_decade));
        }
    }
    counts_.assign(n, 0);
    bins_ = static_cast<double>(n);
}

double Histogram::center(std::size_t bin) const noexcept
{
    if (linear_) {
        return 0.5 * (lower_edge(bin) + upper_edge(bin));
    }
    return std::sqrt(lower_edge(bin) * upper_edge(bin));
}

std::size_t Histogram::search_slot(double x) const noexcept
{
    const auto n = static_cast<std::ptrdiff_t>(counts_.size());
    if (!(x >= edges_.front())) {
        return 0;
    }
    if (x >= edges_.back()) {
        return counts_.size() + 1;
    }
    const double guess = linear_ ? (x - origin_) * scale_ : std::log10(x / origin_) * scale_;
    auto i = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(guess), 0, n - 1);
    // snap to the stored edges so that slot() and lower_edge() agree exactly
    while (x < edges_[static_cast<std::size_t>(i)]) {
        --i;
    }
    while (x >= edges_[static_cast<std::size_t>(i + 1)]) {
        ++i;
    }
    return static_cast<std::size_t>(i) + 1;
}

void Histogram::add_to_slot(std::size_t slot, std::int64_t weight) noexcept
{
    if (slot == 0) {
        underflow_ += weight;
    } else if (slot > counts_.size()) {
        overflow_ += weight;
    } else {
        counts_[slot - 1] += weight;
    }
}

std::int64_t Histogram::in_range_total() const noexcept
{
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

}  // namespace powermarket
