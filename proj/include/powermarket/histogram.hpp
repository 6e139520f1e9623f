#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

namespace powermarket {

struct LinearBins {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 100;
};

/// `bins_per_decade * decades` logarithmic bins starting at `anchor`.
struct LogBins {
    int bins_per_decade = 10;
    int decades = 9;
    double anchor = 1e-3;
};

using HistogramSpec = std::variant<LinearBins, LogBins>;

void validate(const HistogramSpec& spec, const char* name);

/// Bin layout plus integer weights. Samples outside the range land in
/// explicit underflow/overflow counters.
class Histogram {
public:
    explicit Histogram(HistogramSpec spec);

    const HistogramSpec& spec() const noexcept { return spec_; }
    std::size_t bins() const noexcept { return counts_.size(); }

    /// Slot of x: 0 is underflow, 1..bins() are the bins, bins() + 1 is overflow.
    /// Log bins treat x <= 0 as underflow.
    std::size_t slot(double x) const noexcept
    {
        if (linear_) {
            const double guess = (x - origin_) * scale_;
            if (guess >= 0.0 && guess < bins_) {
                const auto i = static_cast<std::size_t>(guess);
                if (edges_[i] <= x && x < edges_[i + 1]) {
                    return i + 1;
                }
            }
        }
        return search_slot(x);
    }

    double lower_edge(std::size_t bin) const noexcept { return edges_[bin]; }
    double upper_edge(std::size_t bin) const noexcept { return edges_[bin + 1]; }
    double width(std::size_t bin) const noexcept { return upper_edge(bin) - lower_edge(bin); }
    /// Arithmetic center for linear bins, geometric center for log bins.
    double center(std::size_t bin) const noexcept;

    void add(double x, std::int64_t weight = 1) noexcept { add_to_slot(slot(x), weight); }
    void add_to_slot(std::size_t slot, std::int64_t weight) noexcept;

    std::int64_t count(std::size_t bin) const noexcept { return counts_[bin]; }
    std::int64_t underflow() const noexcept { return underflow_; }
    std::int64_t overflow() const noexcept { return overflow_; }
    std::int64_t in_range_total() const noexcept;
    std::int64_t total() const noexcept { return in_range_total() + underflow_ + overflow_; }

private:
    std::size_t search_slot(double x) const noexcept;

    HistogramSpec spec_;
    bool linear_ = true;
    double origin_ = 0.0;  ///< lo, or anchor for log bins
    double scale_ = 1.0;   ///< bins per unit, or bins per decade
    double bins_ = 0.0;
    std::vector<double> edges_;
    std::vector<std::int64_t> counts_;
    std::int64_t underflow_ = 0;
    std::int64_t overflow_ = 0;
};

}  // namespace powermarket
