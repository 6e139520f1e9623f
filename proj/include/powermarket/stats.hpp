#pragma once

#include "powermarket/histogram.hpp"
#include "powermarket/market.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace powermarket {

/// Half-open price interval [lo, hi); either end may be infinite.
struct PriceInterval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double p) const noexcept { return p >= lo && p < hi; }
    bool operator==(const PriceInterval&) const = default;
};

struct StatsConfig {
    HistogramSpec threshold_bins = LinearBins{0.0, 1.0, 100};
    HistogramSpec price_bins = LinearBins{1.0 - 5.0 / 6.0, 1.0 + 5.0 / 6.0, 150};
    LogBins demand_bins{};
    std::vector<PriceInterval> intervals;
};

/// Streaming sums and histograms over the measured steps of one run.
/// Memory is O(bins + N), independent of the number of steps.
class StatsAccumulator {
public:
    StatsAccumulator(StatsConfig config, std::size_t n_agents);

    /// Snapshots the threshold occupancy at the start of measurement.
    void begin(const MarketState& state);

    template <class ForEachThreshold>
    void begin_with(ForEachThreshold&& for_each)
    {
        std::fill(occupancy_.begin(), occupancy_.end(), Occupancy{});
        for_each([this](double p) { ++occupancy_[threshold_layout_.slot(p)].count; });
    }

    void record_step(const StepResult& result);

    const StatsConfig& config() const noexcept { return config_; }
    std::size_t n_agents() const noexcept { return n_agents_; }
    std::int64_t steps() const noexcept { return steps_; }
    std::int64_t sum_demand() const noexcept { return sum_d_; }
    double sum_price_demand() const noexcept { return sum_pd_; }
    std::int64_t max_demand() const noexcept { return max_d_; }

    /// Steps per price bin (with underflow/overflow).
    const Histogram& price_hist() const noexcept { return price_hist_; }
    /// Summed D(t) per price bin.
    const Histogram& load_price_hist() const noexcept { return load_hist_; }
    const Histogram& threshold_layout() const noexcept { return threshold_layout_; }

    /// Number of measured steps with demand exactly d, for d in [0, N].
    const std::vector<std::int64_t>& demand_counts() const noexcept { return demand_counts_; }

    /// Time-integrated threshold counts per threshold slot (see Histogram::slot).
    std::vector<std::int64_t> occupancy_integrals() const;

    /// Demand rows of the price x demand matrix: row 0 is D = 0, row r >= 1
    /// covers absolute demand [10^((r-1)/b), 10^(r/b)).
    std::size_t matrix_rows() const noexcept { return matrix_rows_; }
    std::size_t matrix_cols() const noexcept { return matrix_cols_; }
    std::int64_t matrix_count(std::size_t row, std::size_t col) const noexcept
    {
        return matrix_[row * matrix_cols_ + col];
    }
    std::size_t demand_row(std::int64_t demand) const noexcept;
    /// Lower edge in absolute demand of matrix row r >= 1.
    double demand_row_lower(std::size_t row) const noexcept;

    struct IntervalTally {
        PriceInterval interval;
        std::int64_t steps = 0;
        std::int64_t load = 0;
    };
    const std::vector<IntervalTally>& interval_tallies() const noexcept { return tallies_; }

private:
    struct Occupancy {
        std::int64_t count = 0;
        std::int64_t last = 0;
        std::int64_t integral = 0;
    };

    void move_occupancy(std::size_t slot, std::int64_t delta, std::int64_t now) noexcept
    {
        auto& o = occupancy_[slot];
        o.integral += o.count * (now - o.last);
        o.last = now;
        o.count += delta;
    }

    StatsConfig config_;
    std::size_t n_agents_;
    std::int64_t steps_ = 0;
    std::int64_t sum_d_ = 0;
    double sum_pd_ = 0.0;
    std::int64_t max_d_ = 0;
    Histogram price_hist_;
    Histogram load_hist_;
    Histogram threshold_layout_;
    std::vector<Occupancy> occupancy_;
    std::vector<std::int64_t> demand_counts_;
    std::size_t matrix_rows_ = 0;
    std::size_t matrix_cols_ = 0;
    std::vector<std::int64_t> matrix_;
    std::vector<IntervalTally> tallies_;
};

struct DensityBin {
    double lo;
    double hi;
    double density;
    /// Un-normalized mass in the bin (count, load sum or occupancy integral).
    std::int64_t raw;
};

/// Time- and agent-averaged density of thresholds. Integrates to 1.
std::vector<DensityBin> threshold_density(const StatsAccumulator& acc);

struct LoadPriceDensity {
    std::vector<DensityBin> load;   ///< share of total load consumed per unit price
    std::vector<DensityBin> price;  ///< density of P(t)
    std::int64_t load_outside = 0;  ///< load consumed at prices outside the binned range
    std::int64_t steps_outside = 0;
};

/// Load-per-price and price densities over the in-range bins. Throws
/// undefined_statistic when no load was consumed.
LoadPriceDensity load_price_density(const StatsAccumulator& acc);

struct Shares {
    double time_share = 0.0;
    double demand_share = 0.0;
};

/// Fraction of steps with P in [lo, hi) and their share of total demand.
/// Exact for tracked intervals and for intervals whose ends are infinite or
/// price-bin edges; other intervals throw undefined_statistic.
Shares demand_share(const StatsAccumulator& acc, double lo, double hi);

struct DistributionBin {
    double lo;
    double hi;
    double center;
    double density;
    std::int64_t count;
};

/// Log-binned density of D / D_bar. Zero-demand steps cannot sit on a log
/// axis and are reported in zero_count.
struct DemandDistribution {
    double d_bar = 0.0;
    std::int64_t steps = 0;
    std::int64_t zero_count = 0;
    std::int64_t underflow = 0;
    std::int64_t overflow = 0;
    std::vector<DistributionBin> bins;
    /// Observed (demand, steps) pairs in ascending demand.
    std::vector<std::pair<std::int64_t, std::int64_t>> value_counts;
};

DemandDistribution demand_distribution(const StatsAccumulator& acc);

/// Smallest observed D / D_bar whose cumulative step fraction reaches q.
double tail_cutoff(const DemandDistribution& distribution, double q);

struct DemandCurvePoint {
    double price_lo;
    double price_hi;
    double price_center;
    std::int64_t steps;
    std::int64_t load;
    /// Mean D over all steps in the bin, D = 0 steps included. NaN when empty.
    double mean_demand;
};

/// Event counts per (demand row, price column). Column 0 holds prices below
/// the binned range, the last column prices above it.
struct DemandPriceMatrix {
    std::vector<double> price_edges;   ///< lower edges of columns 1..bins, plus the upper edge
    std::vector<double> demand_edges;  ///< D / D_bar lower edges of rows 1..R, plus the upper edge
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int64_t> counts;  ///< row-major
    std::vector<DemandCurvePoint> curve;

    std::int64_t at(std::size_t row, std::size_t col) const { return counts[row * cols + col]; }
};

DemandPriceMatrix demand_price_matrix(const StatsAccumulator& acc);

/// Mean-demand curve over the in-range price bins.
std::vector<DemandCurvePoint> demand_curve(const StatsAccumulator& acc);

struct ExponentialFit {
    double slope;
    double intercept;
    double r2;
    int bins_used;
};

/// Least squares of ln(mean demand) on the bin center over bins with positive
/// mean and at least `min_steps` steps. Throws undefined_statistic when fewer
/// than `min_bins` bins qualify.
ExponentialFit fit_exponential_demand_curve(std::span<const DemandCurvePoint> curve, std::int64_t min_steps = 100,
                                            int min_bins = 5);

/// log10(max / min) of the positive curve values with centers in [lo, hi] and
/// at least `min_steps` steps; 0 when fewer than two bins qualify.
double curve_span_decades(std::span<const DemandCurvePoint> curve, double lo, double hi,
                          std::int64_t min_steps = 100);

struct IntervalShare {
    PriceInterval interval;
    Shares shares;
};

struct SummaryStats {
    std::int64_t steps = 0;
    std::size_t n_agents = 0;
    double d_bar_total = 0.0;  ///< D_bar
    double d_bar_agent = 0.0;  ///< D_bar / N
    std::optional<double> avg_consumer_price;
    std::int64_t max_demand = 0;
    std::optional<double> max_d_over_dbar;
    std::vector<IntervalShare> interval_shares;
    std::optional<double> tail_cutoff_q999;
    std::optional<ExponentialFit> fit;
};

SummaryStats summarize(const StatsAccumulator& acc);

/// Conservation identities that every finished accumulator must satisfy.
/// Returns one message per violated identity.
std::vector<std::string> check_conservation(const StatsAccumulator& acc);

}  // namespace powermarket
