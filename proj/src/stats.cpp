#include "powermarket/stats.hpp"

#include "powermarket/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace powermarket {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::size_t decades_to_cover(std::size_t n)
{
    std::size_t decades = 1;
    for (double edge = 10.0; edge <= static_cast<double>(n); edge *= 10.0) {
        ++decades;
    }
    return decades;
}

bool is_bin_edge(const Histogram& h, double x)
{
    if (std::isinf(x)) {
        return true;
    }
    for (std::size_t i = 0; i <= h.bins(); ++i) {
        if (h.lower_edge(i) == x) {
            return true;
        }
    }
    return false;
}

}  // namespace

StatsAccumulator::StatsAccumulator(StatsConfig config, std::size_t n_agents)
    : config_(std::move(config)),
      n_agents_(n_agents),
      price_hist_(config_.price_bins),
      load_hist_(config_.price_bins),
      threshold_layout_(config_.threshold_bins)
{
    validate(config_.demand_bins, "bins.demand");
    occupancy_.resize(threshold_layout_.bins() + 2);
    demand_counts_.assign(n_agents_ + 1, 0);
    const auto per_decade = static_cast<std::size_t>(config_.demand_bins.bins_per_decade);
    matrix_rows_ = 1 + per_decade * decades_to_cover(n_agents_);
    matrix_cols_ = price_hist_.bins() + 2;
    matrix_.assign(matrix_rows_ * matrix_cols_, 0);
    for (const auto& iv : config_.intervals) {
        tallies_.push_back({iv, 0, 0});
    }
}

void StatsAccumulator::begin(const MarketState& state)
{
    begin_with([&state](auto&& fn) { state.for_each_threshold(fn); });
}

double StatsAccumulator::demand_row_lower(std::size_t row) const noexcept
{
    return std::pow(10.0, static_cast<double>(row - 1) / config_.demand_bins.bins_per_decade);
}

std::size_t StatsAccumulator::demand_row(std::int64_t demand) const noexcept
{
    if (demand <= 0) {
        return 0;
    }
    const double d = static_cast<double>(demand);
    auto row = static_cast<std::size_t>(std::floor(std::log10(d) * config_.demand_bins.bins_per_decade)) + 1;
    row = std::min(row, matrix_rows_ - 1);
    while (row > 1 && d < demand_row_lower(row)) {
        --row;
    }
    while (row + 1 < matrix_rows_ && d >= demand_row_lower(row + 1)) {
        ++row;
    }
    return row;
}

void StatsAccumulator::record_step(const StepResult& result)
{
    const std::int64_t d = result.demand;
    const double p = result.price;
    const std::size_t col = price_hist_.slot(p);
    price_hist_.add_to_slot(col, 1);
    load_hist_.add_to_slot(col, d);
    ++demand_counts_[static_cast<std::size_t>(d)];
    ++matrix_[demand_row(d) * matrix_cols_ + col];
    sum_d_ += d;
    sum_pd_ += p * static_cast<double>(d);
    max_d_ = std::max(max_d_, d);
    for (auto& tally : tallies_) {
        if (tally.interval.contains(p)) {
            ++tally.steps;
            tally.load += d;
        }
    }

    // the pre-step state occupies its slots through the end of this step
    const std::int64_t now = steps_ + 1;
    for (const auto& change : result.changes) {
        const std::size_t from = threshold_layout_.slot(change.old_value);
        const std::size_t to = threshold_layout_.slot(change.new_value);
        if (from != to) {
            move_occupancy(from, -1, now);
            move_occupancy(to, +1, now);
        }
    }
    ++steps_;
}

std::vector<std::int64_t> StatsAccumulator::occupancy_integrals() const
{
    std::vector<std::int64_t> out(occupancy_.size());
    std::transform(occupancy_.begin(), occupancy_.end(), out.begin(),
                   [this](const Occupancy& o) { return o.integral + o.count * (steps_ - o.last); });
    return out;
}

std::vector<DensityBin> threshold_density(const StatsAccumulator& acc)
{
    const auto& layout = acc.threshold_layout();
    const auto integrals = acc.occupancy_integrals();
    const std::int64_t mass = std::accumulate(integrals.begin() + 1, integrals.end() - 1, std::int64_t{0});
    if (mass == 0) {
        throw undefined_statistic("threshold density: no measured steps");
    }
    std::vector<DensityBin> out;
    out.reserve(layout.bins());
    for (std::size_t b = 0; b < layout.bins(); ++b) {
        const std::int64_t raw = integrals[b + 1];
        out.push_back({layout.lower_edge(b), layout.upper_edge(b),
                       static_cast<double>(raw) / (static_cast<double>(mass) * layout.width(b)), raw});
    }
    return out;
}

LoadPriceDensity load_price_density(const StatsAccumulator& acc)
{
    const auto& prices = acc.price_hist();
    const auto& loads = acc.load_price_hist();
    const std::int64_t load_mass = loads.in_range_total();
    const std::int64_t step_mass = prices.in_range_total();
    if (acc.sum_demand() == 0 || load_mass == 0) {
        throw undefined_statistic("load density undefined: no demand inside the price range");
    }
    LoadPriceDensity out;
    out.load_outside = loads.underflow() + loads.overflow();
    out.steps_outside = prices.underflow() + prices.overflow();
    for (std::size_t b = 0; b < prices.bins(); ++b) {
        const double lo = prices.lower_edge(b);
        const double hi = prices.upper_edge(b);
        const double w = prices.width(b);
        out.load.push_back({lo, hi, static_cast<double>(loads.count(b)) / (static_cast<double>(load_mass) * w),
                            loads.count(b)});
        out.price.push_back(
            {lo, hi,
             step_mass > 0 ? static_cast<double>(prices.count(b)) / (static_cast<double>(step_mass) * w) : 0.0,
             prices.count(b)});
    }
    return out;
}

Shares demand_share(const StatsAccumulator& acc, double lo, double hi)
{
    if (!(lo < hi) || acc.steps() == 0) {
        return {};
    }
    const auto share = [&](std::int64_t steps, std::int64_t load) {
        return Shares{static_cast<double>(steps) / static_cast<double>(acc.steps()),
                      acc.sum_demand() > 0 ? static_cast<double>(load) / static_cast<double>(acc.sum_demand())
                                           : 0.0};
    };
    for (const auto& tally : acc.interval_tallies()) {
        if (tally.interval == PriceInterval{lo, hi}) {
            return share(tally.steps, tally.load);
        }
    }
    const auto& prices = acc.price_hist();
    if (!is_bin_edge(prices, lo) || !is_bin_edge(prices, hi)) {
        throw undefined_statistic("demand_share: interval is neither tracked nor aligned to price bins");
    }
    const auto& loads = acc.load_price_hist();
    std::int64_t steps = 0;
    std::int64_t load = 0;
    const auto take = [&](std::size_t slot, double slot_lo, double slot_hi) {
        if (slot_lo >= lo && slot_hi <= hi) {
            steps += slot == 0 ? prices.underflow() : slot > prices.bins() ? prices.overflow() : prices.count(slot - 1);
            load += slot == 0 ? loads.underflow() : slot > prices.bins() ? loads.overflow() : loads.count(slot - 1);
        }
    };
    take(0, -inf, prices.lower_edge(0));
    for (std::size_t b = 0; b < prices.bins(); ++b) {
        take(b + 1, prices.lower_edge(b), prices.upper_edge(b));
    }
    take(prices.bins() + 1, prices.upper_edge(prices.bins() - 1), inf);
    return share(steps, load);
}

DemandDistribution demand_distribution(const StatsAccumulator& acc)
{
    DemandDistribution out;
    out.steps = acc.steps();
    out.d_bar = acc.steps() > 0 ? static_cast<double>(acc.sum_demand()) / static_cast<double>(acc.steps()) : 0.0;
    const auto& counts = acc.demand_counts();
    for (std::size_t d = 0; d < counts.size(); ++d) {
        if (counts[d] > 0) {
            out.value_counts.emplace_back(static_cast<std::int64_t>(d), counts[d]);
        }
    }
    out.zero_count = counts.empty() ? 0 : counts[0];

    Histogram h(acc.config().demand_bins);
    if (out.d_bar > 0.0) {
        for (const auto& [d, n] : out.value_counts) {
            if (d > 0) {
                h.add(static_cast<double>(d) / out.d_bar, n);
            }
        }
    }
    out.underflow = h.underflow();
    out.overflow = h.overflow();
    const std::int64_t mass = h.in_range_total();
    for (std::size_t b = 0; b < h.bins(); ++b) {
        const std::int64_t n = h.count(b);
        out.bins.push_back({h.lower_edge(b), h.upper_edge(b), h.center(b),
                            mass > 0 ? static_cast<double>(n) / (static_cast<double>(mass) * h.width(b)) : 0.0, n});
    }
    return out;
}

double tail_cutoff(const DemandDistribution& distribution, double q)
{
    if (!(q >= 0.0 && q <= 1.0)) {
        throw undefined_statistic("tail_cutoff: quantile must lie in [0, 1]");
    }
    if (distribution.steps == 0 || !(distribution.d_bar > 0.0)) {
        throw undefined_statistic("tail_cutoff: mean demand is zero");
    }
    const double target = q * static_cast<double>(distribution.steps);
    std::int64_t cumulative = 0;
    for (const auto& [d, n] : distribution.value_counts) {
        cumulative += n;
        if (static_cast<double>(cumulative) >= target) {
            return static_cast<double>(d) / distribution.d_bar;
        }
    }
    return static_cast<double>(distribution.value_counts.back().first) / distribution.d_bar;
}

std::vector<DemandCurvePoint> demand_curve(const StatsAccumulator& acc)
{
    const auto& prices = acc.price_hist();
    const auto& loads = acc.load_price_hist();
    std::vector<DemandCurvePoint> curve;
    curve.reserve(prices.bins());
    for (std::size_t b = 0; b < prices.bins(); ++b) {
        const std::int64_t steps = prices.count(b);
        const std::int64_t load = loads.count(b);
        curve.push_back({prices.lower_edge(b), prices.upper_edge(b), prices.center(b), steps, load,
                         steps > 0 ? static_cast<double>(load) / static_cast<double>(steps)
                                   : std::numeric_limits<double>::quiet_NaN()});
    }
    return curve;
}

DemandPriceMatrix demand_price_matrix(const StatsAccumulator& acc)
{
    DemandPriceMatrix out;
    out.rows = acc.matrix_rows();
    out.cols = acc.matrix_cols();
    const auto& prices = acc.price_hist();
    for (std::size_t b = 0; b <= prices.bins(); ++b) {
        out.price_edges.push_back(prices.lower_edge(b));
    }
    const double d_bar =
        acc.steps() > 0 ? static_cast<double>(acc.sum_demand()) / static_cast<double>(acc.steps()) : 0.0;
    for (std::size_t r = 1; r <= out.rows; ++r) {
        out.demand_edges.push_back(d_bar > 0.0 ? acc.demand_row_lower(r) / d_bar
                                               : std::numeric_limits<double>::quiet_NaN());
    }
    out.counts.reserve(out.rows * out.cols);
    for (std::size_t r = 0; r < out.rows; ++r) {
        for (std::size_t c = 0; c < out.cols; ++c) {
            out.counts.push_back(acc.matrix_count(r, c));
        }
    }
    out.curve = demand_curve(acc);
    return out;
}

ExponentialFit fit_exponential_demand_curve(std::span<const DemandCurvePoint> curve, std::int64_t min_steps,
                                            int min_bins)
{
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& pt : curve) {
        if (pt.steps >= min_steps && pt.mean_demand > 0.0) {
            xs.push_back(pt.price_center);
            ys.push_back(std::log(pt.mean_demand));
        }
    }
    const int n = static_cast<int>(xs.size());
    if (n < min_bins) {
        throw undefined_statistic("demand-curve fit unavailable: " + std::to_string(n) + " qualifying bins, need " +
                                  std::to_string(min_bins));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = ys[i] - (intercept + slope * xs[i]);
        ss_res += r * r;
    }
    const double r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return {slope, intercept, r2, n};
}

double curve_span_decades(std::span<const DemandCurvePoint> curve, double lo, double hi, std::int64_t min_steps)
{
    double smallest = inf;
    double largest = 0.0;
    int used = 0;
    for (const auto& pt : curve) {
        if (pt.price_center >= lo && pt.price_center <= hi && pt.steps >= min_steps && pt.mean_demand > 0.0) {
            smallest = std::min(smallest, pt.mean_demand);
            largest = std::max(largest, pt.mean_demand);
            ++used;
        }
    }
    return used < 2 ? 0.0 : std::log10(largest / smallest);
}

SummaryStats summarize(const StatsAccumulator& acc)
{
    SummaryStats s;
    s.steps = acc.steps();
    s.n_agents = acc.n_agents();
    s.max_demand = acc.max_demand();
    if (s.steps > 0) {
        s.d_bar_total = static_cast<double>(acc.sum_demand()) / static_cast<double>(s.steps);
        s.d_bar_agent = s.d_bar_total / static_cast<double>(s.n_agents);
    }
    if (acc.sum_demand() > 0) {
        s.avg_consumer_price = acc.sum_price_demand() / static_cast<double>(acc.sum_demand());
        s.max_d_over_dbar = static_cast<double>(s.max_demand) / s.d_bar_total;
        s.tail_cutoff_q999 = tail_cutoff(demand_distribution(acc), 0.999);
    }
    for (const auto& tally : acc.interval_tallies()) {
        s.interval_shares.push_back({tally.interval, demand_share(acc, tally.interval.lo, tally.interval.hi)});
    }
    try {
        const auto curve = demand_curve(acc);
        s.fit = fit_exponential_demand_curve(curve);
    } catch (const undefined_statistic&) {
        s.fit.reset();
    }
    return s;
}

std::vector<std::string> check_conservation(const StatsAccumulator& acc)
{
    std::vector<std::string> problems;
    const std::int64_t steps = acc.steps();

    if (acc.price_hist().total() != steps) {
        problems.push_back("price histogram total != measured steps");
    }
    std::int64_t matrix_total = 0;
    for (std::size_t c = 0; c < acc.matrix_cols(); ++c) {
        std::int64_t column = 0;
        for (std::size_t r = 0; r < acc.matrix_rows(); ++r) {
            column += acc.matrix_count(r, c);
        }
        matrix_total += column;
        const auto& ph = acc.price_hist();
        const std::int64_t expected =
            c == 0 ? ph.underflow() : c > ph.bins() ? ph.overflow() : ph.count(c - 1);
        if (column != expected) {
            problems.push_back("matrix column " + std::to_string(c) + " sum != price histogram count");
        }
    }
    if (matrix_total != steps) {
        problems.push_back("matrix total != measured steps");
    }
    if (acc.load_price_hist().total() != acc.sum_demand()) {
        problems.push_back("load-per-price total != sum of demand");
    }

    const auto& counts = acc.demand_counts();
    std::int64_t count_total = 0;
    std::int64_t weighted = 0;
    for (std::size_t d = 0; d < counts.size(); ++d) {
        count_total += counts[d];
        weighted += static_cast<std::int64_t>(d) * counts[d];
    }
    if (count_total != steps) {
        problems.push_back("demand counts total != measured steps");
    }
    if (weighted != acc.sum_demand()) {
        problems.push_back("demand counts weighted back != sum of demand");
    }
    const auto dist = demand_distribution(acc);
    std::int64_t dist_total = dist.zero_count + dist.underflow + dist.overflow;
    for (const auto& b : dist.bins) {
        dist_total += b.count;
    }
    if (dist_total != steps) {
        problems.push_back("demand distribution counts + zero count != measured steps");
    }

    const auto integrals = acc.occupancy_integrals();
    const std::int64_t occupancy = std::accumulate(integrals.begin(), integrals.end(), std::int64_t{0});
    if (occupancy != static_cast<std::int64_t>(acc.n_agents()) * steps) {
        problems.push_back("threshold occupancy integral != N * steps");
    }
    return problems;
}

}  // namespace powermarket
