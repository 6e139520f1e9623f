#include "powermarket/errors.hpp"
#include "powermarket/prices.hpp"
#include "powermarket/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace powermarket;

namespace {

StatsConfig small_config()
{
    StatsConfig c;
    c.threshold_bins = LinearBins{0.0, 1.0, 10};
    c.price_bins = LinearBins{0.0, 2.0, 20};
    c.demand_bins = LogBins{10, 6, 1e-3};
    return c;
}

StepResult step_of(double price, std::int64_t demand)
{
    StepResult r;
    r.price = price;
    r.demand = demand;
    return r;
}

/// Runs a market and feeds every step into `acc`, returning nothing; the
/// naive per-step recount of pre-step thresholds is accumulated in `recount`
/// when given.
void drive(StatsAccumulator& acc, MarketState& state, PriceSource& prices, double f, int steps,
           std::vector<std::int64_t>* recount = nullptr)
{
    acc.begin(state);
    StepResult r;
    for (int t = 0; t < steps; ++t) {
        if (recount) {
            state.for_each_threshold([&](double p) { ++(*recount)[acc.threshold_layout().slot(p)]; });
        }
        state.apply_step(prices.next(), f, r);
        acc.record_step(r);
    }
}

double integral(const std::vector<DensityBin>& bins)
{
    double s = 0.0;
    for (const auto& b : bins) {
        s += b.density * (b.hi - b.lo);
    }
    return s;
}

}  // namespace

TEST_CASE("event-driven occupancy equals the naive recount")
{
    for (auto kind : {EngineKind::reference, EngineKind::fast}) {
        for (const HistogramSpec& bins : {HistogramSpec{LinearBins{0.0, 1.0, 100}}, HistogramSpec{LinearBins{0.0, 1.0, 37}},
                                          HistogramSpec{LinearBins{0.25, 0.75, 8}}}) {
            StatsConfig config = small_config();
            config.threshold_bins = bins;
            StatsAccumulator acc(config, 100);
            auto state = init_state(100, 77, kind);
            auto prices = create_source(price::Langevin{0.8, 0.2, 0.15}, 78);
            std::vector<std::int64_t> recount(acc.threshold_layout().bins() + 2, 0);
            drive(acc, state, prices, 0.02, 1000, &recount);
            CHECK(acc.occupancy_integrals() == recount);
        }
    }
}

TEST_CASE("occupancy integral totals N times steps")
{
    StatsAccumulator acc(small_config(), 300);
    auto state = init_state(300, 5, EngineKind::fast);
    auto prices = create_source(price::IidGaussian{0.7, 0.2}, 6);
    drive(acc, state, prices, 0.01, 2000);
    const auto occ = acc.occupancy_integrals();
    CHECK(std::accumulate(occ.begin(), occ.end(), std::int64_t{0}) == 300 * 2000);
    CHECK(occ.front() == 0);
    CHECK(occ.back() == 0);
}

TEST_CASE("densities integrate to one")
{
    StatsConfig config = small_config();
    config.threshold_bins = LinearBins{0.0, 1.0, 100};
    config.price_bins = LinearBins{0.2, 1.8, 150};
    StatsAccumulator acc(config, 2000);
    auto state = init_state(2000, 9, EngineKind::fast);
    auto prices = create_source(price::IidGaussian{1.0, 1.0 / 6.0}, 10);
    drive(acc, state, prices, 1e-2, 5000);

    CHECK(std::abs(integral(threshold_density(acc)) - 1.0) < 1e-9);
    const auto ld = load_price_density(acc);
    CHECK(std::abs(integral(ld.load) - 1.0) < 1e-9);
    CHECK(std::abs(integral(ld.price) - 1.0) < 1e-9);

    const auto dist = demand_distribution(acc);
    double s = 0.0;
    for (const auto& b : dist.bins) {
        s += b.density * (b.hi - b.lo);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
    CHECK(check_conservation(acc).empty());
}

TEST_CASE("conservation identities on a long run")
{
    StatsConfig config = small_config();
    config.intervals = {{-1e300, 0.9}, {0.9, 1.1}};
    StatsAccumulator acc(config, 1000);
    auto state = init_state(1000, 3, EngineKind::fast);
    auto prices = create_source(price::Langevin{1.0, 0.2, 0.1}, 4);
    drive(acc, state, prices, 1e-3, 20000);
    CHECK(check_conservation(acc).empty());

    const auto m = demand_price_matrix(acc);
    std::int64_t total = 0;
    for (auto v : m.counts) {
        total += v;
    }
    CHECK(total == acc.steps());
    for (std::size_t c = 1; c + 1 < m.cols; ++c) {
        std::int64_t column = 0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            column += m.at(r, c);
        }
        CHECK(column == acc.price_hist().count(c - 1));
        CHECK(m.curve[c - 1].steps == acc.price_hist().count(c - 1));
    }
    const auto dist = demand_distribution(acc);
    std::int64_t counted = dist.zero_count + dist.underflow + dist.overflow;
    for (const auto& b : dist.bins) {
        counted += b.count;
    }
    CHECK(counted == acc.steps());
}

TEST_CASE("zero-demand steps land in the zero counter and the zero row")
{
    StatsAccumulator acc(small_config(), 10);
    for (int i = 0; i < 3; ++i) {
        acc.record_step(step_of(0.5, 0));
    }
    CHECK(acc.demand_counts()[0] == 3);
    CHECK(acc.matrix_count(0, acc.price_hist().slot(0.5)) == 3);
    const auto dist = demand_distribution(acc);
    CHECK(dist.zero_count == 3);
    CHECK(acc.sum_demand() == 0);
}

TEST_CASE("one step adds price times demand")
{
    StatsAccumulator acc(small_config(), 10);
    acc.record_step(step_of(0.7, 5));
    CHECK(acc.sum_price_demand() == doctest::Approx(3.5));
    CHECK(acc.sum_demand() == 5);
    CHECK(acc.max_demand() == 5);
}

TEST_CASE("constant demand: mean, peak ratio and cutoff")
{
    StatsAccumulator acc(small_config(), 100);
    for (int i = 0; i < 50; ++i) {
        acc.record_step(step_of(0.3 + 0.02 * (i % 10), 7));
    }
    const auto s = summarize(acc);
    CHECK(s.d_bar_total == 7.0);
    CHECK(s.d_bar_agent == doctest::Approx(0.07));
    REQUIRE(s.max_d_over_dbar);
    CHECK(*s.max_d_over_dbar == 1.0);
    const auto dist = demand_distribution(acc);
    for (double q : {0.0, 0.5, 0.999, 1.0}) {
        CHECK(tail_cutoff(dist, q) == 1.0);
    }
    int occupied = 0;
    for (const auto& b : dist.bins) {
        occupied += b.count > 0;
    }
    CHECK(occupied == 1);
}

TEST_CASE("tail cutoff follows the empirical quantile")
{
    StatsAccumulator acc(small_config(), 1000);
    // demands 0, 1, ..., 99 once each: D_bar = 49.5
    for (int d = 0; d < 100; ++d) {
        acc.record_step(step_of(1.0, d));
    }
    const auto dist = demand_distribution(acc);
    CHECK(tail_cutoff(dist, 0.0) == 0.0);
    CHECK(tail_cutoff(dist, 0.5) == doctest::Approx(49.0 / 49.5));
    CHECK(tail_cutoff(dist, 0.995) == doctest::Approx(99.0 / 49.5));
    CHECK(tail_cutoff(dist, 1.0) == doctest::Approx(99.0 / 49.5));
    CHECK_THROWS_AS(tail_cutoff(dist, 1.5), undefined_statistic);
}

TEST_CASE("demand shares")
{
    StatsConfig config = small_config();
    config.intervals = {{0.35, 0.55}};
    StatsAccumulator acc(config, 100);
    const double prices[] = {0.1, 0.4, 0.5, 0.9, 1.5, 2.5, -0.5, 0.4};
    const std::int64_t demands[] = {10, 5, 0, 3, 1, 0, 20, 1};
    for (int i = 0; i < 8; ++i) {
        acc.record_step(step_of(prices[i], demands[i]));
    }
    const double inf = std::numeric_limits<double>::infinity();

    const auto all = demand_share(acc, -inf, inf);
    CHECK(all.time_share == 1.0);
    CHECK(all.demand_share == 1.0);

    const auto tracked = demand_share(acc, 0.35, 0.55);
    CHECK(tracked.time_share == doctest::Approx(3.0 / 8.0));
    CHECK(tracked.demand_share == doctest::Approx(6.0 / 40.0));

    // a partition of the line on bin edges adds back up to the whole
    const double cuts[] = {-inf, 0.0, 0.4, 1.0, 2.0, inf};
    double time = 0.0;
    double demand = 0.0;
    for (int i = 0; i + 1 < 6; ++i) {
        const auto s = demand_share(acc, cuts[i], cuts[i + 1]);
        CHECK(s.time_share >= 0.0);
        CHECK(s.demand_share <= 1.0);
        time += s.time_share;
        demand += s.demand_share;
    }
    CHECK(time == doctest::Approx(1.0));
    CHECK(demand == doctest::Approx(1.0));
    CHECK(demand_share(acc, -inf, 0.0).demand_share == doctest::Approx(0.5));

    const auto empty = demand_share(acc, 0.5, 0.5);
    CHECK(empty.time_share == 0.0);
    CHECK(empty.demand_share == 0.0);
    CHECK_THROWS_AS(demand_share(acc, 0.33, 0.77), undefined_statistic);
}

TEST_CASE("constant price concentrates everything in one column")
{
    StatsAccumulator acc(small_config(), 500);
    auto state = init_state(500, 1, EngineKind::fast);
    auto prices = create_source(price::Constant{0.55}, 2);
    drive(acc, state, prices, 0.02, 3000);
    const auto m = demand_price_matrix(acc);
    int nonempty = 0;
    for (std::size_t c = 0; c < m.cols; ++c) {
        std::int64_t column = 0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            column += m.at(r, c);
        }
        nonempty += column > 0;
    }
    CHECK(nonempty == 1);
    const auto ld = load_price_density(acc);
    int occupied = 0;
    for (const auto& b : ld.load) {
        occupied += b.raw > 0;
    }
    CHECK(occupied == 1);
}

TEST_CASE("without increments thresholds end up under the price floor")
{
    StatsAccumulator acc(small_config(), 400);
    auto state = init_state(400, 4, EngineKind::fast);
    auto prices = create_source(price::Constant{0.3}, 5);
    StepResult r;
    // consumers fall below their own threshold, so the excess decays geometrically
    for (int t = 0; t < 200; ++t) {
        state.apply_step(0.3, 0.0, r);
    }
    REQUIRE(r.demand == 0);
    drive(acc, state, prices, 0.0, 500);
    const auto rho = threshold_density(acc);
    for (const auto& b : rho) {
        if (b.lo >= 0.3) {
            CHECK(b.raw == 0);
        }
    }
    CHECK(acc.sum_demand() == 0);
    const auto s = summarize(acc);
    CHECK_FALSE(s.avg_consumer_price.has_value());
    CHECK_FALSE(s.max_d_over_dbar.has_value());
    CHECK(s.d_bar_total == 0.0);
    CHECK_THROWS_AS(load_price_density(acc), undefined_statistic);
}

TEST_CASE("the demand curve averages over zero-demand steps too")
{
    StatsAccumulator acc(small_config(), 100);
    acc.record_step(step_of(0.45, 0));
    acc.record_step(step_of(0.45, 0));
    acc.record_step(step_of(0.45, 9));
    const auto curve = demand_curve(acc);
    const auto bin = acc.price_hist().slot(0.45) - 1;
    CHECK(curve[bin].steps == 3);
    CHECK(curve[bin].mean_demand == doctest::Approx(3.0));
    CHECK(std::isnan(curve[0].mean_demand));
}

TEST_CASE("exponential fit recovers an exact exponential")
{
    const double a = 2.5;
    const double b = 7.0;
    std::vector<DemandCurvePoint> curve;
    for (int i = 0; i < 30; ++i) {
        const double p = 0.5 + 0.03 * i;
        curve.push_back({p - 0.015, p + 0.015, p, 1000, 0, std::exp(a - b * p)});
    }
    const auto fit = fit_exponential_demand_curve(curve);
    CHECK(std::abs(fit.slope + b) < 1e-12);
    CHECK(std::abs(fit.intercept - a) < 1e-12);
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.bins_used == 30);
    CHECK(curve_span_decades(curve, 0.5, 1.37) == doctest::Approx(b * 0.87 / std::log(10.0)));
}

TEST_CASE("flat curve fits a zero slope")
{
    std::vector<DemandCurvePoint> curve;
    for (int i = 0; i < 10; ++i) {
        curve.push_back({0.1 * i, 0.1 * i + 0.1, 0.1 * i + 0.05, 500, 0, 4.0});
    }
    const auto fit = fit_exponential_demand_curve(curve);
    CHECK(std::abs(fit.slope) < 1e-12);
    CHECK(fit.intercept == doctest::Approx(std::log(4.0)));
}

TEST_CASE("fit needs enough well-sampled bins")
{
    std::vector<DemandCurvePoint> curve;
    for (int i = 0; i < 10; ++i) {
        // only four bins pass the step guard, one more has zero mean
        const std::int64_t steps = i < 4 ? 200 : 50;
        curve.push_back({0.1 * i, 0.1 * i + 0.1, 0.1 * i + 0.05, steps, 0, i == 9 ? 0.0 : 1.0 + i});
    }
    curve[9].steps = 1000;
    CHECK_THROWS_AS(fit_exponential_demand_curve(curve), undefined_statistic);
}

TEST_CASE("accumulator memory does not grow with steps")
{
    StatsAccumulator acc(small_config(), 50);
    acc.begin(init_state(50, 1, EngineKind::fast));
    const auto rows = acc.matrix_rows();
    const auto cols = acc.matrix_cols();
    for (int i = 0; i < 100000; ++i) {
        acc.record_step(step_of(0.01 * (i % 200), i % 51));
    }
    CHECK(acc.matrix_rows() == rows);
    CHECK(acc.matrix_cols() == cols);
    CHECK(acc.demand_counts().size() == 51);
    CHECK(check_conservation(acc).empty());
}

TEST_CASE("histogram slots are consistent with their edges")
{
    Histogram lin(LinearBins{-1.0, 2.0, 300});
    Rng rng(8);
    for (int i = 0; i < 100000; ++i) {
        const double x = rng.uniform(-1.5, 2.5);
        const auto s = lin.slot(x);
        if (x < -1.0) {
            REQUIRE(s == 0);
        } else if (x >= 2.0) {
            REQUIRE(s == 301);
        } else {
            REQUIRE(s >= 1);
            REQUIRE(s <= 300);
            REQUIRE(lin.lower_edge(s - 1) <= x);
            REQUIRE(x < lin.upper_edge(s - 1));
        }
    }
    for (std::size_t b = 0; b < lin.bins(); ++b) {
        REQUIRE(lin.slot(lin.lower_edge(b)) == b + 1);
    }
    Histogram log(LogBins{10, 4, 0.01});
    CHECK(log.slot(0.0) == 0);
    CHECK(log.slot(-3.0) == 0);
    CHECK(log.slot(0.01) == 1);
    CHECK(log.slot(100.0) == 41);
    for (std::size_t b = 0; b < log.bins(); ++b) {
        REQUIRE(log.slot(log.lower_edge(b)) == b + 1);
        REQUIRE(log.center(b) == doctest::Approx(std::sqrt(log.lower_edge(b) * log.upper_edge(b))));
    }
    CHECK_THROWS_AS(Histogram(LinearBins{1.0, 1.0, 5}), config_error);
    CHECK_THROWS_AS(Histogram(LogBins{0, 3, 1.0}), config_error);
}
