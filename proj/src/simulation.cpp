#include "powermarket/simulation.hpp"

#include "powermarket/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

namespace powermarket {

SummaryStats run_simulation(const RunConfig& config, PriceSource& source, StatsAccumulator& sink,
                            const StepObserver& observer)
{
    validate(config);
    MarketState state(static_cast<std::size_t>(config.n_agents), derive_seed(config.seed, Stream::market),
                      config.engine);
    StepResult step;
    for (std::int64_t t = 0; t < config.warmup; ++t) {
        state.apply_step(source.next(), config.f, step);
    }
    sink.begin(state);
    for (std::int64_t t = 0; t < config.t_steps; ++t) {
        state.apply_step(source.next(), config.f, step);
        sink.record_step(step);
        if (observer) {
            observer(step);
        }
    }
    return summarize(sink);
}

RunResult simulate(const RunConfig& config, const StepObserver& observer)
{
    validate(config);
    PriceSource source(config.price, derive_seed(config.seed, Stream::price));
    StatsAccumulator stats(resolve_stats_config(config), static_cast<std::size_t>(config.n_agents));
    SummaryStats summary = run_simulation(config, source, stats, observer);
    return {std::move(stats), std::move(summary)};
}

std::string EquivalenceReport::failures() const
{
    std::ostringstream out;
    for (const auto& c : comparisons) {
        if (!c.passed) {
            out << c.statistic << ": reference=" << c.reference << " fast=" << c.fast << " distance=" << c.distance
                << " bound=" << c.bound << '\n';
        }
    }
    return out.str();
}

namespace {

/// Per-engine series summary gathered during an equivalence run.
struct Trace {
    std::vector<double> batch_demand;
    std::vector<std::vector<double>> batch_interval_load;  // [interval][batch]
    std::vector<std::int64_t> value_counts;
    std::int64_t sum_demand = 0;
    std::vector<std::int64_t> interval_load;
};

Trace trace_engine(EngineKind kind, std::int64_t n_agents, std::int64_t t_steps, double f,
                   const PriceSourceSpec& spec, std::uint64_t price_seed, std::uint64_t market_seed,
                   const EquivalenceOptions& options, const std::vector<PriceInterval>& intervals)
{
    PriceSource source(spec, price_seed);
    MarketState state(static_cast<std::size_t>(n_agents), market_seed, kind);
    StepResult step;
    for (std::int64_t t = 0; t < options.warmup; ++t) {
        state.apply_step(source.next(), f, step);
    }
    const auto batches = static_cast<std::size_t>(options.batches);
    Trace trace;
    trace.batch_demand.assign(batches, 0.0);
    trace.batch_interval_load.assign(intervals.size(), std::vector<double>(batches, 0.0));
    trace.value_counts.assign(static_cast<std::size_t>(n_agents) + 1, 0);
    trace.interval_load.assign(intervals.size(), 0);
    for (std::int64_t t = 0; t < t_steps; ++t) {
        const double price = source.next();
        state.apply_step(price, f, step);
        const auto b = static_cast<std::size_t>(t * options.batches / t_steps);
        trace.batch_demand[b] += static_cast<double>(step.demand);
        trace.sum_demand += step.demand;
        ++trace.value_counts[static_cast<std::size_t>(step.demand)];
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            if (intervals[i].contains(price)) {
                trace.batch_interval_load[i][b] += static_cast<double>(step.demand);
                trace.interval_load[i] += step.demand;
            }
        }
    }
    return trace;
}

// standard error of sum(x) / sum(y) from per-batch sums
double ratio_standard_error(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    const double sx = std::accumulate(x.begin(), x.end(), 0.0);
    const double sy = std::accumulate(y.begin(), y.end(), 0.0);
    if (sy == 0.0 || n < 2) {
        return 0.0;
    }
    const double r = sx / sy;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = x[i] - r * y[i];
        ss += e * e;
    }
    const double mean_y = sy / n;
    return std::sqrt(ss / (n * (n - 1.0))) / mean_y;
}

// standard error of the mean step demand from batch sums
double mean_standard_error(const std::vector<double>& batch_sums, double steps_per_batch)
{
    const double n = static_cast<double>(batch_sums.size());
    const double mean = std::accumulate(batch_sums.begin(), batch_sums.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : batch_sums) {
        ss += (s - mean) * (s - mean);
    }
    return std::sqrt(ss / (n - 1.0) / n) / steps_per_batch;
}

std::vector<std::int64_t> log_binned(const std::vector<std::int64_t>& value_counts)
{
    // bin 0 holds D = 0; bins above follow 10 per decade of absolute demand
    Histogram h(LogBins{10, 12, 1.0});
    std::vector<std::int64_t> out(h.bins() + 2, 0);
    out[0] = value_counts[0];
    for (std::size_t d = 1; d < value_counts.size(); ++d) {
        if (value_counts[d] > 0) {
            out[h.slot(static_cast<double>(d))] += value_counts[d];
        }
    }
    return out;
}

Comparison within_se(std::string name, double a, double b, double se)
{
    Comparison c;
    c.statistic = std::move(name);
    c.reference = a;
    c.fast = b;
    c.distance = std::abs(a - b);
    c.bound = 3.0 * se;
    c.passed = c.distance <= c.bound;
    return c;
}

}  // namespace

EquivalenceReport equivalence_check(std::int64_t n_agents, std::int64_t t_steps, double f,
                                    const PriceSourceSpec& spec, const EquivalenceSeeds& seeds,
                                    const EquivalenceOptions& options)
{
    if (n_agents < 1 || t_steps < options.batches || options.batches < 2) {
        throw config_error("equivalence_check: need n_agents >= 1 and t_steps >= batches >= 2");
    }
    const auto intervals = options.intervals.empty() ? default_intervals(spec) : options.intervals;
    const Trace ref = trace_engine(EngineKind::reference, n_agents, t_steps, f, spec, seeds.price,
                                   seeds.reference_market, options, intervals);
    const Trace fast =
        trace_engine(EngineKind::fast, n_agents, t_steps, f, spec, seeds.price, seeds.fast_market, options, intervals);

    EquivalenceReport report;
    const double steps = static_cast<double>(t_steps);
    const double per_batch = steps / options.batches;

    const double se_ref = mean_standard_error(ref.batch_demand, per_batch);
    const double se_fast = mean_standard_error(fast.batch_demand, per_batch);
    report.comparisons.push_back(within_se("mean demand", static_cast<double>(ref.sum_demand) / steps,
                                           static_cast<double>(fast.sum_demand) / steps,
                                           std::hypot(se_ref, se_fast)));

    // two-sample chi-square over bins with enough expected mass
    const auto hr = log_binned(ref.value_counts);
    const auto hf = log_binned(fast.value_counts);
    std::vector<std::size_t> used;
    double total_r = 0.0;
    double total_f = 0.0;
    for (std::size_t i = 0; i < hr.size(); ++i) {
        if (0.5 * static_cast<double>(hr[i] + hf[i]) >= options.min_expected) {
            used.push_back(i);
            total_r += static_cast<double>(hr[i]);
            total_f += static_cast<double>(hf[i]);
        }
    }
    Comparison chi;
    chi.statistic = "demand histogram chi-square";
    chi.reference = total_r;
    chi.fast = total_f;
    chi.bins_used = used.size();
    if (used.size() < 2) {
        chi.passed = true;
        chi.p_value = 1.0;
    } else {
        const double kr = std::sqrt(total_f / total_r);
        const double kf = std::sqrt(total_r / total_f);
        double stat = 0.0;
        for (std::size_t i : used) {
            const double a = static_cast<double>(hr[i]);
            const double b = static_cast<double>(hf[i]);
            stat += (kr * a - kf * b) * (kr * a - kf * b) / (a + b);
        }
        const boost::math::chi_squared dist(static_cast<double>(used.size() - 1));
        chi.distance = stat;
        chi.bound = boost::math::quantile(boost::math::complement(dist, options.significance));
        chi.p_value = boost::math::cdf(boost::math::complement(dist, stat));
        chi.passed = *chi.p_value >= options.significance;
    }
    report.comparisons.push_back(chi);

    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto share = [&](const Trace& t) {
            return t.sum_demand > 0 ? static_cast<double>(t.interval_load[i]) / static_cast<double>(t.sum_demand)
                                    : 0.0;
        };
        const double se = std::hypot(ratio_standard_error(ref.batch_interval_load[i], ref.batch_demand),
                                     ratio_standard_error(fast.batch_interval_load[i], fast.batch_demand));
        std::ostringstream name;
        name << "demand share [" << intervals[i].lo << ", " << intervals[i].hi << ")";
        report.comparisons.push_back(within_se(name.str(), share(ref), share(fast), se));
    }

    for (const auto& c : report.comparisons) {
        report.passed = report.passed && c.passed;
    }
    return report;
}

}  // namespace powermarket
