#pragma once

#include "powermarket/market.hpp"
#include "powermarket/prices.hpp"
#include "powermarket/run_config.hpp"
#include "powermarket/stats.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace powermarket {

using StepObserver = std::function<void(const StepResult&)>;

/// Runs `config.warmup` unrecorded steps, then `config.t_steps` steps fed to
/// `sink` (and to `observer`, if set). The market draws from the market
/// sub-stream of config.seed; `source` supplies P(t).
SummaryStats run_simulation(const RunConfig& config, PriceSource& source, StatsAccumulator& sink,
                            const StepObserver& observer = {});

/// Builds the price source and accumulator from config.seed and runs.
struct RunResult {
    StatsAccumulator stats;
    SummaryStats summary;
};
RunResult simulate(const RunConfig& config, const StepObserver& observer = {});

struct EquivalenceSeeds {
    std::uint64_t price = 1;
    std::uint64_t reference_market = 2;
    std::uint64_t fast_market = 3;
};

struct Comparison {
    std::string statistic;
    double reference = 0.0;
    double fast = 0.0;
    /// |reference - fast| for mean-type statistics, chi-square for histograms.
    double distance = 0.0;
    /// Pass threshold on `distance`: 3 SE, or the chi-square critical value.
    double bound = 0.0;
    bool passed = false;
    /// Set for the histogram test only.
    std::optional<double> p_value;
    std::size_t bins_used = 0;
};

struct EquivalenceReport {
    bool passed = true;
    std::vector<Comparison> comparisons;
    std::string failures() const;
};

struct EquivalenceOptions {
    std::int64_t warmup = 1000;
    int batches = 100;
    double significance = 1e-3;
    double min_expected = 20.0;
    /// Defaults to the standard intervals of the price process.
    std::vector<PriceInterval> intervals;
};

/// Runs both engines on the same price sequence and compares mean demand
/// (batch-means SE), the log-binned demand histogram (two-sample chi-square)
/// and the interval demand shares (ratio-estimator SE).
EquivalenceReport equivalence_check(std::int64_t n_agents, std::int64_t t_steps, double f,
                                    const PriceSourceSpec& spec, const EquivalenceSeeds& seeds,
                                    const EquivalenceOptions& options = {});

}  // namespace powermarket
