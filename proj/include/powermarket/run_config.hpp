#pragma once

#include "powermarket/histogram.hpp"
#include "powermarket/market.hpp"
#include "powermarket/prices.hpp"
#include "powermarket/stats.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace powermarket {

inline constexpr const char* version_string = "1.0.0";

struct BinsConfig {
    HistogramSpec threshold = LinearBins{0.0, 1.0, 100};
    int price_bins = 150;
    /// Price range; defaults to mean +- 5 sd of the price process.
    std::optional<double> price_lo;
    std::optional<double> price_hi;
    LogBins demand{};
};

struct OutputConfig {
    std::string dir = "out";
    std::int64_t timeseries_stride = 0;
};

struct RunConfig {
    std::int64_t n_agents = 100000;
    std::int64_t t_steps = 1000000;
    std::int64_t warmup = 1000;
    double f = 1e-3;
    PriceSourceSpec price = price::Langevin{};
    std::uint64_t seed = 1;
    EngineKind engine = EngineKind::fast;
    BinsConfig bins;
    /// Price intervals for demand shares; defaults to (-inf, m - 3 sd),
    /// [m - sd, m) and [m - sd, m + sd).
    std::optional<std::vector<PriceInterval>> intervals;
    OutputConfig outputs;
};

struct SweepConfig {
    RunConfig base;
    std::string axis;  ///< f, sigma, sigma0, v0 or n_agents
    std::vector<double> values;
    int parallelism = 1;
};

/// Flat `key = value` settings, later entries overriding earlier ones.
using Settings = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment. Throws config_error.
Settings read_settings_file(const std::string& path);

/// Builds and validates a RunConfig. Unknown keys, malformed values and
/// invariant violations throw config_error naming the key.
RunConfig parse_config(const Settings& settings);
RunConfig parse_config(const std::optional<std::string>& path, const Settings& overrides);

SweepConfig parse_sweep_config(const Settings& settings);

void validate(const RunConfig& config);

/// Mean and sd of the price process; file series use the loaded series.
std::pair<double, double> price_moments(const PriceSourceSpec& spec);

/// (-inf, m - 3 sd), [m - sd, m) and [m - sd, m + sd) for the process moments.
std::vector<PriceInterval> default_intervals(const PriceSourceSpec& spec);

/// Fully resolved statistics layout (defaults filled in).
StatsConfig resolve_stats_config(const RunConfig& config);

/// Resolved configuration echo. The output directory is left out so that
/// identical runs written to different places stay byte-identical.
nlohmann::ordered_json to_json(const RunConfig& config);

/// FNV-1a of the canonical config echo, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Applies one sweep-axis value to a copy of `base`.
RunConfig apply_axis(const RunConfig& base, const std::string& axis, double value);

/// Seed of sweep run `index`, derived from the master seed.
std::uint64_t sweep_run_seed(std::uint64_t master, std::size_t index);

}  // namespace powermarket
