#pragma once

#include "powermarket/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace powermarket {

namespace price {

struct Constant {
    double value = 1.0;
};

struct IidGaussian {
    double mean = 1.0;
    double sigma = 1.0 / 6.0;
};

/// Discrete Langevin / AR(1) process
///   P(t+1) = P(t) - v0 (P(t) - mean) + sigma0 xi(t).
struct Langevin {
    double mean = 1.0;
    double v0 = 0.2;
    double sigma0 = 0.1;
};

struct Rescale {
    double target_mean = 1.0;
    std::optional<double> target_sd;
};

struct FileSeries {
    std::string path;
    int column = 0;
    std::optional<Rescale> rescale;
    std::optional<int> detrend_window;
};

}  // namespace price

using PriceSourceSpec = std::variant<price::Constant, price::IidGaussian, price::Langevin, price::FileSeries>;

/// Throws config_error if the parameters violate the process invariants.
void validate(const PriceSourceSpec& spec);

/// Standard deviation of the stationary price distribution. Throws
/// config_error for file series, whose sd must be measured.
double stationary_sd(const PriceSourceSpec& spec);

/// Mean of the stationary price distribution (target mean for rescaled files,
/// empirical mean otherwise).
double stationary_mean(const PriceSourceSpec& spec);

/// Reads column `column` of a delimited text file (comma or whitespace,
/// `#` comment lines), optionally divides by a centered moving average over
/// `detrend_window` samples and applies an affine rescale.
std::vector<double> load_file_series(const std::string& path, int column,
                                     const std::optional<price::Rescale>& rescale,
                                     std::optional<int> detrend_window);

/// Divides every value by the mean of the centered window around it; windows
/// are truncated at the ends.
std::vector<double> detrend_moving_average(const std::vector<double>& values, int window);

/// Multiplicative rescale to `target_mean`, or affine to (mean, sd) when a
/// target sd is given.
std::vector<double> rescale_series(const std::vector<double>& values, const price::Rescale& rescale);

/// Stateful price generator. Emission k is P(k); file series wrap cyclically.
class PriceSource {
public:
    PriceSource(PriceSourceSpec spec, std::uint64_t seed);

    double next();

    /// Overrides the current Langevin level (the next emission).
    void set_level(double level) { current_ = level; }

    const PriceSourceSpec& spec() const noexcept { return spec_; }

    /// Loaded file series (empty for parametric sources).
    const std::vector<double>& series() const noexcept { return *series_; }

private:
    PriceSourceSpec spec_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    double current_ = 0.0;
    std::shared_ptr<const std::vector<double>> series_;
    std::size_t cursor_ = 0;
};

PriceSource create_source(const PriceSourceSpec& spec, std::uint64_t seed);

}  // namespace powermarket
