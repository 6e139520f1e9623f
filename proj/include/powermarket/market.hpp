#pragma once

#include "powermarket/rng.hpp"
#include "powermarket/threshold_multiset.hpp"

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

namespace powermarket {

enum class EngineKind { reference, fast };

std::string_view to_string(EngineKind kind) noexcept;
EngineKind engine_kind_from_string(std::string_view name);

struct ThresholdChange {
    double old_value;
    double new_value;
};

/// Outcome of one market tick.
struct StepResult {
    std::int64_t t = 0;
    double price = 0.0;
    std::int64_t demand = 0;
    std::int64_t increments = 0;
    std::vector<ThresholdChange> changes;
};

/// Per-agent threshold array, updated by a full O(N) sweep each step with an
/// explicit Bernoulli draw per idle agent.
class ReferenceMarket {
public:
    ReferenceMarket(std::size_t n_agents, std::uint64_t seed);
    ReferenceMarket(std::vector<double> thresholds, std::uint64_t seed);

    std::size_t size() const noexcept { return thresholds_.size(); }
    std::size_t demand_count(double price) const noexcept;
    void step(double price, double f, StepResult& result);
    const std::vector<double>& thresholds() const noexcept { return thresholds_; }

    template <class Fn>
    void for_each(Fn&& fn) const
    {
        for (double v : thresholds_) {
            fn(v);
        }
    }

private:
    std::vector<double> thresholds_;
    Rng rng_;
};

/// Agent-anonymous engine on a ThresholdMultiset. Per step it touches only
/// the D(t) consumers and the k ~ Binomial(N - D(t), f) incremented agents,
/// picked uniformly without replacement from the idle slots.
class FastMarket {
public:
    FastMarket(std::size_t n_agents, std::uint64_t seed);
    FastMarket(const std::vector<double>& thresholds, std::uint64_t seed);

    std::size_t size() const noexcept { return set_.size(); }
    std::size_t demand_count(double price) const noexcept { return set_.count_at_least(price); }
    void step(double price, double f, StepResult& result);
    const ThresholdMultiset& thresholds() const noexcept { return set_; }

    template <class Fn>
    void for_each(Fn&& fn) const
    {
        set_.for_each(std::forward<Fn>(fn));
    }

private:
    ThresholdMultiset set_;
    Rng rng_;
    std::vector<double> consumed_;
    std::vector<double> raised_;
};

/// The full dynamical state of the market: N thresholds in [0, 1), the
/// market random stream and the clock.
class MarketState {
public:
    MarketState(std::size_t n_agents, std::uint64_t seed, EngineKind kind);

    /// State with the given thresholds (each in [0, 1)) instead of random ones.
    static MarketState from_thresholds(const std::vector<double>& thresholds, std::uint64_t seed, EngineKind kind);

    std::size_t n_agents() const noexcept { return n_agents_; }
    std::int64_t time() const noexcept { return t_; }
    EngineKind kind() const noexcept { return kind_; }

    /// Number of agents with price <= threshold.
    std::size_t demand_count(double price) const noexcept;

    /// Thresholds in ascending order.
    std::vector<double> sorted_thresholds() const;

    template <class Fn>
    void for_each_threshold(Fn&& fn) const
    {
        std::visit([&](const auto& m) { m.for_each(fn); }, engine_);
    }

    /// Advances one tick. Consumers (price <= p) redraw from [0, p); each idle
    /// agent independently redraws from [p, 1) with probability f.
    void apply_step(double price, double f, StepResult& result);

private:
    using Engine = std::variant<ReferenceMarket, FastMarket>;
    MarketState(Engine engine, std::size_t n_agents, EngineKind kind);

    std::size_t n_agents_;
    EngineKind kind_;
    std::int64_t t_ = 0;
    std::variant<ReferenceMarket, FastMarket> engine_;
};

MarketState init_state(std::size_t n_agents, std::uint64_t seed, EngineKind kind = EngineKind::fast);

inline std::size_t demand_count(const MarketState& state, double price) { return state.demand_count(price); }

StepResult apply_step(MarketState& state, double price, double f);

}  // namespace powermarket
