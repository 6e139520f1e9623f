#include "powermarket/market.hpp"

#include "powermarket/errors.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <utility>

namespace powermarket {

std::string_view to_string(EngineKind kind) noexcept
{
    return kind == EngineKind::fast ? "fast" : "reference";
}

EngineKind engine_kind_from_string(std::string_view name)
{
    if (name == "fast") {
        return EngineKind::fast;
    }
    if (name == "reference") {
        return EngineKind::reference;
    }
    throw config_error("engine must be 'fast' or 'reference', got '" + std::string(name) + "'");
}

namespace {

std::vector<double> initial_thresholds(std::size_t n, Rng& rng)
{
    std::vector<double> v(n);
    for (auto& p : v) {
        p = rng.uniform();
    }
    return v;
}

void check_f(double f)
{
    if (!(f >= 0.0 && f <= 1.0)) {
        throw config_error("f must lie in [0, 1]");
    }
}

}  // namespace

ReferenceMarket::ReferenceMarket(std::size_t n_agents, std::uint64_t seed) : rng_(seed)
{
    thresholds_ = initial_thresholds(n_agents, rng_);
}

ReferenceMarket::ReferenceMarket(std::vector<double> thresholds, std::uint64_t seed)
    : thresholds_(std::move(thresholds)), rng_(seed)
{
    for (double p : thresholds_) {
        if (!(p >= 0.0 && p < 1.0)) {
            throw config_error("thresholds must lie in [0, 1)");
        }
    }
}

std::size_t ReferenceMarket::demand_count(double price) const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(thresholds_.begin(), thresholds_.end(), [price](double p) { return price <= p; }));
}

void ReferenceMarket::step(double price, double f, StepResult& result)
{
    const BernoulliGate raise(f);
    std::int64_t demand = 0;
    std::int64_t increments = 0;
    for (double& p : thresholds_) {
        if (price <= p) {
            const double next = rng_.uniform(0.0, p);
            result.changes.push_back({p, next});
            p = next;
            ++demand;
        } else if (raise(rng_)) {
            const double next = rng_.uniform(p, 1.0);
            result.changes.push_back({p, next});
            p = next;
            ++increments;
        }
    }
    result.demand = demand;
    result.increments = increments;
}

FastMarket::FastMarket(std::size_t n_agents, std::uint64_t seed) : rng_(seed)
{
    set_ = ThresholdMultiset(initial_thresholds(n_agents, rng_));
}

FastMarket::FastMarket(const std::vector<double>& thresholds, std::uint64_t seed) : rng_(seed)
{
    for (double p : thresholds) {
        if (!(p >= 0.0 && p < 1.0)) {
            throw config_error("thresholds must lie in [0, 1)");
        }
    }
    set_ = ThresholdMultiset(thresholds);
}

void FastMarket::step(double price, double f, StepResult& result)
{
    consumed_.clear();
    raised_.clear();
    const std::size_t demand = set_.extract_at_least(price, consumed_);
    const std::size_t idle = set_.size();

    std::size_t k = 0;
    if (f >= 1.0) {
        k = idle;
    } else if (f > 0.0 && idle > 0) {
        std::binomial_distribution<std::int64_t> binomial(static_cast<std::int64_t>(idle), f);
        k = static_cast<std::size_t>(binomial(rng_));
    }

    set_.sample_without_replacement(k, rng_, raised_);

    result.changes.reserve(result.changes.size() + consumed_.size() + raised_.size());
    Rng rng = rng_;
    for (double p : consumed_) {
        const double next = rng.uniform(0.0, p);
        set_.insert(next);
        result.changes.push_back({p, next});
    }
    for (double p : raised_) {
        const double next = rng.uniform(p, 1.0);
        set_.insert(next);
        result.changes.push_back({p, next});
    }
    rng_ = rng;
    result.demand = static_cast<std::int64_t>(demand);
    result.increments = static_cast<std::int64_t>(k);
}

MarketState::MarketState(std::size_t n_agents, std::uint64_t seed, EngineKind kind)
    : n_agents_(n_agents),
      kind_(kind),
      engine_(kind == EngineKind::fast
                  ? std::variant<ReferenceMarket, FastMarket>(std::in_place_type<FastMarket>, n_agents, seed)
                  : std::variant<ReferenceMarket, FastMarket>(std::in_place_type<ReferenceMarket>, n_agents, seed))
{
    if (n_agents == 0) {
        throw config_error("n_agents must be >= 1");
    }
}

MarketState::MarketState(Engine engine, std::size_t n_agents, EngineKind kind)
    : n_agents_(n_agents), kind_(kind), engine_(std::move(engine))
{
}

MarketState MarketState::from_thresholds(const std::vector<double>& thresholds, std::uint64_t seed, EngineKind kind)
{
    if (thresholds.empty()) {
        throw config_error("n_agents must be >= 1");
    }
    Engine engine = kind == EngineKind::fast ? Engine(std::in_place_type<FastMarket>, thresholds, seed)
                                             : Engine(std::in_place_type<ReferenceMarket>, thresholds, seed);
    return MarketState(std::move(engine), thresholds.size(), kind);
}

std::size_t MarketState::demand_count(double price) const noexcept
{
    return std::visit([price](const auto& m) { return m.demand_count(price); }, engine_);
}

std::vector<double> MarketState::sorted_thresholds() const
{
    std::vector<double> out;
    out.reserve(n_agents_);
    for_each_threshold([&](double v) { out.push_back(v); });
    std::sort(out.begin(), out.end());
    return out;
}

void MarketState::apply_step(double price, double f, StepResult& result)
{
    check_f(f);
    result.t = t_;
    result.price = price;
    result.changes.clear();
    std::visit([&](auto& m) { m.step(price, f, result); }, engine_);
    ++t_;
}

MarketState init_state(std::size_t n_agents, std::uint64_t seed, EngineKind kind)
{
    if (n_agents == 0) {
        throw config_error("n_agents must be >= 1");
    }
    return MarketState(n_agents, seed, kind);
}

StepResult apply_step(MarketState& state, double price, double f)
{
    StepResult result;
    state.apply_step(price, f, result);
    return result;
}

}  // namespace powermarket
