#include "powermarket/errors.hpp"
#include "powermarket/market.hpp"
#include "powermarket/prices.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace powermarket;

namespace {

const EngineKind kinds[] = {EngineKind::reference, EngineKind::fast};

double mean_threshold(const MarketState& state)
{
    double sum = 0.0;
    state.for_each_threshold([&](double p) { sum += p; });
    return sum / static_cast<double>(state.n_agents());
}

}  // namespace

TEST_CASE("initial thresholds are uniform on [0, 1)")
{
    for (auto kind : kinds) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto state = init_state(100000, seed, kind);
            const double m = mean_threshold(state);
            CHECK(m >= 0.497);
            CHECK(m <= 0.503);
            const auto sorted = state.sorted_thresholds();
            CHECK(sorted.front() >= 0.0);
            CHECK(sorted.back() < 1.0);
        }
    }
}

TEST_CASE("initialization is deterministic and engine independent")
{
    const auto a = init_state(1000, 5, EngineKind::reference).sorted_thresholds();
    const auto b = init_state(1000, 5, EngineKind::reference).sorted_thresholds();
    const auto c = init_state(1000, 5, EngineKind::fast).sorted_thresholds();
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a != init_state(1000, 6, EngineKind::fast).sorted_thresholds());

    const auto one = init_state(1, 9, EngineKind::fast).sorted_thresholds();
    REQUIRE(one.size() == 1);
    CHECK(one[0] >= 0.0);
    CHECK(one[0] < 1.0);
}

TEST_CASE("zero agents is a configuration error")
{
    CHECK_THROWS_AS(init_state(0, 1), config_error);
    CHECK_THROWS_AS(MarketState::from_thresholds({}, 1, EngineKind::fast), config_error);
    CHECK_THROWS_AS(MarketState::from_thresholds({0.5, 1.0}, 1, EngineKind::fast), config_error);
}

TEST_CASE("demand count is inclusive")
{
    for (auto kind : kinds) {
        const auto state = MarketState::from_thresholds({0.2, 0.5, 0.9}, 1, kind);
        CHECK(demand_count(state, 0.5) == 2);
        CHECK(demand_count(state, 0.2) == 3);
        CHECK(demand_count(state, 0.9) == 1);
        CHECK(demand_count(state, std::nextafter(0.9, 1.0)) == 0);
        CHECK(demand_count(state, 1.0) == 0);
        CHECK(demand_count(state, 0.0) == 3);
        CHECK(demand_count(state, -2.0) == 3);

        const auto big = init_state(5000, 3, kind);
        CHECK(demand_count(big, 1.0) == 0);
        CHECK(demand_count(big, 0.0) == 5000);
    }
}

TEST_CASE("a price of one with f = 0 changes nothing")
{
    for (auto kind : kinds) {
        auto state = init_state(2000, 4, kind);
        const auto before = state.sorted_thresholds();
        const auto r = apply_step(state, 1.0, 0.0);
        CHECK(r.demand == 0);
        CHECK(r.increments == 0);
        CHECK(r.changes.empty());
        CHECK(state.sorted_thresholds() == before);
        CHECK(state.time() == 1);
    }
}

TEST_CASE("a non-positive price makes everyone consume")
{
    for (auto kind : kinds) {
        auto state = MarketState::from_thresholds({0.0, 0.3, 0.6, 0.99}, 2, kind);
        const auto r = apply_step(state, 0.0, 0.0);
        CHECK(r.demand == 4);
        REQUIRE(r.changes.size() == 4);
        for (const auto& c : r.changes) {
            if (c.old_value == 0.0) {
                CHECK(c.new_value == 0.0);  // the degenerate draw [0, 0)
            } else {
                CHECK(c.new_value < c.old_value);
            }
        }
        const auto r2 = apply_step(state, -0.5, 0.0);
        CHECK(r2.demand == 4);
    }
}

TEST_CASE("consumers redraw uniformly below their threshold")
{
    for (auto kind : kinds) {
        auto state = MarketState::from_thresholds(std::vector<double>(10000, 0.5), 3, kind);
        const auto r = apply_step(state, 0.4, 0.0);
        CHECK(r.demand == 10000);
        const double m = mean_threshold(state);
        CHECK(m >= 0.243);
        CHECK(m <= 0.257);
        const auto sorted = state.sorted_thresholds();
        CHECK(sorted.back() < 0.5);
    }
}

TEST_CASE("f = 1 raises every idle agent")
{
    for (auto kind : kinds) {
        auto state = init_state(3000, 6, kind);
        const auto r = apply_step(state, 2.0, 1.0);
        CHECK(r.demand == 0);
        CHECK(r.increments == 3000);
        CHECK(r.changes.size() == 3000);
        for (const auto& c : r.changes) {
            CHECK(c.new_value >= c.old_value);
            CHECK(c.new_value < 1.0);
        }
    }
}

TEST_CASE("increments are redrawn above the old threshold")
{
    for (auto kind : kinds) {
        auto state = MarketState::from_thresholds(std::vector<double>(20000, 0.6), 8, kind);
        const auto r = apply_step(state, 0.7, 1.0);
        CHECK(r.demand == 0);
        double sum = 0.0;
        for (const auto& c : r.changes) {
            sum += c.new_value;
        }
        const double m = sum / static_cast<double>(r.changes.size());
        CHECK(std::abs(m - 0.8) < 3.0 * 0.4 / std::sqrt(12.0 * 20000.0));
    }
}

TEST_CASE("f outside [0, 1] is rejected")
{
    auto state = init_state(10, 1);
    CHECK_THROWS_AS(apply_step(state, 0.5, -0.1), config_error);
    CHECK_THROWS_AS(apply_step(state, 0.5, 1.5), config_error);
}

TEST_CASE("the increment count is binomial in the idle population")
{
    for (auto kind : kinds) {
        const std::size_t n = 2000;
        const double f = 0.05;
        double sum = 0.0;
        double sum2 = 0.0;
        const int steps = 2000;
        auto state = init_state(n, 12, kind);
        StepResult r;
        for (int t = 0; t < steps; ++t) {
            state.apply_step(1.0, f, r);  // nobody consumes at P = 1
            sum += static_cast<double>(r.increments);
            sum2 += static_cast<double>(r.increments * r.increments);
        }
        const double mean = sum / steps;
        const double var = sum2 / steps - mean * mean;
        CHECK(std::abs(mean - n * f) < 4.0 * std::sqrt(n * f * (1 - f) / steps));
        CHECK(var == doctest::Approx(n * f * (1 - f)).epsilon(0.1));
    }
}

TEST_CASE("step invariants hold along random trajectories")
{
    for (auto kind : kinds) {
        for (double f : {0.0, 1e-3, 0.05, 1.0}) {
            auto state = init_state(500, 21, kind);
            auto prices = create_source(price::IidGaussian{0.6, 0.3}, 22);
            StepResult r;
            for (int t = 0; t < 300; ++t) {
                const double p = prices.next();
                const auto before = state.sorted_thresholds();
                const auto expected_demand = demand_count(state, p);
                state.apply_step(p, f, r);

                REQUIRE(r.t == t);
                REQUIRE(r.price == p);
                REQUIRE(r.demand == static_cast<std::int64_t>(expected_demand));
                REQUIRE(r.increments >= 0);
                REQUIRE(r.increments <= 500 - r.demand);
                REQUIRE(r.changes.size() == static_cast<std::size_t>(r.demand + r.increments));
                if (f == 0.0) {
                    REQUIRE(r.increments == 0);
                }
                if (f == 1.0) {
                    REQUIRE(r.increments == 500 - r.demand);
                }

                std::int64_t consumed = 0;
                auto after = before;
                for (const auto& c : r.changes) {
                    const bool consumer = p <= c.old_value;
                    consumed += consumer;
                    if (consumer) {
                        REQUIRE((c.new_value < c.old_value || c.old_value == 0.0));
                    } else {
                        REQUIRE(c.new_value >= c.old_value);
                    }
                    REQUIRE(c.new_value >= 0.0);
                    REQUIRE(c.new_value < 1.0);
                    auto it = std::find(after.begin(), after.end(), c.old_value);
                    REQUIRE(it != after.end());
                    *it = c.new_value;
                }
                REQUIRE(consumed == r.demand);
                std::sort(after.begin(), after.end());
                REQUIRE(state.sorted_thresholds() == after);
                REQUIRE(state.sorted_thresholds().size() == 500);
            }
        }
    }
}

TEST_CASE("same seed gives the same trajectory")
{
    for (auto kind : kinds) {
        auto a = init_state(1000, 31, kind);
        auto b = init_state(1000, 31, kind);
        auto prices = create_source(price::Langevin{0.6, 0.2, 0.1}, 32);
        StepResult ra;
        StepResult rb;
        for (int t = 0; t < 500; ++t) {
            const double p = prices.next();
            a.apply_step(p, 0.01, ra);
            b.apply_step(p, 0.01, rb);
            REQUIRE(ra.demand == rb.demand);
            REQUIRE(ra.increments == rb.increments);
            REQUIRE(ra.changes.size() == rb.changes.size());
            for (std::size_t i = 0; i < ra.changes.size(); ++i) {
                REQUIRE(ra.changes[i].old_value == rb.changes[i].old_value);
                REQUIRE(ra.changes[i].new_value == rb.changes[i].new_value);
            }
        }
        CHECK(a.sorted_thresholds() == b.sorted_thresholds());
    }
}

TEST_CASE("engine names round-trip")
{
    CHECK(engine_kind_from_string("fast") == EngineKind::fast);
    CHECK(engine_kind_from_string("reference") == EngineKind::reference);
    CHECK(to_string(EngineKind::fast) == "fast");
    CHECK_THROWS_AS(engine_kind_from_string("turbo"), config_error);
}
