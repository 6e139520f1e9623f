#include "powermarket/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace powermarket;

TEST_CASE("same seed replays the same stream")
{
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a() == b());
    }
    Rng c(43);
    Rng d(42);
    int equal = 0;
    for (int i = 0; i < 1000; ++i) {
        equal += c() == d();
    }
    CHECK(equal == 0);
}

TEST_CASE("derived seeds of distinct streams differ")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t master = 0; master < 50; ++master) {
        for (std::uint64_t stream = 0; stream < 20; ++stream) {
            seen.insert(derive_seed(master, stream));
        }
    }
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(7, Stream::price) != derive_seed(7, Stream::market));
}

TEST_CASE("uniform draws stay in the half-open interval")
{
    Rng rng(1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));

    for (int i = 0; i < 10000; ++i) {
        const double v = rng.uniform(0.25, 0.5);
        REQUIRE(v >= 0.25);
        REQUIRE(v < 0.5);
    }
}

TEST_CASE("degenerate interval returns its left end")
{
    Rng rng(3);
    CHECK(rng.uniform(0.0, 0.0) == 0.0);
    CHECK(rng.uniform(0.7, 0.7) == 0.7);
    CHECK(rng.uniform(0.7, 0.2) == 0.7);
}

TEST_CASE("interval one ulp wide only yields its left end")
{
    Rng rng(5);
    const double lo = 0.3;
    const double hi = std::nextafter(lo, 1.0);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(rng.uniform(lo, hi) == lo);
    }
}

TEST_CASE("below is uniform over small ranges")
{
    Rng rng(9);
    std::vector<int> hits(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto k = rng.below(7);
        REQUIRE(k < 7);
        ++hits[k];
    }
    // chi-square with 6 dof; 22.46 is the 0.999 quantile
    double chi = 0.0;
    for (int h : hits) {
        chi += (h - n / 7.0) * (h - n / 7.0) / (n / 7.0);
    }
    CHECK(chi < 22.46);
}

TEST_CASE("Bernoulli gate honours its limits and its rate")
{
    Rng rng(11);
    const BernoulliGate never(0.0);
    const BernoulliGate always(1.0);
    for (int i = 0; i < 100; ++i) {
        CHECK_FALSE(never(rng));
        CHECK(always(rng));
    }
    const BernoulliGate gate(0.01);
    const int n = 1000000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        hits += gate(rng);
    }
    const double sd = std::sqrt(n * 0.01 * 0.99);
    CHECK(std::abs(hits - n * 0.01) < 4.0 * sd);
}
