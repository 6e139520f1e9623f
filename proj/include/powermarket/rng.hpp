#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace powermarket {

/// SplitMix64 finalizer. A bijection on 64-bit words, used for seeding and
/// seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of sub-stream `stream` of `master`. Distinct streams of one master
/// never collide because mix64 is injective.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept
{
    return mix64(mix64(master) + (stream + 1) * 0x9e3779b97f4a7c15ULL);
}

/// Named sub-streams of a run's master seed. The price stream does not
/// depend on the market stream, so changing N leaves P(t) untouched.
enum class Stream : std::uint64_t { price = 1, market = 2 };

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream) noexcept
{
    return derive_seed(master, static_cast<std::uint64_t>(stream));
}

/// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator so it
/// plugs into the <random> distributions.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept
    {
        std::uint64_t x = seed;
        for (auto& word : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            word = mix64(x);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on the half-open interval [lo, hi). Returns lo when the interval
    /// is empty.
    double uniform(double lo, double hi) noexcept
    {
        if (!(lo < hi)) {
            return lo;
        }
        const double v = lo + (hi - lo) * uniform();
        // rounding can land exactly on hi
        return v < hi ? v : std::nextafter(hi, lo);
    }

    /// Uniform integer on [0, n) by Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool operator==(const Rng&) const = default;

private:
    std::uint64_t s_[4];
};

/// Bernoulli(p) as a single comparison against a raw 64-bit draw.
class BernoulliGate {
public:
    explicit BernoulliGate(double p) noexcept
    {
        if (p <= 0.0) {
            mode_ = Mode::never;
        } else if (p >= 1.0) {
            mode_ = Mode::always;
        } else {
            cut_ = static_cast<std::uint64_t>(std::ldexp(p, 64));
        }
    }

    bool operator()(Rng& rng) const noexcept
    {
        switch (mode_) {
        case Mode::never: return false;
        case Mode::always: return true;
        default: return rng() < cut_;
        }
    }

private:
    enum class Mode { never, always, draw };
    Mode mode_ = Mode::draw;
    std::uint64_t cut_ = 0;
};

}  // namespace powermarket
