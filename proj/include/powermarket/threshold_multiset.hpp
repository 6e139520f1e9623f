#pragma once

#include "powermarket/fenwick.hpp"
#include "powermarket/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace powermarket {

/// Multiset of threshold values in [0, 1).
///
/// Values sit in 2^k equal-width buckets laid out with a common stride in one
/// array. A Fenwick tree over bucket sizes answers count-at-least and rank
/// selection in O(log B + bucket size); size changes are folded into it
/// lazily, once per batch of mutations, at cost min(touched * log B, B).
class ThresholdMultiset {
public:
    ThresholdMultiset() : ThresholdMultiset(std::vector<double>{}) {}
    /// Throws std::out_of_range for values outside [0, 1).
    explicit ThresholdMultiset(const std::vector<double>& values);

    std::size_t size() const noexcept { return size_; }
    std::size_t bucket_count() const noexcept { return sizes_.size(); }

    void insert(double value);

    /// Removes one copy of `value`; false if absent.
    bool erase(double value);

    /// Number of values >= x.
    std::size_t count_at_least(double x) const;

    /// Value of rank `rank` in ascending order.
    double select(std::size_t rank) const;

    /// Removes every value >= x and appends it to `out`. Returns the count.
    std::size_t extract_at_least(double x, std::vector<double>& out);

    /// Removes k values chosen uniformly without replacement and appends them
    /// to `out`. Requires k <= size().
    void sample_without_replacement(std::size_t k, Rng& rng, std::vector<double>& out);

    template <class Fn>
    void for_each(Fn&& fn) const
    {
        for (std::size_t b = 0; b < sizes_.size(); ++b) {
            const double* v = bucket(b);
            for (std::uint32_t i = 0; i < sizes_[b]; ++i) {
                fn(v[i]);
            }
        }
    }

    /// Values in ascending order.
    std::vector<double> sorted_values() const;

private:
    std::size_t bucket_of(double x) const noexcept
    {
        // the bucket count is a power of two, so x * B is exact
        const auto b = static_cast<std::size_t>(x * scale_);
        return b < sizes_.size() ? b : sizes_.size() - 1;
    }
    double* bucket(std::size_t b) noexcept { return pool_.data() + b * stride_; }
    const double* bucket(std::size_t b) const noexcept { return pool_.data() + b * stride_; }
    void push(std::size_t b, double value);
    void remove_at(std::size_t b, std::uint32_t i) noexcept;
    void grow();
    void touch(std::size_t b)
    {
        if (!dirty_[b]) {
            dirty_[b] = 1;
            touched_.push_back(static_cast<std::uint32_t>(b));
        }
    }
    void sync() const;

    std::vector<double> pool_;
    std::vector<std::uint32_t> sizes_;
    std::size_t stride_ = 0;
    std::uint32_t high_water_ = 1;  ///< largest bucket size seen, bounds the sampler
    std::size_t size_ = 0;
    double scale_ = 1.0;
    int bucket_bits_ = 0;

    mutable FenwickTree index_;
    mutable std::vector<std::int64_t> indexed_size_;
    mutable std::vector<std::uint8_t> dirty_;
    mutable std::vector<std::uint32_t> touched_;
};

}  // namespace powermarket
