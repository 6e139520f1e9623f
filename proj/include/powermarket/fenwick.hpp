#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace powermarket {

/// Binary indexed tree over non-negative counts with prefix sums and
/// rank descent.
class FenwickTree {
public:
    FenwickTree() = default;
    explicit FenwickTree(std::size_t n) : tree_(n + 1, 0) {}

    std::size_t size() const noexcept { return tree_.size() - 1; }

    /// Rebuilds the tree from plain entries in linear time.
    void assign(const std::vector<std::int64_t>& entries)
    {
        tree_.assign(entries.size() + 1, 0);
        for (std::size_t i = 1; i < tree_.size(); ++i) {
            tree_[i] += entries[i - 1];
            const std::size_t parent = i + (i & (~i + 1));
            if (parent < tree_.size()) {
                tree_[parent] += tree_[i];
            }
        }
    }

    void add(std::size_t index, std::int64_t delta) noexcept
    {
        for (std::size_t i = index + 1; i < tree_.size(); i += i & (~i + 1)) {
            tree_[i] += delta;
        }
    }

    /// Sum of entries [0, end).
    std::int64_t prefix(std::size_t end) const noexcept
    {
        std::int64_t sum = 0;
        for (std::size_t i = end; i > 0; i &= i - 1) {
            sum += tree_[i];
        }
        return sum;
    }

    /// Smallest index j with prefix(j + 1) > rank. `offset` receives
    /// rank - prefix(j). Requires rank < total.
    std::size_t find(std::int64_t rank, std::int64_t& offset) const noexcept
    {
        std::size_t pos = 0;
        if (std::has_single_bit(size())) {
            // every probe stays in range: branch-free descent
            for (std::size_t step = size() >> 1; step > 0; step >>= 1) {
                const std::int64_t v = tree_[pos + step];
                const bool go = v <= rank;
                pos += go ? step : 0;
                rank -= go ? v : 0;
            }
            offset = rank;
            return pos;
        }
        for (std::size_t step = std::bit_floor(size()); step > 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= rank) {
                pos = next;
                rank -= tree_[next];
            }
        }
        offset = rank;
        return pos;
    }

private:
    std::vector<std::int64_t> tree_{0};
};

}  // namespace powermarket
