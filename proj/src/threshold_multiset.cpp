#include "powermarket/threshold_multiset.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace powermarket {

namespace {

constexpr std::size_t min_buckets = 16;
constexpr std::size_t max_buckets = std::size_t{1} << 20;
constexpr std::size_t values_per_bucket = 96;

void check_range(double value)
{
    if (!(value >= 0.0 && value < 1.0)) {
        throw std::out_of_range("threshold outside [0, 1)");
    }
}

}  // namespace

ThresholdMultiset::ThresholdMultiset(const std::vector<double>& values)
{
    const std::size_t n = std::bit_floor(std::clamp(values.size() / values_per_bucket, min_buckets, max_buckets));
    bucket_bits_ = std::countr_zero(n);
    scale_ = static_cast<double>(n);
    sizes_.assign(n, 0);

    std::vector<std::uint32_t> counts(n, 0);
    for (double v : values) {
        check_range(v);
        ++counts[bucket_of(v)];
    }
    const std::uint32_t largest = *std::max_element(counts.begin(), counts.end());
    stride_ = std::bit_ceil(std::max<std::size_t>(8, largest + largest / 2));
    pool_.assign(n * stride_, 0.0);

    index_ = FenwickTree(n);
    indexed_size_.assign(n, 0);
    dirty_.assign(n, 0);
    for (double v : values) {
        push(bucket_of(v), v);
    }
    sync();
}

void ThresholdMultiset::grow()
{
    const std::size_t wider = stride_ * 2;
    std::vector<double> pool(sizes_.size() * wider, 0.0);
    for (std::size_t b = 0; b < sizes_.size(); ++b) {
        std::copy_n(bucket(b), sizes_[b], pool.data() + b * wider);
    }
    pool_.swap(pool);
    stride_ = wider;
}

void ThresholdMultiset::push(std::size_t b, double value)
{
    if (sizes_[b] == stride_) {
        grow();
    }
    const std::uint32_t i = sizes_[b]++;
    bucket(b)[i] = value;
    high_water_ = std::max(high_water_, i + 1);
    ++size_;
    touch(b);
}

void ThresholdMultiset::remove_at(std::size_t b, std::uint32_t i) noexcept
{
    double* v = bucket(b);
    v[i] = v[--sizes_[b]];
    --size_;
    touch(b);
}

void ThresholdMultiset::insert(double value)
{
    check_range(value);
    push(bucket_of(value), value);
}

bool ThresholdMultiset::erase(double value)
{
    if (!(value >= 0.0 && value < 1.0)) {
        return false;
    }
    const std::size_t b = bucket_of(value);
    const double* v = bucket(b);
    const double* hit = std::find(v, v + sizes_[b], value);
    if (hit == v + sizes_[b]) {
        return false;
    }
    remove_at(b, static_cast<std::uint32_t>(hit - v));
    return true;
}

std::size_t ThresholdMultiset::extract_at_least(double x, std::vector<double>& out)
{
    if (x >= 1.0 || size_ == 0) {
        return 0;
    }
    const std::size_t start = out.size();
    const std::size_t first = x <= 0.0 ? 0 : bucket_of(x);

    double* boundary = bucket(first);
    std::uint32_t kept = 0;
    for (std::uint32_t i = 0; i < sizes_[first]; ++i) {
        if (boundary[i] < x) {
            boundary[kept++] = boundary[i];
        } else {
            out.push_back(boundary[i]);
        }
    }
    if (kept != sizes_[first]) {
        sizes_[first] = kept;
        touch(first);
    }
    for (std::size_t b = first + 1; b < sizes_.size(); ++b) {
        if (sizes_[b] == 0) {
            continue;
        }
        out.insert(out.end(), bucket(b), bucket(b) + sizes_[b]);
        sizes_[b] = 0;
        touch(b);
    }
    size_ -= out.size() - start;
    return out.size() - start;
}

void ThresholdMultiset::sample_without_replacement(std::size_t k, Rng& rng, std::vector<double>& out)
{
    if (k > size_) {
        throw std::out_of_range("ThresholdMultiset: sample larger than the multiset");
    }
    if (k == 0) {
        return;
    }
    // the bound only ever rises on insert; tighten it when the scan is cheap
    // relative to the sample
    if (32 * k >= sizes_.size()) {
        high_water_ = std::max<std::uint32_t>(1, std::ranges::max(sizes_));
    }
    // Rejection over the (bucket, position < high_water) grid: every accepted
    // cell is a uniformly chosen stored value. Worth it while at least an
    // eighth of the grid is occupied. One draw per try: the bucket comes from
    // the top bits, the position from an exact 32-bit multiply-shift on the
    // low word.
    const std::size_t grid = sizes_.size() * high_water_;
    const int shift = 64 - bucket_bits_;
    const std::uint32_t bound = high_water_;
    const std::uint32_t reject_below = (0u - bound) % bound;
    Rng local = rng;
    std::size_t taken = 0;
    out.reserve(out.size() + k);
    while (taken < k && 8 * size_ >= grid) {
        const std::uint64_t r = local();
        const std::uint64_t m = (r & 0xffffffffu) * bound;
        if (static_cast<std::uint32_t>(m) < reject_below) {
            continue;
        }
        const auto b = static_cast<std::size_t>(r >> shift);
        const auto i = static_cast<std::uint32_t>(m >> 32);
        if (i < sizes_[b]) {
            out.push_back(bucket(b)[i]);
            remove_at(b, i);
            ++taken;
        }
    }
    rng = local;
    if (taken == k) {
        return;
    }
    // selection sampling over what is left
    std::size_t needed = k - taken;
    std::size_t left = size_;
    for (std::size_t b = 0; b < sizes_.size() && needed > 0; ++b) {
        for (std::uint32_t i = sizes_[b]; i-- > 0 && needed > 0; --left) {
            if (rng.below(left) < needed) {
                out.push_back(bucket(b)[i]);
                remove_at(b, i);
                --needed;
            }
        }
    }
}

void ThresholdMultiset::sync() const
{
    if (touched_.empty()) {
        return;
    }
    const std::size_t n = sizes_.size();
    if (touched_.size() * static_cast<std::size_t>(bucket_bits_ + 1) < n) {
        for (std::uint32_t b : touched_) {
            index_.add(b, static_cast<std::int64_t>(sizes_[b]) - indexed_size_[b]);
            indexed_size_[b] = sizes_[b];
            dirty_[b] = 0;
        }
    } else {
        std::copy(sizes_.begin(), sizes_.end(), indexed_size_.begin());
        index_.assign(indexed_size_);
        std::fill(dirty_.begin(), dirty_.end(), 0);
    }
    touched_.clear();
}

std::size_t ThresholdMultiset::count_at_least(double x) const
{
    if (x <= 0.0) {
        return size_;
    }
    if (x >= 1.0) {
        return 0;
    }
    sync();
    const std::size_t b = bucket_of(x);
    std::size_t count = size_ - static_cast<std::size_t>(index_.prefix(b + 1));
    const double* v = bucket(b);
    for (std::uint32_t i = 0; i < sizes_[b]; ++i) {
        count += v[i] >= x;
    }
    return count;
}

double ThresholdMultiset::select(std::size_t rank) const
{
    if (rank >= size_) {
        throw std::out_of_range("ThresholdMultiset::select rank out of range");
    }
    sync();
    std::int64_t offset = 0;
    const std::size_t b = index_.find(static_cast<std::int64_t>(rank), offset);
    std::vector<double> scratch(bucket(b), bucket(b) + sizes_[b]);
    const auto nth = scratch.begin() + offset;
    std::nth_element(scratch.begin(), nth, scratch.end());
    return *nth;
}

std::vector<double> ThresholdMultiset::sorted_values() const
{
    std::vector<double> out;
    out.reserve(size_);
    for_each([&](double v) { out.push_back(v); });
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace powermarket
