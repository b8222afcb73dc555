#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "data.hpp"
#include "errors.hpp"

namespace mmdmiss {

// Laplacian kernel k(x, y) = exp(-beta * ||x - y||_1).
class KernelParams {
public:
    explicit KernelParams(double beta) : beta_(beta) {
        if (!(beta > 0.0) || !std::isfinite(beta))
            throw ConfigError("kernel beta must be positive and finite");
    }
    double beta() const noexcept { return beta_; }

private:
    double beta_;
};

inline double l1_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DimError("vector lengths differ: " + std::to_string(x.size()) + " vs " +
                       std::to_string(y.size()));
    double s = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) s += std::fabs(x[l] - y[l]);
    return s;
}

inline double laplacian(std::span<const double> x, std::span<const double> y, KernelParams p) {
    return std::exp(-p.beta() * l1_distance(x, y));
}

// L1 distance over components observed in both rows.
inline double joint_l1_distance(std::span<const double> x, std::span<const std::uint8_t> x_mask,
                                std::span<const double> y, std::span<const std::uint8_t> y_mask) {
    if (x.size() != y.size() || x_mask.size() != x.size() || y_mask.size() != y.size())
        throw DimError("masked row lengths differ");
    double s = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l)
        if (x_mask[l] && y_mask[l]) s += std::fabs(x[l] - y[l]);
    return s;
}

// Laplacian kernel restricted to jointly observed components. Two fully missing rows give 1.
inline double incomplete_laplacian(std::span<const double> x, std::span<const std::uint8_t> x_mask,
                                   std::span<const double> y, std::span<const std::uint8_t> y_mask,
                                   KernelParams p) {
    return std::exp(-p.beta() * joint_l1_distance(x, x_mask, y, y_mask));
}

namespace detail {

// Number of pairs i < j of an ascending array with a[j] - a[i] <= t.
inline std::uint64_t count_pairs_within(std::span<const double> a, double t) {
    std::uint64_t count = 0;
    std::size_t i = 0;
    for (std::size_t j = 1; j < a.size(); ++j) {
        while (a[j] - a[i] > t) ++i;
        count += j - i;
    }
    return count;
}

// k-th smallest (0-based) of {a[j] - a[i] : i < j} for ascending a. Bisects on the bit
// pattern of non-negative doubles, so the result is one of the pairwise differences exactly.
inline double kth_pairwise_difference(std::span<const double> a, std::uint64_t k) {
    std::uint64_t lo = std::bit_cast<std::uint64_t>(0.0);
    std::uint64_t hi = std::bit_cast<std::uint64_t>(a.back() - a.front());
    while (lo < hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (count_pairs_within(a, std::bit_cast<double>(mid)) >= k + 1)
            hi = mid;
        else
            lo = mid + 1;
    }
    return std::bit_cast<double>(lo);
}

inline double median_of(std::vector<double>& v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace detail

// Median of the L1 distances between fully observed rows.
inline double median_complete_distance(const std::vector<std::span<const double>>& rows) {
    if (rows.size() < 2)
        throw InsufficientCompleteRows("median heuristic needs at least 2 fully observed rows, got " +
                                       std::to_string(rows.size()));
    const std::uint64_t n = rows.size();
    const std::uint64_t pairs = n * (n - 1) / 2;
    double median = 0.0;
    if (rows.front().size() == 1) {
        std::vector<double> a;
        a.reserve(rows.size());
        for (auto r : rows) a.push_back(r[0]);
        std::sort(a.begin(), a.end());
        const double upper = detail::kth_pairwise_difference(a, pairs / 2);
        median = pairs % 2 ? upper
                           : 0.5 * (detail::kth_pairwise_difference(a, pairs / 2 - 1) + upper);
    } else {
        std::vector<double> dist;
        dist.reserve(pairs);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j) dist.push_back(l1_distance(rows[i], rows[j]));
        median = detail::median_of(dist);
    }
    return median;
}

// beta = 1 / median{ ||z_i - z_j||_1 : i < j, both rows fully observed }.
inline KernelParams median_heuristic(const MaskedMatrix& pooled) {
    std::vector<std::span<const double>> rows;
    for (std::size_t i = 0; i < pooled.rows(); ++i)
        if (pooled.row_complete(i)) rows.push_back(pooled.row(i));
    const double median = median_complete_distance(rows);
    if (!(median > 0.0)) throw DegenerateScale("median pairwise distance is zero");
    return KernelParams(1.0 / median);
}

// Same as above over the fully observed rows of X and Y pooled together.
inline KernelParams median_heuristic(const TwoSampleData& data) {
    std::vector<std::span<const double>> rows;
    for (const MaskedMatrix* m : {&data.x, &data.y})
        for (std::size_t i = 0; i < m->rows(); ++i)
            if (m->row_complete(i)) rows.push_back(m->row(i));
    const double median = median_complete_distance(rows);
    if (!(median > 0.0)) throw DegenerateScale("median pairwise distance is zero");
    return KernelParams(1.0 / median);
}

}  // namespace mmdmiss
