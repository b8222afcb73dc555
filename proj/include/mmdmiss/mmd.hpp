#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "summation.hpp"

namespace mmdmiss {

struct BoundInterval {
    double lower = 0.0;
    double upper = 0.0;

    double width() const noexcept { return upper - lower; }
    bool contains(double v, double tol = 0.0) const noexcept {
        return v >= lower - tol && v <= upper + tol;
    }
    bool contains(const BoundInterval& inner, double tol = 0.0) const noexcept {
        return inner.lower >= lower - tol && inner.upper <= upper + tol;
    }
    BoundInterval& operator+=(const BoundInterval& o) noexcept {
        lower += o.lower;
        upper += o.upper;
        return *this;
    }
    friend BoundInterval operator+(BoundInterval a, const BoundInterval& b) noexcept { return a += b; }
    friend bool operator==(const BoundInterval&, const BoundInterval&) = default;
};

// c1 = 2/(n1(n1-1)), c2 = 2/(n2(n2-1)), c3 = 2/(n1 n2).
struct GroupConstants {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;

    static GroupConstants make(std::size_t n1, std::size_t n2) {
        if (n1 < 2 || n2 < 2)
            throw SampleSizeError("each sample needs at least 2 rows (got n1=" + std::to_string(n1) +
                                  ", n2=" + std::to_string(n2) + ")");
        const double a = static_cast<double>(n1);
        const double b = static_cast<double>(n2);
        return {2.0 / (a * (a - 1.0)), 2.0 / (b * (b - 1.0)), 2.0 / (a * b)};
    }
};

// Decomposition pieces: A2 exact, the other three bounded.
struct DecompTerms {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double a2 = 0.0;
    BoundInterval a1_bounds;
    BoundInterval a3_bounds;
    BoundInterval a4_bounds;

    BoundInterval total() const noexcept {
        return {a1_bounds.lower + a2 + a3_bounds.lower + a4_bounds.lower,
                a1_bounds.upper + a2 + a3_bounds.upper + a4_bounds.upper};
    }
};

namespace detail {

// Kernel sums over unordered pairs: within X, within Y, and across.
struct PairSums {
    double xx = 0.0;
    double yy = 0.0;
    double xy = 0.0;

    double statistic(const GroupConstants& c) const noexcept { return c.c1 * xx + c.c2 * yy - c.c3 * xy; }
};

// Scalar points sorted once; each evaluation assigns group labels and walks the sorted order.
// Uses exp(-b|u - v|) = exp(-b(u - w)) exp(-b(w - v)) for v <= w <= u, so a running sum
// decayed by the gap to the next point gives every left-side kernel sum in one pass.
class UnivariateSweep {
public:
    UnivariateSweep() = default;

    // points: (value, pooled row index). Stable in the input order among ties.
    UnivariateSweep(std::vector<std::pair<double, std::size_t>> points, double beta) {
        std::stable_sort(points.begin(), points.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        values_.reserve(points.size());
        pooled_.reserve(points.size());
        decay_.reserve(points.size());
        for (std::size_t k = 0; k < points.size(); ++k) {
            values_.push_back(points[k].first);
            pooled_.push_back(points[k].second);
            decay_.push_back(k == 0 ? 0.0 : std::exp(-beta * (points[k].first - points[k - 1].first)));
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> sorted_values() const noexcept { return values_; }
    std::span<const std::size_t> sorted_rows() const noexcept { return pooled_; }

    // labels[pooled row] = 0 for X, 1 for Y.
    PairSums pair_sums(std::span<const std::uint8_t> labels) const {
        CompensatedSum xx, yy, xy;
        double lx = 0.0, ly = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            lx *= decay_[k];
            ly *= decay_[k];
            if (labels[pooled_[k]] == 0) {
                xx += lx;
                xy += ly;
                lx += 1.0;
            } else {
                yy += ly;
                xy += lx;
                ly += 1.0;
            }
        }
        return {xx.value(), yy.value(), xy.value()};
    }

    // For every sorted position k: sx[k] = sum over X points p of exp(-beta|z_k - p|), and
    // likewise sy[k]; each includes the point itself when it belongs to that group.
    void kernel_profiles(std::span<const std::uint8_t> labels, std::vector<double>& sx,
                         std::vector<double>& sy) const {
        const std::size_t n = values_.size();
        sx.assign(n, 0.0);
        sy.assign(n, 0.0);
        double lx = 0.0, ly = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            lx *= decay_[k];
            ly *= decay_[k];
            (labels[pooled_[k]] == 0 ? lx : ly) += 1.0;
            sx[k] = lx;
            sy[k] = ly;
        }
        double rx = 0.0, ry = 0.0;
        for (std::size_t k = n; k-- > 0;) {
            if (k + 1 < n) {
                rx *= decay_[k + 1];
                ry *= decay_[k + 1];
            }
            const bool is_x = labels[pooled_[k]] == 0;
            sx[k] += rx;
            sy[k] += ry;
            (is_x ? rx : ry) += 1.0;
        }
    }

private:
    std::vector<double> values_;
    std::vector<std::size_t> pooled_;
    std::vector<double> decay_;
};

// Pairwise kernel sums over explicit index lists; kernel(i, j) takes pooled indices.
template <class Kernel>
PairSums pair_sums(const Kernel& kernel, std::span<const std::size_t> xs, std::span<const std::size_t> ys) {
    CompensatedSum xx, yy, xy;
    for (std::size_t a = 0; a < xs.size(); ++a)
        for (std::size_t b = a + 1; b < xs.size(); ++b) xx += kernel(xs[a], xs[b]);
    for (std::size_t a = 0; a < ys.size(); ++a)
        for (std::size_t b = a + 1; b < ys.size(); ++b) yy += kernel(ys[a], ys[b]);
    for (std::size_t a = 0; a < xs.size(); ++a)
        for (std::size_t b = 0; b < ys.size(); ++b) xy += kernel(xs[a], ys[b]);
    return {xx.value(), yy.value(), xy.value()};
}

// Incomplete Laplacian kernel between pooled rows of a two-sample data set; equals the
// ordinary Laplacian kernel when both rows are fully observed.
class PooledKernel {
public:
    PooledKernel(const TwoSampleData& data, KernelParams p) : data_(&data), beta_(p.beta()) {}

    double operator()(std::size_t i, std::size_t j) const {
        const MaskedMatrix& a = data_->source(i);
        const MaskedMatrix& b = data_->source(j);
        const std::size_t li = data_->local(i), lj = data_->local(j);
        return std::exp(-beta_ * joint_l1_distance(a.row(li), a.row_mask(li), b.row(lj), b.row_mask(lj)));
    }

private:
    const TwoSampleData* data_;
    double beta_;
};

inline std::vector<std::uint8_t> identity_labels(std::size_t n1, std::size_t n2) {
    std::vector<std::uint8_t> labels(n1 + n2, 1);
    std::fill_n(labels.begin(), n1, std::uint8_t{0});
    return labels;
}

inline std::vector<std::pair<double, std::size_t>> complete_scalar_points(const TwoSampleData& data) {
    std::vector<std::pair<double, std::size_t>> pts;
    for (std::size_t k = 0; k < data.n_total(); ++k) {
        const MaskedMatrix& m = data.source(k);
        if (m.row_complete(data.local(k))) pts.emplace_back(m.value(data.local(k), 0), k);
    }
    return pts;
}

// Pair sums over the fully observed rows only (the A2 ingredients). d = 1 goes through the
// sorted sweep, d > 1 through explicit pairs, so every caller of this function and of mmd_u
// sees bit-identical values on complete data.
inline PairSums complete_pair_sums(const TwoSampleData& data, KernelParams p) {
    if (data.dim() == 1) {
        UnivariateSweep sweep(complete_scalar_points(data), p.beta());
        return sweep.pair_sums(identity_labels(data.n1(), data.n2()));
    }
    std::vector<std::size_t> xs, ys;
    for (std::size_t k = 0; k < data.n_total(); ++k)
        if (data.source(k).row_complete(data.local(k))) (k < data.n1() ? xs : ys).push_back(k);
    return pair_sums(PooledKernel(data, p), xs, ys);
}

}  // namespace detail

// Unbiased MMD estimate with the Laplacian kernel on fully observed samples.
inline double mmd_u(const MaskedMatrix& x, const MaskedMatrix& y, KernelParams p) {
    if (x.cols() != y.cols()) throw DimError("samples differ in dimension");
    const auto c = GroupConstants::make(x.rows(), y.rows());
    if (!x.complete() || !y.complete()) throw MissingDataError("mmd_u requires fully observed samples");
    const TwoSampleData data(x, y);
    return detail::complete_pair_sums(data, p).statistic(c);
}

// Exact decomposition terms for fully observed data with an artificial incomplete/complete split;
// flagged rows play the role of the incomplete samples.
struct ExactTerms {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
    double a4 = 0.0;
    double sum() const noexcept { return a1 + a2 + a3 + a4; }
};

inline ExactTerms split_terms(const MaskedMatrix& x, const MaskedMatrix& y,
                              const std::vector<bool>& x_flagged, const std::vector<bool>& y_flagged,
                              KernelParams p) {
    const auto c = GroupConstants::make(x.rows(), y.rows());
    if (x_flagged.size() != x.rows() || y_flagged.size() != y.rows())
        throw DimError("flag vector length does not match row count");
    auto k = [&](const MaskedMatrix& a, std::size_t i, const MaskedMatrix& b, std::size_t j) {
        return laplacian(a.row(i), b.row(j), p);
    };
    CompensatedSum a1, a2, a3, a4;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = i + 1; j < x.rows(); ++j) {
            const double v = c.c1 * k(x, i, x, j);
            if (x_flagged[i] && x_flagged[j])
                a1 += v;
            else if (!x_flagged[i] && !x_flagged[j])
                a2 += v;
            else
                a3 += v;
        }
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = i + 1; j < y.rows(); ++j) {
            const double v = c.c2 * k(y, i, y, j);
            if (y_flagged[i] && y_flagged[j])
                a1 += v;
            else if (!y_flagged[i] && !y_flagged[j])
                a2 += v;
            else
                a4 += v;
        }
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < y.rows(); ++j) {
            const double v = -c.c3 * k(x, i, y, j);
            if (x_flagged[i] && y_flagged[j])
                a1 += v;
            else if (!x_flagged[i] && !y_flagged[j])
                a2 += v;
            else if (x_flagged[i])
                a3 += v;
            else
                a4 += v;
        }
    return {a1.value(), a2.value(), a3.value(), a4.value()};
}

// Every kernel value touching an incomplete row replaced by its extreme: 0 or 1 in the
// within-sample sums, 1 or 0 in the cross sum.
inline BoundInterval naive_bounds(const TwoSampleData& data, KernelParams p) {
    const auto c = GroupConstants::make(data.n1(), data.n2());
    const double a2 = detail::complete_pair_sums(data, p).statistic(c);
    const double n1 = static_cast<double>(data.n1()), n2 = static_cast<double>(data.n2());
    const double m1 = static_cast<double>(partition_rows(data.x).m);
    const double m2 = static_cast<double>(partition_rows(data.y).m);
    const double k1 = n1 - m1, k2 = n2 - m2;
    const double x_pairs = n1 * (n1 - 1.0) / 2.0 - k1 * (k1 - 1.0) / 2.0;
    const double y_pairs = n2 * (n2 - 1.0) / 2.0 - k2 * (k2 - 1.0) / 2.0;
    const double cross_pairs = n1 * n2 - k1 * k2;
    return {a2 - c.c3 * cross_pairs, a2 + c.c1 * x_pairs + c.c2 * y_pairs};
}

}  // namespace mmdmiss
