#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "mmd.hpp"
#include "summation.hpp"

namespace mmdmiss {

// ---------------------------------------------------------------------------
// T-functions
//
//   T(z) = sum_i a_i exp(-beta sum_{j in U} |x_i(j) - z(j)|)
//        - sum_i b_i exp(-beta sum_{j in U} |y_i(j) - z(j)|)
//
// over the missing components U of a partially observed row z.
// ---------------------------------------------------------------------------

struct WeightedPoint {
    std::vector<double> point;
    double weight = 1.0;
};

struct TFunctionSpec {
    std::vector<WeightedPoint> x_points;
    std::vector<WeightedPoint> y_points;
    double beta = 1.0;
    std::vector<std::size_t> missing_dims;  // indices into each point; {0} for scalar points

    std::size_t point_dim() const {
        if (!x_points.empty()) return x_points.front().point.size();
        if (!y_points.empty()) return y_points.front().point.size();
        return 0;
    }

    void validate() const {
        if (x_points.empty() && y_points.empty()) throw EmptySpec("T-function has no points");
        if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
        const std::size_t d = point_dim();
        for (const auto* list : {&x_points, &y_points})
            for (const auto& p : *list) {
                if (!(p.weight > 0.0)) throw ConfigError("T-function weights must be positive");
                if (p.point.size() != d) throw DimError("T-function points differ in length");
            }
        for (std::size_t j : missing_dims)
            if (j >= d) throw DimError("missing dimension index out of range");
    }
};

// z holds one value per entry of spec.missing_dims, in the same order.
inline double t_eval(const TFunctionSpec& spec, std::span<const double> z) {
    if (z.size() != spec.missing_dims.size())
        throw DimError("T-function argument needs " + std::to_string(spec.missing_dims.size()) +
                       " coordinates, got " + std::to_string(z.size()));
    auto dist = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) s += std::fabs(p[spec.missing_dims[k]] - z[k]);
        return s;
    };
    double pos = 0.0, neg = 0.0;
    for (const auto& p : spec.x_points) pos += p.weight * std::exp(-spec.beta * dist(p.point));
    for (const auto& p : spec.y_points) neg += p.weight * std::exp(-spec.beta * dist(p.point));
    return pos - neg;
}

namespace detail {

inline void require_single_dim(const TFunctionSpec& spec) {
    spec.validate();
    if (spec.missing_dims.size() != 1)
        throw DimError("univariate T-function bounds need exactly one missing dimension");
}

inline BoundInterval with_zero(double lo, double hi) { return {std::min(0.0, lo), std::max(0.0, hi)}; }

}  // namespace detail

// min/max of {0} and T at every point, evaluated by two sorted sweeps: O(L log L).
inline BoundInterval t_bounds_univariate(const TFunctionSpec& spec) {
    detail::require_single_dim(spec);
    const std::size_t dim = spec.missing_dims.front();
    struct Entry {
        double value;
        double wx;
        double wy;
    };
    std::vector<Entry> pts;
    pts.reserve(spec.x_points.size() + spec.y_points.size());
    for (const auto& p : spec.x_points) pts.push_back({p.point[dim], p.weight, 0.0});
    for (const auto& p : spec.y_points) pts.push_back({p.point[dim], 0.0, p.weight});
    std::sort(pts.begin(), pts.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });

    const std::size_t n = pts.size();
    std::vector<double> decay(n, 0.0), lx(n), ly(n);
    for (std::size_t k = 1; k < n; ++k) decay[k] = std::exp(-spec.beta * (pts[k].value - pts[k - 1].value));
    double ax = 0.0, ay = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        ax = ax * decay[k] + pts[k].wx;
        ay = ay * decay[k] + pts[k].wy;
        lx[k] = ax;
        ly[k] = ay;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double rx = 0.0, ry = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        if (k + 1 < n) {
            rx *= decay[k + 1];
            ry *= decay[k + 1];
        }
        const double t = (lx[k] + rx) - (ly[k] + ry);
        lo = std::min(lo, t);
        hi = std::max(hi, t);
        rx += pts[k].wx;
        ry += pts[k].wy;
    }
    return detail::with_zero(lo, hi);
}

// Quadratic reference for t_bounds_univariate: evaluates T at every point directly.
inline BoundInterval t_bounds_univariate_reference(const TFunctionSpec& spec) {
    detail::require_single_dim(spec);
    const std::size_t dim = spec.missing_dims.front();
    double lo = 0.0, hi = 0.0;
    for (const auto* list : {&spec.x_points, &spec.y_points})
        for (const auto& p : *list) {
            const double z = p.point[dim];
            const double t = t_eval(spec, std::span<const double>(&z, 1));
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    return {lo, hi};
}

// Per-point, per-dimension maximum distance to every pooled reference point.
struct MaxDistanceTable {
    std::size_t dim = 0;
    std::vector<double> xhat;  // x point i, dim j at [i * dim + j]
    std::vector<double> yhat;
    std::vector<std::size_t> x_rows;  // source rows when built from data
    std::vector<std::size_t> y_rows;

    double x(std::size_t i, std::size_t j) const { return xhat[i * dim + j]; }
    double y(std::size_t i, std::size_t j) const { return yhat[i * dim + j]; }
};

namespace detail {

inline void fill_max_distances(const std::vector<std::span<const double>>& targets,
                               const std::vector<std::span<const double>>& pool, std::size_t dim,
                               std::vector<double>& out) {
    out.assign(targets.size() * dim, 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (const auto& w : pool)
            for (std::size_t j = 0; j < dim; ++j)
                out[i * dim + j] = std::max(out[i * dim + j], std::fabs(targets[i][j] - w[j]));
}

}  // namespace detail

inline MaxDistanceTable build_max_distance_table(const TFunctionSpec& spec) {
    spec.validate();
    MaxDistanceTable t;
    t.dim = spec.point_dim();
    std::vector<std::span<const double>> xs, ys, pool;
    for (const auto& p : spec.x_points) xs.emplace_back(p.point);
    for (const auto& p : spec.y_points) ys.emplace_back(p.point);
    pool = xs;
    pool.insert(pool.end(), ys.begin(), ys.end());
    detail::fill_max_distances(xs, pool, t.dim, t.xhat);
    detail::fill_max_distances(ys, pool, t.dim, t.yhat);
    return t;
}

// Table over the fully observed rows of X and Y, each measured against all pooled fully
// observed rows. O(d (n1 + n2)^2).
inline MaxDistanceTable build_max_distance_table(const TwoSampleData& data) {
    MaxDistanceTable t;
    t.dim = data.dim();
    std::vector<std::span<const double>> xs, ys, pool;
    for (std::size_t i = 0; i < data.n1(); ++i)
        if (data.x.row_complete(i)) {
            xs.push_back(data.x.row(i));
            t.x_rows.push_back(i);
        }
    for (std::size_t i = 0; i < data.n2(); ++i)
        if (data.y.row_complete(i)) {
            ys.push_back(data.y.row(i));
            t.y_rows.push_back(i);
        }
    if (xs.empty() && ys.empty()) throw NoCompleteRows("no fully observed rows in either sample");
    pool = xs;
    pool.insert(pool.end(), ys.begin(), ys.end());
    detail::fill_max_distances(xs, pool, t.dim, t.xhat);
    detail::fill_max_distances(ys, pool, t.dim, t.yhat);
    return t;
}

// Closed-form bounds on the grid extremes: each attracting term shrunk to its farthest
// candidate distance for the lower bound, each repelling term for the upper bound.
inline BoundInterval t_bounds_max_distance(const TFunctionSpec& spec, const MaxDistanceTable& table) {
    spec.validate();
    if (spec.missing_dims.empty()) throw DimError("no missing dimensions");
    if (table.xhat.size() != spec.x_points.size() * table.dim ||
        table.yhat.size() != spec.y_points.size() * table.dim || table.dim != spec.point_dim())
        throw DimError("max-distance table does not match the T-function");
    double lower = 0.0, upper = 0.0;
    for (std::size_t i = 0; i < spec.x_points.size(); ++i) {
        double s = 0.0;
        for (std::size_t j : spec.missing_dims) s += table.x(i, j);
        lower += spec.x_points[i].weight * std::exp(-spec.beta * s);
        upper += spec.x_points[i].weight;
    }
    for (std::size_t i = 0; i < spec.y_points.size(); ++i) {
        double s = 0.0;
        for (std::size_t j : spec.missing_dims) s += table.y(i, j);
        lower -= spec.y_points[i].weight;
        upper -= spec.y_points[i].weight * std::exp(-spec.beta * s);
    }
    return {lower, upper};
}

struct GridExtremes {
    BoundInterval raw;  // min/max of T over the grid itself
    std::size_t evaluations = 0;
};

// Enumerates T over z(j) in {all points' j-th components} for every missing j.
inline GridExtremes t_grid_extremes(const TFunctionSpec& spec, std::size_t cap = 1'000'000) {
    spec.validate();
    const std::size_t q = spec.missing_dims.size();
    std::vector<std::vector<double>> cand(q);
    for (std::size_t k = 0; k < q; ++k) {
        for (const auto* list : {&spec.x_points, &spec.y_points})
            for (const auto& p : *list) cand[k].push_back(p.point[spec.missing_dims[k]]);
    }
    double total = 1.0;
    for (const auto& c : cand) total *= static_cast<double>(c.size());
    if (total > static_cast<double>(cap))
        throw GridTooLarge("grid has " + std::to_string(total) + " points, cap is " + std::to_string(cap));

    GridExtremes g;
    g.raw = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::vector<std::size_t> odo(q, 0);
    std::vector<double> z(q);
    for (;;) {
        for (std::size_t k = 0; k < q; ++k) z[k] = cand[k][odo[k]];
        const double t = t_eval(spec, z);
        g.raw.lower = std::min(g.raw.lower, t);
        g.raw.upper = std::max(g.raw.upper, t);
        ++g.evaluations;
        std::size_t k = 0;
        while (k < q && ++odo[k] == cand[k].size()) odo[k++] = 0;
        if (k == q) break;
    }
    return g;
}

// Exact range of T over all real imputations: [min{0, min grid}, max{0, max grid}].
inline BoundInterval t_bounds_grid(const TFunctionSpec& spec, std::size_t cap = 1'000'000) {
    const auto g = t_grid_extremes(spec, cap);
    return detail::with_zero(g.raw.lower, g.raw.upper);
}

// ---------------------------------------------------------------------------
// MMD bounds
// ---------------------------------------------------------------------------

// Bounds of the unbiased statistic for any X/Y assignment of a fixed pooled sample.
// labels[k] is 0 when pooled row k (X rows first, then Y rows) is in X, 1 when in Y.
class BoundEngine {
public:
    virtual ~BoundEngine() = default;
    virtual std::size_t n_total() const = 0;
    virtual DecompTerms decompose(std::span<const std::uint8_t> labels) const = 0;

    BoundInterval bounds(std::span<const std::uint8_t> labels) const { return decompose(labels).total(); }

protected:
    static std::pair<std::size_t, std::size_t> group_sizes(std::span<const std::uint8_t> labels) {
        const auto n1 = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{0}));
        return {n1, labels.size() - n1};
    }
};

namespace detail {

inline double pair_count(double m) { return m * (m - 1.0) / 2.0; }

// A1 from counts alone: 0 <= k <= 1 for every pair touching two incomplete rows.
inline BoundInterval counting_a1(const GroupConstants& c, double m1, double m2) {
    return {-c.c3 * m1 * m2, c.c1 * pair_count(m1) + c.c2 * pair_count(m2)};
}

}  // namespace detail

// d = 1: every incomplete row is a missing scalar. A3 and A4 are m_g times the range of the
// T-function over the observed points; all T values come from the shared sorted sweep.
class UnivariateBoundEngine final : public BoundEngine {
public:
    UnivariateBoundEngine(const TwoSampleData& data, KernelParams p) : n1_(data.n1()), n2_(data.n2()) {
        if (data.dim() != 1) throw DimError("univariate bounds need d = 1, got d = " + std::to_string(data.dim()));
        GroupConstants::make(n1_, n2_);
        incomplete_.resize(data.n_total());
        for (std::size_t k = 0; k < data.n_total(); ++k)
            incomplete_[k] = data.source(k).row_complete(data.local(k)) ? 0 : 1;
        sweep_ = detail::UnivariateSweep(detail::complete_scalar_points(data), p.beta());
    }

    std::size_t n_total() const override { return incomplete_.size(); }

    DecompTerms decompose(std::span<const std::uint8_t> labels) const override {
        const auto [n1, n2] = group_sizes(labels);
        const auto c = GroupConstants::make(n1, n2);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (incomplete_[k]) (labels[k] == 0 ? m1 : m2) += 1.0;

        DecompTerms t{c.c1, c.c2, c.c3, 0.0, {}, {}, {}};
        t.a2 = sweep_.pair_sums(labels).statistic(c);
        t.a1_bounds = detail::counting_a1(c, m1, m2);
        if (m1 == 0.0 && m2 == 0.0) return t;

        std::vector<double> sx, sy;
        sweep_.kernel_profiles(labels, sx, sy);
        double lo1 = 0.0, hi1 = 0.0, lo2 = 0.0, hi2 = 0.0;
        for (std::size_t k = 0; k < sx.size(); ++k) {
            const double t1 = c.c1 * sx[k] - c.c3 * sy[k];
            const double t2 = c.c2 * sy[k] - c.c3 * sx[k];
            lo1 = std::min(lo1, t1);
            hi1 = std::max(hi1, t1);
            lo2 = std::min(lo2, t2);
            hi2 = std::max(hi2, t2);
        }
        t.a3_bounds = {m1 * lo1, m1 * hi1};
        t.a4_bounds = {m2 * lo2, m2 * hi2};
        return t;
    }

private:
    std::size_t n1_, n2_;
    std::vector<std::uint8_t> incomplete_;
    detail::UnivariateSweep sweep_;
};

// Arbitrary per-entry missingness. A1 via incomplete-kernel sums; A3/A4 via per-row clamped
// terms built from incomplete-kernel prefactors and max-distance attenuations.
class MultivariateBoundEngine final : public BoundEngine {
public:
    MultivariateBoundEngine(const TwoSampleData& data, KernelParams p, bool materialize_gram = false)
        : n_(data.n_total()), d_(data.dim()), beta_(p.beta()) {
        GroupConstants::make(data.n1(), data.n2());
        values_.assign(n_ * d_, 0.0);
        mask_.assign(n_ * d_, 0);
        complete_.assign(n_, 0);
        for (std::size_t k = 0; k < n_; ++k) {
            const MaskedMatrix& m = data.source(k);
            const std::size_t r = data.local(k);
            for (std::size_t l = 0; l < d_; ++l)
                if (m.observed(r, l)) {
                    values_[k * d_ + l] = m.value(r, l);
                    mask_[k * d_ + l] = 1;
                }
            complete_[k] = m.row_complete(r) ? 1 : 0;
        }
        slot_.assign(n_, 0);
        for (std::size_t k = 0; k < n_; ++k) slot_[k] = complete_[k] ? n_complete_++ : n_incomplete_++;

        if (d_ == 1) sweep_ = detail::UnivariateSweep(detail::complete_scalar_points(data), beta_);
        if (n_complete_ > 0) build_attenuation();
        if (materialize_gram) {
            gram_.assign(n_ * n_, 1.0);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j) gram_[i * n_ + j] = gram_[j * n_ + i] = compute_kernel(i, j);
        }
    }

    std::size_t n_total() const override { return n_; }

    double kernel(std::size_t i, std::size_t j) const {
        return gram_.empty() ? compute_kernel(i, j) : gram_[i * n_ + j];
    }

    DecompTerms decompose(std::span<const std::uint8_t> labels) const override {
        const auto [n1, n2] = group_sizes(labels);
        const auto c = GroupConstants::make(n1, n2);
        std::vector<std::size_t> xc, xi, yc, yi;
        for (std::size_t k = 0; k < n_; ++k) {
            const bool in_x = labels[k] == 0;
            if (complete_[k])
                (in_x ? xc : yc).push_back(k);
            else
                (in_x ? xi : yi).push_back(k);
        }
        DecompTerms t{c.c1, c.c2, c.c3, 0.0, {}, {}, {}};
        const double m1 = static_cast<double>(xi.size()), m2 = static_cast<double>(yi.size());
        if (n_complete_ == 0) {
            t.a1_bounds = detail::counting_a1(c, m1, m2);
            return t;
        }

        auto k = [this](std::size_t i, std::size_t j) { return kernel(i, j); };
        t.a2 = (d_ == 1 ? sweep_->pair_sums(labels) : detail::pair_sums(k, xc, yc)).statistic(c);
        if (xi.empty() && yi.empty()) return t;

        const auto inc = detail::pair_sums(k, xi, yi);
        t.a1_bounds = {-c.c3 * inc.xy, c.c1 * inc.xx + c.c2 * inc.yy};

        // Upper: same-sample terms at their observed-part value, cross terms attenuated.
        // Lower: same-sample terms attenuated, cross terms at their observed-part value.
        auto clamped = [&](std::span<const std::size_t> rows, std::span<const std::size_t> same,
                           std::span<const std::size_t> other, double c_same, BoundInterval& out) {
            CompensatedSum hi_sum, lo_sum;
            for (std::size_t i : rows) {
                CompensatedSum s_same, s_same_att, s_other, s_other_att;
                const double* att = &attenuation_[slot_[i] * n_complete_];
                for (std::size_t j : same) {
                    const double kv = kernel(i, j);
                    s_same += kv;
                    s_same_att += kv * att[slot_[j]];
                }
                for (std::size_t j : other) {
                    const double kv = kernel(i, j);
                    s_other += kv;
                    s_other_att += kv * att[slot_[j]];
                }
                hi_sum += std::max(0.0, c_same * s_same.value() - c.c3 * s_other_att.value());
                lo_sum += std::min(0.0, c_same * s_same_att.value() - c.c3 * s_other.value());
            }
            out = {lo_sum.value(), hi_sum.value()};
        };
        clamped(xi, xc, yc, c.c1, t.a3_bounds);
        clamped(yi, yc, xc, c.c2, t.a4_bounds);
        return t;
    }

private:
    double compute_kernel(std::size_t i, std::size_t j) const {
        const double* a = &values_[i * d_];
        const double* b = &values_[j * d_];
        const std::uint8_t* ma = &mask_[i * d_];
        const std::uint8_t* mb = &mask_[j * d_];
        double s = 0.0;
        if (complete_[i] && complete_[j]) {
            for (std::size_t l = 0; l < d_; ++l) s += std::fabs(a[l] - b[l]);
        } else {
            for (std::size_t l = 0; l < d_; ++l)
                if (ma[l] && mb[l]) s += std::fabs(a[l] - b[l]);
        }
        return std::exp(-beta_ * s);
    }

    // attenuation_[slot(i) * C + slot(j)] = exp(-beta * sum_{l missing in i} hhat_j(l)) for
    // incomplete i and complete j, where hhat_j(l) is the largest |z_j(l) - w(l)| over
    // fully observed pooled rows w (attained at the column extremes).
    void build_attenuation() {
        std::vector<double> lo(d_, std::numeric_limits<double>::infinity());
        std::vector<double> hi(d_, -std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < n_; ++k)
            if (complete_[k])
                for (std::size_t l = 0; l < d_; ++l) {
                    lo[l] = std::min(lo[l], values_[k * d_ + l]);
                    hi[l] = std::max(hi[l], values_[k * d_ + l]);
                }
        std::vector<double> hhat(n_complete_ * d_);
        for (std::size_t k = 0; k < n_; ++k)
            if (complete_[k])
                for (std::size_t l = 0; l < d_; ++l) {
                    const double v = values_[k * d_ + l];
                    hhat[slot_[k] * d_ + l] = std::max(v - lo[l], hi[l] - v);
                }
        attenuation_.assign(n_incomplete_ * n_complete_, 0.0);
        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < n_; ++i) {
            if (complete_[i]) continue;
            missing.clear();
            for (std::size_t l = 0; l < d_; ++l)
                if (!mask_[i * d_ + l]) missing.push_back(l);
            double* row = &attenuation_[slot_[i] * n_complete_];
            for (std::size_t q = 0; q < n_complete_; ++q) {
                double s = 0.0;
                for (std::size_t l : missing) s += hhat[q * d_ + l];
                row[q] = std::exp(-beta_ * s);
            }
        }
    }

    std::size_t n_, d_;
    double beta_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
    std::vector<std::uint8_t> complete_;
    std::vector<std::size_t> slot_;  // position among complete or among incomplete rows
    std::size_t n_complete_ = 0;
    std::size_t n_incomplete_ = 0;
    std::vector<double> attenuation_;
    std::vector<double> gram_;
    std::optional<detail::UnivariateSweep> sweep_;
};

// Univariate engine for d = 1, multivariate otherwise. A materialized Gram matrix pays off
// when the engine is reused across many label assignments (permutation tests).
inline std::unique_ptr<BoundEngine> make_bound_engine(const TwoSampleData& data, KernelParams p,
                                                      bool materialize_gram = false) {
    if (data.dim() == 1) return std::make_unique<UnivariateBoundEngine>(data, p);
    return std::make_unique<MultivariateBoundEngine>(data, p, materialize_gram);
}

inline BoundInterval mmd_bounds_univariate(const TwoSampleData& data, KernelParams p) {
    return UnivariateBoundEngine(data, p).bounds(detail::identity_labels(data.n1(), data.n2()));
}

inline BoundInterval mmd_bounds_multivariate(const TwoSampleData& data, KernelParams p) {
    return MultivariateBoundEngine(data, p).bounds(detail::identity_labels(data.n1(), data.n2()));
}

inline BoundInterval mmd_bounds(const TwoSampleData& data, KernelParams p) {
    return make_bound_engine(data, p)->bounds(detail::identity_labels(data.n1(), data.n2()));
}

inline DecompTerms decompose(const TwoSampleData& data, KernelParams p) {
    return make_bound_engine(data, p)->decompose(detail::identity_labels(data.n1(), data.n2()));
}

}  // namespace mmdmiss
