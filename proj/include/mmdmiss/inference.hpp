#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bounds.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "mmd.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "summation.hpp"

namespace mmdmiss {

constexpr std::size_t kDefaultPermutations = 100;
constexpr double kDefaultAlpha = 0.05;

struct PermutationPlan {
    std::size_t n_total = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::uint32_t>> sigmas;

    std::size_t b() const noexcept { return sigmas.size(); }
};

// B independent uniform permutations of {0..n_total-1} by seeded Fisher-Yates.
inline PermutationPlan make_plan(std::size_t n_total, std::size_t b, std::uint64_t seed) {
    if (b < 1) throw ConfigError("number of permutations must be at least 1");
    if (n_total < 2) throw SampleSizeError("permutation plan needs at least 2 pooled rows");
    PermutationPlan plan{n_total, seed, {}};
    plan.sigmas.reserve(b);
    Rng rng(seed);
    for (std::size_t r = 0; r < b; ++r) {
        std::vector<std::uint32_t> s(n_total);
        std::iota(s.begin(), s.end(), 0u);
        for (std::size_t i = n_total - 1; i > 0; --i)
            std::swap(s[i], s[uniform_below(rng, i + 1)]);
        plan.sigmas.push_back(std::move(s));
    }
    return plan;
}

enum class TestMethod { PermutationBound, NormalityBound, PermutationExact };

inline const char* to_string(TestMethod m) {
    switch (m) {
        case TestMethod::PermutationBound: return "perm-bound";
        case TestMethod::NormalityBound: return "normal-bound";
        case TestMethod::PermutationExact: return "perm-exact";
    }
    return "?";
}

struct TestOutcome {
    double p_upper = 1.0;
    double alpha = kDefaultAlpha;
    bool reject = false;
    TestMethod method = TestMethod::PermutationBound;
    BoundInterval statistic;      // [lower, upper] of the observed statistic
    std::size_t b = 0;            // permutations, when applicable
    std::optional<double> v_bar;  // variance bound, normality method only
    double beta = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

inline void fill_labels(std::span<const std::uint32_t> sigma, std::size_t n1, std::vector<std::uint8_t>& labels) {
    labels.resize(sigma.size());
    for (std::size_t k = 0; k < sigma.size(); ++k) labels[sigma[k]] = k < n1 ? 0 : 1;
}

// p = (1 + #{i : upper(perm_i) >= lower(observed)}) / (B + 1).
inline TestOutcome permutation_outcome(const BoundEngine& engine, std::size_t n1, std::size_t n2,
                                       const PermutationPlan& plan, double alpha, unsigned threads,
                                       TestMethod method) {
    check_alpha(alpha);
    if (plan.n_total != n1 + n2)
        throw ConfigError("permutation plan covers " + std::to_string(plan.n_total) + " rows, data has " +
                          std::to_string(n1 + n2));
    const BoundInterval observed = engine.bounds(identity_labels(n1, n2));
    std::vector<std::uint8_t> hits(plan.b(), 0);
    parallel_for(plan.b(), threads, [&](std::size_t r) {
        std::vector<std::uint8_t> labels;
        fill_labels(plan.sigmas[r], n1, labels);
        hits[r] = engine.bounds(labels).upper >= observed.lower ? 1 : 0;
    });
    const std::size_t count = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), std::uint8_t{1}));
    TestOutcome out;
    out.p_upper = static_cast<double>(1 + count) / static_cast<double>(plan.b() + 1);
    out.alpha = alpha;
    out.reject = out.p_upper <= alpha;
    out.method = method;
    out.statistic = observed;
    out.b = plan.b();
    return out;
}

}  // namespace detail

// Standard permutation p-value on fully observed samples. Ties count toward the p-value.
inline TestOutcome permutation_p_exact(const MaskedMatrix& x, const MaskedMatrix& y, KernelParams p,
                                       const PermutationPlan& plan, double alpha = kDefaultAlpha,
                                       unsigned threads = 1) {
    const TwoSampleData data(x, y);
    GroupConstants::make(data.n1(), data.n2());
    if (!data.complete())
        throw MissingDataError("perm-exact needs fully observed data; use perm-bound for missing values");
    const auto engine = make_bound_engine(data, p, true);
    auto out = detail::permutation_outcome(*engine, data.n1(), data.n2(), plan, alpha, threads,
                                           TestMethod::PermutationExact);
    out.beta = p.beta();
    return out;
}

// Upper bound on the permutation p-value of every imputation: observed lower bound against
// each permuted split's upper bound. Missing entries travel with their rows.
inline TestOutcome permutation_p_bound(const TwoSampleData& data, KernelParams p, const PermutationPlan& plan,
                                       double alpha = kDefaultAlpha, unsigned threads = 1) {
    GroupConstants::make(data.n1(), data.n2());
    const auto engine = make_bound_engine(data, p, true);
    auto out = detail::permutation_outcome(*engine, data.n1(), data.n2(), plan, alpha, threads,
                                           TestMethod::PermutationBound);
    out.beta = p.beta();
    return out;
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct StudentizedBound {
    double stat_lower = 0.0;
    double stat_upper = 0.0;
    double v_bar = 0.0;
    double c_nm = 0.0;
};

inline double studentized_constant(std::size_t n, std::size_t m) {
    const double a = static_cast<double>(n), b = static_cast<double>(m);
    return 2.0 / (a * (a - 1.0)) + 4.0 / (a * b) + 2.0 / (b * (b - 1.0));
}

namespace detail {

// Centered-square variance formula over an N x N matrix pair:
//   A*_{st} = upper_{st} - lowcol_t - lowcol_s + grand
//   V = sum_{s != t} (A*_{st})^2 / (N (N - 3)) - 1 / ((N - 1)(N - 3))
// upper(s, t) and lower(s, t) are callables returning the off-diagonal entries; both
// diagonals are 1.
template <class Upper, class Lower>
double centered_variance(std::size_t n, const Upper& upper, const Lower& lower) {
    const double N = static_cast<double>(n);
    std::vector<CompensatedSum> low_col(n);
    CompensatedSum grand;
    for (std::size_t s = 0; s < n; ++s) {
        low_col[s] += 1.0;
        grand += 1.0;
        for (std::size_t t = s + 1; t < n; ++t) {
            const double lo = lower(s, t);
            low_col[s] += lo;
            low_col[t] += lo;
            grand += 2.0 * upper(s, t);
        }
    }
    std::vector<double> col(n);
    for (std::size_t s = 0; s < n; ++s) col[s] = low_col[s].value() / (N - 2.0);
    const double g = grand.value() / ((N - 1.0) * (N - 2.0));
    CompensatedSum sq;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = s + 1; t < n; ++t) {
            const double a = upper(s, t) - col[t] - col[s] + g;
            sq += 2.0 * a * a;
        }
    return sq.value() / (N * (N - 3.0)) - 1.0 / ((N - 1.0) * (N - 3.0));
}

}  // namespace detail

// Variance-proxy upper bound: incomplete-kernel values as the upper matrix, exact kernel
// values with every entry touching an incomplete row zeroed as the lower matrix.
inline StudentizedBound variance_bound(const TwoSampleData& data, KernelParams p) {
    const std::size_t n = data.n_total();
    if (n < 4) throw SampleSizeError("variance bound needs at least 4 pooled rows");
    GroupConstants::make(data.n1(), data.n2());
    std::vector<std::uint8_t> complete(n);
    bool any_observed = false;
    for (std::size_t k = 0; k < n; ++k) {
        complete[k] = data.source(k).row_complete(data.local(k)) ? 1 : 0;
        any_observed = any_observed || !data.source(k).row_fully_missing(data.local(k));
    }
    if (!any_observed) throw NoCompleteRows("every row is fully missing");

    const detail::PooledKernel kernel(data, p);
    auto lower = [&](std::size_t s, std::size_t t) { return complete[s] && complete[t] ? kernel(s, t) : 0.0; };
    StudentizedBound out;
    out.v_bar = detail::centered_variance(n, kernel, lower);
    const auto stat = mmd_bounds(data, p);
    out.stat_lower = stat.lower;
    out.stat_upper = stat.upper;
    out.c_nm = studentized_constant(data.n1(), data.n2());
    return out;
}

// Kernel entries lie in [0, 1], so a variance bound this small is rounding noise.
constexpr double kVarianceFloor = 1e-14;

// 1 when the statistic's lower bound is negative; else 1 - Phi(lower / sqrt(c V)).
inline double normality_p_upper(const StudentizedBound& sb) {
    if (sb.stat_lower < 0.0) return 1.0;
    if (!(sb.v_bar > kVarianceFloor)) throw DegenerateVariance("variance bound is not positive");
    return 1.0 - normal_cdf(sb.stat_lower / std::sqrt(sb.c_nm * sb.v_bar));
}

inline TestOutcome normality_p_bound(const TwoSampleData& data, KernelParams p, double alpha = kDefaultAlpha) {
    detail::check_alpha(alpha);
    const auto sb = variance_bound(data, p);
    TestOutcome out;
    out.method = TestMethod::NormalityBound;
    out.alpha = alpha;
    out.p_upper = normality_p_upper(sb);
    out.reject = out.p_upper <= alpha;
    out.statistic = {sb.stat_lower, sb.stat_upper};
    out.v_bar = sb.v_bar;
    out.beta = p.beta();
    if (data.n1() < 25 || data.n2() < 25 || data.dim() < 50)
        out.warnings.emplace_back("normal approximation intended for n1, n2 >= 25 and d >= 50");
    return out;
}

}  // namespace mmdmiss
