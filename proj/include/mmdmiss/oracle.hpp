#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "mmd.hpp"
#include "parallel.hpp"
#include "random.hpp"

// Brute-force checks of the bound machinery. Kernel evaluation here is written out
// independently (long double loops) and never calls into the library kernels.
namespace mmdmiss::oracle {

constexpr double kTolerance = 1e-9;

inline long double ref_kernel(const MaskedMatrix& a, std::size_t i, const MaskedMatrix& b, std::size_t j,
                              long double beta) {
    long double dist = 0.0L;
    for (std::size_t l = 0; l < a.cols(); ++l) {
        const long double diff = static_cast<long double>(a.value(i, l)) - static_cast<long double>(b.value(j, l));
        dist += diff < 0 ? -diff : diff;
    }
    return std::exp(-beta * dist);
}

// Unbiased statistic by its three double sums, ignoring masks.
inline double reference_mmd(const MaskedMatrix& x, const MaskedMatrix& y, double beta) {
    const std::size_t n = x.rows(), m = y.rows();
    if (n < 2 || m < 2) throw SampleSizeError("reference statistic needs two rows per sample");
    const long double b = beta;
    long double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) sxx += ref_kernel(x, i, x, j, b);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) syy += ref_kernel(y, i, y, j, b);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) sxy += ref_kernel(x, i, y, j, b);
    const long double N = n, M = m;
    return static_cast<double>(sxx / (N * (N - 1)) + syy / (M * (M - 1)) - 2 * sxy / (N * M));
}

struct Violation {
    std::uint64_t instance_seed = 0;
    std::size_t imputation = 0;
    double statistic = 0.0;
    BoundInterval interval;
};

struct SweepReport {
    std::size_t instances = 0;
    std::size_t imputations_per_instance = 0;
    std::vector<Violation> violations;
    double max_overshoot = 0.0;

    void merge(const SweepReport& other) {
        instances += other.instances;
        imputations_per_instance = std::max(imputations_per_instance, other.imputations_per_instance);
        violations.insert(violations.end(), other.violations.begin(), other.violations.end());
        max_overshoot = std::max(max_overshoot, other.max_overshoot);
    }
    bool clean() const { return violations.empty(); }
};

struct MissingCell {
    int group;  // 0 = X, 1 = Y
    std::size_t row, col;
};

inline std::vector<MissingCell> missing_cells(const TwoSampleData& data) {
    std::vector<MissingCell> out;
    for (int g = 0; g < 2; ++g) {
        const MaskedMatrix& m = g == 0 ? data.x : data.y;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                if (!m.observed(i, j)) out.push_back({g, i, j});
    }
    return out;
}

// Observed values of each column, pooled over both samples.
inline std::vector<std::vector<double>> observed_columns(const TwoSampleData& data) {
    std::vector<std::vector<double>> cols(data.dim());
    for (const MaskedMatrix* m : {&data.x, &data.y})
        for (std::size_t i = 0; i < m->rows(); ++i)
            for (std::size_t j = 0; j < m->cols(); ++j)
                if (m->observed(i, j)) cols[j].push_back(m->value(i, j));
    return cols;
}

// Draws `n_draws` completions. Each missing cell takes, with equal odds, a pooled observed
// value of its column, a uniform value on [min - range, max + range], or an extreme point
// center +/- 10 range. Every completion is scored with reference_mmd and checked against
// `interval` (default: the library's analytic bounds).
inline SweepReport random_imputation_sweep(const TwoSampleData& data, KernelParams p, std::size_t n_draws,
                                           std::uint64_t seed, std::optional<BoundInterval> interval = {}) {
    if (data.n1() < 2 || data.n2() < 2) throw SampleSizeError("sweep needs two rows per sample");
    const BoundInterval bounds = interval ? *interval : mmd_bounds(data, p);
    const auto cells = missing_cells(data);
    SweepReport rep;
    rep.instances = 1;
    if (cells.empty()) return rep;
    rep.imputations_per_instance = n_draws;

    const auto cols = observed_columns(data);
    std::vector<double> lo(data.dim(), -1.0), hi(data.dim(), 1.0);
    for (std::size_t j = 0; j < data.dim(); ++j)
        if (!cols[j].empty()) {
            lo[j] = *std::min_element(cols[j].begin(), cols[j].end());
            hi[j] = *std::max_element(cols[j].begin(), cols[j].end());
        }
    Rng rng(seed);
    TwoSampleData work = data;
    for (std::size_t draw = 0; draw < n_draws; ++draw) {
        for (const auto& c : cells) {
            const double range = hi[c.col] - lo[c.col] > 0 ? hi[c.col] - lo[c.col] : 1.0;
            double v;
            const auto kind = cols[c.col].empty() ? 1 + uniform_below(rng, 2) : uniform_below(rng, 3);
            if (kind == 0) {
                v = cols[c.col][uniform_below(rng, cols[c.col].size())];
            } else if (kind == 1) {
                v = lo[c.col] - range + uniform_unit(rng) * 3.0 * range;
            } else {
                const double center = 0.5 * (lo[c.col] + hi[c.col]);
                v = center + (uniform_below(rng, 2) ? 10.0 : -10.0) * range;
            }
            (c.group == 0 ? work.x : work.y).set(c.row, c.col, v);
        }
        const double stat = reference_mmd(work.x, work.y, p.beta());
        const double over = std::max(bounds.lower - stat, stat - bounds.upper);
        rep.max_overshoot = std::max(rep.max_overshoot, over);
        if (over > kTolerance) rep.violations.push_back({seed, draw, stat, bounds});
    }
    return rep;
}

// Candidate values for each missing cell: the distinct observed values of its column plus a
// far point on each side, where every kernel term through that cell has vanished.
inline std::vector<std::vector<double>> grid_candidates(const TwoSampleData& data, KernelParams p) {
    const auto cols = observed_columns(data);
    std::vector<std::vector<double>> out;
    for (const auto& c : missing_cells(data)) {
        std::set<double> vals(cols[c.col].begin(), cols[c.col].end());
        const double lo = vals.empty() ? 0.0 : *vals.begin();
        const double hi = vals.empty() ? 0.0 : *vals.rbegin();
        const double far = (hi - lo) + 800.0 / p.beta();
        std::vector<double> cand(vals.begin(), vals.end());
        cand.push_back(lo - far);
        cand.push_back(hi + far);
        out.push_back(std::move(cand));
    }
    return out;
}

struct GridWitness {
    BoundInterval interval;
    std::size_t evaluations = 0;
};

// Exact min and max of the statistic over the joint candidate grid. A witness only: the
// analytic interval has to contain it.
inline GridWitness grid_extreme_search(const TwoSampleData& data, KernelParams p, std::size_t cap = 1'000'000) {
    const auto cells = missing_cells(data);
    const auto cand = grid_candidates(data, p);
    double total = 1.0;
    for (const auto& c : cand) total *= static_cast<double>(c.size());
    if (total > static_cast<double>(cap))
        throw GridTooLarge("grid of " + std::to_string(total) + " points exceeds cap " + std::to_string(cap));
    TwoSampleData work = data;
    std::vector<std::size_t> odo(cells.size(), 0);
    GridWitness w{{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}, 0};
    for (;;) {
        for (std::size_t k = 0; k < cells.size(); ++k)
            (cells[k].group == 0 ? work.x : work.y).set(cells[k].row, cells[k].col, cand[k][odo[k]]);
        const double stat = reference_mmd(work.x, work.y, p.beta());
        w.interval.lower = std::min(w.interval.lower, stat);
        w.interval.upper = std::max(w.interval.upper, stat);
        ++w.evaluations;
        std::size_t k = 0;
        while (k < odo.size() && ++odo[k] == cand[k].size()) odo[k++] = 0;
        if (k == odo.size()) break;
    }
    return w;
}

// Small random instance: n1, n2 in [2, 8], d in {1, .., 4}, 1 to 4 missing cells, values on
// a coarse lattice so ties occur, and beta in [0.2, 2].
struct RandomInstance {
    TwoSampleData data;
    KernelParams params;
};

inline RandomInstance random_instance(std::uint64_t seed, std::size_t max_missing = 4) {
    Rng rng(seed);
    const std::size_t n1 = 2 + uniform_below(rng, 7), n2 = 2 + uniform_below(rng, 7);
    const std::size_t d = 1 + uniform_below(rng, 4);
    auto fill = [&](std::size_t n, double shift) {
        MaskedMatrix m(n, d);
        std::normal_distribution<double> dist(shift, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) m.set(i, j, std::round(dist(rng) * 8.0) / 8.0);
        return m;
    };
    const double shift = uniform_unit(rng) < 0.5 ? 0.0 : 1.0;
    TwoSampleData data(fill(n1, 0.0), fill(n2, shift));
    const std::size_t cells = (n1 + n2) * d;
    const std::size_t k = std::min<std::size_t>(1 + uniform_below(rng, max_missing), cells);
    std::vector<std::size_t> all(cells);
    for (std::size_t i = 0; i < cells; ++i) all[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(all[i], all[i + uniform_below(rng, cells - i)]);
        const std::size_t row = all[i] / d, col = all[i] % d;
        (row < n1 ? data.x : data.y).set_missing(row < n1 ? row : row - n1, col);
    }
    return {std::move(data), KernelParams(0.2 + 1.8 * uniform_unit(rng))};
}

struct VerifyConfig {
    std::size_t instances = 100;
    std::size_t draws = 1000;
    std::uint64_t seed = 0;
    std::size_t grid_cap = 20'000;
};

struct VerifyReport {
    SweepReport sweep;
    std::size_t grid_instances = 0;
    std::size_t grid_failures = 0;
    double grid_max_overshoot = 0.0;

    bool clean() const { return sweep.clean() && grid_failures == 0; }
};

// The default verification run: random sweeps and grid witnesses over random instances.
inline VerifyReport verify_random_instances(const VerifyConfig& cfg, unsigned threads = 1) {
    std::vector<SweepReport> sweeps(cfg.instances);
    std::vector<int> grid_state(cfg.instances, -1);  // -1 skipped, 0 ok, 1 failed
    std::vector<double> grid_over(cfg.instances, 0.0);
    parallel_for(cfg.instances, threads, [&](std::size_t i) {
        const std::uint64_t s = derive_seed(cfg.seed, {i});
        const auto inst = random_instance(s);
        const BoundInterval bounds = mmd_bounds(inst.data, inst.params);
        sweeps[i] = random_imputation_sweep(inst.data, inst.params, cfg.draws, derive_seed(s, {1}), bounds);
        try {
            const auto w = grid_extreme_search(inst.data, inst.params, cfg.grid_cap);
            grid_over[i] = std::max(bounds.lower - w.interval.lower, w.interval.upper - bounds.upper);
            grid_state[i] = grid_over[i] > kTolerance ? 1 : 0;
        } catch (const GridTooLarge&) {
        }
    });
    VerifyReport out;
    for (std::size_t i = 0; i < cfg.instances; ++i) {
        out.sweep.merge(sweeps[i]);
        if (grid_state[i] >= 0) {
            ++out.grid_instances;
            out.grid_failures += grid_state[i] == 1;
            out.grid_max_overshoot = std::max(out.grid_max_overshoot, grid_over[i]);
        }
    }
    return out;
}

}  // namespace mmdmiss::oracle
