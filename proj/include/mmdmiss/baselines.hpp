#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "kernel.hpp"
#include "random.hpp"

namespace mmdmiss {

enum class BaselineKind { CaseDeletion, MeanImpute, HotDeck };

inline const char* to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::CaseDeletion: return "case-deletion";
        case BaselineKind::MeanImpute: return "mean-impute";
        case BaselineKind::HotDeck: return "hot-deck";
    }
    return "?";
}

struct BaselineMethod {
    BaselineKind kind = BaselineKind::CaseDeletion;
    std::uint64_t seed = 0;  // hot deck only
};

inline MaskedMatrix complete_rows_only(const MaskedMatrix& m) {
    return m.select_rows(partition_rows(m).complete_rows);
}

inline TwoSampleData case_delete(const TwoSampleData& data) {
    return {complete_rows_only(data.x), complete_rows_only(data.y)};
}

namespace detail {

// Univariate data borrows from the whole group; multivariate data from the same row.
template <class Fill>
MaskedMatrix impute_group(const MaskedMatrix& m, int group, Fill&& fill) {
    MaskedMatrix out = m;
    if (m.cols() == 1) {
        std::vector<double> donors;
        for (std::size_t i = 0; i < m.rows(); ++i)
            if (m.observed(i, 0)) donors.push_back(m.value(i, 0));
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (m.observed(i, 0)) continue;
            if (donors.empty())
                throw ImputeError(std::string("sample ") + (group == 0 ? "X" : "Y") + " has no observed values");
            out.set(i, 0, fill(donors, group, i, 0));
        }
        return out;
    }
    std::vector<double> donors;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (m.row_complete(i)) continue;
        donors.clear();
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (m.observed(i, j)) donors.push_back(m.value(i, j));
        if (donors.empty())
            throw ImputeError("row " + std::to_string(i) + " of sample " + (group == 0 ? "X" : "Y") +
                              " has no observed components");
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (!m.observed(i, j)) out.set(i, j, fill(donors, group, i, j));
    }
    return out;
}

}  // namespace detail

// Missing values become the mean of the donor pool (group for d = 1, row for d > 1).
inline TwoSampleData mean_impute(const TwoSampleData& data) {
    auto mean = [](const std::vector<double>& donors, int, std::size_t, std::size_t) {
        CompensatedSum s;
        for (double v : donors) s += v;
        return s.value() / static_cast<double>(donors.size());
    };
    return {detail::impute_group(data.x, 0, mean), detail::impute_group(data.y, 1, mean)};
}

// Missing values become uniform draws (with replacement) from the donor pool. Each cell
// draws from its own stream keyed by (seed, group, row, column).
inline TwoSampleData hot_deck_impute(const TwoSampleData& data, std::uint64_t seed) {
    auto draw = [seed](const std::vector<double>& donors, int group, std::size_t i, std::size_t j) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(group), i, j}));
        return donors[uniform_below(rng, donors.size())];
    };
    return {detail::impute_group(data.x, 0, draw), detail::impute_group(data.y, 1, draw)};
}

inline TwoSampleData apply_baseline(const TwoSampleData& data, const BaselineMethod& method) {
    switch (method.kind) {
        case BaselineKind::CaseDeletion: return case_delete(data);
        case BaselineKind::MeanImpute: return mean_impute(data);
        case BaselineKind::HotDeck: return hot_deck_impute(data, method.seed);
    }
    return data;
}

// Treat, re-select beta by the median heuristic on the treated data, then run the standard
// permutation test. Case deletion changes the pooled size; the plan is then regenerated with
// the same seed and permutation count.
inline TestOutcome run_baseline(const TwoSampleData& data, const BaselineMethod& method, double alpha,
                                const PermutationPlan& plan, unsigned threads = 1) {
    const TwoSampleData treated = apply_baseline(data, method);
    GroupConstants::make(treated.n1(), treated.n2());
    const KernelParams params = median_heuristic(treated);
    if (plan.n_total == treated.n_total())
        return permutation_p_exact(treated.x, treated.y, params, plan, alpha, threads);
    const auto resized = make_plan(treated.n_total(), plan.b(), plan.seed);
    return permutation_p_exact(treated.x, treated.y, params, resized, alpha, threads);
}

}  // namespace mmdmiss
