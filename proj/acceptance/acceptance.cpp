// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mmdmiss/baselines.hpp"
#include "mmdmiss/cli.hpp"
#include "mmdmiss/oracle.hpp"
#include "mmdmiss/simulation.hpp"

using namespace mmdmiss;

namespace {

// Every threshold used below.
constexpr double kContainTol = 1e-9;
constexpr std::size_t kC1Instances = 100, kC1Draws = 1000;
constexpr double kC1Seconds = 120.0;
constexpr std::size_t kC2Datasets = 50;
constexpr std::size_t kC3Instances = 1000;
constexpr double kC3Tol = 1e-12;
constexpr std::size_t kC4Instances = 50, kC4Draws = 100;
constexpr double kC5NullMax = 0.10, kC5BaselineMin = 0.15, kC5PowerMin = 0.85;
constexpr double kC6BoundMax = 0.10, kC6BaselineMin = 0.5;
constexpr double kC7Max = 0.08;
constexpr std::size_t kC9Instances = 10, kC9Draws = 1000;
constexpr std::uint64_t kSeed = 1;

const std::string kRoot = MMDMISS_SOURCE_DIR;

struct Result {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

unsigned threads() { return default_threads(); }

// Random completion of every missing cell: normal draws around the observed column spread.
TwoSampleData impute_randomly(const TwoSampleData& data, Rng& rng) {
    std::normal_distribution<double> z(0.0, 3.0);
    TwoSampleData out = data;
    for (const auto& c : oracle::missing_cells(data)) (c.group == 0 ? out.x : out.y).set(c.row, c.col, z(rng));
    return out;
}

bool complete_data_exact(const TwoSampleData& data, KernelParams p, const PermutationPlan& plan) {
    const double v = mmd_u(data.x, data.y, p);
    const auto b = mmd_bounds(data, p);
    const auto bound = permutation_p_bound(data, p, plan);
    const auto exact = permutation_p_exact(data.x, data.y, p, plan);
    return b.lower == v && b.upper == v && bound.p_upper == exact.p_upper && bound.reject == exact.reject;
}

bool p_bound_dominates(const TwoSampleData& data, KernelParams p, const PermutationPlan& plan, std::size_t draws,
                       Rng& rng, std::size_t& checked) {
    const double pbar = permutation_p_bound(data, p, plan).p_upper;
    for (std::size_t k = 0; k < draws; ++k) {
        const auto full = impute_randomly(data, rng);
        ++checked;
        if (permutation_p_exact(full.x, full.y, p, plan).p_upper > pbar) return false;
    }
    return true;
}

Result c1() {
    const auto t0 = std::chrono::steady_clock::now();
    oracle::VerifyConfig cfg;
    cfg.instances = kC1Instances;
    cfg.draws = kC1Draws;
    cfg.seed = kSeed;
    const auto rep = oracle::verify_random_instances(cfg, threads());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = rep.sweep.clean() && rep.grid_failures == 0 && rep.grid_instances > 0 && secs < kC1Seconds;
    return {ok, fmt("%zu instances x %zu draws, %zu violations, max overshoot %.2e, grid %zu/%zu ok, %.1f s",
                    rep.sweep.instances, rep.sweep.imputations_per_instance, rep.sweep.violations.size(),
                    rep.sweep.max_overshoot, rep.grid_instances - rep.grid_failures, rep.grid_instances, secs)};
}

Result c2() {
    std::size_t good = 0;
    for (std::size_t i = 0; i < kC2Datasets; ++i) {
        const std::uint64_t s = derive_seed(kSeed, {2, i});
        Rng rng(s);
        const std::size_t n1 = 5 + uniform_below(rng, 30), n2 = 5 + uniform_below(rng, 30);
        const std::size_t d = 1 + uniform_below(rng, 6);
        const TwoSampleData data(gen_gaussian(n1, d, 0.0, derive_seed(s, {1})),
                                 gen_gaussian(n2, d, 0.5, derive_seed(s, {2})));
        const auto plan = make_plan(n1 + n2, 100, derive_seed(s, {3}));
        good += complete_data_exact(data, median_heuristic(data), plan);
    }
    return {good == kC2Datasets, fmt("%zu/%zu complete datasets exact with identical p-values", good, kC2Datasets)};
}

Result c3() {
    std::size_t good = 0;
    for (std::size_t i = 0; i < kC3Instances; ++i) {
        const auto inst = oracle::random_instance(derive_seed(kSeed, {3, i}));
        const auto b = mmd_bounds(inst.data, inst.params), naive = naive_bounds(inst.data, inst.params);
        good += b.lower >= naive.lower - kC3Tol && b.upper <= naive.upper + kC3Tol;
    }
    return {good == kC3Instances, fmt("%zu/%zu intervals inside the 0/1 substitution interval", good, kC3Instances)};
}

Result c4() {
    std::size_t good = 0, checked = 0;
    for (std::size_t i = 0; i < kC4Instances; ++i) {
        const std::uint64_t s = derive_seed(kSeed, {4, i});
        const auto inst = oracle::random_instance(s);
        const auto plan = make_plan(inst.data.n_total(), 100, derive_seed(s, {1}));
        Rng rng(derive_seed(s, {2}));
        good += p_bound_dominates(inst.data, inst.params, plan, kC4Draws, rng, checked);
    }
    return {good == kC4Instances, fmt("%zu/%zu instances, %zu imputations, p_bar >= p throughout", good, kC4Instances,
                                      checked)};
}

Result c5() {
    const auto null_cfg = load_scenario(kRoot + "/scenarios/fig2.txt");
    auto alt_cfg = load_scenario(kRoot + "/scenarios/fig2_shift15.txt");
    alt_cfg.s = {0.05};
    alt_cfg.methods = {MethodId::PermBound};
    const auto null_t = run_scenario(null_cfg, threads()), alt_t = run_scenario(alt_cfg, threads());
    bool ok = true;
    std::string worst;
    double max_bound = 0;
    for (double s : null_cfg.s) max_bound = std::max(max_bound, null_t.at(MethodId::PermBound, s).rate());
    ok = ok && max_bound <= kC5NullMax;
    const double mean = null_t.at(MethodId::MeanImpute, 0.05).rate(), hot = null_t.at(MethodId::HotDeck, 0.05).rate();
    const double cd = null_t.at(MethodId::CaseDeletion, 0.05).rate();
    const double power = alt_t.at(MethodId::PermBound, 0.05).rate();
    ok = ok && mean >= kC5BaselineMin && hot >= kC5BaselineMin && power >= kC5PowerMin;
    return {ok, fmt("perm-bound null max %.2f (<= %.2f); s=0.05 mean-impute %.2f, hot-deck %.2f (>= %.2f), "
                    "case-deletion %.2f; power %.2f (>= %.2f)",
                    max_bound, kC5NullMax, mean, hot, kC5BaselineMin, cd, power, kC5PowerMin)};
}

Result c6() {
    const auto cfg = load_scenario(kRoot + "/scenarios/fig1_d1.txt");
    const auto t = run_scenario(cfg, threads());
    bool ok = true;
    std::string detail;
    for (auto m : {MethodId::CaseDeletion, MethodId::MeanImpute, MethodId::HotDeck}) {
        double prev = -1;
        detail += std::string(to_string(m)) + ":";
        for (std::size_t n : cfg.n1) {
            const double r = t.at(m, 0.05, n).rate();
            ok = ok && r >= prev;
            prev = r;
            detail += fmt(" %.2f", r);
        }
        ok = ok && prev > kC6BaselineMin;
        detail += "; ";
    }
    double bound = 0;
    for (std::size_t n : cfg.n1) bound = std::max(bound, t.at(MethodId::PermBound, 0.05, n).rate());
    ok = ok && bound <= kC6BoundMax;
    return {ok, detail + fmt("perm-bound max %.2f", bound)};
}

Result c7() {
    auto cfg = parse_scenario("n = 100\nd = 50\ns = 0, 0.05\nreps = 200\nmethods = normal-bound\n");
    cfg.seed = kSeed;
    const auto t = run_scenario(cfg, threads());
    const double full = t.at(MethodId::NormalBound, 0.0).rate(), miss = t.at(MethodId::NormalBound, 0.05).rate();
    return {full <= kC7Max && miss <= kC7Max,
            fmt("complete %.3f, MNAR s=0.05 %.3f (<= %.2f)", full, miss, kC7Max)};
}

Result c8() {
    cli::BenchConfig cfg;
    cfg.seed = kSeed;
    bool ok = true;
    std::string detail;
    for (const auto& c : cli::run_bench(cfg)) {
        ok = ok && c.pass();
        detail += fmt("%s slope %.2f in [%.1f, %.1f]; ", c.name.c_str(), c.slope, c.lo, c.hi);
    }
    return {ok, detail};
}

// 784-dimensional instances from the bundled digit subset with the region rule on Y.
TwoSampleData digit_instance(const DigitSet& set, std::uint64_t seed, std::size_t n, double s) {
    MissingnessSpec spec;
    spec.mechanism = Mechanism::MnistRegion;
    const auto x = sample_digits(set, 3, n, derive_seed(seed, {1}));
    const auto y = sample_digits(set, 3, n, derive_seed(seed, {2}));
    return {x, apply_mnist_region(y, s, spec, derive_seed(seed, {3}))};
}

Result c9() {
    const auto set = load_digit_csv(kRoot + "/data/digits_subset.csv");
    MissingnessSpec spec;
    std::string detail;
    bool ok = true;

    // Region masking: exactly the 196 block pixels of eligible rows, never an ineligible one.
    const auto region = spec.region.indices();
    const auto all = sample_digits(set, 3, 100, derive_seed(kSeed, {9, 0}));
    const auto masked = apply_mnist_region(all, 0.1, spec, derive_seed(kSeed, {9, 1}));
    std::size_t flagged = 0, bad = 0;
    std::vector<std::uint8_t> in_region(784, 0);
    for (auto j : region) in_region[j] = 1;
    for (std::size_t i = 0; i < all.rows(); ++i) {
        std::size_t lit = 0, inside = 0, outside = 0;
        for (auto j : region) lit += all.value(i, j) != 0.0;
        for (std::size_t j = 0; j < 784; ++j)
            if (!masked.observed(i, j)) ++(in_region[j] ? inside : outside);
        if (inside + outside == 0) continue;
        ++flagged;
        bad += outside != 0 || inside != 196 || lit <= 85;
    }
    ok = ok && region.size() == 196 && flagged == 10 && bad == 0;
    detail += fmt("region %zu px, %zu rows masked, %zu bad; ", region.size(), flagged, bad);

    // Containment.
    std::size_t viol = 0;
    double over = 0;
    for (std::size_t i = 0; i < kC9Instances; ++i) {
        const std::uint64_t s = derive_seed(kSeed, {9, 2, i});
        const auto data = digit_instance(set, s, 6, 0.34);
        const auto p = median_heuristic(data);
        const auto rep = oracle::random_imputation_sweep(data, p, kC9Draws, derive_seed(s, {4}));
        viol += rep.violations.size();
        over = std::max(over, rep.max_overshoot);
    }
    ok = ok && viol == 0;
    detail += fmt("containment %zu x %zu: %zu violations (max %.1e); ", kC9Instances, kC9Draws, viol, over);

    // Degeneracy, tightness and conservativeness.
    std::size_t exact = 0, tight = 0, dom = 0, checked = 0;
    for (std::size_t i = 0; i < kC9Instances; ++i) {
        const std::uint64_t s = derive_seed(kSeed, {9, 3, i});
        const auto full = digit_instance(set, s, 12, 0.0);
        const auto plan = make_plan(24, 100, derive_seed(s, {5}));
        exact += complete_data_exact(full, median_heuristic(full), plan);
        const auto data = digit_instance(set, s, 12, 0.25);
        const auto p = median_heuristic(data);
        const auto b = mmd_bounds(data, p), naive = naive_bounds(data, p);
        tight += b.lower >= naive.lower - kC3Tol && b.upper <= naive.upper + kC3Tol;
        Rng rng(derive_seed(s, {6}));
        dom += p_bound_dominates(data, p, plan, kC4Draws, rng, checked);
    }
    ok = ok && exact == kC9Instances && tight == kC9Instances && dom == kC9Instances;
    detail += fmt("exact %zu/%zu, inside naive %zu/%zu, p_bar >= p %zu/%zu", exact, kC9Instances, tight,
                  kC9Instances, dom, kC9Instances);
    return {ok, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Result()>>> criteria = {
        {"C1 bound containment", c1},      {"C2 complete-data degeneracy", c2}, {"C3 tighter than naive", c3},
        {"C4 conservative p-values", c4},  {"C5 univariate n=500 sweep", c5},   {"C6 growing-n null trend", c6},
        {"C7 normal-bound calibration", c7}, {"C8 scaling exponents", c8},      {"C9 digit instances", c9},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  %-30s %s (%.1f s)\n", r.pass ? "PASS" : "FAIL", name, r.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !r.pass;
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed ? 1 : 0;
}
