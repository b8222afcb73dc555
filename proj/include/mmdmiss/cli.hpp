#pragma once

// Command-line front end. Needs CLI11 and nlohmann/json on the include path.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "baselines.hpp"
#include "bounds.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "kernel.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "simulation.hpp"

namespace mmdmiss::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kInputError = 2, kPreconditionError = 3 };

struct TestReport {
    std::string method;
    std::size_t n1 = 0, n2 = 0, d = 0, n_missing_cells = 0;
    double beta = 0.0;
    double stat_lower = 0.0, stat_upper = 0.0;
    double p_upper = 1.0;
    double alpha = kDefaultAlpha;
    bool reject = false;
    std::vector<std::string> warnings;
};

inline nlohmann::ordered_json to_json(const TestReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["n1"] = r.n1;
    j["n2"] = r.n2;
    j["d"] = r.d;
    j["n_missing_cells"] = r.n_missing_cells;
    j["beta"] = r.beta;
    j["stat_lower"] = r.stat_lower;
    j["stat_upper"] = r.stat_upper;
    j["p_upper"] = r.p_upper;
    j["alpha"] = r.alpha;
    j["reject"] = r.reject;
    return j;
}

inline void write_report(std::ostream& out, const TestReport& r, const std::string& format) {
    const auto j = to_json(r);
    if (format == "json") {
        out << j.dump(2) << '\n';
        return;
    }
    std::string header, row;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!header.empty()) {
            header += ',';
            row += ',';
        }
        header += it.key();
        row += it->is_string() ? it->get<std::string>() : it->dump();
    }
    out << header << '\n' << row << '\n';
}

struct TestOptions {
    std::string x_path, y_path;
    std::string method = "perm-bound";
    double alpha = kDefaultAlpha;
    std::size_t b = kDefaultPermutations;
    std::string beta = "auto";
    std::uint64_t seed = 0;
    std::string na_token = "NA";
    bool skip_header = false;
    unsigned threads = 0;
};

inline std::optional<double> parse_beta(const std::string& s) {
    if (s == "auto") return std::nullopt;
    double v;
    if (!detail::parse_real(s, v)) throw ConfigError("--beta must be 'auto' or a positive number");
    KernelParams{v};
    return v;
}

// Runs one test on in-memory data. beta "auto" resolves on the data the method actually
// tests: fully observed rows for the bound methods, the treated sample for baselines.
inline TestReport run_test(const TwoSampleData& data, const TestOptions& opt) {
    const MethodId method = parse_method(opt.method);
    const auto beta = parse_beta(opt.beta);
    detail::check_alpha(opt.alpha);
    if (opt.b < 1) throw ConfigError("--b must be at least 1");
    const unsigned threads = opt.threads ? opt.threads : default_threads();

    TestReport r;
    r.method = to_string(method);
    r.n1 = data.n1();
    r.n2 = data.n2();
    r.d = data.dim();
    r.n_missing_cells = data.missing_cells();
    r.alpha = opt.alpha;

    TestOutcome out;
    switch (method) {
        case MethodId::PermBound:
        case MethodId::NormalBound: {
            const KernelParams p = beta ? KernelParams(*beta) : median_heuristic(data);
            out = method == MethodId::PermBound
                      ? permutation_p_bound(data, p, make_plan(data.n_total(), opt.b, opt.seed), opt.alpha, threads)
                      : normality_p_bound(data, p, opt.alpha);
            break;
        }
        case MethodId::PermExact: {
            if (!data.complete())
                throw MissingDataError("perm-exact needs fully observed data; use --method perm-bound");
            const KernelParams p = beta ? KernelParams(*beta) : median_heuristic(data);
            out = permutation_p_exact(data.x, data.y, p, make_plan(data.n_total(), opt.b, opt.seed), opt.alpha,
                                      threads);
            break;
        }
        default: {
            const BaselineKind kind = method == MethodId::CaseDeletion ? BaselineKind::CaseDeletion
                                      : method == MethodId::MeanImpute ? BaselineKind::MeanImpute
                                                                       : BaselineKind::HotDeck;
            const TwoSampleData treated = apply_baseline(data, {kind, opt.seed});
            GroupConstants::make(treated.n1(), treated.n2());
            const KernelParams p = beta ? KernelParams(*beta) : median_heuristic(treated);
            out = permutation_p_exact(treated.x, treated.y, p, make_plan(treated.n_total(), opt.b, opt.seed),
                                      opt.alpha, threads);
            break;
        }
    }
    r.beta = out.beta;
    r.stat_lower = out.statistic.lower;
    r.stat_upper = out.statistic.upper;
    r.p_upper = out.p_upper;
    r.reject = out.reject;
    r.warnings = out.warnings;
    return r;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct SlopeCheck {
    std::string name;
    std::vector<double> sizes;
    std::vector<double> seconds;
    double slope = 0.0;
    double lo = 0.0, hi = 0.0;

    bool pass() const { return slope >= lo && slope <= hi; }
};

// Least-squares slope of log(seconds) against log(size).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

// Gaussian samples with a tenth of the rows partly missing under the MNAR rules.
inline TwoSampleData bench_instance(std::size_t n, std::size_t d, std::uint64_t seed) {
    const auto x = gen_gaussian(n, d, 0.0, derive_seed(seed, {1}));
    const auto y = gen_gaussian(n, d, 0.0, derive_seed(seed, {2}));
    if (d == 1) return apply_mnar_univariate(x, y, 0.1, derive_seed(seed, {3}));
    MissingnessSpec spec;
    return apply_mnar_multivariate(x, y, 0.1, spec, derive_seed(seed, {3}));
}

// Median wall time of one full bound computation (setup included).
inline double time_bounds(const TwoSampleData& data, KernelParams p, std::size_t repeats) {
    std::vector<double> t;
    volatile double sink = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        sink = sink + mmd_bounds(data, p).width();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    return t[t.size() / 2];
}

struct BenchConfig {
    std::vector<std::size_t> univariate_n = {50'000, 100'000, 200'000, 400'000};
    std::vector<std::size_t> multivariate_n = {250, 500, 1000, 2000};
    std::size_t multivariate_d = 8;
    std::vector<std::size_t> dims = {64, 128, 256, 512};
    std::size_t dims_n = 300;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
};

inline std::vector<SlopeCheck> run_bench(const BenchConfig& cfg) {
    const KernelParams p(0.5);
    std::vector<SlopeCheck> out;
    auto sweep = [&](std::string name, const std::vector<std::size_t>& grid, auto make, double lo, double hi) {
        SlopeCheck c{std::move(name), {}, {}, 0.0, lo, hi};
        for (std::size_t g : grid) {
            const TwoSampleData data = make(g);
            c.sizes.push_back(static_cast<double>(g));
            c.seconds.push_back(time_bounds(data, p, cfg.repeats));
        }
        c.slope = loglog_slope(c.sizes, c.seconds);
        out.push_back(std::move(c));
    };
    sweep("d=1, n", cfg.univariate_n, [&](std::size_t n) { return bench_instance(n, 1, cfg.seed); }, 0.8, 1.2);
    sweep("d=" + std::to_string(cfg.multivariate_d) + ", n", cfg.multivariate_n,
          [&](std::size_t n) { return bench_instance(n, cfg.multivariate_d, cfg.seed); }, 1.7, 2.3);
    sweep("n=" + std::to_string(cfg.dims_n) + ", d", cfg.dims,
          [&](std::size_t d) { return bench_instance(cfg.dims_n, d, cfg.seed); }, 0.8, 1.2);
    return out;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

class OutputSink {
public:
    explicit OutputSink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw InputError("cannot write '" + path + "'");
        }
    }
    std::ostream& stream(std::ostream& fallback) { return file_.is_open() ? file_ : fallback; }

private:
    std::ofstream file_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Two-sample MMD tests with missing data"};
    app.require_subcommand(1);

    TestOptions topt;
    std::string output, format = "json";
    unsigned threads = 0;

    auto* test = app.add_subcommand("test", "run a two-sample test on two CSV files");
    test->add_option("--x", topt.x_path, "first sample (CSV, one row per observation)")->required();
    test->add_option("--y", topt.y_path, "second sample")->required();
    test->add_option("--method", topt.method, "perm-bound|normal-bound|perm-exact|case-deletion|mean-impute|hot-deck");
    test->add_option("--alpha", topt.alpha, "significance level");
    test->add_option("--b", topt.b, "number of permutations");
    test->add_option("--beta", topt.beta, "kernel parameter or 'auto' (median heuristic)");
    test->add_option("--seed", topt.seed, "permutation / hot deck seed");
    test->add_option("--na-token", topt.na_token, "cell text marking a missing value");
    test->add_flag("--skip-header", topt.skip_header, "ignore the first line of each file");
    test->add_option("--output", output, "write the report here instead of stdout");
    test->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    test->add_option("--threads", threads, "worker threads (default: MMDMISS_THREADS or all cores)");

    std::string scenario_path;
    std::optional<std::size_t> reps_override;
    std::optional<std::uint64_t> seed_override;
    auto* simulate = app.add_subcommand("simulate", "run a scenario file and print rejection rates");
    simulate->add_option("scenario", scenario_path, "scenario file")->required();
    simulate->add_option("--reps", reps_override, "override the repetition count");
    simulate->add_option("--seed", seed_override, "override the master seed");
    simulate->add_option("--output", output, "write the table here instead of stdout");
    simulate->add_option("--threads", threads, "worker threads");

    oracle::VerifyConfig vcfg;
    auto* verify = app.add_subcommand("verify", "check the bounds against brute-force imputations");
    verify->add_option("--instances", vcfg.instances, "random instances");
    verify->add_option("--draws", vcfg.draws, "random imputations per instance");
    verify->add_option("--seed", vcfg.seed, "seed");
    verify->add_option("--grid-cap", vcfg.grid_cap, "largest grid searched per instance");
    verify->add_option("--threads", threads, "worker threads");

    BenchConfig bcfg;
    auto* bench = app.add_subcommand("bench", "time the bound computation and fit scaling exponents");
    bench->add_option("--repeats", bcfg.repeats, "timings per grid point (median taken)");
    bench->add_option("--seed", bcfg.seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }
    if (threads == 0) threads = default_threads();

    try {
        if (*test) {
            topt.threads = threads;
            const CsvOptions csv{topt.na_token, topt.skip_header};
            const TwoSampleData data(load_csv(topt.x_path, csv), load_csv(topt.y_path, csv));
            const TestReport r = run_test(data, topt);
            for (const auto& w : r.warnings) err << "warning: " << w << '\n';
            OutputSink sink(output);
            write_report(sink.stream(out), r, format);
        } else if (*simulate) {
            ScenarioConfig cfg = load_scenario(scenario_path);
            if (reps_override) cfg.reps = *reps_override;
            if (seed_override) cfg.seed = *seed_override;
            const RejectionTable table = run_scenario(cfg, threads);
            OutputSink sink(output);
            write_csv(sink.stream(out), table);
        } else if (*verify) {
            const auto rep = oracle::verify_random_instances(vcfg, threads);
            out << "instances:                " << rep.sweep.instances << '\n'
                << "imputations per instance: " << rep.sweep.imputations_per_instance << '\n'
                << "violations:               " << rep.sweep.violations.size() << '\n'
                << "max overshoot:            " << rep.sweep.max_overshoot << '\n'
                << "grid-feasible instances:  " << rep.grid_instances << '\n'
                << "grid witnesses escaping:  " << rep.grid_failures << '\n';
            for (const auto& v : rep.sweep.violations)
                out << "  seed " << v.instance_seed << " draw " << v.imputation << ": " << v.statistic
                    << " outside [" << v.interval.lower << ", " << v.interval.upper << "]\n";
            return rep.clean() ? kOk : kFailure;
        } else if (*bench) {
            bool ok = true;
            for (const auto& c : run_bench(bcfg)) {
                out << c.name << ": slope " << std::fixed << std::setprecision(3) << c.slope << " (band ["
                    << c.lo << ", " << c.hi << "]) " << (c.pass() ? "PASS" : "FAIL") << '\n';
                out << std::defaultfloat;
                for (std::size_t i = 0; i < c.sizes.size(); ++i)
                    out << "  " << c.sizes[i] << "  " << c.seconds[i] << " s\n";
                ok = ok && c.pass();
            }
            return ok ? kOk : kFailure;
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return kPreconditionError;
    }
    return kOk;
}

}  // namespace mmdmiss::cli
