#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "mmdmiss/simulation.hpp"

using namespace mmdmiss;

namespace {

std::size_t flagged_rows(const MaskedMatrix& m) { return partition_rows(m).m; }

std::string csv(const RejectionTable& t) {
    std::ostringstream s;
    write_csv(s, t);
    return s.str();
}

const char* kDigits = MMDMISS_SOURCE_DIR "/data/digits_subset.csv";

}  // namespace

TEST(Gaussian, MomentsAndDeterminism) {
    const auto m = gen_gaussian(100000, 1, 0.0, 17);
    double s = 0, ss = 0;
    for (double v : m.values()) {
        s += v;
        ss += v * v;
    }
    const double mean = s / 1e5, var = ss / 1e5 - mean * mean;
    EXPECT_LT(std::fabs(mean), 0.02);
    EXPECT_GE(var, 0.97);
    EXPECT_LE(var, 1.03);
    EXPECT_EQ(gen_gaussian(5, 3, 1, 4), gen_gaussian(5, 3, 1, 4));
    EXPECT_TRUE(m.complete());
    const auto wide = gen_gaussian(50000, 1, 2.0, 3, 3.0);
    double w = 0;
    for (double v : wide.values()) w += (v - 2) * (v - 2);
    EXPECT_NEAR(w / 5e4, 9.0, 0.3);
}

TEST(MnarUnivariate, FlagCountsAndEligibility) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto x = gen_gaussian(97, 1, 0, seed), y = gen_gaussian(80, 1, 0, seed + 100);
        const auto out = apply_mnar_univariate(x, y, 0.13, seed);
        ASSERT_EQ(flagged_rows(out.x), static_cast<std::size_t>(std::floor(0.13 * 97)));
        ASSERT_EQ(flagged_rows(out.y), static_cast<std::size_t>(std::floor(0.13 * 80)));
        for (std::size_t i = 0; i < 97; ++i)
            if (!out.x.observed(i, 0)) {
                ASSERT_LT(x.value(i, 0), 0.0);
            }
        for (std::size_t i = 0; i < 80; ++i)
            if (!out.y.observed(i, 0)) {
                ASSERT_GT(y.value(i, 0), 0.0);
            }
        ASSERT_EQ(out.x.values(), x.values());
    }
}

TEST(MnarUnivariate, ZeroProportionIsIdentity) {
    const auto x = gen_gaussian(20, 1, 0, 1), y = gen_gaussian(20, 1, 0, 2);
    const auto out = apply_mnar_univariate(x, y, 0.0, 3);
    EXPECT_EQ(out.x, x);
    EXPECT_EQ(out.y, y);
}

TEST(MnarUnivariate, RandomFallbackWhenNoEligibleRows) {
    const auto x = gen_gaussian(50, 1, 100, 1), y = gen_gaussian(50, 1, 0, 2);
    const auto out = apply_mnar_univariate(x, y, 0.1, 3);
    EXPECT_EQ(flagged_rows(out.x), 5u);
    // Partial eligibility: the three negative rows go first, then two more at random.
    auto x2 = MaskedMatrix::from_rows({{-1}, {5}, {-2}, {6}, {7}, {-3}, {8}, {9}, {10}, {11},
                                       {12}, {13}, {14}, {15}, {16}, {17}, {18}, {19}, {20}, {21}});
    const auto out2 = apply_mnar_univariate(x2, x2, 0.25, 5);
    EXPECT_EQ(flagged_rows(out2.x), 5u);
    EXPECT_FALSE(out2.x.observed(0, 0));
    EXPECT_FALSE(out2.x.observed(2, 0));
    EXPECT_FALSE(out2.x.observed(5, 0));
}

TEST(MnarMultivariate, ComponentCountsAndSides) {
    MissingnessSpec spec;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t d = 10 + seed % 3 * 20;
        const auto x = gen_gaussian(100, d, 0, seed), y = gen_gaussian(100, d, 0, seed + 50);
        const auto out = apply_mnar_multivariate(x, y, 0.05, spec, seed);
        const std::size_t per_row = static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(d)));
        ASSERT_EQ(flagged_rows(out.x), 5u);
        ASSERT_EQ(flagged_rows(out.y), 5u);
        for (std::size_t i = 0; i < 100; ++i) {
            std::size_t gone = 0;
            for (std::size_t l = 0; l < d; ++l) gone += !out.x.observed(i, l);
            ASSERT_TRUE(gone == 0 || gone == per_row);
        }
        ASSERT_EQ(out.y.values(), y.values());
    }
}

TEST(MnarMultivariate, MaskedComponentsBelowRowMedianForEligibleRows) {
    MissingnessSpec spec;
    auto x = MaskedMatrix::from_rows({{-3, -2, -1, -4, 1, 2, -5, -6, -7, 0},
                                      {1, 1, 1, 1, 1, 1, 1, 1, 1, 1},
                                      {2, 2, 2, 2, 2, 2, 2, 2, 2, 2}});
    const auto out = apply_mnar_multivariate(x, x, 0.34, spec, 1);  // floor(1.02) = 1 row
    ASSERT_EQ(flagged_rows(out.x), 1u);
    std::size_t gone = 0;
    for (std::size_t l = 0; l < 10; ++l)
        if (!out.x.observed(0, l)) {
            ++gone;
            EXPECT_LT(x.value(0, l), -2.5);  // row median is -2.5
        }
    EXPECT_EQ(gone, 3u);
}

TEST(MnarMultivariate, InfiniteThresholdMeansRandomRows) {
    MissingnessSpec spec;
    spec.projection_threshold = INFINITY;
    const auto x = gen_gaussian(40, 5, 0, 1);
    const auto out = apply_mnar_multivariate(x, x, 0.1, spec, 2);
    EXPECT_EQ(flagged_rows(out.x), 4u);
    EXPECT_EQ(apply_mnar_multivariate(x, x, 0.0, spec, 2).x, x);
}

TEST(MnarMultivariate, TopUpWhenCandidatesShort) {
    MissingnessSpec spec;
    spec.component_fraction = 0.8;
    const auto x = MaskedMatrix::from_rows({{-1, -1, -1, -1, -1}, {-1, -1, -1, -1, -1}});
    const auto out = apply_mnar_multivariate(x, x, 0.5, spec, 3);
    std::size_t gone = 0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t l = 0; l < 5; ++l) gone += !out.x.observed(i, l);
    EXPECT_EQ(gone, 4u);
}

TEST(Mcar, CountsAndValues) {
    MissingnessSpec spec;
    spec.mechanism = Mechanism::MCAR;
    spec.s = 0.2;
    const auto x = gen_gaussian(50, 10, 0, 1), y = gen_gaussian(30, 10, 0, 2);
    const auto out = apply_mcar(x, y, spec, 4);
    EXPECT_EQ(flagged_rows(out.x), 10u);
    EXPECT_EQ(flagged_rows(out.y), 6u);
    EXPECT_EQ(out.x.missing_cells(), 30u);
}

TEST(MnistRegion, ExactRegionMasked) {
    MissingnessSpec spec;
    MaskedMatrix y(4, 784);
    for (std::size_t j = 0; j < 784; ++j) y.set(0, j, 1.0);  // row 0: everything lit
    const auto region = spec.region.indices();
    for (std::size_t k = 0; k < 86; ++k) y.set(1, region[k], 0.5);  // row 1: 86 > 85
    for (std::size_t k = 0; k < 85; ++k) y.set(2, region[k], 0.5);  // row 2: exactly 85
    const auto out = apply_mnist_region(y, 0.5, spec, 7);
    EXPECT_EQ(flagged_rows(out), 2u);
    std::set<std::size_t> want;
    for (std::size_t r = 0; r < 14; ++r)
        for (std::size_t c = 7; c < 21; ++c) want.insert(r * 28 + c);
    ASSERT_EQ(want.size(), 196u);
    for (std::size_t i : {0u, 1u}) {
        std::set<std::size_t> got;
        for (std::size_t j = 0; j < 784; ++j)
            if (!out.observed(i, j)) got.insert(j);
        EXPECT_EQ(got, want);
    }
    EXPECT_TRUE(out.row_complete(2));
    EXPECT_TRUE(out.row_complete(3));
}

TEST(MnistRegion, BlankImageNeverEligibleAndGuards) {
    MissingnessSpec spec;
    MaskedMatrix y(3, 784);
    for (std::size_t j = 0; j < 784; ++j) y.set(0, j, 1.0);
    const auto out = apply_mnist_region(y, 0.34, spec, 1);  // one row: the lit one
    EXPECT_FALSE(out.row_complete(0));
    EXPECT_EQ(apply_mnist_region(y, 0.0, spec, 1), y);
    EXPECT_THROW(apply_mnist_region(MaskedMatrix(3, 783), 0.1, spec, 1), DimError);
}

TEST(MnistRegion, BundledSubset) {
    const auto set = load_digit_csv(kDigits);
    ASSERT_EQ(set.images.cols(), 784u);
    ASSERT_LE(set.images.rows(), 200u);
    EXPECT_FALSE(set.rows_with_label(3).empty());
    EXPECT_FALSE(set.rows_with_label(0).empty());
    for (double v : set.images.values()) ASSERT_TRUE(v >= 0 && v <= 1);
    MissingnessSpec spec;
    const auto y = sample_digits(set, 3, 100, 4);
    const auto out = apply_mnist_region(y, 0.1, spec, 5);
    EXPECT_EQ(flagged_rows(out), 10u);
    EXPECT_EQ(out.missing_cells(), 1960u);
}

TEST(Scenario, ParseKeysAndErrors) {
    const auto cfg = parse_scenario(R"(# comment
n = 10, 20
d = 1
y_mean = 1.5
s = 0, 0.05
reps = 3
methods = perm-bound, hot-deck
seed = 9
)");
    EXPECT_EQ(cfg.n1, (std::vector<std::size_t>{10, 20}));
    EXPECT_EQ(cfg.n2, cfg.n1);
    EXPECT_EQ(cfg.y_mean, 1.5);
    EXPECT_EQ(cfg.methods.size(), 2u);
    EXPECT_EQ(cfg.mechanism, Mechanism::MnarUnivariate);
    EXPECT_EQ(parse_scenario("d = 5\n").mechanism, Mechanism::MnarMultivariate);
    EXPECT_THROW(parse_scenario("bogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_scenario("reps = 0\n"), ConfigError);
    EXPECT_THROW(parse_scenario("reps = x\n"), ConfigError);
    EXPECT_THROW(parse_scenario("methods = magic\n"), ConfigError);
    EXPECT_THROW(parse_scenario("s = 1.5\n"), ConfigError);
    EXPECT_THROW(parse_scenario("n1 = 10\nn2 = 10, 20\n"), ConfigError);
    EXPECT_THROW(parse_scenario("just text\n"), ConfigError);
}

TEST(Scenario, BundledFilesParse) {
    for (const char* name : {"fig1_d1", "fig1_d10", "fig1_d50", "fig2", "fig3_d10", "fig3_d50", "appendix_c", "mnist"}) {
        const auto cfg = load_scenario(std::string(MMDMISS_SOURCE_DIR "/scenarios/") + name + ".txt");
        EXPECT_GE(cfg.reps, 1u) << name;
    }
}

TEST(Scenario, SeparatedSamplesAlwaysReject) {
    auto cfg = parse_scenario("n = 20\nd = 1\ny_mean = 100\nmechanism = none\nreps = 1\nb = 50\n"
                              "methods = perm-bound, normal-bound, perm-exact, case-deletion, mean-impute, hot-deck\n");
    const auto t = run_scenario(cfg, 2);
    for (const auto& c : t.cells) EXPECT_EQ(c.rate(), 1.0) << to_string(c.method);
}

TEST(Scenario, ZeroMissingAllMethodsAgreeWithExact) {
    const auto cfg = parse_scenario("n = 25\nd = 1\ns = 0\nreps = 20\nb = 50\nseed = 4\n"
                                    "methods = perm-exact, perm-bound, case-deletion, mean-impute, hot-deck\n");
    const auto t = run_scenario(cfg, 2);
    for (const auto& c : t.cells) EXPECT_EQ(c.rejections, t.cells.front().rejections);
}

TEST(Scenario, NullCalibrationOfExactTest) {
    const auto cfg = parse_scenario("n = 40\nd = 1\ns = 0\nreps = 400\nb = 100\nseed = 2\nmethods = perm-exact\n");
    const auto c = run_scenario(cfg).cells.front();
    EXPECT_GE(c.rate(), 0.03);
    EXPECT_LE(c.rate(), 0.08);
    EXPECT_NEAR(c.se(), std::sqrt(c.rate() * (1 - c.rate()) / 400), 1e-15);
}

TEST(Scenario, DeterministicAcrossThreadCounts) {
    const auto cfg = parse_scenario("n = 30\nd = 3\ns = 0, 0.1\nreps = 12\nb = 30\nseed = 5\n"
                                    "methods = perm-bound, normal-bound, case-deletion, hot-deck\n");
    EXPECT_EQ(csv(run_scenario(cfg, 1)), csv(run_scenario(cfg, 4)));
}

TEST(Scenario, FailuresCountAsWarnings) {
    // Five rows per group with s = 0.8: case deletion keeps one row per group and cannot test.
    const auto cfg = parse_scenario("n = 5\nd = 1\ns = 0.8\nmechanism = mcar\nreps = 3\nb = 10\n"
                                    "methods = case-deletion\n");
    const auto c = run_scenario(cfg, 1).cells.front();
    EXPECT_EQ(c.warnings, 3u);
    EXPECT_EQ(c.rejections, 0u);
}

TEST(Scenario, CsvHeaderAndRows) {
    const auto cfg = parse_scenario("n = 10\nd = 1\ns = 0, 0.1\nreps = 1\nb = 10\nmethods = perm-bound, mean-impute\n");
    const auto text = csv(run_scenario(cfg, 1));
    EXPECT_EQ(text.substr(0, text.find('\n')), "method,n1,n2,s,rate,se,reps,warnings");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}

TEST(Scenario, DigitSource) {
    auto cfg = parse_scenario(std::string("data = ") + kDigits + "\nx_label = 3\ny_label = 3\nn = 40\ns = 0.1\n"
                              "reps = 2\nb = 20\nmethods = perm-bound, mean-impute\n");
    EXPECT_EQ(cfg.mechanism, Mechanism::MnistRegion);
    EXPECT_EQ(cfg.d, 784u);
    const auto t = run_scenario(cfg, 2);
    EXPECT_EQ(t.cells.size(), 2u);
}
