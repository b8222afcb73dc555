#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmdmiss/data.hpp"
#include "mmdmiss/random.hpp"

using namespace mmdmiss;

TEST(Csv, MissingTokenClearsMask) {
    const auto m = parse_csv("1.0,2.0\n3.0,NA\n");
    ASSERT_EQ(m.rows(), 2u);
    ASSERT_EQ(m.cols(), 2u);
    EXPECT_TRUE(m.observed(0, 0));
    EXPECT_TRUE(m.observed(1, 0));
    EXPECT_FALSE(m.observed(1, 1));
    EXPECT_EQ(m.value(1, 0), 3.0);
}

TEST(Csv, EmptyCellIsMissing) {
    const auto m = parse_csv("1,,3\n");
    EXPECT_FALSE(m.observed(0, 1));
    EXPECT_EQ(m.missing_cells(), 1u);
}

TEST(Csv, CustomToken) {
    const auto m = parse_csv("1,?\n", {"?", false});
    EXPECT_FALSE(m.observed(0, 1));
    EXPECT_THROW(parse_csv("1,NA\n", {"?", false}), ParseError);
}

TEST(Csv, TrailingBlankLinesIgnored) {
    const auto m = parse_csv("1.0\n\n");
    EXPECT_EQ(m.rows(), 1u);
    EXPECT_EQ(m.cols(), 1u);
    EXPECT_TRUE(m.complete());
}

TEST(Csv, CrlfAndExponents) {
    const auto m = parse_csv("1e-3,-2.5E2\r\n+4,5\r\n");
    EXPECT_EQ(m.value(0, 0), 1e-3);
    EXPECT_EQ(m.value(0, 1), -250.0);
    EXPECT_EQ(m.value(1, 0), 4.0);
}

TEST(Csv, RaggedRowReportsRow) {
    try {
        parse_csv("1,2\n3\n");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.row(), 2u);
    }
}

TEST(Csv, UnparseableCellReportsPosition) {
    try {
        parse_csv("1,2\n3,abc\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2u);
        EXPECT_EQ(e.col(), 2u);
    }
    EXPECT_THROW(parse_csv("inf\n"), ParseError);
    EXPECT_THROW(parse_csv("nan\n"), ParseError);
}

TEST(Csv, EmptyFile) {
    EXPECT_THROW(parse_csv(""), EmptyInput);
    EXPECT_THROW(parse_csv("\n\n"), EmptyInput);
}

TEST(Csv, SkipHeader) {
    const auto m = parse_csv("a,b\n1,2\n", {"NA", true});
    EXPECT_EQ(m.rows(), 1u);
    EXPECT_EQ(m.value(0, 1), 2.0);
}

TEST(Csv, RoundTripIsBitExact) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 10), d = 1 + uniform_below(rng, 5);
        MaskedMatrix m(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                m.set(i, j, (uniform_unit(rng) - 0.5) * std::pow(10.0, static_cast<double>(uniform_below(rng, 20)) - 10));
                if (uniform_unit(rng) < 0.2) m.set_missing(i, j);
            }
        const auto back = parse_csv(to_csv_string(m));
        ASSERT_EQ(back.rows(), n);
        ASSERT_EQ(back.cols(), d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                ASSERT_EQ(back.observed(i, j), m.observed(i, j));
                if (m.observed(i, j)) {
                    ASSERT_EQ(back.value(i, j), m.value(i, j));
                }
            }
    }
}

TEST(Csv, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "mmdmiss_test_load.csv";
    {
        std::ofstream f(path);
        f << "1,2\n3,NA\n";
    }
    const auto m = load_csv(path.string());
    EXPECT_EQ(m.missing_cells(), 1u);
    std::filesystem::remove(path);
    EXPECT_THROW(load_csv("/nonexistent/file.csv"), InputError);
}

TEST(Partition, FullyObserved) {
    const auto m = MaskedMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    const auto p = partition_rows(m);
    EXPECT_TRUE(p.incomplete_rows.empty());
    EXPECT_EQ(p.m, 0u);
    EXPECT_EQ(p.complete_rows.size(), 3u);
}

TEST(Partition, SingleMissingCell) {
    auto m = MaskedMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    m.set_missing(0, 1);
    const auto p = partition_rows(m);
    EXPECT_EQ(p.incomplete_rows, std::vector<std::size_t>({0}));
    EXPECT_EQ(p.complete_rows, std::vector<std::size_t>({1, 2}));
}

TEST(Partition, AllRowsIncomplete) {
    auto m = MaskedMatrix::from_rows({{1, 2}, {3, 4}});
    m.set_missing(0, 0);
    m.set_missing(1, 1);
    const auto p = partition_rows(m);
    EXPECT_TRUE(p.complete_rows.empty());
    EXPECT_EQ(p.m, 2u);
}

TEST(Partition, RandomMasksCountAndDisjointness) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 12), d = 1 + uniform_below(rng, 4);
        MaskedMatrix m(n, d);
        std::size_t expect = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < d; ++j)
                if (uniform_unit(rng) < 0.15) {
                    m.set_missing(i, j);
                    any = true;
                }
            expect += any;
        }
        const auto p = partition_rows(m);
        ASSERT_EQ(p.m, expect);
        std::vector<int> seen(n, 0);
        for (auto i : p.incomplete_rows) {
            ++seen[i];
            ASSERT_FALSE(m.row_complete(i));
        }
        for (auto i : p.complete_rows) {
            ++seen[i];
            ASSERT_TRUE(m.row_complete(i));
        }
        for (int s : seen) ASSERT_EQ(s, 1);
        ASSERT_TRUE(std::is_sorted(p.incomplete_rows.begin(), p.incomplete_rows.end()));
        ASSERT_TRUE(std::is_sorted(p.complete_rows.begin(), p.complete_rows.end()));
    }
}

TEST(TwoSample, DimensionMismatch) {
    EXPECT_THROW(TwoSampleData(MaskedMatrix(2, 1), MaskedMatrix(2, 2)), DimError);
}

TEST(TwoSample, PooledIndexing) {
    const TwoSampleData d(MaskedMatrix::from_rows({{1}, {2}}), MaskedMatrix::from_rows({{3}, {4}, {5}}));
    EXPECT_EQ(d.n_total(), 5u);
    EXPECT_EQ(&d.source(1), &d.x);
    EXPECT_EQ(&d.source(2), &d.y);
    EXPECT_EQ(d.local(4), 2u);
}
