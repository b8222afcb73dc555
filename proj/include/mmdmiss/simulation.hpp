#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "baselines.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace mmdmiss {

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

// n x d i.i.d. Normal(mean, sd^2), fully observed.
inline MaskedMatrix gen_gaussian(std::size_t n, std::size_t d, double mean, std::uint64_t seed, double sd = 1.0) {
    if (n < 1 || d < 1) throw ConfigError("gen_gaussian needs n >= 1 and d >= 1");
    Rng rng(seed);
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> v(n * d);
    for (auto& e : v) e = dist(rng);
    return MaskedMatrix(n, d, std::move(v));
}

// ---------------------------------------------------------------------------
// Missingness mechanisms
// ---------------------------------------------------------------------------

enum class Mechanism { None, MCAR, MnarUnivariate, MnarMultivariate, MnistRegion };

struct PixelRegion {
    std::size_t width = 28;
    std::size_t row_begin = 0, row_end = 14;  // half-open
    std::size_t col_begin = 7, col_end = 21;
    std::size_t count_threshold = 85;

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        for (std::size_t r = row_begin; r < row_end; ++r)
            for (std::size_t c = col_begin; c < col_end; ++c) out.push_back(r * width + c);
        return out;
    }
};

struct MissingnessSpec {
    Mechanism mechanism = Mechanism::MnarUnivariate;
    double s = 0.0;
    double component_fraction = 0.30;
    double projection_threshold = 0.8;
    PixelRegion region;

    void validate() const {
        if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("missing proportion s must lie in [0, 1]");
        if (!(component_fraction > 0.0 && component_fraction <= 1.0))
            throw ConfigError("component_fraction must lie in (0, 1]");
    }
};

inline std::size_t flag_count(double s, std::size_t n) {
    return std::min(n, static_cast<std::size_t>(std::floor(s * static_cast<double>(n) + 1e-9)));
}

inline std::size_t components_per_row(double fraction, std::size_t d) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d) + 1e-9)),
                                   1, d);
}

namespace detail {

// k distinct entries of `pool`, uniformly, by a partial Fisher-Yates shuffle. Consumes pool.
inline std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t>& pool, std::size_t k, Rng& rng) {
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_below(rng, pool.size() - i)]);
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};
}

// k row indices: uniform over eligible rows when there are enough, otherwise every eligible
// row plus a uniform draw of the shortfall from the rest. Returned in ascending order.
inline std::vector<std::size_t> select_rows(const std::vector<std::uint8_t>& eligible, std::size_t k, Rng& rng) {
    std::vector<std::size_t> yes, no;
    for (std::size_t i = 0; i < eligible.size(); ++i) (eligible[i] ? yes : no).push_back(i);
    std::vector<std::size_t> out;
    if (yes.size() >= k) {
        out = draw_without_replacement(yes, k, rng);
    } else {
        out = yes;
        const auto extra = draw_without_replacement(no, k - yes.size(), rng);
        out.insert(out.end(), extra.begin(), extra.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Masks `count` components of row i: candidates first, topped up from the remaining ones.
inline void mask_components(MaskedMatrix& m, std::size_t i, std::vector<std::size_t> candidates, std::size_t count,
                            Rng& rng) {
    std::vector<std::uint8_t> is_candidate(m.cols(), 0);
    for (std::size_t l : candidates) is_candidate[l] = 1;
    auto chosen = draw_without_replacement(candidates, count, rng);
    if (chosen.size() < count) {
        std::vector<std::size_t> rest;
        for (std::size_t l = 0; l < m.cols(); ++l)
            if (!is_candidate[l]) rest.push_back(l);
        const auto extra = draw_without_replacement(rest, count - chosen.size(), rng);
        chosen.insert(chosen.end(), extra.begin(), extra.end());
    }
    for (std::size_t l : chosen) m.set_missing(i, l);
}

inline double row_median(std::span<const double> row) {
    std::vector<double> v(row.begin(), row.end());
    return median_of(v);
}

}  // namespace detail

// d = 1. X rows with value < 0 and Y rows with value > 0 are the candidates for removal.
inline TwoSampleData apply_mnar_univariate(const MaskedMatrix& x, const MaskedMatrix& y, double s,
                                           std::uint64_t seed) {
    if (x.cols() != 1 || y.cols() != 1) throw DimError("univariate mechanism needs d = 1");
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("missing proportion s must lie in [0, 1]");
    TwoSampleData out(x, y);
    for (int g = 0; g < 2; ++g) {
        MaskedMatrix& m = g == 0 ? out.x : out.y;
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(g)}));
        std::vector<std::uint8_t> eligible(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) eligible[i] = g == 0 ? m.value(i, 0) < 0.0 : m.value(i, 0) > 0.0;
        for (std::size_t i : detail::select_rows(eligible, flag_count(s, m.rows()), rng)) m.set_missing(i, 0);
    }
    return out;
}

// d >= 2. Candidate rows have projection sum(x)/sqrt(d) below -threshold (X) or above
// +threshold (Y). A flagged row loses components below its median (X) or above it (Y).
inline TwoSampleData apply_mnar_multivariate(const MaskedMatrix& x, const MaskedMatrix& y, double s,
                                             const MissingnessSpec& spec, std::uint64_t seed) {
    if (x.cols() < 2 || x.cols() != y.cols()) throw DimError("multivariate mechanism needs matching d >= 2");
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("missing proportion s must lie in [0, 1]");
    const std::size_t d = x.cols();
    const std::size_t count = components_per_row(spec.component_fraction, d);
    const double root_d = std::sqrt(static_cast<double>(d));
    TwoSampleData out(x, y);
    for (int g = 0; g < 2; ++g) {
        MaskedMatrix& m = g == 0 ? out.x : out.y;
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(g)}));
        std::vector<std::uint8_t> eligible(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double sum = 0.0;
            for (double v : m.row(i)) sum += v;
            const double proj = sum / root_d;
            eligible[i] = g == 0 ? proj < -spec.projection_threshold : proj > spec.projection_threshold;
        }
        for (std::size_t i : detail::select_rows(eligible, flag_count(s, m.rows()), rng)) {
            const auto row = m.row(i);
            const double med = detail::row_median(row);
            std::vector<std::size_t> candidates;
            for (std::size_t l = 0; l < d; ++l)
                if (g == 0 ? row[l] < med : row[l] > med) candidates.push_back(l);
            detail::mask_components(m, i, std::move(candidates), count, rng);
        }
    }
    return out;
}

// Flagged rows are uniform over each group; d = 1 loses the value, d > 1 loses a uniform
// subset of components.
inline TwoSampleData apply_mcar(const MaskedMatrix& x, const MaskedMatrix& y, const MissingnessSpec& spec,
                                std::uint64_t seed) {
    spec.validate();
    TwoSampleData out(x, y);
    const std::size_t d = out.dim();
    const std::size_t count = d == 1 ? 1 : components_per_row(spec.component_fraction, d);
    for (int g = 0; g < 2; ++g) {
        MaskedMatrix& m = g == 0 ? out.x : out.y;
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(g)}));
        const std::vector<std::uint8_t> eligible(m.rows(), 0);
        for (std::size_t i : detail::select_rows(eligible, flag_count(spec.s, m.rows()), rng)) {
            std::vector<std::size_t> all(d);
            std::iota(all.begin(), all.end(), std::size_t{0});
            detail::mask_components(m, i, std::move(all), count, rng);
        }
    }
    return out;
}

// Image rows (row-major width x width, values in [0, 1]). Candidates have more than
// `count_threshold` nonzero pixels inside the region; a flagged image loses the whole region.
inline MaskedMatrix apply_mnist_region(const MaskedMatrix& y, double s, const MissingnessSpec& spec,
                                       std::uint64_t seed) {
    const PixelRegion& r = spec.region;
    if (y.cols() != r.width * r.width)
        throw DimError("image mechanism needs d = " + std::to_string(r.width * r.width) + ", got " +
                       std::to_string(y.cols()));
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("missing proportion s must lie in [0, 1]");
    const auto region = r.indices();
    MaskedMatrix out = y;
    std::vector<std::uint8_t> eligible(y.rows());
    for (std::size_t i = 0; i < y.rows(); ++i) {
        std::size_t nonzero = 0;
        for (std::size_t idx : region) nonzero += y.value(i, idx) != 0.0;
        eligible[i] = nonzero > r.count_threshold;
    }
    Rng rng(derive_seed(seed, {1}));
    for (std::size_t i : detail::select_rows(eligible, flag_count(s, y.rows()), rng))
        for (std::size_t idx : region) out.set_missing(i, idx);
    return out;
}

// ---------------------------------------------------------------------------
// Labelled image sets
// ---------------------------------------------------------------------------

struct DigitSet {
    std::vector<int> labels;
    MaskedMatrix images;

    std::vector<std::size_t> rows_with_label(int label) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) out.push_back(i);
        return out;
    }
};

// CSV with the label in the first column followed by the flattened pixels. Pixel values above
// 1 are taken as 0-255 intensities and rescaled to [0, 1].
inline DigitSet parse_digit_csv(std::string_view text, bool skip_header = false) {
    const MaskedMatrix raw = parse_csv(text, {"NA", skip_header});
    if (raw.cols() < 2) throw FormatError(1, "need a label column and at least one pixel column");
    if (!raw.complete()) throw FormatError(1, "image data must be fully observed");
    const std::size_t d = raw.cols() - 1;
    double peak = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i)
        for (std::size_t j = 1; j < raw.cols(); ++j) peak = std::max(peak, raw.value(i, j));
    const double scale = peak > 1.0 ? 1.0 / 255.0 : 1.0;
    DigitSet set{{}, MaskedMatrix(raw.rows(), d)};
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const double lab = raw.value(i, 0);
        if (lab != std::floor(lab)) throw ParseError(i + 1 + skip_header, 1, std::to_string(lab));
        set.labels.push_back(static_cast<int>(lab));
        for (std::size_t j = 0; j < d; ++j) set.images.set(i, j, raw.value(i, j + 1) * scale);
    }
    return set;
}

inline DigitSet load_digit_csv(const std::string& path, bool skip_header = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EmptyInput("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_digit_csv(ss.str(), skip_header);
}

// n rows drawn uniformly with replacement from the images carrying `label`.
inline MaskedMatrix sample_digits(const DigitSet& set, int label, std::size_t n, std::uint64_t seed) {
    const auto pool = set.rows_with_label(label);
    if (pool.empty()) throw ConfigError("no images with label " + std::to_string(label));
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pool[uniform_below(rng, pool.size())];
    return set.images.select_rows(idx);
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

enum class MethodId { PermBound, NormalBound, PermExact, CaseDeletion, MeanImpute, HotDeck };

inline const char* to_string(MethodId m) {
    switch (m) {
        case MethodId::PermBound: return "perm-bound";
        case MethodId::NormalBound: return "normal-bound";
        case MethodId::PermExact: return "perm-exact";
        case MethodId::CaseDeletion: return "case-deletion";
        case MethodId::MeanImpute: return "mean-impute";
        case MethodId::HotDeck: return "hot-deck";
    }
    return "?";
}

inline MethodId parse_method(std::string_view s) {
    for (MethodId m : {MethodId::PermBound, MethodId::NormalBound, MethodId::PermExact, MethodId::CaseDeletion,
                       MethodId::MeanImpute, MethodId::HotDeck})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

enum class DataSource { Gaussian, Digits };

struct ScenarioConfig {
    std::vector<std::size_t> n1 = {100};
    std::vector<std::size_t> n2 = {100};  // paired with n1 entry by entry
    std::size_t d = 1;
    double x_mean = 0.0, y_mean = 0.0;
    double x_sd = 1.0, y_sd = 1.0;
    DataSource source = DataSource::Gaussian;
    std::shared_ptr<const DigitSet> digits;
    int x_label = 3, y_label = 3;
    Mechanism mechanism = Mechanism::MnarUnivariate;
    std::vector<double> s = {0.0};
    double component_fraction = 0.30;
    double projection_threshold = 0.8;
    std::size_t reps = 100;
    double alpha = kDefaultAlpha;
    std::size_t b = kDefaultPermutations;
    std::uint64_t seed = 0;
    std::vector<MethodId> methods = {MethodId::PermBound};

    void validate() const {
        if (reps < 1) throw ConfigError("reps must be at least 1");
        if (methods.empty()) throw ConfigError("methods must be nonempty");
        if (s.empty()) throw ConfigError("s must list at least one proportion");
        if (n1.empty() || n1.size() != n2.size()) throw ConfigError("n1 and n2 must list the same number of sizes");
        if (d < 1) throw ConfigError("d must be at least 1");
        if (b < 1) throw ConfigError("b must be at least 1");
        detail::check_alpha(alpha);
        for (double v : s)
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("every s must lie in [0, 1]");
        if (!(component_fraction > 0.0 && component_fraction <= 1.0))
            throw ConfigError("component_fraction must lie in (0, 1]");
        if (source == DataSource::Digits && !digits) throw ConfigError("digit source needs a data file");
        if (mechanism == Mechanism::MnistRegion && source != DataSource::Digits)
            throw ConfigError("mnist mechanism needs the digit source");
    }
};

namespace detail {

inline std::string_view trim_ws(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_list(std::string_view v) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = v.find(',', pos);
        const auto item = trim_ws(v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline double to_real(const std::string& key, const std::string& v) {
    double out;
    if (!parse_real(v, out)) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    return out;
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("key '" + key + "': not a non-negative integer: '" + v + "'");
    return out;
}

}  // namespace detail

// Flat `key = value` text; '#' starts a comment. Lists are comma separated. Keys:
//   n (sets n1 and n2), n1, n2, d, x_mean, y_mean, x_sd, y_sd, source (gaussian|digits),
//   data (digit CSV path), x_label, y_label, mechanism (none|mcar|mnar|mnist), s,
//   component_fraction, projection_threshold, reps, alpha, b, seed, methods
// `mnar` picks the univariate or multivariate rule from d. Relative data paths resolve
// against `base_dir`.
inline ScenarioConfig parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {}) {
    ScenarioConfig cfg;
    bool n1_set = false, n2_set = false, mech_set = false;
    std::string mech = "mnar";
    std::string data_path;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
        line = detail::trim_ws(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == line.npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(detail::trim_ws(line.substr(0, eq)));
        const std::string value(detail::trim_ws(line.substr(eq + 1)));
        const auto list = detail::split_list(value);
        if (list.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
        auto counts = [&] {
            std::vector<std::size_t> v;
            for (const auto& e : list) v.push_back(detail::to_count(key, e));
            return v;
        };
        if (key == "n") {
            cfg.n1 = cfg.n2 = counts();
            n1_set = n2_set = true;
        } else if (key == "n1") {
            cfg.n1 = counts();
            n1_set = true;
        } else if (key == "n2") {
            cfg.n2 = counts();
            n2_set = true;
        } else if (key == "d") {
            cfg.d = detail::to_count(key, value);
        } else if (key == "x_mean") {
            cfg.x_mean = detail::to_real(key, value);
        } else if (key == "y_mean") {
            cfg.y_mean = detail::to_real(key, value);
        } else if (key == "x_sd") {
            cfg.x_sd = detail::to_real(key, value);
        } else if (key == "y_sd") {
            cfg.y_sd = detail::to_real(key, value);
        } else if (key == "source") {
            if (value == "gaussian") cfg.source = DataSource::Gaussian;
            else if (value == "digits") cfg.source = DataSource::Digits;
            else throw ConfigError("unknown source '" + value + "'");
        } else if (key == "data") {
            data_path = value;
        } else if (key == "x_label") {
            cfg.x_label = static_cast<int>(detail::to_count(key, value));
        } else if (key == "y_label") {
            cfg.y_label = static_cast<int>(detail::to_count(key, value));
        } else if (key == "mechanism") {
            mech = value;
            mech_set = true;
        } else if (key == "s") {
            cfg.s.clear();
            for (const auto& e : list) cfg.s.push_back(detail::to_real(key, e));
        } else if (key == "component_fraction") {
            cfg.component_fraction = detail::to_real(key, value);
        } else if (key == "projection_threshold") {
            cfg.projection_threshold = detail::to_real(key, value);
        } else if (key == "reps") {
            cfg.reps = detail::to_count(key, value);
        } else if (key == "alpha") {
            cfg.alpha = detail::to_real(key, value);
        } else if (key == "b") {
            cfg.b = detail::to_count(key, value);
        } else if (key == "seed") {
            cfg.seed = detail::to_count(key, value);
        } else if (key == "methods") {
            cfg.methods.clear();
            for (const auto& e : list) cfg.methods.push_back(parse_method(e));
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (n1_set != n2_set) (n1_set ? cfg.n2 : cfg.n1) = n1_set ? cfg.n1 : cfg.n2;
    if (!data_path.empty()) {
        std::filesystem::path p(data_path);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.digits = std::make_shared<const DigitSet>(load_digit_csv(p.string()));
        cfg.d = cfg.digits->images.cols();
        cfg.source = DataSource::Digits;
        if (!mech_set) mech = "mnist";
    }
    if (mech == "none") cfg.mechanism = Mechanism::None;
    else if (mech == "mcar") cfg.mechanism = Mechanism::MCAR;
    else if (mech == "mnar") cfg.mechanism = cfg.d == 1 ? Mechanism::MnarUnivariate : Mechanism::MnarMultivariate;
    else if (mech == "mnist") cfg.mechanism = Mechanism::MnistRegion;
    else throw ConfigError("unknown mechanism '" + mech + "'");
    cfg.validate();
    return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path());
}

struct RejectionCell {
    MethodId method = MethodId::PermBound;
    std::size_t n1 = 0, n2 = 0;
    double s = 0.0;
    std::size_t rejections = 0;
    std::size_t reps = 0;
    std::size_t warnings = 0;

    double rate() const { return reps ? static_cast<double>(rejections) / static_cast<double>(reps) : 0.0; }
    double se() const { return reps ? std::sqrt(rate() * (1.0 - rate()) / static_cast<double>(reps)) : 0.0; }
};

struct RejectionTable {
    std::vector<RejectionCell> cells;

    const RejectionCell& at(MethodId m, double s, std::size_t n1 = 0) const {
        for (const auto& c : cells)
            if (c.method == m && std::fabs(c.s - s) < 1e-12 && (n1 == 0 || c.n1 == n1)) return c;
        throw ConfigError(std::string("no table cell for ") + to_string(m));
    }
};

inline void write_csv(std::ostream& out, const RejectionTable& t) {
    out << "method,n1,n2,s,rate,se,reps,warnings\n";
    char buf[64];
    auto num = [&](double v) {
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    };
    for (const auto& c : t.cells)
        out << to_string(c.method) << ',' << c.n1 << ',' << c.n2 << ',' << num(c.s) << ',' << num(c.rate()) << ','
            << num(c.se()) << ',' << c.reps << ',' << c.warnings << '\n';
}

// One generated instance: the fully observed samples and their censored version.
struct ScenarioInstance {
    TwoSampleData full;
    TwoSampleData censored;
};

// Seeds: rep_seed = derive_seed(master, {rep, s_index, size_index}); sub-streams
// derive_seed(rep_seed, {k}) with k = 1 for X, 2 for Y, 3 for the mechanism, 4 for the
// permutation plan and 5 for hot deck.
inline std::uint64_t rep_seed(const ScenarioConfig& cfg, std::size_t size_index, std::size_t s_index, std::size_t rep) {
    return derive_seed(cfg.seed, {rep, s_index, size_index});
}

inline ScenarioInstance make_instance(const ScenarioConfig& cfg, std::size_t size_index, double s, std::uint64_t seed) {
    const std::size_t n1 = cfg.n1[size_index], n2 = cfg.n2[size_index];
    MaskedMatrix x, y;
    if (cfg.source == DataSource::Digits) {
        x = sample_digits(*cfg.digits, cfg.x_label, n1, derive_seed(seed, {1}));
        y = sample_digits(*cfg.digits, cfg.y_label, n2, derive_seed(seed, {2}));
    } else {
        x = gen_gaussian(n1, cfg.d, cfg.x_mean, derive_seed(seed, {1}), cfg.x_sd);
        y = gen_gaussian(n2, cfg.d, cfg.y_mean, derive_seed(seed, {2}), cfg.y_sd);
    }
    TwoSampleData full(x, y);
    MissingnessSpec spec;
    spec.mechanism = cfg.mechanism;
    spec.s = s;
    spec.component_fraction = cfg.component_fraction;
    spec.projection_threshold = cfg.projection_threshold;
    const std::uint64_t mseed = derive_seed(seed, {3});
    switch (cfg.mechanism) {
        case Mechanism::None: return {full, full};
        case Mechanism::MCAR: return {full, apply_mcar(x, y, spec, mseed)};
        case Mechanism::MnarUnivariate: return {full, apply_mnar_univariate(x, y, s, mseed)};
        case Mechanism::MnarMultivariate: return {full, apply_mnar_multivariate(x, y, s, spec, mseed)};
        case Mechanism::MnistRegion: return {full, TwoSampleData(x, apply_mnist_region(y, s, spec, mseed))};
    }
    return {full, full};
}

// Runs one method on one instance. Precondition failures (too few rows after deletion, no
// usable bandwidth, degenerate variance) are reported as a non-rejection with a warning.
struct MethodResult {
    bool reject = false;
    bool warning = false;
    double p_upper = 1.0;
};

inline MethodResult run_method(MethodId m, const ScenarioInstance& inst, const ScenarioConfig& cfg,
                               std::uint64_t seed, unsigned threads = 1) {
    try {
        const PermutationPlan plan = make_plan(inst.full.n_total(), cfg.b, derive_seed(seed, {4}));
        TestOutcome out;
        switch (m) {
            case MethodId::PermBound:
                out = permutation_p_bound(inst.censored, median_heuristic(inst.censored), plan, cfg.alpha, threads);
                break;
            case MethodId::NormalBound:
                out = normality_p_bound(inst.censored, median_heuristic(inst.censored), cfg.alpha);
                break;
            case MethodId::PermExact:
                out = permutation_p_exact(inst.full.x, inst.full.y, median_heuristic(inst.full), plan, cfg.alpha,
                                          threads);
                break;
            case MethodId::CaseDeletion:
            case MethodId::MeanImpute:
            case MethodId::HotDeck: {
                const BaselineKind kind = m == MethodId::CaseDeletion ? BaselineKind::CaseDeletion
                                          : m == MethodId::MeanImpute ? BaselineKind::MeanImpute
                                                                      : BaselineKind::HotDeck;
                out = run_baseline(inst.censored, {kind, derive_seed(seed, {5})}, cfg.alpha, plan, threads);
                break;
            }
        }
        return {out.reject, false, out.p_upper};
    } catch (const PreconditionError&) {
        return {false, true, 1.0};
    }
}

// Rejection rate of every (size, s, method) cell over cfg.reps repetitions. Repetitions run
// in parallel; the result depends only on the config.
inline RejectionTable run_scenario(const ScenarioConfig& cfg, unsigned threads = default_threads()) {
    cfg.validate();
    const std::size_t sizes = cfg.n1.size(), ns = cfg.s.size(), nm = cfg.methods.size();
    const std::size_t tasks = sizes * ns * cfg.reps;
    std::vector<MethodResult> results(tasks * nm);
    parallel_for(tasks, threads, [&](std::size_t t) {
        const std::size_t rep = t % cfg.reps;
        const std::size_t si = (t / cfg.reps) % ns;
        const std::size_t zi = t / (cfg.reps * ns);
        const std::uint64_t seed = rep_seed(cfg, zi, si, rep);
        const ScenarioInstance inst = make_instance(cfg, zi, cfg.s[si], seed);
        for (std::size_t k = 0; k < nm; ++k) results[t * nm + k] = run_method(cfg.methods[k], inst, cfg, seed);
    });
    RejectionTable table;
    for (std::size_t zi = 0; zi < sizes; ++zi)
        for (std::size_t si = 0; si < ns; ++si)
            for (std::size_t k = 0; k < nm; ++k) {
                RejectionCell cell{cfg.methods[k], cfg.n1[zi], cfg.n2[zi], cfg.s[si], 0, cfg.reps, 0};
                for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
                    const auto& r = results[((zi * ns + si) * cfg.reps + rep) * nm + k];
                    cell.rejections += r.reject;
                    cell.warnings += r.warning;
                }
                table.cells.push_back(cell);
            }
    return table;
}

}  // namespace mmdmiss
