#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace mmdmiss {

// Row-major n x d matrix of reals with a per-entry observed flag (1 = observed).
// Values under a cleared flag are kept but carry no meaning.
class MaskedMatrix {
public:
    MaskedMatrix() = default;

    MaskedMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), values_(rows * cols, 0.0), mask_(rows * cols, 1) {
        if (cols == 0) throw DimError("matrix must have at least one column");
    }

    MaskedMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : MaskedMatrix(rows, cols, std::move(values), std::vector<std::uint8_t>(rows * cols, 1)) {}

    MaskedMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                 std::vector<std::uint8_t> mask)
        : rows_(rows), cols_(cols), values_(std::move(values)), mask_(std::move(mask)) {
        if (cols == 0) throw DimError("matrix must have at least one column");
        if (values_.size() != rows * cols || mask_.size() != rows * cols)
            throw DimError("value/mask storage does not match " + std::to_string(rows) + "x" +
                           std::to_string(cols));
        for (auto& m : mask_) m = m ? 1 : 0;
    }

    // Builds a fully observed matrix from nested rows.
    static MaskedMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw EmptyInput("no rows");
        const std::size_t d = rows.front().size();
        std::vector<double> values;
        values.reserve(rows.size() * d);
        for (const auto& r : rows) {
            if (r.size() != d) throw DimError("ragged rows");
            values.insert(values.end(), r.begin(), r.end());
        }
        return MaskedMatrix(rows.size(), d, std::move(values));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double value(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    bool observed(std::size_t i, std::size_t j) const { return mask_[i * cols_ + j] != 0; }

    std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
    std::span<const std::uint8_t> row_mask(std::size_t i) const {
        return {mask_.data() + i * cols_, cols_};
    }

    void set(std::size_t i, std::size_t j, double v) {
        values_[i * cols_ + j] = v;
        mask_[i * cols_ + j] = 1;
    }
    void set_missing(std::size_t i, std::size_t j) { mask_[i * cols_ + j] = 0; }

    bool row_complete(std::size_t i) const {
        const auto m = row_mask(i);
        return std::all_of(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; });
    }
    bool row_fully_missing(std::size_t i) const {
        const auto m = row_mask(i);
        return std::none_of(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; });
    }
    std::size_t missing_cells() const {
        return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{0}));
    }
    bool complete() const { return missing_cells() == 0; }

    MaskedMatrix select_rows(std::span<const std::size_t> idx) const {
        MaskedMatrix out;
        out.rows_ = idx.size();
        out.cols_ = cols_;
        out.values_.reserve(idx.size() * cols_);
        out.mask_.reserve(idx.size() * cols_);
        for (std::size_t i : idx) {
            auto r = row(i);
            auto m = row_mask(i);
            out.values_.insert(out.values_.end(), r.begin(), r.end());
            out.mask_.insert(out.mask_.end(), m.begin(), m.end());
        }
        return out;
    }

    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

    // Same shape, same mask, and identical observed values.
    friend bool operator==(const MaskedMatrix& a, const MaskedMatrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.mask_ != b.mask_) return false;
        for (std::size_t k = 0; k < a.values_.size(); ++k)
            if (a.mask_[k] && a.values_[k] != b.values_[k]) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 1;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

struct TwoSampleData {
    MaskedMatrix x;
    MaskedMatrix y;

    TwoSampleData() = default;
    TwoSampleData(MaskedMatrix x_in, MaskedMatrix y_in) : x(std::move(x_in)), y(std::move(y_in)) {
        if (x.cols() != y.cols())
            throw DimError("samples differ in dimension: " + std::to_string(x.cols()) + " vs " +
                           std::to_string(y.cols()));
    }

    std::size_t dim() const noexcept { return x.cols(); }
    std::size_t n1() const noexcept { return x.rows(); }
    std::size_t n2() const noexcept { return y.rows(); }
    std::size_t n_total() const noexcept { return x.rows() + y.rows(); }
    std::size_t missing_cells() const { return x.missing_cells() + y.missing_cells(); }
    bool complete() const { return x.complete() && y.complete(); }

    // Pooled row k: X rows first, then Y rows.
    const MaskedMatrix& source(std::size_t k) const { return k < n1() ? x : y; }
    std::size_t local(std::size_t k) const { return k < n1() ? k : k - n1(); }
};

struct RowPartition {
    std::vector<std::size_t> incomplete_rows;
    std::vector<std::size_t> complete_rows;
    std::size_t m = 0;
};

inline RowPartition partition_rows(const MaskedMatrix& m) {
    RowPartition p;
    for (std::size_t i = 0; i < m.rows(); ++i)
        (m.row_complete(i) ? p.complete_rows : p.incomplete_rows).push_back(i);
    p.m = p.incomplete_rows.size();
    return p;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvOptions {
    std::string na_token = "NA";
    bool skip_header = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline bool parse_real(std::string_view cell, double& out) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return false;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

}  // namespace detail

// Parses CSV text. Cells that are empty or equal to na_token are missing. Trailing blank
// lines are ignored; LF and CRLF line endings are accepted. Row numbers in errors are
// 1-based file line numbers.
inline MaskedMatrix parse_csv(std::string_view text, const CsvOptions& opt = {}) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();

    const std::size_t first = opt.skip_header ? 1 : 0;
    if (lines.size() <= first) throw EmptyInput("CSV input has no data rows");

    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
    for (std::size_t li = first; li < lines.size(); ++li) {
        const std::size_t file_row = li + 1;
        std::size_t count = 0;
        std::string_view rest = lines[li];
        for (;;) {
            const std::size_t comma = rest.find(',');
            std::string_view cell = detail::trim(rest.substr(0, comma));
            ++count;
            if (cell.empty() || cell == opt.na_token) {
                values.push_back(std::numeric_limits<double>::quiet_NaN());
                mask.push_back(0);
            } else {
                double v = 0.0;
                if (!detail::parse_real(cell, v)) throw ParseError(file_row, count, std::string(cell));
                values.push_back(v);
                mask.push_back(1);
            }
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (li == first)
            cols = count;
        else if (count != cols)
            throw FormatError(file_row, "expected " + std::to_string(cols) + " cells, found " +
                                            std::to_string(count));
    }
    const std::size_t rows = lines.size() - first;
    return MaskedMatrix(rows, cols, std::move(values), std::move(mask));
}

inline MaskedMatrix load_csv(const std::string& path, const CsvOptions& opt = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), opt);
}

// Writes shortest round-trip decimal representations; missing cells become na_token.
inline void write_csv(std::ostream& out, const MaskedMatrix& m, const std::string& na_token = "NA") {
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            if (!m.observed(i, j)) {
                out << na_token;
                continue;
            }
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m.value(i, j));
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

inline std::string to_csv_string(const MaskedMatrix& m, const std::string& na_token = "NA") {
    std::ostringstream out;
    write_csv(out, m, na_token);
    return out.str();
}

}  // namespace mmdmiss
