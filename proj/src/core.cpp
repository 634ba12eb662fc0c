#include "dalex/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "dalex/errors.hpp"

namespace dalex {

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty() || rows.front().empty()) {
        throw ShapeError("matrix must have at least one row and one column");
    }
    Matrix out(rows.size(), rows.front().size());
    for (Index i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) {
            throw ShapeError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size())
                             + " columns, expected " + std::to_string(rows.front().size()));
        }
        for (Index j = 0; j < rows[i].size(); ++j) {
            out(i, j) = rows[i][j];
        }
    }
    return out;
}

Matrix gather_cols(const Matrix& values, std::span<const Index> cases)
{
    Matrix out(values.rows(), cases.size());
    for (Index c = 0; c < cases.size(); ++c) {
        if (cases[c] >= static_cast<Index>(values.cols())) {
            throw ShapeError("case index " + std::to_string(cases[c]) + " out of range");
        }
        out.col(c) = values.col(cases[c]);
    }
    return out;
}

// Hash of a row's values with -0.0 folded onto 0.0 so that the hash agrees
// with operator== on doubles.
std::size_t hash_row(std::span<const double> row, std::size_t seed)
{
    for (double v : row) {
        if (v == 0.0) {
            v = 0.0;
        }
        seed = RandomSource::mix(seed ^ std::hash<double>{}(v));
    }
    return seed;
}

} // namespace

ErrorMatrix::ErrorMatrix(Matrix values) : values_(std::move(values))
{
    if (values_.rows() < 1 || values_.cols() < 1) {
        throw ShapeError("error matrix must be at least 1x1");
    }
    if (!values_.allFinite()) {
        throw ShapeError("error matrix contains non-finite entries");
    }
}

ErrorMatrix ErrorMatrix::from_rows(const std::vector<std::vector<double>>& rows)
{
    return ErrorMatrix(matrix_from_rows(rows));
}

ErrorMatrix ErrorMatrix::select_cols(std::span<const Index> cases) const
{
    return ErrorMatrix(gather_cols(values_, cases));
}

SupportMatrix::SupportMatrix(Matrix mask) : mask_(std::move(mask))
{
    if (mask_.rows() < 1 || mask_.cols() < 1) {
        throw ShapeError("support matrix must be at least 1x1");
    }
    for (Eigen::Index i = 0; i < mask_.rows(); ++i) {
        bool any = false;
        for (Eigen::Index j = 0; j < mask_.cols(); ++j) {
            const double v = mask_(i, j);
            if (v != 0.0 && v != 1.0) {
                throw ShapeError("support entries must be 0 or 1 (row " + std::to_string(i) + ")");
            }
            any = any || v == 1.0;
            full_ = full_ && v == 1.0;
        }
        if (!any) {
            throw ShapeError("support row " + std::to_string(i) + " has no defined case");
        }
    }
}

SupportMatrix SupportMatrix::full(Index rows, Index cols)
{
    return SupportMatrix(Matrix::Ones(rows, cols));
}

SupportMatrix SupportMatrix::from_rows(const std::vector<std::vector<double>>& rows)
{
    return SupportMatrix(matrix_from_rows(rows));
}

SupportMatrix SupportMatrix::select_cols(std::span<const Index> cases) const
{
    return SupportMatrix(gather_cols(mask_, cases));
}

void check_pair(const ErrorMatrix& errors, const SupportMatrix& support)
{
    if (errors.rows() != support.rows() || errors.cols() != support.cols()) {
        throw ShapeError("error matrix is " + std::to_string(errors.rows()) + "x"
                         + std::to_string(errors.cols()) + " but support matrix is "
                         + std::to_string(support.rows()) + "x" + std::to_string(support.cols()));
    }
    if (support.is_full()) {
        return;
    }
    for (Index i = 0; i < errors.rows(); ++i) {
        for (Index j = 0; j < errors.cols(); ++j) {
            if (!support.defined(i, j) && errors(i, j) != 0.0) {
                throw ShapeError("undefined entry (" + std::to_string(i) + "," + std::to_string(j)
                                 + ") must have error 0");
            }
        }
    }
}

Index EquivalenceClassing::population() const noexcept
{
    Index total = 0;
    for (const auto& m : members) {
        total += m.size();
    }
    return total;
}

std::vector<double> EquivalenceClassing::multiplicities() const
{
    std::vector<double> out;
    out.reserve(members.size());
    for (const auto& m : members) {
        out.push_back(static_cast<double>(m.size()));
    }
    return out;
}

EquivalenceClassing build_classes(const ErrorMatrix& errors, const SupportMatrix& support)
{
    check_pair(errors, support);
    const Index n = errors.rows();
    const Index m = errors.cols();

    std::unordered_multimap<std::size_t, Index> seen; // hash -> class id
    std::vector<Index> representative;
    std::vector<std::vector<Index>> members;

    for (Index i = 0; i < n; ++i) {
        const auto erow = errors.row(i);
        const auto srow = support.row(i);
        const std::size_t h = hash_row(srow, hash_row(erow, 0));
        Index found = members.size();
        auto [lo, hi] = seen.equal_range(h);
        for (auto it = lo; it != hi; ++it) {
            const Index r = representative[it->second];
            if (std::equal(erow.begin(), erow.end(), errors.row(r).begin())
                && std::equal(srow.begin(), srow.end(), support.row(r).begin())) {
                found = it->second;
                break;
            }
        }
        if (found == members.size()) {
            seen.emplace(h, found);
            representative.push_back(i);
            members.emplace_back();
        }
        members[found].push_back(i);
    }

    const Index k = members.size();
    Matrix ce(k, m);
    Matrix cs(k, m);
    for (Index c = 0; c < k; ++c) {
        ce.row(c) = errors.values().row(representative[c]);
        cs.row(c) = support.mask().row(representative[c]);
    }
    return {ErrorMatrix(std::move(ce)), SupportMatrix(std::move(cs)), std::move(members)};
}

EquivalenceClassing build_classes(const ErrorMatrix& errors)
{
    return build_classes(errors, SupportMatrix::full(errors.rows(), errors.cols()));
}

EquivalenceClassing singleton_classes(const ErrorMatrix& errors, const SupportMatrix& support)
{
    check_pair(errors, support);
    std::vector<std::vector<Index>> members(errors.rows());
    for (Index i = 0; i < errors.rows(); ++i) {
        members[i] = {i};
    }
    return {errors, support, std::move(members)};
}

std::vector<Index> expand_class_selection(const EquivalenceClassing& classing,
                                          std::span<const Index> class_indices,
                                          const RandomSource& rng, std::uint64_t first_event)
{
    std::vector<Index> out;
    out.reserve(class_indices.size());
    for (Index i = 0; i < class_indices.size(); ++i) {
        const Index c = class_indices[i];
        if (c >= classing.k()) {
            throw ShapeError("class id " + std::to_string(c) + " out of range (k="
                             + std::to_string(classing.k()) + ")");
        }
        const auto& mem = classing.members[c];
        if (mem.size() == 1) {
            out.push_back(mem.front());
            continue;
        }
        auto gen = rng.stream(first_event + i, Lane::Expand);
        std::uniform_int_distribution<Index> pick(0, mem.size() - 1);
        out.push_back(mem[pick(gen)]);
    }
    return out;
}

ErrorMatrix standardize_per_case(const ErrorMatrix& errors, std::span<const double> multiplicities,
                                 const SupportMatrix* support, std::vector<double>* resolution)
{
    const Index n = errors.rows();
    const Index m = errors.cols();
    if (multiplicities.size() != n) {
        throw ShapeError("multiplicities length " + std::to_string(multiplicities.size())
                         + " does not match " + std::to_string(n) + " rows");
    }
    for (double w : multiplicities) {
        if (!(w > 0.0)) {
            throw ShapeError("multiplicities must be positive");
        }
    }
    if (support != nullptr && (support->rows() != n || support->cols() != m)) {
        throw ShapeError("support shape does not match error matrix");
    }
    auto defined = [&](Index i, Index j) { return support == nullptr || support->defined(i, j); };

    Matrix out = Matrix::Zero(n, m);
    if (resolution != nullptr) {
        resolution->assign(m, 0.0);
    }
    for (Index j = 0; j < m; ++j) {
        double weight = 0.0;
        double lo = 0.0;
        double hi = 0.0;
        bool first = true;
        for (Index i = 0; i < n; ++i) {
            if (!defined(i, j)) {
                continue;
            }
            const double v = errors(i, j);
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
            weight += multiplicities[i];
        }
        // Constant (or empty) columns carry no information.
        if (first || lo == hi) {
            continue;
        }
        double mean = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (defined(i, j)) {
                mean += multiplicities[i] * errors(i, j);
            }
        }
        mean /= weight;
        double var = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (defined(i, j)) {
                const double d = errors(i, j) - mean;
                var += multiplicities[i] * d * d;
            }
        }
        const double sd = std::sqrt(var / weight);
        if (resolution != nullptr) {
            (*resolution)[j] = 16.0 * std::numeric_limits<double>::epsilon()
                               * std::max(std::abs(lo), std::abs(hi)) / sd;
        }
        for (Index i = 0; i < n; ++i) {
            if (defined(i, j)) {
                out(i, j) = (errors(i, j) - mean) / sd;
            }
        }
    }
    return ErrorMatrix(std::move(out));
}

Matrix read_matrix_csv(std::istream& in, const std::string& source)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (lineno == 1 && !line.empty() && line.front() == '#') {
            continue;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        std::vector<double> row;
        std::size_t pos = 0;
        while (true) {
            const std::size_t end = std::min(line.find(',', pos), line.size());
            std::size_t b = pos;
            std::size_t e = end;
            while (b < e && (line[b] == ' ' || line[b] == '\t')) {
                ++b;
            }
            while (e > b && (line[e - 1] == ' ' || line[e - 1] == '\t')) {
                --e;
            }
            double v = 0.0;
            const char* first = line.data() + b;
            const char* last = line.data() + e;
            if (b < e && *first == '+') {
                ++first;
            }
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (b == e || ec != std::errc{} || ptr != last) {
                throw ParseError(source + ":" + std::to_string(lineno) + ": invalid number '"
                                 + line.substr(b, e - b) + "'");
            }
            row.push_back(v);
            if (end == line.size()) {
                break;
            }
            pos = end + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(source + ":" + std::to_string(lineno) + ": expected "
                             + std::to_string(rows.front().size()) + " fields, found "
                             + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ParseError(source + ": no data rows");
    }
    return matrix_from_rows(rows);
}

Matrix read_matrix_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path + ": cannot open file");
    }
    return read_matrix_csv(in, path);
}

ErrorMatrix read_errors_csv(const std::string& path)
{
    Matrix values = read_matrix_csv_file(path);
    if (!values.allFinite()) {
        throw ParseError(path + ": non-finite error value");
    }
    return ErrorMatrix(std::move(values));
}

SupportMatrix read_support_csv(const std::string& path)
{
    Matrix values = read_matrix_csv_file(path);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (values(i, j) != 0.0 && values(i, j) != 1.0) {
                throw ParseError(path + ":" + std::to_string(i + 1)
                                 + ": support entries must be 0 or 1");
            }
        }
    }
    return SupportMatrix(std::move(values));
}

void write_matrix_csv(std::ostream& out, const Matrix& values)
{
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j > 0) {
                out << ',';
            }
            out << format_double(values(i, j));
        }
        out << '\n';
    }
}

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

} // namespace dalex
