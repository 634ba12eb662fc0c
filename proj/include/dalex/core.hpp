#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dalex/random.hpp"

namespace dalex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = std::size_t;

/// Dense per-case error values; rows are individuals (or classes), columns
/// are training cases. Entries are finite and the shape is at least 1x1.
class ErrorMatrix {
public:
    ErrorMatrix() = default;
    explicit ErrorMatrix(Matrix values);

    static ErrorMatrix from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] Index rows() const noexcept { return static_cast<Index>(values_.rows()); }
    [[nodiscard]] Index cols() const noexcept { return static_cast<Index>(values_.cols()); }
    [[nodiscard]] double operator()(Index i, Index j) const { return values_(i, j); }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const double> row(Index i) const
    {
        return {values_.data() + i * cols(), cols()};
    }

    // Columns `cases`, in the given order.
    [[nodiscard]] ErrorMatrix select_cols(std::span<const Index> cases) const;

private:
    Matrix values_;
};

/// 0/1 mask of the cases each individual is defined on. Every row has at
/// least one 1.
class SupportMatrix {
public:
    SupportMatrix() = default;
    explicit SupportMatrix(Matrix mask);

    static SupportMatrix full(Index rows, Index cols);
    static SupportMatrix from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] Index rows() const noexcept { return static_cast<Index>(mask_.rows()); }
    [[nodiscard]] Index cols() const noexcept { return static_cast<Index>(mask_.cols()); }
    [[nodiscard]] bool defined(Index i, Index j) const { return mask_(i, j) != 0.0; }
    [[nodiscard]] const Matrix& mask() const noexcept { return mask_; }
    [[nodiscard]] std::span<const double> row(Index i) const
    {
        return {mask_.data() + i * cols(), cols()};
    }
    [[nodiscard]] bool is_full() const noexcept { return full_; }

    [[nodiscard]] SupportMatrix select_cols(std::span<const Index> cases) const;

private:
    Matrix mask_;
    bool full_ = true;
};

// Throws ShapeError unless the pair is dimensionally consistent and every
// undefined entry carries error exactly 0.
void check_pair(const ErrorMatrix& errors, const SupportMatrix& support);

/// Population grouped by identical (error row, support row).
struct EquivalenceClassing {
    ErrorMatrix class_errors;
    SupportMatrix class_support;
    std::vector<std::vector<Index>> members;

    [[nodiscard]] Index k() const noexcept { return members.size(); }
    [[nodiscard]] Index population() const noexcept;
    [[nodiscard]] std::vector<double> multiplicities() const;
};

// Classes appear in order of their first member.
EquivalenceClassing build_classes(const ErrorMatrix& errors, const SupportMatrix& support);
EquivalenceClassing build_classes(const ErrorMatrix& errors);

// Trivial classing: every row its own class, even if duplicated.
EquivalenceClassing singleton_classes(const ErrorMatrix& errors, const SupportMatrix& support);

/// Maps selected classes back to individuals. Output i is a uniform draw
/// from the members of class_indices[i], using event `first_event + i`.
std::vector<Index> expand_class_selection(const EquivalenceClassing& classing,
                                          std::span<const Index> class_indices,
                                          const RandomSource& rng, std::uint64_t first_event = 0);

/// Per-case z-scores with multiplicity-weighted mean and population
/// standard deviation over the defined entries of each column. Columns whose
/// defined entries are all equal become zero; undefined entries stay zero.
///
/// When `resolution` is given it receives, per case, a bound on how far a
/// z-score may move when the inputs carry rounding at their own magnitude:
/// 16 eps max|e| / sd, or 0 for constant columns.
ErrorMatrix standardize_per_case(const ErrorMatrix& errors, std::span<const double> multiplicities,
                                 const SupportMatrix* support = nullptr,
                                 std::vector<double>* resolution = nullptr);

// CSV: one row per individual, comma separated, optional leading `#` line.
Matrix read_matrix_csv(std::istream& in, const std::string& source = "<stream>");
Matrix read_matrix_csv_file(const std::string& path);
ErrorMatrix read_errors_csv(const std::string& path);
SupportMatrix read_support_csv(const std::string& path);
void write_matrix_csv(std::ostream& out, const Matrix& values);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

} // namespace dalex
