#pragma once

// Shared vocabulary: dense linear-algebra aliases, design-point types and the
// exception hierarchy used throughout the library.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqoed {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A design point in the (d_x-dimensional) input space.
using Point = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be invertible is not.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, Matrix null_space = {})
        : Error(what), null_space_(std::move(null_space)) {}

    /// Orthonormal basis (columns) of the deficient directions, when known.
    const Matrix& null_space() const noexcept { return null_space_; }

private:
    Matrix null_space_;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Input data could not be parsed; row/column are 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : Error(format(what, row, column)), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t column)
    {
        if (row == 0)
            return what;
        std::string s = what + " (row " + std::to_string(row);
        if (column != 0)
            s += ", column " + std::to_string(column);
        return s + ")";
    }

    std::size_t row_;
    std::size_t column_;
};

class StateError : public Error {
public:
    using Error::Error;
};

/// Build a point from an initializer list, e.g. `make_point({0.5, 2e5})`.
inline Point make_point(std::initializer_list<double> coords)
{
    Point p(static_cast<Eigen::Index>(coords.size()));
    Eigen::Index i = 0;
    for (double c : coords)
        p[i++] = c;
    return p;
}

/// Lexicographic ordering on coordinates; used for deterministic tie-breaking.
inline bool lex_less(const Point& a, const Point& b)
{
    const Eigen::Index n = std::min(a.size(), b.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (a[i] < b[i])
            return true;
        if (b[i] < a[i])
            return false;
    }
    return a.size() < b.size();
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector from_std(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace seqoed
