#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qiproj {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument: bad degree, index out of range, wrong sample count.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Quasi-interpolant functional could not be built.
class ConstructionError : public Error {
public:
    ConstructionError(int functional, const std::string& what)
        : Error("functional " + std::to_string(functional) + ": " + what), functional_(functional) {}
    [[nodiscard]] int functional() const noexcept { return functional_; }

private:
    int functional_;
};

/// Kernel or integrand produced a non-finite value.
class NumericError : public Error {
public:
    NumericError(double s, double t, const std::string& what)
        : Error(what + " at (s=" + std::to_string(s) + ", t=" + std::to_string(t) + ")"), s_(s), t_(t) {}
    [[nodiscard]] double s() const noexcept { return s_; }
    [[nodiscard]] double t() const noexcept { return t_; }

private:
    double s_;
    double t_;
};

/// Non-finite matrix entry during system assembly.
class AssemblyError : public Error {
public:
    AssemblyError(int row, int col)
        : Error("non-finite entry at (" + std::to_string(row) + ", " + std::to_string(col) + ")"),
          row_(row), col_(col) {}
    [[nodiscard]] int row() const noexcept { return row_; }
    [[nodiscard]] int col() const noexcept { return col_; }

private:
    int row_;
    int col_;
};

/// Linear system is numerically singular.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Newton iteration did not converge within the iteration budget.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}
    [[nodiscard]] const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

/// Output could not be written.
class FileError : public Error {
public:
    using Error::Error;
};

}  // namespace qiproj
