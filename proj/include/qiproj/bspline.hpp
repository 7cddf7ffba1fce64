#pragma once

// Uniform clamped B-spline spaces on [0,1].
//
// Basis functions are indexed 1..N with N = n + d. B_i is supported on
// [t_{i-d-1}, t_i] over the extended knot sequence with (d+1)-fold end
// knots. Evaluation is right-continuous at interior knots; at t = 1 the left
// limit is used, so B_N(1) = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "qiproj/errors.hpp"

namespace qiproj {

/// Maximum supported spline degree.
inline constexpr int kMaxDegree = 7;

/// Uniform partition t_i = i/n of [0,1] with cell midpoints.
class UniformKnotGrid {
public:
    explicit UniformKnotGrid(int n) : n_(n) {
        if (n < 1) throw ParameterError("knot grid needs n >= 1, got " + std::to_string(n));
    }

    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] double h() const noexcept { return 1.0 / n_; }

    /// t_i for 0 <= i <= n. Indices outside are clamped, which yields the
    /// extended knot sequence.
    [[nodiscard]] double knot(int i) const noexcept {
        if (i <= 0) return 0.0;
        if (i >= n_) return 1.0;
        return static_cast<double>(i) / n_;
    }

    /// s_i = (t_{i-1} + t_i) / 2 for 1 <= i <= n.
    [[nodiscard]] double midpoint(int i) const {
        if (i < 1 || i > n_) throw ParameterError("midpoint index out of range");
        return (static_cast<double>(i) - 0.5) / n_;
    }

    /// Cell k in 0..n-1 with t_k <= t < t_{k+1}; t = 1 maps to the last cell.
    [[nodiscard]] int cell_of(double t) const noexcept {
        const int k = static_cast<int>(std::floor(t * n_));
        return std::clamp(k, 0, n_ - 1);
    }

    [[nodiscard]] std::vector<double> knots() const {
        std::vector<double> out(n_ + 1);
        for (int i = 0; i <= n_; ++i) out[i] = knot(i);
        return out;
    }

private:
    int n_;
};

/// Spline space S_d^{d-1} on a uniform grid, with dimension N = n + d.
class SplineSpace {
public:
    SplineSpace(int degree, int n) : degree_(degree), grid_(check(degree, n)) {}

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] const UniformKnotGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] int n() const noexcept { return grid_.n(); }
    [[nodiscard]] int dimension() const noexcept { return grid_.n() + degree_; }

    /// Extended knot sequence t_{-d}, ..., t_{n+d}; n + 2d + 1 entries.
    [[nodiscard]] std::vector<double> extended_knots() const {
        std::vector<double> out;
        out.reserve(n() + 2 * degree_ + 1);
        for (int m = -degree_; m <= n() + degree_; ++m) out.push_back(grid_.knot(m));
        return out;
    }

    /// Support [t_{i-d-1}, t_i] of B_i clipped to [0,1].
    [[nodiscard]] std::pair<double, double> support(int i) const {
        check_index(i);
        return {grid_.knot(i - degree_ - 1), grid_.knot(i)};
    }

    /// Half-open range [first, last) of grid cells in supp(B_i).
    [[nodiscard]] std::pair<int, int> support_cells(int i) const {
        check_index(i);
        return {std::max(i - degree_ - 1, 0), std::min(i, n())};
    }

    void check_index(int i) const {
        if (i < 1 || i > dimension())
            throw ParameterError("basis index " + std::to_string(i) + " outside 1.." +
                                 std::to_string(dimension()));
    }

    /// Values of the d+1 basis functions that can be nonzero at t. Writes
    /// them to `values` (size >= d+1) and returns the index of the first one.
    int active_basis(double t, std::span<double> values) const {
        const int d = degree_;
        const int k = grid_.cell_of(t);
        std::array<double, kMaxDegree + 1> left{};
        std::array<double, kMaxDegree + 1> right{};
        values[0] = 1.0;
        for (int j = 1; j <= d; ++j) {
            left[j] = t - grid_.knot(k + 1 - j);
            right[j] = grid_.knot(k + j) - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        return k + 1;
    }

private:
    static int check(int degree, int n) {
        if (degree < 1 || degree > kMaxDegree)
            throw ParameterError("spline degree must be in 1.." + std::to_string(kMaxDegree) +
                                 ", got " + std::to_string(degree));
        if (n < degree + 1)
            throw ParameterError("need n >= d + 1 subintervals, got n=" + std::to_string(n) +
                                 " for d=" + std::to_string(degree));
        return n;
    }

    int degree_;
    UniformKnotGrid grid_;
};

inline SplineSpace build_space(int degree, int n) { return SplineSpace(degree, n); }

inline void check_unit_interval(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("evaluation point outside [0,1]");
}

/// B_i(t) for 1 <= i <= N.
inline double eval_basis(const SplineSpace& space, int i, double t) {
    space.check_index(i);
    check_unit_interval(t);
    std::array<double, kMaxDegree + 1> vals{};
    const int first = space.active_basis(t, vals);
    const int offset = i - first;
    if (offset < 0 || offset > space.degree()) return 0.0;
    return vals[offset];
}

/// Element of a SplineSpace given by its B-spline coefficients.
class Spline {
public:
    Spline(SplineSpace space, std::vector<double> coefficients)
        : space_(space), coefficients_(std::move(coefficients)) {
        if (static_cast<int>(coefficients_.size()) != space_.dimension())
            throw ParameterError("spline needs " + std::to_string(space_.dimension()) +
                                 " coefficients, got " + std::to_string(coefficients_.size()));
    }

    [[nodiscard]] const SplineSpace& space() const noexcept { return space_; }
    [[nodiscard]] const std::vector<double>& coefficients() const noexcept { return coefficients_; }

    /// Coefficient of B_i, 1-based.
    [[nodiscard]] double coefficient(int i) const { return coefficients_.at(i - 1); }

    [[nodiscard]] double operator()(double t) const {
        check_unit_interval(t);
        return eval_unchecked(t);
    }

    [[nodiscard]] double eval_unchecked(double t) const noexcept {
        std::array<double, kMaxDegree + 1> vals{};
        const int first = space_.active_basis(t, vals);
        double sum = 0.0;
        for (int r = 0; r <= space_.degree(); ++r) sum += coefficients_[first - 1 + r] * vals[r];
        return sum;
    }

private:
    SplineSpace space_;
    std::vector<double> coefficients_;
};

inline double eval_spline(const Spline& s, double t) { return s(t); }

}  // namespace qiproj
