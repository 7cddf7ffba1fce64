#pragma once

// Urysohn operator K(x)(s) = int_0^1 k(s,t,x(t)) dt and its Frechet
// derivative (K'(x)h)(s) = int_0^1 dk/du(s,t,x(t)) h(t) dt, evaluated by
// composite Gauss-Legendre quadrature on knot-aligned cells.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "qiproj/bspline.hpp"
#include "qiproj/errors.hpp"
#include "qiproj/quadrature.hpp"

namespace qiproj {

using Evaluable = std::function<double(double)>;
using KernelFn = std::function<double(double, double, double)>;

struct UrysohnProblem {
    std::string label;
    KernelFn kernel;     ///< k(s, t, u)
    KernelFn kernel_du;  ///< dk/du(s, t, u)
    Evaluable rhs;       ///< f(s)
    std::optional<Evaluable> exact_solution;
};

namespace detail {

inline double checked(double value, double s, double t, const char* what) {
    if (!std::isfinite(value)) throw NumericError(s, t, what);
    return value;
}

/// Quadrature over cells [first, last) of the grid.
template <class F>
double integrate_cells(F&& f, const UniformKnotGrid& grid, int first, int last, const GaussRule& rule) {
    double total = 0.0;
    for (int k = first; k < last; ++k) {
        const double a = grid.knot(k);
        const double b = grid.knot(k + 1);
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double cell = 0.0;
        for (int q = 0; q < rule.m; ++q) cell += rule.weights[q] * f(mid + half * rule.nodes[q]);
        total += half * cell;
    }
    return total;
}

}  // namespace detail

/// K(x)(s).
template <class X>
double apply_K(const UrysohnProblem& problem, const X& x, double s, const GaussRule& rule,
               const UniformKnotGrid& grid) {
    check_unit_interval(s);
    return detail::integrate_cells(
        [&](double t) { return detail::checked(problem.kernel(s, t, x(t)), s, t, "kernel is not finite"); },
        grid, 0, grid.n(), rule);
}

/// (K'(x) h)(s).
template <class X, class H>
double apply_Kprime(const UrysohnProblem& problem, const X& x, const H& hfun, double s, const GaussRule& rule,
                    const UniformKnotGrid& grid) {
    check_unit_interval(s);
    return detail::integrate_cells(
        [&](double t) {
            return detail::checked(problem.kernel_du(s, t, x(t)), s, t, "kernel derivative is not finite") *
                   hfun(t);
        },
        grid, 0, grid.n(), rule);
}

/// (K'(x) B_j)(s), integrating over the cells of supp(B_j) only.
template <class X>
double kprime_on_basis(const UrysohnProblem& problem, const X& x, const SplineSpace& space, int j, double s,
                       const GaussRule& rule) {
    check_unit_interval(s);
    const auto [first, last] = space.support_cells(j);
    const int d = space.degree();
    return detail::integrate_cells(
        [&](double t) {
            std::array<double, kMaxDegree + 1> vals{};
            const int lead = space.active_basis(t, vals);
            const int offset = j - lead;
            const double bj = (offset >= 0 && offset <= d) ? vals[offset] : 0.0;
            return detail::checked(problem.kernel_du(s, t, x(t)), s, t, "kernel derivative is not finite") * bj;
        },
        space.grid(), first, last, rule);
}

/// max over `samples` equispaced s of |phi(s) - K(phi)(s) - f(s)|.
inline double self_consistency_residual(const UrysohnProblem& problem, int samples = 20, int cells = 128,
                                        int gauss_points = kDefaultGaussPoints) {
    if (!problem.exact_solution) throw ParameterError(problem.label + ": no exact solution");
    const Evaluable& phi = *problem.exact_solution;
    const GaussRule rule = gauss_rule(gauss_points);
    const UniformKnotGrid grid(cells);
    double worst = 0.0;
    for (int p = 0; p < samples; ++p) {
        const double s = (p + 0.5) / samples;
        worst = std::max(worst, std::abs(phi(s) - apply_K(problem, phi, s, rule, grid) - problem.rhs(s)));
    }
    return worst;
}

}  // namespace qiproj
