#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "qiproj/bspline.hpp"
#include "qiproj/errors.hpp"

namespace qiproj {

/// m-point Gauss-Legendre rule on [-1, 1], nodes in increasing order.
struct GaussRule {
    int m = 0;
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline constexpr int kDefaultGaussPoints = 20;

namespace detail {

/// P_m(x) and P_m'(x) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int m, double x) {
    double p_prev = 1.0;
    double p = x;
    for (int k = 2; k <= m; ++k) {
        const double next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    if (m == 1) p_prev = 1.0;
    return {p, m * (x * p - p_prev) / (x * x - 1.0)};
}

}  // namespace detail

/// Roots of P_m by Newton iteration from the arccosine asymptotic guess.
inline GaussRule gauss_rule(int m) {
    if (m < 1 || m > 64) throw ParameterError("Gauss rule size must be in 1..64, got " + std::to_string(m));
    GaussRule rule;
    rule.m = m;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (int i = 0; i < (m + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        if (2 * i + 1 == m) {
            x = 0.0;
        } else {
            for (int iter = 0; iter < 100; ++iter) {
                const auto [p, dp] = detail::legendre_with_derivative(m, x);
                const double dx = p / dp;
                x -= dx;
                if (std::abs(dx) <= 1e-15) break;
            }
        }
        const double dp = detail::legendre_with_derivative(m, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[m - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[m - 1 - i] = w;
    }
    return rule;
}

/// Sum over cells [b_k, b_{k+1}] of the affinely mapped rule applied to f.
template <class F>
double composite_integrate(F&& f, std::span<const double> breakpoints, const GaussRule& rule) {
    if (breakpoints.size() < 2) throw ParameterError("composite integration needs at least one cell");
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
        const double a = breakpoints[k];
        const double b = breakpoints[k + 1];
        if (!(b > a)) throw ParameterError("breakpoints must be strictly increasing");
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double cell = 0.0;
        for (int q = 0; q < rule.m; ++q) cell += rule.weights[q] * f(mid + half * rule.nodes[q]);
        total += half * cell;
    }
    return total;
}

/// Flattened composite rule on the knot cells of a grid. Points of cell k
/// occupy positions [k*m, (k+1)*m).
struct CompositeRule {
    int cells = 0;
    int m = 0;
    std::vector<double> points;
    std::vector<double> weights;

    CompositeRule(const UniformKnotGrid& grid, const GaussRule& rule) : cells(grid.n()), m(rule.m) {
        points.reserve(static_cast<std::size_t>(cells) * m);
        weights.reserve(static_cast<std::size_t>(cells) * m);
        for (int k = 0; k < cells; ++k) {
            const double a = grid.knot(k);
            const double b = grid.knot(k + 1);
            const double half = 0.5 * (b - a);
            const double mid = 0.5 * (a + b);
            for (int q = 0; q < m; ++q) {
                points.push_back(mid + half * rule.nodes[q]);
                weights.push_back(half * rule.weights[q]);
            }
        }
    }

    [[nodiscard]] int size() const noexcept { return cells * m; }
};

}  // namespace qiproj
