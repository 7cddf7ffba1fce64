#pragma once

// Benchmark equations with known solutions.
//
//   test1: k = cos(11 pi s) sin(11 pi t) u^2, phi(s) = cos(11 pi s)
//   test2: k = 1 / (s + t + u),                phi(t) = 1 / (t + c)

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "qiproj/errors.hpp"
#include "qiproj/operator.hpp"

namespace qiproj {

inline UrysohnProblem make_test1() {
    constexpr double w = 11.0 * std::numbers::pi;
    UrysohnProblem p;
    p.label = "test1";
    p.kernel = [](double s, double t, double u) { return std::cos(w * s) * std::sin(w * t) * u * u; };
    p.kernel_du = [](double s, double t, double u) { return 2.0 * std::cos(w * s) * std::sin(w * t) * u; };
    p.rhs = [](double s) { return (1.0 - 2.0 / (33.0 * std::numbers::pi)) * std::cos(w * s); };
    p.exact_solution = [](double s) { return std::cos(w * s); };
    return p;
}

/// Closed form of int_0^1 (t+c) / ((t+c)(t+s) + 1) dt.
inline double test2_integral(double s, double c) {
    const double b = c + s;
    const double cc = c * s + 1.0;
    const double disc = 4.0 * cc - b * b;
    const double root = std::sqrt(disc);
    return 0.5 * std::log((1.0 + b + cc) / cc) +
           (c - 0.5 * b) * (2.0 / root) * (std::atan((2.0 + b) / root) - std::atan(b / root));
}

inline UrysohnProblem make_test2(double c) {
    if (!(c > 0.0)) throw ParameterError("test2 needs c > 0");
    UrysohnProblem p;
    p.label = "test2(c=" + std::to_string(c) + ")";
    p.kernel = [](double s, double t, double u) { return 1.0 / (s + t + u); };
    p.kernel_du = [](double s, double t, double u) {
        const double r = 1.0 / (s + t + u);
        return -r * r;
    };
    p.rhs = [c](double s) { return 1.0 / (s + c) - test2_integral(s, c); };
    p.exact_solution = [c](double t) { return 1.0 / (t + c); };
    return p;
}

struct ProblemCatalogEntry {
    std::string id;
    double c = 0.0;
    bool ill_behaved = false;  ///< default to exact_seed + damping when set
    UrysohnProblem problem;
};

/// Look up "test1" or "test2" (which reads c).
inline ProblemCatalogEntry catalog_entry(std::string_view id, double c = 1.0) {
    if (id == "test1") return {"test1", 0.0, false, make_test1()};
    if (id == "test2") return {"test2", c, c < 0.5, make_test2(c)};
    throw ParameterError("unknown problem '" + std::string(id) + "'");
}

}  // namespace qiproj
