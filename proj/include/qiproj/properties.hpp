#pragma once

// Self-checks over every module: quadrature exactness, basis identities,
// projector defects and orders, operator linearization, linear solves,
// benchmark consistency and node superconvergence of the solvers.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qiproj/bspline.hpp"
#include "qiproj/dense_solve.hpp"
#include "qiproj/harness.hpp"
#include "qiproj/operator.hpp"
#include "qiproj/problems.hpp"
#include "qiproj/quadrature.hpp"
#include "qiproj/quasi_interp.hpp"
#include "qiproj/solver.hpp"

namespace qiproj {

enum class SuiteLevel { quick, full };

inline SuiteLevel parse_suite_level(std::string_view name) {
    if (name == "quick") return SuiteLevel::quick;
    if (name == "full") return SuiteLevel::full;
    throw ParameterError("unknown suite level '" + std::string(name) + "'");
}

struct SuiteOptions {
    SuiteLevel level = SuiteLevel::quick;
    /// Test hook: shift one QIP weight before the projector check.
    bool perturb_weights = false;
};

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct PropertySummary {
    std::vector<PropertyResult> results;
    /// Order tables for pi_n (full level only).
    std::string tables;

    [[nodiscard]] bool passed() const {
        for (const PropertyResult& r : results)
            if (!r.passed) return false;
        return true;
    }
    [[nodiscard]] std::vector<std::string> failures() const {
        std::vector<std::string> out;
        for (const PropertyResult& r : results)
            if (!r.passed) out.push_back(r.name);
        return out;
    }
};

namespace detail {

inline std::string fmt(const char* format, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, format, a, b);
    return buf;
}

/// max over a fine grid of |x - pi_n x|.
inline double projection_error(const QipScheme& scheme, const Evaluable& x, int samples = 2001) {
    const Spline p = scheme.project(x);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = static_cast<double>(k) / (samples - 1);
        worst = std::max(worst, std::abs(x(t) - p.eval_unchecked(t)));
    }
    return worst;
}

inline double node_error(const QipScheme& scheme, const Evaluable& x) {
    const Spline p = scheme.project(x);
    double worst = 0.0;
    for (double xi : scheme.node_set().nodes) worst = std::max(worst, std::abs(x(xi) - p.eval_unchecked(xi)));
    return worst;
}

/// |int_0^1 g (pi_n x - x)| on the knot cells.
inline double integral_defect(const QipScheme& scheme, const Evaluable& g, const Evaluable& x) {
    const Spline p = scheme.project(x);
    const GaussRule rule = gauss_rule(kDefaultGaussPoints);
    const std::vector<double> knots = scheme.space().grid().knots();
    return std::abs(composite_integrate([&](double t) { return g(t) * (p.eval_unchecked(t) - x(t)); }, knots, rule));
}

}  // namespace detail

inline PropertySummary run_property_suite(const SuiteOptions& options) {
    PropertySummary summary;
    const bool full = options.level == SuiteLevel::full;
    auto record = [&](std::string name, bool ok, std::string detail) {
        summary.results.push_back({std::move(name), ok, std::move(detail)});
    };
    auto guarded = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            record(name, false, std::string("threw: ") + e.what());
        }
    };
    const GaussRule rule = gauss_rule(kDefaultGaussPoints);

    guarded("gauss.exactness", [&] {
        double worst = 0.0;
        for (int m : {1, 2, 3, 5, 8, 13, 20, 32}) {
            const GaussRule r = gauss_rule(m);
            for (int k = 0; k <= 2 * m - 1; ++k) {
                double sum = 0.0;
                for (int q = 0; q < m; ++q) sum += r.weights[q] * std::pow(r.nodes[q], k);
                const double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
                worst = std::max(worst, std::abs(sum - exact));
            }
        }
        record("gauss.exactness", worst <= 1e-13, detail::fmt("max error %.2e over degree <= 2m-1", worst));
    });

    guarded("gauss.additivity", [&] {
        const std::vector<double> whole = {0.0, 1.0};
        const std::vector<double> split = {0.0, 0.3, 1.0};
        auto f = [](double t) { return std::exp(t); };
        const double a = composite_integrate(f, whole, rule);
        const double b = composite_integrate(f, split, rule);
        const double err = std::max(std::abs(a - b), std::abs(a - (std::exp(1.0) - 1.0)));
        record("gauss.additivity", err <= 1e-14, detail::fmt("discrepancy %.2e", err));
    });

    guarded("bspline.partition_of_unity", [&] {
        double worst = 0.0;
        std::array<double, kMaxDegree + 1> vals{};
        for (int d = 1; d <= kMaxDegree; ++d) {
            const SplineSpace space(d, 2 * d + 3);
            for (int k = 0; k <= 997; ++k) {
                const double t = k / 997.0;
                space.active_basis(t, vals);
                double sum = 0.0;
                for (int r = 0; r <= d; ++r) {
                    sum += vals[r];
                    if (vals[r] < -1e-15) worst = std::max(worst, -vals[r]);
                }
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        }
        record("bspline.partition_of_unity", worst <= 1e-14, detail::fmt("max defect %.2e", worst));
    });

    guarded("qip.projector_defect", [&] {
        std::vector<int> ns = {16, 64};
        if (full) ns.push_back(256);
        double worst = 0.0;
        for (QipVariant v : {QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3, QipVariant::Linear})
            for (int n : ns) {
                QipScheme scheme = build_qip(build_space(variant_degree(v), n), v);
                if (options.perturb_weights) scheme = scheme.with_weight_offset(scheme.dimension() / 2, 0, 1e-6);
                worst = std::max(worst, projector_defect(scheme));
            }
        record("qip.projector_defect", worst <= 1e-12, detail::fmt("max defect %.2e", worst));
    });

    guarded("qip.spline_reproduction", [&] {
        std::mt19937 gen(12345);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        double worst = 0.0;
        for (QipVariant v : {QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3}) {
            const SplineSpace space = build_space(variant_degree(v), 24);
            std::vector<double> c(space.dimension());
            for (double& x : c) x = dist(gen);
            const Spline s(space, c);
            const Spline p = build_qip(space, v).project([&](double t) { return s.eval_unchecked(t); });
            for (int i = 0; i < space.dimension(); ++i) worst = std::max(worst, std::abs(p.coefficients()[i] - c[i]));
        }
        record("qip.spline_reproduction", worst <= 1e-12, detail::fmt("max coefficient error %.2e", worst));
    });

    const std::vector<int> order_ns = full ? std::vector<int>{16, 32, 64, 128, 256} : std::vector<int>{16, 32, 64};
    const Evaluable expf = [](double t) { return std::exp(t); };
    std::ostringstream tables;

    // Orders over successive doublings, reported for the two finest pairs.
    struct OrderRun {
        std::vector<double> sup, integral, nodes;
    };
    auto order_run = [&](QipVariant v) {
        OrderRun run;
        for (int n : order_ns) {
            const QipScheme scheme = build_qip(build_space(variant_degree(v), n), v);
            run.sup.push_back(detail::projection_error(scheme, expf));
            run.integral.push_back(detail::integral_defect(scheme, expf, expf));
            run.nodes.push_back(detail::node_error(scheme, expf));
        }
        return run;
    };
    auto finest_orders = [](const std::vector<double>& e) {
        const std::size_t k = e.size();
        return std::pair{std::log2(e[k - 3] / e[k - 2]), std::log2(e[k - 2] / e[k - 1])};
    };
    std::vector<std::pair<QipVariant, OrderRun>> runs;

    guarded("qip.approximation_order", [&] {
        for (QipVariant v : {QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3}) runs.emplace_back(v, order_run(v));
        bool ok = true;
        std::string text;
        for (const auto& [v, run] : runs) {
            const auto [a, b] = finest_orders(run.sup);
            ok = ok && std::min(a, b) >= variant_degree(v) + 0.7;
            text += std::string(to_string(v)) + detail::fmt(" %.2f/%.2f ", a, b);
        }
        record("qip.approximation_order", ok, "two finest pairs: " + text);
    });

    guarded("qip.integral_superconvergence", [&] {
        bool ok = true;
        std::string text;
        for (const auto& [v, run] : runs) {
            if (variant_degree(v) % 2 != 0) continue;
            const auto [a, b] = finest_orders(run.integral);
            ok = ok && std::min(a, b) >= variant_degree(v) + 1.7;
            text += std::string(to_string(v)) + detail::fmt(" %.2f/%.2f ", a, b);
        }
        record("qip.integral_superconvergence", ok && !runs.empty(), "two finest pairs: " + text);
    });

    guarded("qip.node_superconvergence", [&] {
        bool ok = true;
        std::string text;
        for (const auto& [v, run] : runs) {
            if (variant_degree(v) != 2) continue;
            const auto [a, b] = finest_orders(run.nodes);
            ok = ok && std::min(a, b) >= 3.7;
            text += std::string(to_string(v)) + detail::fmt(" %.2f/%.2f ", a, b);
        }
        record("qip.node_superconvergence", ok && !runs.empty(), "two finest pairs: " + text);
    });

    if (full) {
        tables << "| variant | n | sup error | order | integral defect | order | node error | order |\n"
               << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& [v, run] : runs)
            for (std::size_t k = 0; k < order_ns.size(); ++k) {
                auto order = [&](const std::vector<double>& e) {
                    return k == 0 ? std::string() : detail::fmt("%.2f", std::log2(e[k - 1] / e[k]));
                };
                tables << "| " << to_string(v) << " | " << order_ns[k] << " | " << compact_sci(run.sup[k]) << " | "
                       << order(run.sup) << " | " << compact_sci(run.integral[k]) << " | " << order(run.integral)
                       << " | " << compact_sci(run.nodes[k]) << " | " << order(run.nodes) << " |\n";
            }
    }

    guarded("qip.norm_bounded", [&] {
        double worst = 0.0;
        double spread = 0.0;
        for (QipVariant v : {QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3}) {
            const int d = variant_degree(v);
            const double small = norm_estimate(build_qip(build_space(d, 16), v));
            const double large = norm_estimate(build_qip(build_space(d, 64), v));
            worst = std::max({worst, small, large});
            spread = std::max(spread, std::abs(large - small));
        }
        record("qip.norm_bounded", worst <= 10.0 && spread <= 0.5,
               detail::fmt("max norm %.3f, change across n %.2e", worst, spread));
    });

    const UrysohnProblem t2 = make_test2(1.0);
    const UniformKnotGrid grid16(16);

    guarded("operator.linearity", [&] {
        auto x = [](double t) { return 1.0 + 0.5 * t; };
        auto h1 = [](double t) { return std::sin(3.0 * t); };
        auto h2 = [](double t) { return t * t - 0.2; };
        double worst = 0.0;
        for (double s : {0.0, 0.37, 1.0}) {
            const double lhs = apply_Kprime(t2, x, [&](double t) { return 2.0 * h1(t) - 3.0 * h2(t); }, s, rule, grid16);
            const double rhs = 2.0 * apply_Kprime(t2, x, h1, s, rule, grid16) - 3.0 * apply_Kprime(t2, x, h2, s, rule, grid16);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
        record("operator.linearity", worst <= 1e-13, detail::fmt("max defect %.2e", worst));
    });

    guarded("operator.frechet_remainder", [&] {
        auto x = [](double t) { return 1.0 / (t + 1.0); };
        auto h = [](double t) { return std::cos(2.0 * t); };
        auto remainder = [&](double eps) {
            double worst = 0.0;
            for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const double kx = apply_K(t2, x, s, rule, grid16);
                const double kxe = apply_K(t2, [&](double t) { return x(t) + eps * h(t); }, s, rule, grid16);
                const double lin = eps * apply_Kprime(t2, x, h, s, rule, grid16);
                worst = std::max(worst, std::abs(kxe - kx - lin));
            }
            return worst;
        };
        // Second order: shrinking eps tenfold shrinks the remainder about a hundredfold.
        const double ratio = remainder(1e-3) / remainder(1e-4);
        record("operator.frechet_remainder", ratio >= 100.0 / 3.0 && ratio <= 300.0,
               detail::fmt("remainder ratio %.2f for eps 1e-3 -> 1e-4", ratio));
    });

    guarded("operator.kprime_on_basis", [&] {
        const SplineSpace space = build_space(2, 8);
        auto x = [](double t) { return 1.0 + t; };
        double worst = 0.0;
        for (int j = 1; j <= space.dimension(); ++j)
            for (double s : {0.1, 0.9}) {
                const double a = kprime_on_basis(t2, x, space, j, s, rule);
                const double b = apply_Kprime(t2, x, [&](double t) { return eval_basis(space, j, t); }, s, rule,
                                              space.grid());
                worst = std::max(worst, std::abs(a - b));
            }
        record("operator.kprime_on_basis", worst <= 1e-14, detail::fmt("max discrepancy %.2e", worst));
    });

    guarded("dense_solve.residual", [&] {
        std::mt19937 gen(7);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Eigen::MatrixXd a(50, 50);
        Eigen::VectorXd b(50);
        for (int i = 0; i < 50; ++i) {
            b(i) = dist(gen);
            for (int j = 0; j < 50; ++j) a(i, j) = dist(gen);
        }
        const Eigen::VectorXd x = dense_solve(a, b);
        const double random_res = (a * x - b).cwiseAbs().maxCoeff() / (a.cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff());
        Eigen::MatrixXd hilbert(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) hilbert(i, j) = 1.0 / (i + j + 1);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
        const Eigen::VectorXd y = dense_solve(hilbert, hilbert * ones);
        const double hilbert_res = (hilbert * y - hilbert * ones).cwiseAbs().maxCoeff();
        record("dense_solve.residual", random_res <= 1e-13 && hilbert_res <= 1e-13,
               detail::fmt("random 50x50 %.2e, hilbert 8x8 %.2e", random_res, hilbert_res));
    });

    guarded("problems.test2_closed_form", [&] {
        double worst = 0.0;
        const std::vector<double> knots = UniformKnotGrid(64).knots();
        for (double c : {0.1, 1.0})
            for (double s : {0.0, 0.3, 0.77, 1.0}) {
                const double q = composite_integrate(
                    [&](double t) { return (t + c) / ((t + c) * (t + s) + 1.0); }, knots, rule);
                worst = std::max(worst, std::abs(q - test2_integral(s, c)));
            }
        record("problems.test2_closed_form", worst <= 1e-13, detail::fmt("max discrepancy %.2e", worst));
    });

    guarded("problems.self_consistency", [&] {
        const double r1 = self_consistency_residual(make_test1());
        const double r2 = std::max(self_consistency_residual(make_test2(1.0)), self_consistency_residual(make_test2(0.1)));
        record("problems.self_consistency", r1 <= 1e-12 && r2 <= 1e-12,
               detail::fmt("test1 %.2e, test2 %.2e", r1, r2));
    });

    guarded("solver.node_superconvergence", [&] {
        StudySpec spec;
        spec.problem = "test1";
        spec.variant = QipVariant::Q2;
        spec.n_list = full ? std::vector<int>{80, 160} : std::vector<int>{40, 80};
        spec.method = Method::highorder;
        const ConvergenceReport high = run_study(spec);
        spec.method = Method::collocation;
        const ConvergenceReport coll = run_study(spec);
        const auto& h = high.rows.back();
        const auto& c = coll.rows.back();
        const bool ok = !high.any_failed() && !coll.any_failed() && h.order_es && c.order_es &&
                        *h.order_es >= 7.4 && *c.order_es >= 3.6;
        record("solver.node_superconvergence", ok,
               detail::fmt("node orders: highorder %.2f, collocation %.2f", h.order_es.value_or(NAN),
                           c.order_es.value_or(NAN)));
    });

    summary.tables = tables.str();
    return summary;
}

inline std::string format_summary(const PropertySummary& summary) {
    std::string out;
    for (const PropertyResult& r : summary.results)
        out += std::string(r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.detail + "\n";
    if (!summary.tables.empty()) out += "\n" + summary.tables;
    return out;
}

}  // namespace qiproj
