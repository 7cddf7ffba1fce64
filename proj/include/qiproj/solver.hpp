#pragma once

// Newton-Kantorovich solvers for the spline collocation method
//     phi_C - pi_n K(phi_C) = pi_n f
// and the high-order modified projection method
//     phi_H - [pi_n K + K pi_n - pi_n K pi_n](phi_H) = f,
// both written on the coefficient vector of a spline in S_d^{d-1}.
//
// Every integral runs over the composite Gauss rule on the knot cells. The
// iterate and the corrected iterate are tabulated once per Newton step at
// the QI nodes and at all quadrature abscissae.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qiproj/bspline.hpp"
#include "qiproj/dense_solve.hpp"
#include "qiproj/errors.hpp"
#include "qiproj/operator.hpp"
#include "qiproj/quadrature.hpp"
#include "qiproj/quasi_interp.hpp"

namespace qiproj {

enum class Method { collocation, highorder };

inline std::string_view to_string(Method m) { return m == Method::collocation ? "collocation" : "highorder"; }

inline Method parse_method(std::string_view name) {
    if (name == "collocation") return Method::collocation;
    if (name == "highorder") return Method::highorder;
    throw ParameterError("unknown method '" + std::string(name) + "'");
}

enum class SeedPolicy { project_rhs, exact_seed, custom };

inline std::string_view to_string(SeedPolicy p) {
    switch (p) {
        case SeedPolicy::project_rhs: return "project_rhs";
        case SeedPolicy::exact_seed: return "exact_seed";
        case SeedPolicy::custom: return "custom";
    }
    return "?";
}

inline SeedPolicy parse_seed_policy(std::string_view name) {
    if (name == "project_rhs") return SeedPolicy::project_rhs;
    if (name == "exact_seed") return SeedPolicy::exact_seed;
    if (name == "custom") return SeedPolicy::custom;
    throw ParameterError("unknown seed policy '" + std::string(name) + "'");
}

struct NewtonConfig {
    double tol = 1e-14;
    int max_iter = 50;
    SeedPolicy seed = SeedPolicy::project_rhs;
    std::vector<double> custom_seed;
    /// Halve the step while the discrete residual grows.
    bool damped = false;

    void validate() const {
        if (!(tol > 0.0)) throw ParameterError("Newton tolerance must be positive");
        if (max_iter < 1) throw ParameterError("max_iter must be >= 1");
    }
};

struct SolveResult {
    std::vector<double> coefficients;
    int iterations = 0;
    std::vector<double> increment_history;
    double residual = 0.0;
    Method method = Method::collocation;
    int damping_halvings = 0;
};

/// Quadrature and projector data shared by every assembly on one space.
class Discretization {
public:
    Discretization(const QipScheme& scheme, const GaussRule& rule)
        : scheme_(scheme), rule_(rule), quad_(scheme.space().grid(), rule) {
        const SplineSpace& space = scheme_.space();
        const int d = space.degree();
        const int N = space.dimension();
        const int Q = quad_.size();
        basis_first_.resize(Q);
        basis_values_.resize(static_cast<std::size_t>(Q) * (d + 1));
        for (int q = 0; q < Q; ++q)
            basis_first_[q] = space.active_basis(quad_.points[q], std::span(&basis_values_[q * (d + 1)], d + 1));

        lambda_ = Eigen::MatrixXd::Zero(N, node_count());
        for (int i = 1; i <= N; ++i) {
            const Stencil& st = scheme_.stencil(i);
            for (std::size_t k = 0; k < st.nodes.size(); ++k) lambda_(i - 1, st.nodes[k]) += st.weights[k];
        }
        node_basis_ = Eigen::MatrixXd::Zero(node_count(), N);
        std::array<double, kMaxDegree + 1> vals{};
        for (int k = 0; k < node_count(); ++k) {
            const int first = space.active_basis(scheme_.node_set()[k], vals);
            for (int r = 0; r <= d; ++r) node_basis_(k, first - 1 + r) = vals[r];
        }
    }

    [[nodiscard]] const QipScheme& scheme() const noexcept { return scheme_; }
    [[nodiscard]] const SplineSpace& space() const noexcept { return scheme_.space(); }
    [[nodiscard]] const GaussRule& rule() const noexcept { return rule_; }
    [[nodiscard]] const CompositeRule& quadrature() const noexcept { return quad_; }
    [[nodiscard]] int dimension() const noexcept { return scheme_.dimension(); }
    [[nodiscard]] int node_count() const noexcept { return scheme_.node_count(); }
    [[nodiscard]] int abscissa_count() const noexcept { return quad_.size(); }
    [[nodiscard]] std::span<const double> nodes() const noexcept { return scheme_.node_set().nodes; }
    [[nodiscard]] std::span<const double> abscissae() const noexcept { return quad_.points; }

    /// Coefficient map: node samples -> spline coefficients.
    [[nodiscard]] const Eigen::MatrixXd& lambda() const noexcept { return lambda_; }
    /// B_j(xi_k).
    [[nodiscard]] const Eigen::MatrixXd& node_basis() const noexcept { return node_basis_; }

    /// Spline with coefficients c at every quadrature abscissa.
    [[nodiscard]] Eigen::VectorXd spline_at_abscissae(const Eigen::VectorXd& c) const {
        const int d = space().degree();
        Eigen::VectorXd out(abscissa_count());
        for (int q = 0; q < abscissa_count(); ++q) {
            double sum = 0.0;
            for (int r = 0; r <= d; ++r) sum += c(basis_first_[q] - 1 + r) * basis_values_[q * (d + 1) + r];
            out(q) = sum;
        }
        return out;
    }

    [[nodiscard]] Eigen::VectorXd spline_at_nodes(const Eigen::VectorXd& c) const { return node_basis_ * c; }

    /// Rows of a (points x N) matrix: sum_q M(p,q) B_j(t_q) for a dense M.
    [[nodiscard]] Eigen::MatrixXd times_basis(const Eigen::MatrixXd& m) const {
        const int d = space().degree();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), dimension());
        for (int q = 0; q < abscissa_count(); ++q) {
            const int first = basis_first_[q] - 1;
            for (int r = 0; r <= d; ++r) out.col(first + r) += basis_values_[q * (d + 1) + r] * m.col(q);
        }
        return out;
    }

    /// Basis-value matrix applied on the left: (Q x N) result of B(t_q, :) * c.
    [[nodiscard]] Eigen::MatrixXd basis_times(const Eigen::MatrixXd& c) const {
        const int d = space().degree();
        Eigen::MatrixXd out(abscissa_count(), c.cols());
        for (int q = 0; q < abscissa_count(); ++q) {
            const int first = basis_first_[q] - 1;
            out.row(q) = basis_values_[q * (d + 1)] * c.row(first);
            for (int r = 1; r <= d; ++r) out.row(q) += basis_values_[q * (d + 1) + r] * c.row(first + r);
        }
        return out;
    }

    /// sum_q w_q k(s, t_q, u_q) for every s in `points`.
    [[nodiscard]] Eigen::VectorXd apply_kernel(const KernelFn& kernel, std::span<const double> points,
                                               const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
        const int Q = abscissa_count();
        for (std::size_t p = 0; p < points.size(); ++p) {
            const double s = points[p];
            double sum = 0.0;
            for (int q = 0; q < Q; ++q) sum += quad_.weights[q] * kernel(s, quad_.points[q], u(q));
            if (!std::isfinite(sum)) locate_non_finite(kernel, s, u);
            out(static_cast<Eigen::Index>(p)) = sum;
        }
        return out;
    }

    /// Weighted kernel matrix M(p, q) = w_q k(s_p, t_q, u_q) for rows
    /// [row_begin, row_end) of `points`.
    [[nodiscard]] Eigen::MatrixXd weighted_kernel(const KernelFn& kernel, std::span<const double> points,
                                                  const Eigen::VectorXd& u, std::size_t row_begin,
                                                  std::size_t row_end) const {
        const int Q = abscissa_count();
        Eigen::MatrixXd out(static_cast<Eigen::Index>(row_end - row_begin), Q);
        for (int q = 0; q < Q; ++q) {
            const double t = quad_.points[q];
            const double w = quad_.weights[q];
            const double uq = u(q);
            for (std::size_t p = row_begin; p < row_end; ++p) {
                const double v = kernel(points[p], t, uq);
                if (!std::isfinite(v)) throw NumericError(points[p], t, "kernel derivative is not finite");
                out(static_cast<Eigen::Index>(p - row_begin), q) = w * v;
            }
        }
        return out;
    }

    /// (K'(u) B_j)(s_p) for every point p and basis index j.
    [[nodiscard]] Eigen::MatrixXd kprime_basis_matrix(const KernelFn& kernel_du, std::span<const double> points,
                                                      const Eigen::VectorXd& u) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), dimension());
        for (std::size_t begin = 0; begin < points.size(); begin += kBlockRows) {
            const std::size_t end = std::min(points.size(), begin + kBlockRows);
            out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
                times_basis(weighted_kernel(kernel_du, points, u, begin, end));
        }
        return out;
    }

    [[nodiscard]] Eigen::VectorXd sample(const Evaluable& f, std::span<const double> points) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
        for (std::size_t p = 0; p < points.size(); ++p) out(static_cast<Eigen::Index>(p)) = f(points[p]);
        return out;
    }

    static constexpr std::size_t kBlockRows = 64;

private:
    [[noreturn]] void locate_non_finite(const KernelFn& kernel, double s, const Eigen::VectorXd& u) const {
        for (int q = 0; q < abscissa_count(); ++q)
            if (!std::isfinite(kernel(s, quad_.points[q], u(q))))
                throw NumericError(s, quad_.points[q], "kernel is not finite");
        throw NumericError(s, std::numeric_limits<double>::quiet_NaN(), "kernel integral overflowed");
    }

    const QipScheme& scheme_;
    GaussRule rule_;
    CompositeRule quad_;
    std::vector<int> basis_first_;
    std::vector<double> basis_values_;
    Eigen::MatrixXd lambda_;
    Eigen::MatrixXd node_basis_;
};

namespace detail {

inline void check_finite(const Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (!std::isfinite(m(i, j))) throw AssemblyError(static_cast<int>(i) + 1, static_cast<int>(j) + 1);
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Collocation system at iterate zeta: (I - C) y_next = r.
struct CollocationSystem {
    Eigen::MatrixXd C;
    Eigen::VectorXd r;
    /// Discrete residual y - lambda(K zeta) - lambda(f) at the iterate.
    Eigen::VectorXd residual;
};

/// Values that depend only on the current collocation iterate.
struct CollocationState {
    Eigen::VectorXd y;
    Eigen::VectorXd at_abscissae;
    Eigen::VectorXd rhs_functionals;  ///< lambda(K zeta) + lambda(f)
};

inline CollocationState collocation_state(const UrysohnProblem& problem, const Discretization& disc,
                                          const Eigen::VectorXd& y) {
    CollocationState st;
    st.y = y;
    st.at_abscissae = disc.spline_at_abscissae(y);
    const Eigen::VectorXd k_nodes = disc.apply_kernel(problem.kernel, disc.nodes(), st.at_abscissae);
    st.rhs_functionals = disc.lambda() * (k_nodes + disc.sample(problem.rhs, disc.nodes()));
    return st;
}

inline CollocationSystem assemble_collocation(const UrysohnProblem& problem, const Discretization& disc,
                                              const CollocationState& st) {
    CollocationSystem sys;
    sys.C = disc.lambda() * disc.kprime_basis_matrix(problem.kernel_du, disc.nodes(), st.at_abscissae);
    detail::check_finite(sys.C);
    sys.r = st.rhs_functionals - sys.C * st.y;
    sys.residual = st.y - st.rhs_functionals;
    return sys;
}

inline CollocationSystem assemble_collocation(const UrysohnProblem& problem, const QipScheme& scheme,
                                              const Spline& zeta, const GaussRule& rule) {
    const Discretization disc(scheme, rule);
    return assemble_collocation(problem, disc, collocation_state(problem, disc, detail::to_eigen(zeta.coefficients())));
}

/// High-order system at iterate psi: (I - A - B) x_next = d.
struct HighOrderSystem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd d;
    /// Discrete residual x - lambda(K phi) - lambda(f) at the iterate.
    Eigen::VectorXd residual;
};

/// Values that depend only on the current high-order iterate psi.
struct HighOrderState {
    Eigen::VectorXd x;
    Eigen::VectorXd psi_abscissae;
    Eigen::VectorXd phi_nodes;      ///< corrected iterate psi + (I - pi_n)(K psi + f)
    Eigen::VectorXd phi_abscissae;
    Eigen::VectorXd rhs_functionals;  ///< lambda(K phi) + lambda(f)
};

inline HighOrderState highorder_state(const UrysohnProblem& problem, const Discretization& disc,
                                      const Eigen::VectorXd& x) {
    HighOrderState st;
    st.x = x;
    st.psi_abscissae = disc.spline_at_abscissae(x);
    const Eigen::VectorXd psi_nodes = disc.spline_at_nodes(x);
    const Eigen::VectorXd f_nodes = disc.sample(problem.rhs, disc.nodes());
    const Eigen::VectorXd g_nodes = disc.apply_kernel(problem.kernel, disc.nodes(), st.psi_abscissae) + f_nodes;
    const Eigen::VectorXd g_abs = disc.apply_kernel(problem.kernel, disc.abscissae(), st.psi_abscissae) +
                                  disc.sample(problem.rhs, disc.abscissae());
    const Eigen::VectorXd g_coeffs = disc.lambda() * g_nodes;
    st.phi_nodes = psi_nodes + g_nodes - disc.spline_at_nodes(g_coeffs);
    st.phi_abscissae = st.psi_abscissae + g_abs - disc.spline_at_abscissae(g_coeffs);
    st.rhs_functionals = disc.lambda() * (disc.apply_kernel(problem.kernel, disc.nodes(), st.phi_abscissae) + f_nodes);
    return st;
}

inline HighOrderSystem assemble_highorder(const UrysohnProblem& problem, const Discretization& disc,
                                          const HighOrderState& st) {
    const auto nodes = disc.nodes();
    const auto abscissae = disc.abscissae();

    // w_j = K'(psi) B_j at nodes, then v_j = (I - pi_n) w_j at abscissae.
    const Eigen::MatrixXd w_nodes = disc.kprime_basis_matrix(problem.kernel_du, nodes, st.psi_abscissae);
    const Eigen::MatrixXd w_abs = disc.kprime_basis_matrix(problem.kernel_du, abscissae, st.psi_abscissae);
    const Eigen::MatrixXd v_abs = w_abs - disc.basis_times(disc.lambda() * w_nodes);

    // Rows s = xi_k of K'(phi) applied to B_j and to v_j.
    const int N = disc.dimension();
    Eigen::MatrixXd a_nodes(disc.node_count(), N);
    Eigen::MatrixXd b_nodes(disc.node_count(), N);
    for (std::size_t begin = 0; begin < nodes.size(); begin += Discretization::kBlockRows) {
        const std::size_t end = std::min(nodes.size(), begin + Discretization::kBlockRows);
        const Eigen::MatrixXd g = disc.weighted_kernel(problem.kernel_du, nodes, st.phi_abscissae, begin, end);
        const auto rows = static_cast<Eigen::Index>(end - begin);
        a_nodes.middleRows(static_cast<Eigen::Index>(begin), rows) = disc.times_basis(g);
        b_nodes.middleRows(static_cast<Eigen::Index>(begin), rows).noalias() = g * v_abs;
    }

    HighOrderSystem sys;
    sys.A = disc.lambda() * a_nodes;
    sys.B = disc.lambda() * b_nodes;
    detail::check_finite(sys.A);
    detail::check_finite(sys.B);
    sys.d = st.rhs_functionals - sys.A * st.x - sys.B * st.x;
    sys.residual = st.x - st.rhs_functionals;
    return sys;
}

inline HighOrderSystem assemble_highorder(const UrysohnProblem& problem, const QipScheme& scheme, const Spline& psi,
                                          const GaussRule& rule) {
    const Discretization disc(scheme, rule);
    return assemble_highorder(problem, disc, highorder_state(problem, disc, detail::to_eigen(psi.coefficients())));
}

namespace detail {

inline Eigen::VectorXd initial_guess(const UrysohnProblem& problem, const QipScheme& scheme, const NewtonConfig& cfg) {
    switch (cfg.seed) {
        case SeedPolicy::project_rhs: return to_eigen(scheme.project(problem.rhs).coefficients());
        case SeedPolicy::exact_seed:
            if (!problem.exact_solution) throw ParameterError("exact_seed needs a known exact solution");
            return to_eigen(scheme.project(*problem.exact_solution).coefficients());
        case SeedPolicy::custom:
            if (static_cast<int>(cfg.custom_seed.size()) != scheme.dimension())
                throw ParameterError("custom seed must have " + std::to_string(scheme.dimension()) + " entries");
            return to_eigen(cfg.custom_seed);
    }
    throw ParameterError("bad seed policy");
}

/// Shared Newton loop. `make_state(x)` tabulates the iterate, `residual_of`
/// reads the discrete residual off a state, `newton_step(state)` solves the
/// linearized system for the next iterate.
template <class MakeState, class ResidualOf, class NewtonStep>
SolveResult newton(Method method, Eigen::VectorXd x, const NewtonConfig& cfg, MakeState&& make_state,
                   ResidualOf&& residual_of, NewtonStep&& newton_step) {
    SolveResult result;
    result.method = method;
    auto state = make_state(x);
    double res = residual_of(state);
    Eigen::VectorXd previous = x;
    double previous_res = std::numeric_limits<double>::infinity();

    for (int k = 0; k < cfg.max_iter; ++k) {
        if (cfg.damped && k > 0) {
            for (int halving = 0; halving < 30 && res > previous_res; ++halving) {
                x = previous + 0.5 * (x - previous);
                state = make_state(x);
                res = residual_of(state);
                ++result.damping_halvings;
            }
        }
        const Eigen::VectorXd next = newton_step(state);
        const double increment = max_abs(next - x);
        result.increment_history.push_back(increment);
        result.iterations = k + 1;
        if (!std::isfinite(increment))
            throw DivergenceError(std::string(to_string(method)) + ": Newton iterate became non-finite",
                                  result.increment_history);
        previous = x;
        previous_res = res;
        x = next;
        state = make_state(x);
        res = residual_of(state);
        if (increment <= cfg.tol * (1.0 + max_abs(x))) {
            result.coefficients = to_std(x);
            result.residual = res;
            return result;
        }
    }
    throw DivergenceError(std::string(to_string(method)) + ": no convergence in " + std::to_string(cfg.max_iter) +
                              " iterations",
                          result.increment_history);
}

}  // namespace detail

inline SolveResult solve_collocation(const UrysohnProblem& problem, const QipScheme& scheme, const NewtonConfig& cfg,
                                     const GaussRule& rule) {
    cfg.validate();
    const Discretization disc(scheme, rule);
    const Eigen::Index N = disc.dimension();
    return detail::newton(
        Method::collocation, detail::initial_guess(problem, scheme, cfg), cfg,
        [&](const Eigen::VectorXd& y) { return collocation_state(problem, disc, y); },
        [](const CollocationState& st) { return detail::max_abs(st.y - st.rhs_functionals); },
        [&](const CollocationState& st) {
            const CollocationSystem sys = assemble_collocation(problem, disc, st);
            return dense_solve(Eigen::MatrixXd::Identity(N, N) - sys.C, sys.r);
        });
}

/// phi_H evaluated through psi + (I - pi_n)(K psi + f).
class HighOrderApproximant {
public:
    HighOrderApproximant(UrysohnProblem problem, const QipScheme& scheme, const GaussRule& rule,
                         std::vector<double> psi_coefficients)
        : problem_(std::move(problem)),
          scheme_(std::make_shared<const QipScheme>(scheme)),
          rule_(rule),
          psi_(scheme.space(), std::move(psi_coefficients)),
          correction_(scheme.space(), std::vector<double>(scheme.dimension(), 0.0)) {
        const CompositeRule quad(scheme_->space().grid(), rule_);
        abscissae_ = quad.points;
        weights_ = quad.weights;
        psi_at_abscissae_.resize(abscissae_.size());
        for (std::size_t q = 0; q < abscissae_.size(); ++q) psi_at_abscissae_[q] = psi_.eval_unchecked(abscissae_[q]);
        correction_ = scheme_->project([this](double s) { return k_psi(s) + problem_.rhs(s); });
    }

    [[nodiscard]] const Spline& psi() const noexcept { return psi_; }
    /// pi_n (K psi + f).
    [[nodiscard]] const Spline& projected_correction() const noexcept { return correction_; }
    [[nodiscard]] const QipScheme& scheme() const noexcept { return *scheme_; }

    /// K(psi)(s) on the composite rule.
    [[nodiscard]] double k_psi(double s) const {
        double sum = 0.0;
        for (std::size_t q = 0; q < abscissae_.size(); ++q)
            sum += weights_[q] * problem_.kernel(s, abscissae_[q], psi_at_abscissae_[q]);
        if (!std::isfinite(sum)) throw NumericError(s, 0.0, "K(psi) is not finite");
        return sum;
    }

    [[nodiscard]] double operator()(double s) const {
        check_unit_interval(s);
        return psi_.eval_unchecked(s) + k_psi(s) + problem_.rhs(s) - correction_.eval_unchecked(s);
    }

private:
    UrysohnProblem problem_;
    std::shared_ptr<const QipScheme> scheme_;
    GaussRule rule_;
    Spline psi_;
    Spline correction_;
    std::vector<double> abscissae_;
    std::vector<double> weights_;
    std::vector<double> psi_at_abscissae_;
};

inline double eval_highorder(const HighOrderApproximant& approx, double s) { return approx(s); }

struct HighOrderSolution {
    SolveResult result;
    HighOrderApproximant approximant;
};

inline HighOrderSolution solve_highorder(const UrysohnProblem& problem, const QipScheme& scheme,
                                         const NewtonConfig& cfg, const GaussRule& rule) {
    cfg.validate();
    const Discretization disc(scheme, rule);
    const Eigen::Index N = disc.dimension();
    SolveResult result = detail::newton(
        Method::highorder, detail::initial_guess(problem, scheme, cfg), cfg,
        [&](const Eigen::VectorXd& x) { return highorder_state(problem, disc, x); },
        [](const HighOrderState& st) { return detail::max_abs(st.x - st.rhs_functionals); },
        [&](const HighOrderState& st) {
            const HighOrderSystem sys = assemble_highorder(problem, disc, st);
            return dense_solve(Eigen::MatrixXd::Identity(N, N) - sys.A - sys.B, sys.d);
        });
    HighOrderApproximant approx(problem, scheme, rule, result.coefficients);
    return {std::move(result), std::move(approx)};
}

}  // namespace qiproj
