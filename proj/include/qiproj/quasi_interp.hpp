#pragma once

// Discrete quasi-interpolating projectors onto S_d^{d-1}.
//
// pi_n x = sum_i lambda_i(x) B_i with lambda_i(x) = sum_j sigma_{i,j} x(xi_j),
// where the xi_j are knots and cell midpoints lying in supp(B_i). Weights
// are derived at build time: lambda_i(B_j) = delta_ij on every B_j that is
// nonzero at a stencil node, interior functionals symmetric about the
// support center, remaining freedom closed by a minimal (weighted) l1 or
// Euclidean norm.
// Left boundary functionals are built on their one-sided supports and the
// right boundary ones are their mirror images.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qiproj/bspline.hpp"
#include "qiproj/errors.hpp"

namespace qiproj {

enum class QipVariant {
    Q2,      ///< quadratic, stencil = every node in supp(B_i)
    Q2dB,    ///< quadratic, smallest solvable stencil
    Q3,      ///< cubic, stencil = every node in supp(B_i)
    Linear,  ///< degree 1 diagnostic; reduces to nodal interpolation
};

inline std::string_view to_string(QipVariant v) {
    switch (v) {
        case QipVariant::Q2: return "Q2";
        case QipVariant::Q2dB: return "Q2dB";
        case QipVariant::Q3: return "Q3";
        case QipVariant::Linear: return "Linear";
    }
    return "?";
}

inline QipVariant parse_variant(std::string_view name) {
    if (name == "Q2") return QipVariant::Q2;
    if (name == "Q2dB") return QipVariant::Q2dB;
    if (name == "Q3") return QipVariant::Q3;
    if (name == "Linear") return QipVariant::Linear;
    throw ParameterError("unknown QIP variant '" + std::string(name) + "'");
}

inline int variant_degree(QipVariant v) {
    switch (v) {
        case QipVariant::Q2:
        case QipVariant::Q2dB: return 2;
        case QipVariant::Q3: return 3;
        case QipVariant::Linear: return 1;
    }
    return 0;
}

/// Interleaved knots and midpoints: xi_{2i} = t_i, xi_{2i-1} = s_i.
struct QiNodeSet {
    std::vector<double> nodes;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(nodes.size()); }
    [[nodiscard]] double operator[](int k) const { return nodes[k]; }
};

inline QiNodeSet qi_nodes(const UniformKnotGrid& grid) {
    const int n = grid.n();
    QiNodeSet set;
    set.nodes.resize(2 * n + 1);
    for (int k = 0; k <= 2 * n; ++k)
        set.nodes[k] = (k % 2 == 0) ? grid.knot(k / 2) : grid.midpoint((k + 1) / 2);
    return set;
}

/// Node indices (into the QiNodeSet) and weights of one functional.
struct Stencil {
    std::vector<int> nodes;
    std::vector<double> weights;
};

class QipScheme {
public:
    QipScheme(SplineSpace space, QiNodeSet nodes, QipVariant variant, std::vector<Stencil> stencils)
        : space_(space), nodes_(std::move(nodes)), variant_(variant), stencils_(std::move(stencils)) {}

    [[nodiscard]] const SplineSpace& space() const noexcept { return space_; }
    [[nodiscard]] const QiNodeSet& node_set() const noexcept { return nodes_; }
    [[nodiscard]] QipVariant variant() const noexcept { return variant_; }
    [[nodiscard]] int dimension() const noexcept { return space_.dimension(); }
    [[nodiscard]] int node_count() const noexcept { return nodes_.size(); }

    /// Stencil of lambda_i, 1-based.
    [[nodiscard]] const Stencil& stencil(int i) const {
        space_.check_index(i);
        return stencils_[i - 1];
    }

    /// lambda_i applied to node samples.
    [[nodiscard]] double functional(int i, std::span<const double> samples) const {
        const Stencil& st = stencil(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < st.nodes.size(); ++k) sum += st.weights[k] * samples[st.nodes[k]];
        return sum;
    }

    [[nodiscard]] std::vector<double> coefficients(std::span<const double> samples) const {
        check_samples(samples.size());
        std::vector<double> c(dimension());
        for (int i = 1; i <= dimension(); ++i) c[i - 1] = functional(i, samples);
        return c;
    }

    [[nodiscard]] Spline apply(std::span<const double> samples) const {
        return Spline(space_, coefficients(samples));
    }

    /// pi_n f for a callable f.
    template <class F>
    [[nodiscard]] Spline project(F&& f) const {
        std::vector<double> samples(node_count());
        for (int k = 0; k < node_count(); ++k) samples[k] = f(nodes_[k]);
        return apply(samples);
    }

    /// Copy with sigma_{i,slot} shifted by delta (fault injection in tests).
    [[nodiscard]] QipScheme with_weight_offset(int i, int slot, double delta) const {
        QipScheme copy = *this;
        copy.stencils_.at(i - 1).weights.at(slot) += delta;
        return copy;
    }

    /// Stencil table as CSV: i,node_index,xi_value,sigma.
    [[nodiscard]] std::string stencils_csv() const {
        std::string out = "i,node_index,xi_value,sigma\n";
        char buf[128];
        for (int i = 1; i <= dimension(); ++i) {
            const Stencil& st = stencils_[i - 1];
            for (std::size_t k = 0; k < st.nodes.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", i, st.nodes[k], nodes_[st.nodes[k]],
                              st.weights[k]);
                out += buf;
            }
        }
        return out;
    }

    void check_samples(std::size_t count) const {
        if (static_cast<int>(count) != node_count())
            throw ParameterError("expected " + std::to_string(node_count()) + " node samples, got " +
                                 std::to_string(count));
    }

private:
    SplineSpace space_;
    QiNodeSet nodes_;
    QipVariant variant_;
    std::vector<Stencil> stencils_;
};

/// max_{i,j} |lambda_i(B_j) - delta_ij|.
inline double projector_defect(const QipScheme& scheme) {
    const SplineSpace& space = scheme.space();
    const int d = space.degree();
    const int N = space.dimension();
    std::vector<double> row(N);
    std::array<double, kMaxDegree + 1> vals{};
    double defect = 0.0;
    for (int i = 1; i <= N; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        const Stencil& st = scheme.stencil(i);
        for (std::size_t k = 0; k < st.nodes.size(); ++k) {
            const int first = space.active_basis(scheme.node_set()[st.nodes[k]], vals);
            for (int r = 0; r <= d; ++r) row[first - 1 + r] += st.weights[k] * vals[r];
        }
        row[i - 1] -= 1.0;
        for (double v : row) defect = std::max(defect, std::abs(v));
    }
    return defect;
}

/// Which QI nodes a functional may use.
enum class StencilPolicy {
    full_support,  ///< every node in supp(B_i)
    smallest,      ///< smallest contiguous window with a solvable system
};

/// How the free parameters left by the delta_ij constraints are fixed.
enum class WeightClosure { min_l2, min_l1 };

struct QipConstruction {
    StencilPolicy interior = StencilPolicy::full_support;
    StencilPolicy boundary = StencilPolicy::full_support;
    WeightClosure closure = WeightClosure::min_l1;
};

/// Construction used by each shipped variant.
inline QipConstruction default_construction(QipVariant v) {
    switch (v) {
        case QipVariant::Q2:
        case QipVariant::Q3: return {StencilPolicy::full_support, StencilPolicy::full_support, WeightClosure::min_l1};
        case QipVariant::Q2dB:
        case QipVariant::Linear: return {StencilPolicy::smallest, StencilPolicy::smallest, WeightClosure::min_l2};
    }
    return {};
}

namespace detail {

inline constexpr double kSolvableTolerance = 1e-10;
inline constexpr double kRankThreshold = 1e-12;

inline Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> factor(const Eigen::MatrixXd& a) {
    // The threshold must be set before compute(): symmetric pairs of
    // constraints coincide only up to rounding.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a.rows(), a.cols());
    cod.setThreshold(kRankThreshold);
    cod.compute(a);
    return cod;
}

/// Minimize sum_p mult_p |u_p| subject to A u = rhs. The optimum sits on a
/// vertex of the feasible set, so enumerate the choices of `nullity` zeroed
/// parameters and keep the cheapest consistent one.
inline std::optional<Eigen::VectorXd> min_weighted_l1(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                                                      const Eigen::VectorXd& mult) {
    const auto cols = static_cast<int>(a.cols());
    const auto cod = factor(a);
    const int nullity = cols - static_cast<int>(cod.rank());
    if (nullity == 0) return Eigen::VectorXd(cod.solve(rhs));

    std::optional<Eigen::VectorXd> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> kept;
    for (unsigned mask = 0; mask < (1u << cols); ++mask) {
        if (std::popcount(mask) != nullity) continue;
        kept.clear();
        for (int c = 0; c < cols; ++c)
            if (!(mask & (1u << c))) kept.push_back(c);
        Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(kept.size()));
        for (std::size_t c = 0; c < kept.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(kept[c]);
        const auto sub_cod = factor(sub);
        if (sub_cod.rank() != sub.cols()) continue;
        const Eigen::VectorXd u_sub = sub_cod.solve(rhs);
        if ((sub * u_sub - rhs).cwiseAbs().maxCoeff() > kSolvableTolerance) continue;
        Eigen::VectorXd u = Eigen::VectorXd::Zero(cols);
        for (std::size_t c = 0; c < kept.size(); ++c) u(kept[c]) = u_sub(static_cast<Eigen::Index>(c));
        const double cost = mult.dot(u.cwiseAbs());
        if (cost < best_cost - 1e-12) {
            best_cost = cost;
            best = u;
        }
    }
    return best;
}

/// Weights on `stencil` with lambda_i(B_j) = delta_ij, or nullopt when the
/// constraint system is inconsistent or B_i vanishes on every node.
inline std::optional<std::vector<double>> solve_functional(const SplineSpace& space, const QiNodeSet& xi, int i,
                                                           std::span<const int> stencil, bool symmetric,
                                                           WeightClosure closure) {
    const int d = space.degree();
    const int N = space.dimension();
    const int k = static_cast<int>(stencil.size());

    // Rows of the collocation matrix B_j(xi_k), collected per basis index.
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(N, k);
    std::array<double, kMaxDegree + 1> vals{};
    for (int c = 0; c < k; ++c) {
        const int first = space.active_basis(xi[stencil[c]], vals);
        for (int r = 0; r <= d; ++r) full(first - 1 + r, c) = vals[r];
    }
    std::vector<int> rows;
    for (int j = 0; j < N; ++j)
        if (full.row(j).cwiseAbs().maxCoeff() > 1e-14) rows.push_back(j);
    if (std::find(rows.begin(), rows.end(), i - 1) == rows.end()) return std::nullopt;

    Eigen::MatrixXd M(rows.size(), k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        M.row(static_cast<Eigen::Index>(r)) = full.row(rows[r]);
        if (rows[r] == i - 1) rhs(static_cast<Eigen::Index>(r)) = 1.0;
    }

    // Weights w = P u; symmetric functionals share one parameter per pair.
    const int params = symmetric ? (k + 1) / 2 : k;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(k, params);
    for (int c = 0; c < k; ++c) P(c, symmetric ? std::min(c, k - 1 - c) : c) = 1.0;
    const Eigen::VectorXd mult = P.colwise().sum().transpose();

    Eigen::VectorXd w;
    if (closure == WeightClosure::min_l2) {
        // Orthonormal columns: the minimal-norm u gives the minimal-norm w.
        const Eigen::VectorXd scale = mult.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd Pn = P * scale.asDiagonal();
        w = Pn * factor(M * Pn).solve(rhs);
    } else {
        const auto u = min_weighted_l1(M * P, rhs, mult);
        if (!u) return std::nullopt;
        w = P * *u;
    }
    if ((M * w - rhs).cwiseAbs().maxCoeff() > kSolvableTolerance) return std::nullopt;
    return std::vector<double>(w.data(), w.data() + w.size());
}

/// First solvable window of `candidate` under `policy`; symmetric windows
/// stay centered.
inline std::optional<Stencil> choose_stencil(const SplineSpace& space, const QiNodeSet& xi, int i,
                                             const std::vector<int>& candidate, bool symmetric,
                                             StencilPolicy policy, WeightClosure closure) {
    const int total = static_cast<int>(candidate.size());
    const int smallest = policy == StencilPolicy::full_support ? total : 1;
    for (int size = smallest; size <= total; ++size) {
        if (symmetric && (total - size) % 2 != 0) continue;
        const int first_start = symmetric ? (total - size) / 2 : 0;
        const int last_start = symmetric ? first_start : total - size;
        for (int start = first_start; start <= last_start; ++start) {
            std::span<const int> window(candidate.data() + start, static_cast<std::size_t>(size));
            if (auto weights = solve_functional(space, xi, i, window, symmetric, closure))
                return Stencil{std::vector<int>(window.begin(), window.end()), std::move(*weights)};
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Build a projector of the given variant with an explicit construction.
inline QipScheme build_qip(const SplineSpace& space, QipVariant variant, const QipConstruction& how) {
    const int d = space.degree();
    if (variant_degree(variant) != d)
        throw ParameterError(std::string(to_string(variant)) + " requires degree " +
                             std::to_string(variant_degree(variant)) + ", got " + std::to_string(d));
    const int n = space.n();
    const int N = space.dimension();
    const QiNodeSet xi = qi_nodes(space.grid());

    std::vector<Stencil> stencils(N);
    for (int i = 1; i <= n; ++i) {
        const auto [first_cell, last_cell] = space.support_cells(i);
        std::vector<int> candidate;
        for (int node = 2 * first_cell; node <= 2 * last_cell; ++node) candidate.push_back(node);
        const bool symmetric = i >= d + 1;
        auto st = detail::choose_stencil(space, xi, i, candidate, symmetric, symmetric ? how.interior : how.boundary,
                                         how.closure);
        if (!st) throw ConstructionError(i, "constraint system is inconsistent");
        stencils[i - 1] = std::move(*st);
    }
    for (int i = n + 1; i <= N; ++i) {
        const Stencil& source = stencils[N - i];
        Stencil mirrored;
        for (auto it = source.nodes.rbegin(); it != source.nodes.rend(); ++it) mirrored.nodes.push_back(2 * n - *it);
        mirrored.weights.assign(source.weights.rbegin(), source.weights.rend());
        stencils[i - 1] = std::move(mirrored);
    }
    QipScheme scheme(space, xi, variant, std::move(stencils));
    const double defect = projector_defect(scheme);
    if (!(defect <= 1e-12)) throw ConstructionError(0, "projector defect " + std::to_string(defect) + " too large");
    return scheme;
}

/// Build the projector of the given variant on `space`.
inline QipScheme build_qip(const SplineSpace& space, QipVariant variant) {
    return build_qip(space, variant, default_construction(variant));
}

inline Spline apply_qip(const QipScheme& scheme, std::span<const double> samples) { return scheme.apply(samples); }

/// Sampled sup-norm of pi_n: max over `samples` equispaced t of the
/// Lebesgue function sum_k |sum_i sigma_{i,k} B_i(t)|.
inline double norm_estimate(const QipScheme& scheme, int samples = 1000) {
    const SplineSpace& space = scheme.space();
    const int d = space.degree();
    std::vector<double> acc(scheme.node_count(), 0.0);
    std::vector<int> touched;
    std::array<double, kMaxDegree + 1> vals{};
    double best = 0.0;
    for (int p = 0; p < samples; ++p) {
        const double t = samples == 1 ? 0.0 : static_cast<double>(p) / (samples - 1);
        const int first = space.active_basis(t, vals);
        for (int r = 0; r <= d; ++r) {
            const Stencil& st = scheme.stencil(first + r);
            for (std::size_t k = 0; k < st.nodes.size(); ++k) {
                acc[st.nodes[k]] += st.weights[k] * vals[r];
                touched.push_back(st.nodes[k]);
            }
        }
        double lebesgue = 0.0;
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (int node : touched) {
            lebesgue += std::abs(acc[node]);
            acc[node] = 0.0;
        }
        touched.clear();
        best = std::max(best, lebesgue);
    }
    return best;
}

}  // namespace qiproj
