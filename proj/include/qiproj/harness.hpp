#pragma once

// Convergence studies: solve on a list of meshes, measure the sup error on a
// 1500-point grid and at the QI nodes, and report successive log2 orders.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "qiproj/errors.hpp"
#include "qiproj/problems.hpp"
#include "qiproj/quasi_interp.hpp"
#include "qiproj/solver.hpp"

namespace qiproj {

inline constexpr int kErrorGridSize = 1500;

enum class ReportFormat { csv, markdown };

inline std::string_view to_string(ReportFormat f) { return f == ReportFormat::csv ? "csv" : "markdown"; }

inline ReportFormat parse_format(std::string_view name) {
    if (name == "csv") return ReportFormat::csv;
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    throw ParameterError("unknown format '" + std::string(name) + "'");
}

struct StudySpec {
    std::string problem = "test1";
    double c = 1.0;
    Method method = Method::highorder;
    QipVariant variant = QipVariant::Q2;
    std::vector<int> n_list;
    double tol = 1e-14;
    int max_iter = 50;
    /// Unset: project_rhs, or exact_seed + damping for ill-behaved problems.
    std::optional<SeedPolicy> seed;
    std::optional<bool> damped;
    int gauss_points = kDefaultGaussPoints;
    ReportFormat format = ReportFormat::csv;
    std::string out;

    void validate() const {
        if (n_list.empty()) throw ParameterError("n_list is empty");
        const int d = variant_degree(variant);
        for (std::size_t k = 0; k < n_list.size(); ++k) {
            if (n_list[k] < d + 1)
                throw ParameterError("n = " + std::to_string(n_list[k]) + " is below degree + 1 = " +
                                     std::to_string(d + 1));
            if (k > 0 && n_list[k] <= n_list[k - 1]) throw ParameterError("n_list must be strictly increasing");
        }
        if (seed == SeedPolicy::custom) throw ParameterError("custom seeds are not available in studies");
        NewtonConfig cfg;
        cfg.tol = tol;
        cfg.max_iter = max_iter;
        cfg.validate();
    }
};

/// Newton settings a study actually runs with.
inline NewtonConfig resolve_newton(const StudySpec& spec, const ProblemCatalogEntry& entry) {
    NewtonConfig cfg;
    cfg.tol = spec.tol;
    cfg.max_iter = spec.max_iter;
    cfg.seed = spec.seed.value_or(entry.ill_behaved ? SeedPolicy::exact_seed : SeedPolicy::project_rhs);
    cfg.damped = spec.damped.value_or(entry.ill_behaved);
    return cfg;
}

struct ReportRow {
    int n = 0;
    bool failed = false;
    std::string failure;
    double e_inf = 0.0;
    std::optional<double> order_inf;
    double es = 0.0;
    std::optional<double> order_es;
    int iterations = 0;
    double residual = 0.0;
};

struct ConvergenceReport {
    std::string problem;
    std::string variant;
    std::string method;
    std::string newton_policy;
    int grid_size = kErrorGridSize;
    std::string timestamp;
    std::vector<ReportRow> rows;

    [[nodiscard]] bool any_failed() const {
        for (const ReportRow& r : rows)
            if (r.failed) return true;
        return false;
    }
};

inline std::optional<double> empirical_order(double previous, double current) {
    if (!(previous > 0.0) || !(current > 0.0)) return std::nullopt;
    return std::log2(previous / current);
}

namespace detail {

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <class Approx>
std::pair<double, double> measure_errors(const Approx& approx, const Evaluable& exact, const QiNodeSet& nodes) {
    double e_inf = 0.0;
    for (int p = 0; p < kErrorGridSize; ++p) {
        const double v = static_cast<double>(p) / (kErrorGridSize - 1);
        e_inf = std::max(e_inf, std::abs(exact(v) - approx(v)));
    }
    double es = 0.0;
    for (double xi : nodes.nodes) es = std::max(es, std::abs(exact(xi) - approx(xi)));
    return {e_inf, es};
}

}  // namespace detail

inline ReportRow run_row(const ProblemCatalogEntry& entry, const StudySpec& spec, const NewtonConfig& cfg, int n) {
    ReportRow row;
    row.n = n;
    const GaussRule rule = gauss_rule(spec.gauss_points);
    const Evaluable& exact = *entry.problem.exact_solution;
    try {
        const SplineSpace space = build_space(variant_degree(spec.variant), n);
        const QipScheme scheme = build_qip(space, spec.variant);
        if (spec.method == Method::collocation) {
            const SolveResult res = solve_collocation(entry.problem, scheme, cfg, rule);
            const Spline phi(space, res.coefficients);
            std::tie(row.e_inf, row.es) =
                detail::measure_errors([&](double t) { return phi.eval_unchecked(t); }, exact, scheme.node_set());
            row.iterations = res.iterations;
            row.residual = res.residual;
        } else {
            const HighOrderSolution sol = solve_highorder(entry.problem, scheme, cfg, rule);
            std::tie(row.e_inf, row.es) = detail::measure_errors(sol.approximant, exact, scheme.node_set());
            row.iterations = sol.result.iterations;
            row.residual = sol.result.residual;
        }
        if (!std::isfinite(row.e_inf) || !std::isfinite(row.es)) throw NumericError(0.0, 0.0, "error is not finite");
    } catch (const DivergenceError& e) {
        row.failed = true;
        row.failure = e.what();
        row.iterations = static_cast<int>(e.history().size());
    } catch (const SingularMatrixError& e) {
        row.failed = true;
        row.failure = e.what();
    } catch (const NumericError& e) {
        row.failed = true;
        row.failure = e.what();
    } catch (const AssemblyError& e) {
        row.failed = true;
        row.failure = e.what();
    }
    return row;
}

inline ConvergenceReport run_study(const StudySpec& spec) {
    spec.validate();
    const ProblemCatalogEntry entry = catalog_entry(spec.problem, spec.c);
    if (!entry.problem.exact_solution) throw ParameterError(entry.problem.label + " has no exact solution");
    const NewtonConfig cfg = resolve_newton(spec, entry);

    ConvergenceReport report;
    report.problem = entry.problem.label;
    report.variant = std::string(to_string(spec.variant));
    report.method = std::string(to_string(spec.method));
    char policy[160];
    std::snprintf(policy, sizeof policy, "seed=%s damped=%s tol=%.3g max_iter=%d gauss=%d",
                  std::string(to_string(cfg.seed)).c_str(), cfg.damped ? "yes" : "no", cfg.tol, cfg.max_iter,
                  spec.gauss_points);
    report.newton_policy = policy;
    report.timestamp = detail::utc_timestamp();

    for (int n : spec.n_list) {
        ReportRow row = run_row(entry, spec, cfg, n);
        if (!report.rows.empty() && !row.failed && !report.rows.back().failed) {
            row.order_inf = empirical_order(report.rows.back().e_inf, row.e_inf);
            row.order_es = empirical_order(report.rows.back().es, row.es);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

/// "4.08(-09)": three significant digits, parenthesized exponent.
inline std::string compact_sci(double v) {
    if (v == 0.0) return "0.00(+00)";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    const std::string s = buf;
    const auto e = s.find('e');
    return s.substr(0, e) + "(" + s.substr(e + 1) + ")";
}

inline std::string format_report(const ConvergenceReport& report, ReportFormat format) {
    if (report.rows.empty()) throw ParameterError("report has no rows");
    std::ostringstream out;
    char buf[64];
    auto num = [&](const char* fmt, double v) {
        std::snprintf(buf, sizeof buf, fmt, v);
        return std::string(buf);
    };
    if (format == ReportFormat::csv) {
        out << "n,E_inf,O_inf,ES,O_ES,iters,residual\n";
        for (const ReportRow& r : report.rows) {
            out << r.n << ',';
            if (r.failed) {
                out << ",,,," << r.iterations << ",\n";
                continue;
            }
            out << num("%.6e", r.e_inf) << ',' << (r.order_inf ? num("%.3f", *r.order_inf) : "") << ','
                << num("%.6e", r.es) << ',' << (r.order_es ? num("%.3f", *r.order_es) : "") << ',' << r.iterations
                << ',' << num("%.3e", r.residual) << '\n';
        }
        return out.str();
    }
    out << "# " << report.problem << ", " << report.method << ", " << report.variant << "\n\n";
    out << "- error grid: " << report.grid_size << " points\n";
    out << "- newton: " << report.newton_policy << "\n";
    out << "- generated: " << report.timestamp << "\n\n";
    out << "| n | E_inf | O_inf | ES | O_ES | iters | residual |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const ReportRow& r : report.rows) {
        out << "| " << r.n << " | ";
        if (r.failed) {
            out << "failed | | | | " << r.iterations << " | |\n";
            continue;
        }
        out << compact_sci(r.e_inf) << " | " << (r.order_inf ? num("%.1f", *r.order_inf) : "") << " | "
            << compact_sci(r.es) << " | " << (r.order_es ? num("%.1f", *r.order_es) : "") << " | " << r.iterations
            << " | " << compact_sci(r.residual) << " |\n";
    }
    for (const ReportRow& r : report.rows)
        if (r.failed) out << "\nn = " << r.n << ": " << r.failure << "\n";
    return out.str();
}

/// Write through a temporary file in the same directory, then rename.
inline void write_atomically(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FileError("cannot open " + tmp.string() + " for writing");
        f << content;
        f.flush();
        if (!f) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw FileError("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw FileError("cannot rename onto " + path + ": " + ec.message());
    }
}

inline void emit_report(const ConvergenceReport& report, ReportFormat format, const std::string& path) {
    write_atomically(path, format_report(report, format));
}

inline std::vector<int> parse_n_list(std::string_view text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string item(text.substr(pos, comma - pos));
        std::size_t used = 0;
        int value = 0;
        try {
            value = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw ParameterError("bad n_list entry '" + item + "'");
        }
        if (used != item.size()) throw ParameterError("bad n_list entry '" + item + "'");
        out.push_back(value);
        pos = comma + 1;
    }
    return out;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ParameterError(key + ": not a number '" + v + "'");
    return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    int out = 0;
    try {
        out = std::stoi(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ParameterError(key + ": not an integer '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ParameterError(key + ": expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Flat "key = value" lines; '#' starts a comment. Dashes in keys read as
/// underscores so file keys match the long flag names.
inline std::map<std::string, std::string> parse_config(std::string_view text) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParameterError("config line " + std::to_string(lineno) + ": missing '='");
        std::string key = detail::trim(std::string_view(body).substr(0, eq));
        for (char& ch : key)
            if (ch == '-') ch = '_';
        if (key.empty()) throw ParameterError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = detail::trim(std::string_view(body).substr(eq + 1));
    }
    return out;
}

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

inline void apply_setting(StudySpec& spec, const std::string& key, const std::string& value) {
    if (key == "problem") spec.problem = value;
    else if (key == "c") spec.c = detail::parse_double(key, value);
    else if (key == "method") spec.method = parse_method(value);
    else if (key == "qip") spec.variant = parse_variant(value);
    else if (key == "n_list") spec.n_list = parse_n_list(value);
    else if (key == "seed_policy") spec.seed = parse_seed_policy(value);
    else if (key == "damped") spec.damped = detail::parse_bool(key, value);
    else if (key == "tol") spec.tol = detail::parse_double(key, value);
    else if (key == "max_iter") spec.max_iter = detail::parse_int(key, value);
    else if (key == "gauss_points") spec.gauss_points = detail::parse_int(key, value);
    else if (key == "format") spec.format = parse_format(value);
    else if (key == "out") spec.out = value;
    else throw ParameterError("unknown setting '" + key + "'");
}

inline void apply_config(StudySpec& spec, const std::map<std::string, std::string>& settings) {
    for (const auto& [key, value] : settings) apply_setting(spec, key, value);
}

}  // namespace qiproj
