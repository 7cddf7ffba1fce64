// End-to-end acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "qiproj/harness.hpp"
#include "qiproj/properties.hpp"

using namespace qiproj;

namespace {

int failures = 0;

struct Check {
    std::string id;
    double budget_s;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) ok = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (cond ? "" : " [x]");
    }

    void finish() {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        require(secs < budget_s, fmt("%.1fs < %.0fs", secs, budget_s));
        std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }

    static std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
        char buf[200];
        std::snprintf(buf, sizeof buf, f, a, b, c);
        return buf;
    }
};

double order(double coarse, double fine) { return std::log2(coarse / fine); }

struct Errors {
    double grid = 0.0, nodes = 0.0;
};

Errors measure(const std::function<double(double)>& approx, const Evaluable& exact, const QipScheme& s) {
    Errors e;
    for (int p = 0; p < kErrorGridSize; ++p) {
        const double t = static_cast<double>(p) / (kErrorGridSize - 1);
        e.grid = std::max(e.grid, std::abs(approx(t) - exact(t)));
    }
    for (double xi : s.node_set().nodes) e.nodes = std::max(e.nodes, std::abs(approx(xi) - exact(xi)));
    return e;
}

const Evaluable kExp = [](double t) { return std::exp(t); };

const std::vector<QipVariant> kVariants = {QipVariant::Linear, QipVariant::Q2dB, QipVariant::Q2, QipVariant::Q3};

void projector_property() {
    Check c{"AC1 projector property", 10};
    double worst = 0.0;
    for (QipVariant v : kVariants)
        for (int n : {16, 64, 256}) worst = std::max(worst, projector_defect(build_qip(build_space(variant_degree(v), n), v)));
    c.require(worst <= 1e-12, Check::fmt("max defect %.2e <= 1e-12", worst));
    c.finish();
}

void approximation_order() {
    Check c{"AC2 approximation order", 10};
    for (QipVariant v : {QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3}) {
        const int d = variant_degree(v);
        const double e128 = detail::projection_error(build_qip(build_space(d, 128), v), kExp);
        const double e256 = detail::projection_error(build_qip(build_space(d, 256), v), kExp);
        const double o = order(e128, e256);
        const double need = d == 2 ? 2.7 : 3.7;
        c.require(o >= need, std::string(to_string(v)) + Check::fmt(" order %.2f >= %.1f", o, need));
    }
    c.finish();
}

void integral_superconvergence() {
    Check c{"AC3 integral superconvergence", 10};
    for (QipVariant v : {QipVariant::Q2, QipVariant::Q2dB}) {
        std::vector<double> e;
        for (int n : {32, 64, 128, 256}) e.push_back(detail::integral_defect(build_qip(build_space(2, n), v), kExp, kExp));
        double lowest = 1e300;
        for (std::size_t k = 1; k < e.size(); ++k) lowest = std::min(lowest, order(e[k - 1], e[k]));
        c.require(lowest >= 3.7, std::string(to_string(v)) + Check::fmt(" min order %.2f >= 3.7", lowest));
    }
    c.finish();
}

struct Table {
    std::vector<Errors> coll, high;
};

Table test1_table(QipVariant v, const std::vector<int>& ns) {
    const UrysohnProblem p = make_test1();
    const GaussRule rule = gauss_rule(kDefaultGaussPoints);
    Table t;
    for (int n : ns) {
        const QipScheme s = build_qip(build_space(variant_degree(v), n), v);
        const SolveResult rc = solve_collocation(p, s, {}, rule);
        const Spline phi(s.space(), rc.coefficients);
        t.coll.push_back(measure([&](double x) { return phi(x); }, *p.exact_solution, s));
        const HighOrderSolution h = solve_highorder(p, s, {}, rule);
        t.high.push_back(measure(h.approximant, *p.exact_solution, s));
    }
    return t;
}

bool within_factor(double v, double ref, double f) { return v <= ref * f && v >= ref / f; }

void table1_and_nodes() {
    Check c{"AC4 Test 1 Q2 table", 300};
    Check nodes{"AC7 node superconvergence", 300};
    const Table t = test1_table(QipVariant::Q2, {40, 80, 160});
    const double high_ref[] = {1.08e-6, 4.08e-9, 2.13e-11}, coll_ref[] = {7.74e-3, 6.77e-4, 8.17e-5};
    const double high_ord[] = {8.1, 7.6}, coll_ord[] = {3.5, 3.0};
    for (int k = 0; k < 3; ++k) {
        c.require(within_factor(t.high[k].grid, high_ref[k], 10),
                  Check::fmt("high %.2e vs %.2e", t.high[k].grid, high_ref[k]));
        c.require(within_factor(t.coll[k].grid, coll_ref[k], 10),
                  Check::fmt("coll %.2e vs %.2e", t.coll[k].grid, coll_ref[k]));
    }
    for (int k = 1; k < 3; ++k) {
        const double oh = order(t.high[k - 1].grid, t.high[k].grid), oc = order(t.coll[k - 1].grid, t.coll[k].grid);
        c.require(std::abs(oh - high_ord[k - 1]) <= 0.7, Check::fmt("high order %.2f vs %.1f", oh, high_ord[k - 1]));
        c.require(std::abs(oc - coll_ord[k - 1]) <= 0.5, Check::fmt("coll order %.2f vs %.1f", oc, coll_ord[k - 1]));
    }
    const double nh = order(t.high[1].nodes, t.high[2].nodes), nc = order(t.coll[1].nodes, t.coll[2].nodes);
    nodes.start = c.start;
    nodes.require(nh >= 7.4, Check::fmt("high-order node order %.2f >= 7.4", nh));
    nodes.require(nc >= 3.6, Check::fmt("collocation node order %.2f >= 3.6", nc));
    c.finish();
    nodes.finish();
}

void table3() {
    Check c{"AC5 Test 1 Q3 table", 300};
    const Table t = test1_table(QipVariant::Q3, {40, 80});
    const double oh = order(t.high[0].grid, t.high[1].grid), oc = order(t.coll[0].grid, t.coll[1].grid);
    c.require(std::abs(oh - 8.0) <= 1.0, Check::fmt("high order %.2f vs 8", oh));
    c.require(within_factor(t.high[1].grid, 9.40e-11, 10), Check::fmt("high %.2e vs 9.40e-11", t.high[1].grid));
    c.require(std::abs(oc - 4.0) <= 0.5, Check::fmt("coll order %.2f vs 4", oc));
    c.finish();
}

StudySpec study(const char* problem, double cc, Method m, QipVariant v, std::vector<int> ns) {
    StudySpec s;
    s.problem = problem;
    s.c = cc;
    s.method = m;
    s.variant = v;
    s.n_list = std::move(ns);
    return s;
}

void test2_regular() {
    Check c{"AC6 Test 2 c=1 tables", 60};
    const ConvergenceReport q2 = run_study(study("test2", 1.0, Method::highorder, QipVariant::Q2, {4, 8, 16}));
    c.require(!q2.any_failed(), "Q2 rows solved");
    if (!q2.any_failed()) {
        const double o = *q2.rows[2].order_inf, oe = *q2.rows[2].order_es;
        c.require(std::abs(o - 7.3) <= 0.7, Check::fmt("Q2 order %.2f vs 7.3", o));
        c.require(std::abs(oe - 8.0) <= 0.7, Check::fmt("Q2 ES order %.2f vs 8.0", oe));
    }
    const ConvergenceReport q3 = run_study(study("test2", 1.0, Method::highorder, QipVariant::Q3, {4, 8}));
    c.require(!q3.any_failed() && q3.rows[1].e_inf <= 1e-10, Check::fmt("Q3 n=8 %.2e <= 1e-10", q3.rows[1].e_inf));
    c.finish();
}

void test2_ill_behaved() {
    Check c{"AC8 Test 2 c=0.1 robustness", 120};
    const std::vector<int> ns = {4, 8, 16, 32, 64};
    const ConvergenceReport high = run_study(study("test2", 0.1, Method::highorder, QipVariant::Q2, ns));
    const ConvergenceReport coll = run_study(study("test2", 0.1, Method::collocation, QipVariant::Q2, ns));
    c.require(!high.any_failed() && !coll.any_failed(), "all rows solved (" + high.newton_policy + ")");
    if (!high.any_failed() && !coll.any_failed()) {
        c.require(high.rows[3].e_inf <= 1e-12, Check::fmt("high n=32 %.2e <= 1e-12", high.rows[3].e_inf));
        const double o = *coll.rows[4].order_inf;
        c.require(o >= 2.5, Check::fmt("coll finest order %.2f >= 2.5", o));
    }
    c.finish();
}

void property_suite() {
    Check c{"AC9 property suite", 60};
    const PropertySummary s = run_property_suite({SuiteLevel::quick, false});
    c.require(s.passed(), Check::fmt("%.0f checks", static_cast<double>(s.results.size())));
    for (const std::string& f : s.failures()) c.require(false, f);
    c.finish();
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, void (*)()>> steps = {
        {"AC1", projector_property}, {"AC2", approximation_order}, {"AC3", integral_superconvergence},
        {"AC4/AC7", table1_and_nodes}, {"AC5", table3},          {"AC6", test2_regular},
        {"AC8", test2_ill_behaved},   {"AC9", property_suite},
    };
    for (const auto& [name, fn] : steps) {
        try {
            fn();
        } catch (const std::exception& e) {
            std::printf("FAIL %s: %s\n", name, e.what());
            ++failures;
        }
    }
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
