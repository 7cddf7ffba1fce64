// qiproj: convergence studies, self-checks and stencil dumps.
//
//   qiproj study --problem test1 --method highorder --qip Q2 --n-list 40,80,160
//   qiproj properties --level quick
//   qiproj dump-qip --qip Q3 --n 16

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "qiproj/harness.hpp"
#include "qiproj/properties.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct StudyFlags {
    std::string config;
    std::string problem, method, qip, n_list, seed_policy, format, out;
    double c = 0.0, tol = 0.0;
    int max_iter = 0;
    bool damped = false, undamped = false;
};

int run_study_command(const StudyFlags& flags, const CLI::App& cmd) {
    qiproj::StudySpec spec;
    if (!flags.config.empty()) qiproj::apply_config(spec, qiproj::read_config_file(flags.config));
    auto given = [&](const char* name) { return cmd.count(name) > 0; };
    if (given("--problem")) spec.problem = flags.problem;
    if (given("--c")) spec.c = flags.c;
    if (given("--method")) spec.method = qiproj::parse_method(flags.method);
    if (given("--qip")) spec.variant = qiproj::parse_variant(flags.qip);
    if (given("--n-list")) spec.n_list = qiproj::parse_n_list(flags.n_list);
    if (given("--seed-policy")) spec.seed = qiproj::parse_seed_policy(flags.seed_policy);
    if (given("--tol")) spec.tol = flags.tol;
    if (given("--max-iter")) spec.max_iter = flags.max_iter;
    if (given("--format")) spec.format = qiproj::parse_format(flags.format);
    if (given("--out")) spec.out = flags.out;
    if (flags.damped) spec.damped = true;
    if (flags.undamped) spec.damped = false;

    const qiproj::ConvergenceReport report = qiproj::run_study(spec);
    if (spec.out.empty())
        std::cout << qiproj::format_report(report, spec.format);
    else
        qiproj::emit_report(report, spec.format, spec.out);
    for (const auto& row : report.rows)
        if (row.failed) std::cerr << "n = " << row.n << " failed: " << row.failure << "\n";
    return report.any_failed() ? kFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spline quasi-interpolation solvers for nonlinear Urysohn integral equations"};
    app.require_subcommand(1);

    StudyFlags sf;
    CLI::App* study = app.add_subcommand("study", "Run a convergence study");
    study->add_option("--config", sf.config, "key = value settings file (flags override it)");
    study->add_option("--problem", sf.problem, "test1 | test2");
    study->add_option("--c", sf.c, "parameter c of test2");
    study->add_option("--method", sf.method, "collocation | highorder");
    study->add_option("--qip", sf.qip, "Q2 | Q2dB | Q3");
    study->add_option("--n-list", sf.n_list, "comma-separated increasing mesh sizes");
    study->add_option("--seed-policy", sf.seed_policy, "project_rhs | exact_seed");
    study->add_option("--tol", sf.tol, "Newton increment tolerance");
    study->add_option("--max-iter", sf.max_iter, "Newton iteration limit");
    study->add_option("--format", sf.format, "csv | markdown");
    study->add_option("--out", sf.out, "output file (stdout if omitted)");
    study->add_flag("--damped", sf.damped, "halve Newton steps while the residual grows");
    study->add_flag("--undamped", sf.undamped, "never damp Newton steps")->excludes("--damped");

    std::string level = "quick";
    bool inject_fault = false;
    CLI::App* props = app.add_subcommand("properties", "Run the property suite");
    props->add_option("--level", level, "quick | full");
    props->add_flag("--inject-fault", inject_fault, "perturb one projector weight (the suite must fail)");

    std::string dump_qip = "Q2", dump_out;
    int dump_n = 8;
    CLI::App* dump = app.add_subcommand("dump-qip", "Print the stencil table of a projector as CSV");
    dump->add_option("--qip", dump_qip, "Q2 | Q2dB | Q3 | Linear");
    dump->add_option("--n", dump_n, "number of cells");
    dump->add_option("--out", dump_out, "output file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (study->parsed()) return run_study_command(sf, *study);
        if (props->parsed()) {
            const qiproj::PropertySummary summary =
                qiproj::run_property_suite({qiproj::parse_suite_level(level), inject_fault});
            std::cout << qiproj::format_summary(summary);
            if (!summary.passed()) {
                std::cerr << "failed:";
                for (const std::string& name : summary.failures()) std::cerr << ' ' << name;
                std::cerr << "\n";
                return kFailure;
            }
            return kOk;
        }
        if (dump->parsed()) {
            const qiproj::QipVariant v = qiproj::parse_variant(dump_qip);
            const qiproj::QipScheme scheme = qiproj::build_qip(qiproj::build_space(qiproj::variant_degree(v), dump_n), v);
            if (dump_out.empty())
                std::cout << scheme.stencils_csv();
            else
                qiproj::write_atomically(dump_out, scheme.stencils_csv());
            return kOk;
        }
    } catch (const qiproj::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
