#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "levy/config.hpp"
#include "levy/mc.hpp"
#include "levy/nonlocal.hpp"
#include "levy/solver.hpp"
#include "levy/verify.hpp"

namespace levy::cli {

using config::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { ok = 0, conditions_failed = 1, config_error = 2, numeric_error = 3, hypothesis_error = 4 };

inline int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return config_error;
        case ErrorCategory::numeric: return numeric_error;
        default: return hypothesis_error;
    }
}

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json point_json(const Point& p) {
    json a = json::array();
    for (int i = 0; i < p.dim; ++i) a.push_back(num(p[i]));
    return a;
}

// ---------------------------------------------------------------------------
// Conditions

namespace detail {

inline json entry(const std::string& condition, const std::string& scope, const std::string& status) {
    return json{{"condition", condition}, {"scope", scope}, {"status", status}};
}

inline json kernel_entry(const ConditionReport& r, const std::string& scope) {
    json e = entry(r.condition, scope, r.pass ? "pass" : "fail");
    e["worst_ratio"] = num(r.worst_ratio);
    e["samples"] = r.samples;
    e["violations"] = r.violations;
    if (!r.pass) {
        e["witness"] = {{"x", point_json(r.witness_x)}, {"p", point_json(r.witness_p)}, {"z", point_json(r.witness_z)}};
    }
    return e;
}

inline json local_entry(const CheckReport& r, const std::string& scope) {
    json e = entry(r.condition, scope, r.pass ? "pass" : "fail");
    e["worst_slack"] = num(r.worst);
    e["samples"] = r.samples;
    e["violations"] = r.violations;
    if (!r.pass) e["witness"] = point_json(r.witness);
    if (!r.note.empty()) e["note"] = r.note;
    return e;
}

inline json error_entry(const std::string& condition, const std::string& scope, const std::exception& ex) {
    json e = entry(condition, scope, "fail");
    e["error"] = ex.what();
    return e;
}

/// 1.5 times the largest difference quotient of f over quasi-random pairs.
inline double estimate_lipschitz(const ScalarField& f, int n, double radius) {
    if (f.is_constant()) return 0.0;
    double L = 0.0;
    double u[8];
    for (std::uint64_t i = 1; i <= 4000; ++i) {
        numerics::halton(i, std::span<double>(u, 2 * n + 1));
        Point x(n), y(n);
        const double scale = std::pow(10.0, -6.0 * u[2 * n]);
        for (int k = 0; k < n; ++k) {
            x[k] = radius * (2.0 * u[k] - 1.0);
            y[k] = x[k] + scale * radius * (2.0 * u[n + k] - 1.0);
        }
        const double d = (x - y).norm();
        if (d > 0.0) L = std::max(L, std::abs(f(x) - f(y)) / d);
    }
    return 1.5 * L;
}

}  // namespace detail

struct ConditionSummary {
    json report;
    bool pass = true;
};

/// Runs every validator; measures are built without the integrability gate
/// so a violation is reported rather than thrown.
inline ConditionSummary check_conditions(const config::RunConfig& c) {
    json list = json::array();
    const int n = c.domain.dim();
    const bool bounded = c.domain.omega != "halfspace";
    const auto run = [&](const std::string& cond, const std::string& scope, auto&& fn) {
        try {
            list.push_back(fn());
        } catch (const std::exception& ex) {
            list.push_back(detail::error_entry(cond, scope, ex));
        }
    };
    try {
        (void)config::build_domain(c.domain);
        list.push_back(detail::entry("domain", "domain", "pass"));
    } catch (const std::exception& ex) {
        list.push_back(detail::error_entry("domain", "domain", ex));
    }

    const LocalOperator F = config::build_local(c.F, n);
    run("F", "F", [&] { return detail::local_entry(check_ellipticity(F), "F"); });
    run("proper", "F", [&] { return detail::local_entry(check_proper(F, c.F.gamma), "F"); });
    run("structure", "F", [&] {
        const ScalarField f = ScalarField::from_expression(c.F.f, n);
        const double L = c.F.modulus.value_or(detail::estimate_lipschitz(f, n, 4.0));
        json e = detail::local_entry(check_structure(F, [L](double s) { return L * s; }), "F");
        e["modulus_lipschitz"] = L;
        e["modulus_source"] = c.F.modulus ? "declared" : "estimated";
        return e;
    });

    for (std::size_t i = 0; i < c.terms.size(); ++i) {
        const auto& t = c.terms[i];
        const std::string scope = "term " + std::to_string(i);
        run("integ", scope, [&] {
            const auto m = config::build_measure(t.measure, false);
            const auto r = check_integrability(m);
            json e = detail::entry("integ", scope, r.integrable ? "pass" : "fail");
            e["inner_second_moment"] = num(r.inner_second_moment);
            e["outer_mass"] = num(r.outer_mass);
            e["detail"] = r.detail;
            return e;
        });
        run("unbounded", scope, [&] {
            if (!t.measure.mu) {
                json e = detail::entry("unbounded", scope, bounded ? "skipped" : "fail");
                e["note"] = "no tail exponent mu declared";
                return e;
            }
            const auto m = config::build_measure(t.measure, false);
            json e = detail::entry("unbounded", scope, "pass");
            e["mu"] = *t.measure.mu;
            try {
                e["tail_moment"] = num(m.tail_moment(1.0, *t.measure.mu));
            } catch (const DivergentTail& ex) {
                e["status"] = "fail";
                e["error"] = ex.what();
            }
            return e;
        });
        run("beta", scope, [&] {
            const auto k = config::build_kernel(t.kernel);
            return detail::kernel_entry(verify_growth(k), scope);
        });
        run("betacont", scope, [&] { return detail::kernel_entry(verify_lipschitz(config::build_kernel(t.kernel)), scope); });
        run("unbounded2", scope, [&] {
            const auto k = config::build_kernel(t.kernel);
            if (k.gradient_dependent()) {
                json e = detail::entry("unbounded2", scope, "skipped");
                e["note"] = "kernel depends on the gradient";
                return e;
            }
            return detail::kernel_entry(verify_nondegeneracy(k), scope);
        });
        if (t.kernel.variant == "rotational") {
            run("orthogonality", scope, [&] {
                const double r = orthogonality_residual(config::build_kernel(t.kernel));
                json e = detail::entry("orthogonality", scope, r <= 1e-14 ? "pass" : "fail");
                e["residual"] = r;
                return e;
            });
        }
        run("G", scope, [&] { return detail::local_entry(check_monotone_map(config::build_map(t.G)), scope); });
        run("dimensions", scope, [&] {
            const auto k = config::build_kernel(t.kernel);
            const bool okn = k.dim_n() == n, okm = k.dim_m() == t.measure.dim_m;
            json e = detail::entry("dimensions", scope, okn && okm ? "pass" : "fail");
            e["N"] = k.dim_n();
            e["M"] = k.dim_m();
            e["measure_M"] = t.measure.dim_m;
            return e;
        });
    }
    // (unbounded) and (unbounded2) are assumed only when Omega is unbounded.
    for (auto& e : list) {
        const bool tail = e["condition"] == "unbounded" || e["condition"] == "unbounded2";
        e["required"] = !(tail && bounded);
    }
    ConditionSummary s;
    for (const auto& e : list)
        if (e["status"] == "fail" && e["required"] == true) s.pass = false;
    s.report = json{{"all_pass", s.pass}, {"conditions", list}};
    return s;
}

// ---------------------------------------------------------------------------
// Artifacts

/// Writes files under one directory and remembers their fingerprints.
class Artifacts {
public:
    explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
        out << content;
        files_[name] = config::hex64(config::fnv1a(content));
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    void manifest(const std::string& command, const config::RunConfig& c, std::uint64_t seed) {
        const json echo = config::to_json(c);
        json m;
        m["tool"] = "levy";
        m["version"] = kVersion;
        m["command"] = command;
        m["seed"] = seed;
        m["config_hash"] = config::hex64(config::fnv1a(echo.dump()));
        m["config"] = echo;
        m["files"] = files_;
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        out << m.dump(2) << "\n";
    }

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> files_;
};

inline std::string field_csv(const GridField& u) {
    std::ostringstream os;
    write_csv(os, u);
    return os.str();
}

inline json report_json(const SolverReport& r, bool timing) {
    json j{{"residual_sup", num(r.residual_sup)},
           {"iterations", r.iterations},
           {"dt", num(r.dt)},
           {"bounds", {{"m", num(r.bounds.m)}, {"M", num(r.bounds.M)}}},
           {"violations", r.violations},
           {"converged", r.converged},
           {"truncated_nodes", r.truncated_nodes}};
    if (timing) j["wall_ms"] = r.wall_ms;
    return j;
}

inline json classification_json(const Classification& c) {
    return json{{"verdict", verdict_name(c.verdict)},
                {"worst_sub_residual", num(c.worst_sub_residual)},
                {"worst_super_residual", num(c.worst_super_residual)},
                {"exterior_ordering_ok", c.exterior_ordering_ok}};
}

// ---------------------------------------------------------------------------
// Commands

struct Options {
    std::string command;
    std::string config_path;
    std::string output;
    std::uint64_t seed = 0;
    int threads = 1;
    bool force = false;
    bool timing = false;
};

namespace detail {

inline GridField named_field(const std::string& name, const ProblemSpec& spec, const SolverConfig& cfg,
                             const std::optional<GridField>& solution) {
    const auto b = perron_bounds(spec);
    if (name == "perron_lower") return GridField::constant(spec.grid, b.m);
    if (name == "perron_upper") return GridField::constant(spec.grid, b.M);
    if (name == "solution") return solution ? *solution : solve_stationary(spec, cfg).first;
    return GridField::from_function(spec.grid, ScalarField::from_expression(name, spec.grid->dim_n()));
}

inline SolverConfig solver_config(const config::RunConfig& c, int threads) {
    SolverConfig s;
    s.tol = c.solver.tol;
    s.max_iter = c.solver.max_iter;
    s.threads = threads;
    s.dt = c.solver.dt;
    return s;
}

}  // namespace detail

inline int cmd_solve_stationary(const config::RunConfig& c, const Options& o, Artifacts& out, std::ostream& log) {
    const auto spec = config::build_problem(c);
    try {
        const auto [u, rep] = solve_stationary(spec, detail::solver_config(c, o.threads));
        out.write("u.csv", field_csv(u));
        out.write_json("report.json", report_json(rep, o.timing));
        log << "converged in " << rep.iterations << " iterations, residual " << format_double(rep.residual_sup) << "\n";
        return ok;
    } catch (const MaxIterExceeded& e) {
        out.write("u.csv", field_csv(e.best()));
        out.write_json("report.json", report_json(e.report(), o.timing));
        throw;
    }
}

inline int cmd_solve_evolution(const config::RunConfig& c, const Options& o, Artifacts& out, std::ostream& log) {
    const auto spec = config::build_problem(c);
    EvolutionConfig ec;
    ec.T = c.evolution.T;
    ec.checkpoints = c.evolution.checkpoints;
    ec.threads = o.threads;
    ec.dt = c.solver.dt;
    const auto r = solve_evolution(spec, ec);
    out.write("u.csv", field_csv(r.final_field));
    json snaps = json::array();
    for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
        const std::string name = "u_t" + std::to_string(i) + ".csv";
        out.write(name, field_csv(r.snapshots[i]));
        snaps.push_back({{"t", num(r.times[i])}, {"file", name}});
    }
    json rep = report_json(r.report, o.timing);
    rep["T"] = ec.T;
    rep["snapshots"] = snaps;
    out.write_json("report.json", rep);
    log << "evolved to T = " << format_double(ec.T) << " in " << r.report.iterations << " steps\n";
    return ok;
}

inline int cmd_verify_comparison(const config::RunConfig& c, const Options& o, Artifacts& out, std::ostream& log) {
    const auto spec = config::build_problem(c);
    const auto scfg = detail::solver_config(c, o.threads);
    std::optional<GridField> sol;
    if (c.verify.u == "solution" || c.verify.v == "solution") sol = solve_stationary(spec, scfg).first;
    const GridField u = detail::named_field(c.verify.u, spec, scfg, sol);
    const GridField v = detail::named_field(c.verify.v, spec, scfg, sol);
    const DiscreteOperator op(spec);
    json j{{"u", c.verify.u}, {"v", c.verify.v}, {"tol", c.verify.tol}, {"delta", c.verify.delta}};
    j["u_classification"] = classification_json(classify(spec, op, u, c.verify.tol, c.verify.delta, o.threads));
    j["v_classification"] = classification_json(classify(spec, op, v, c.verify.tol, c.verify.delta, o.threads));
    try {
        const auto rep = comparison_check(spec, op, u, v, c.verify.tol, c.verify.delta);
        j["pass"] = rep.pass;
        j["max_violation"] = num(rep.max_violation);
        j["witness"] = point_json(rep.witness);
        j["checked"] = rep.checked;
        out.write_json("comparison.json", j);
        log << (rep.pass ? "comparison holds" : "comparison violated") << ", max violation "
            << format_double(rep.max_violation) << "\n";
        return ok;
    } catch (const HypothesisNotMet& e) {
        j["hypothesis_failure"] = e.hypothesis();
        j["message"] = e.what();
        out.write_json("comparison.json", j);
        throw;
    }
}

inline int cmd_study_equivalence(const config::RunConfig& c, const Options&, Artifacts& out, std::ostream& log) {
    const int n = c.domain.dim();
    const auto& t = c.terms.front();
    std::vector<EquivalenceCase> cases;
    for (const auto& sc : c.study.cases)
        cases.push_back({sc.name, SmoothFunction::from_field(ScalarField::from_expression(sc.u, n)), config::to_point(sc.x)});
    EquivalenceOptions opt;
    opt.eps = c.study.eps;
    opt.deltas = c.study.deltas;
    opt.z_max = c.study.z_max;
    opt.quadrature.nodes_per_shell = c.study.nodes_per_shell;
    const auto table = definition_equivalence_study(cases, config::build_local(c.F, n), config::build_map(t.G),
                                                    config::build_kernel(t.kernel), config::build_measure(t.measure), opt);
    std::ostringstream os;
    write_equivalence_csv(os, table);
    out.write("equivalence.csv", os.str());
    json orders = json::array();
    for (const auto& sc : c.study.cases)
        for (double d : c.study.deltas) orders.push_back({{"case", sc.name}, {"delta", d}, {"order", num(table.order(sc.name, d))}});
    out.write_json("orders.json", json{{"orders", orders}});
    log << table.rows.size() << " rows written\n";
    return ok;
}

inline int cmd_mc_validate(const config::RunConfig& c, const Options& o, Artifacts& out, std::ostream& log) {
    const auto spec = config::build_problem(c);
    PathConfig pc;
    pc.eps_cut = c.mc.eps_cut;
    pc.dt_drift = c.mc.dt_drift;
    pc.n_paths = c.mc.n_paths;
    pc.seed = o.seed;
    pc.t_max = c.mc.t_max;
    pc.threads = o.threads;
    for (const auto& p : c.mc.probes) pc.probes.push_back(config::to_point(p));
    const auto est = simulate_value(spec, pc);
    const auto u = solve_stationary(spec, detail::solver_config(c, o.threads)).first;
    const double h = spec.grid->h();
    json probes = json::array();
    bool all = true;
    for (const auto& e : est) {
        const double pde = u.sample_extended(e.x);
        const double tol = 3.0 * e.std_error + 2.0 * h;
        const bool agree = std::abs(e.mean - pde) <= tol;
        all = all && agree;
        probes.push_back({{"x", point_json(e.x)},
                          {"mean", num(e.mean)},
                          {"std_error", num(e.std_error)},
                          {"n_paths", e.n_paths},
                          {"capped_fraction", num(e.capped_fraction)},
                          {"bias_bound", num(e.bias_bound)},
                          {"pde", num(pde)},
                          {"tolerance", num(tol)},
                          {"agree", agree}});
    }
    out.write_json("mc.json", json{{"seed", o.seed}, {"eps_cut", pc.eps_cut}, {"probes", probes}, {"all_agree", all}});
    log << (all ? "Monte Carlo agrees with the PDE solution" : "Monte Carlo disagrees with the PDE solution") << "\n";
    return ok;
}

inline int cmd_operator_table(const config::RunConfig& c, const Options&, Artifacts& out, std::ostream& log) {
    const auto spec = config::build_problem(c);
    const Grid& G = *spec.grid;
    const int n = G.dim_n();
    const ScalarField f = ScalarField::from_expression(c.table.u, n);
    const auto smooth = SmoothFunction::from_field(f);
    const GridField field = GridField::from_function(spec.grid, f);
    std::ostringstream os;
    os << "term," << (n == 1 ? "x0" : "x0,x1") << ",value,split,near,far\n";
    for (std::size_t ti = 0; ti < spec.terms.size(); ++ti) {
        const auto& t = spec.terms[ti];
        for (const auto& pv : c.table.points) {
            const Point x = config::to_point(pv);
            const auto sv = levy_smooth(smooth, x, std::nullopt, t.kernel, t.measure, t.quad);
            os << ti << ',';
            for (int i = 0; i < n; ++i) os << format_double(x[i]) << ',';
            os << format_double(sv.value);
            // Split form at x when x is an interior grid node.
            std::optional<std::size_t> node;
            for (std::size_t k = 0; k < G.size(); ++k)
                if ((G.coord(k) - x).norm() <= 1e-9 * G.h()) node = k;
            if (node && !G.on_box_edge(*node)) {
                const auto v = levy_split(field, *node, gradient_hessian(field, *node), t.kernel, t.measure, t.quad,
                                          {t.quad.epsilon, 0.0, SlackSign::neutral});
                os << ',' << format_double(v.value) << ',' << format_double(v.near_field) << ','
                   << format_double(v.far_field);
            } else {
                os << ",,,";
            }
            os << '\n';
        }
    }
    out.write("operator.csv", os.str());
    log << c.table.points.size() * spec.terms.size() << " operator values written\n";
    return ok;
}

inline std::string command_description(const std::string& name) {
    static const std::map<std::string, std::string> text{
        {"check-conditions", "validate the structural conditions and write conditions.json"},
        {"solve-stationary", "solve the stationary Dirichlet problem"},
        {"solve-evolution", "march the evolution problem to evolution.T"},
        {"verify-comparison", "classify verify.u and verify.v and check their ordering"},
        {"study-equivalence", "tabulate the split-form vs smooth-form residual gap"},
        {"mc-validate", "compare Monte Carlo path estimates with the grid solution"},
        {"operator-table", "tabulate the operator applied to operator_table.u"}};
    return text.at(name);
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"check-conditions", "solve-stationary", "solve-evolution",
                                                "verify-comparison", "study-equivalence", "mc-validate",
                                                "operator-table"};
    return names;
}

/// Loads the config, gates on the conditions, dispatches, writes the manifest.
inline int execute(const Options& o, std::ostream& log, std::ostream& err) {
    try {
        const auto c = config::load(o.config_path);
        Artifacts out(o.output.empty() ? c.output_dir : o.output);
        const auto cond = check_conditions(c);
        if (o.command == "check-conditions" || !cond.pass) {
            out.write_json("conditions.json", cond.report);
            for (const auto& e : cond.report["conditions"]) {
                log << e["status"].get<std::string>() << "  " << e["condition"].get<std::string>() << "  ("
                    << e["scope"].get<std::string>() << (e["required"] == true ? "" : ", not required") << ")\n";
            }
        }
        if (o.command == "check-conditions") {
            out.manifest(o.command, c, o.seed);
            return cond.pass ? ok : conditions_failed;
        }
        if (!cond.pass && !o.force) {
            out.manifest(o.command, c, o.seed);
            err << "conditions failed; rerun with --force to proceed anyway\n";
            return conditions_failed;
        }
        int code = ok;
        try {
            if (o.command == "solve-stationary") code = cmd_solve_stationary(c, o, out, log);
            else if (o.command == "solve-evolution") code = cmd_solve_evolution(c, o, out, log);
            else if (o.command == "verify-comparison") code = cmd_verify_comparison(c, o, out, log);
            else if (o.command == "study-equivalence") code = cmd_study_equivalence(c, o, out, log);
            else if (o.command == "mc-validate") code = cmd_mc_validate(c, o, out, log);
            else if (o.command == "operator-table") code = cmd_operator_table(c, o, out, log);
            else throw ConfigError("unknown command '" + o.command + "'");
        } catch (const Error&) {
            out.manifest(o.command, c, o.seed);
            throw;
        }
        out.manifest(o.command, c, o.seed);
        return code;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        err << e.what() << "\n";
        return config_error;
    }
}

/// Full command line: `levy <command> --config PATH [--output DIR] [--seed N]
/// [--threads N] [--force] [--timing]`.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Nonlocal Lévy-type PDE solver and verification harness", "levy"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options o;
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name, command_description(name));
        sub->add_option("--config", o.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--output", o.output, "output directory (overrides output.dir)");
        sub->add_option("--seed", o.seed, "top-level random seed");
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--force", o.force, "run even when a condition check fails");
        sub->add_flag("--timing", o.timing, "include wall-clock times in reports");
        sub->callback([&o, name] { o.command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, log, err);
        return code == 0 ? ok : config_error;
    }
    return execute(o, log, err);
}

}  // namespace levy::cli
