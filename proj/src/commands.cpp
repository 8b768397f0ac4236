#include <fmt/format.h>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "mgopt/cli_report.hpp"
#include "mgopt/error.hpp"

namespace mgopt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kCheckTol = 1e-6;
// Command-line default; a node limit (unlike a time limit) keeps runs reproducible.
constexpr long kCliNodeLimit = 1000;

int exit_for(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal:
        case SolveStatus::GapFeasible: return kExitOk;
        case SolveStatus::Infeasible: return kExitInfeasible;
        case SolveStatus::Diverged: return kExitDiverged;
        case SolveStatus::NodeLimit:
        case SolveStatus::NumericalError: return kExitLimit;
    }
    return kExitLimit;
}

json options_json(const RunOptions& o) {
    const SolveOptions& s = o.solver;
    return {{"soft_balance", o.soft_balance},
            {"rel_gap", s.rel_gap},
            {"tol_kkt", s.tol_kkt},
            {"tol_int", s.tol_int},
            {"max_bnb_nodes", s.max_bnb_nodes},
            {"max_ipm_iter", s.max_ipm_iter},
            {"time_limit_s", s.time_limit_s},
            {"nlp_penalty_init", s.nlp_penalty_init},
            {"penalty_growth", s.penalty_growth},
            {"penalty_cap", s.penalty_cap},
            {"nlp_tol", s.nlp_tol},
            {"max_nlp_outer", s.max_nlp_outer},
            {"max_rebranch", s.max_rebranch},
            {"repair_interval", s.repair_interval}};
}

json base_manifest(const std::string& command, const fs::path& scenario, const ScenarioConfig& cfg, const RunOptions& o,
                   const std::string& run_id) {
    return {{"tool", "mgopt"},
            {"version", kVersion},
            {"command", command},
            {"scenario", fs::absolute(scenario).lexically_normal().string()},
            {"scenario_name", cfg.name},
            {"scenario_sha256", scenario_hash(scenario, cfg)},
            {"run_id", run_id},
            {"horizon", cfg.horizon},
            {"dt_hours", cfg.dt},
            {"options", options_json(o)},
            {"libraries",
             {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
              {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                            NLOHMANN_JSON_VERSION_PATCH)},
              {"fmt", FMT_VERSION}}}};
}

void add_result(json& m, const SolveResult& r, double runtime_s) {
    m["status"] = status_name(r.status);
    m["objective"] = r.ok() ? json(r.objective) : json(nullptr);
    m["rel_gap"] = r.ok() ? json(r.rel_gap) : json(nullptr);
    m["bound"] = std::isfinite(r.bound) ? json(r.bound) : json(nullptr);
    m["bnb_nodes"] = r.node_count;
    m["ipm_iterations"] = r.iterations;
    m["nlp_outer_iterations"] = r.outer_iterations;
    m["message"] = r.message;
    m["runtime_s"] = runtime_s;
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p, std::ios::binary);
    os << j.dump(2) << '\n';
}

template <class F>
void write_file(const fs::path& p, F&& body) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(fmt::format("cannot write '{}'", p.string()));
    body(os);
}

fs::path prepare_run_dir(const fs::path& scenario, const RunOptions& o, const char* mode, std::string& run_id) {
    run_id = o.run_id.empty() ? scenario.stem().string() + "_" + mode : o.run_id;
    const fs::path dir = o.out_dir / run_id;
    fs::create_directories(dir);
    return dir;
}

void log_violations(std::ostream& log, const std::vector<std::string>& v) {
    for (const auto& s : v) log << "  violation: " << s << '\n';
}

// Direct re-check of the network trajectories: bus balance through
// bus_injections, voltage and angle bounds.
std::vector<std::string> network_violations(const DispatchSolution& sol, const ScenarioConfig& cfg, const BusTrajectories& bt,
                                            double tol) {
    std::vector<std::string> out;
    const NetworkModel& net = *cfg.network;
    for (const auto& r : bus_balance_residuals(sol, cfg, bt.states, bt.q_supply)) {
        if (std::abs(r.p) > tol) out.push_back(fmt::format("bus_p[{},{}]: residual {:.3e} MW", net.bus_names[r.bus], r.t, r.p));
        if (std::abs(r.q) > tol) out.push_back(fmt::format("bus_q[{},{}]: residual {:.3e} MVAr", net.bus_names[r.bus], r.t, r.q));
    }
    for (std::size_t t = 0; t < bt.states.size(); ++t) {
        for (int b = 0; b < net.n_bus(); ++b) {
            const double v = bt.states[t].v[b];
            const double d = bt.states[t].delta[b];
            if (v < net.v_min - tol || v > net.v_max + tol) {
                out.push_back(fmt::format("voltage[{},{}]: {:.6f} kV outside [{}, {}]", net.bus_names[b], t, v, net.v_min, net.v_max));
            }
            if (std::abs(d) > std::numbers::pi + tol) out.push_back(fmt::format("angle[{},{}]: {:.6f} rad outside [-pi, pi]", net.bus_names[b], t, d));
        }
    }
    return out;
}

struct Loaded {
    ScenarioConfig cfg;
    bool ok = false;
};

Loaded load_scenario(const fs::path& scenario, std::ostream& log) {
    Loaded l;
    try {
        l.cfg = parse_scenario(scenario);
        const auto problems = validate_scenario(l.cfg);
        if (!problems.empty()) {
            log << "error: invalid scenario\n" << format_violations(problems) << '\n';
            return l;
        }
        l.ok = true;
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
    }
    return l;
}

} // namespace

int cmd_run_dispatch(const fs::path& scenario, const RunOptions& opts, std::ostream& log) {
    Loaded loaded = load_scenario(scenario, log);
    if (!loaded.ok) return kExitInput;
    const ScenarioConfig& cfg = loaded.cfg;
    try {
        opts.solver.validate();
        const auto t0 = std::chrono::steady_clock::now();
        const VariableLayout layout = build_layout(cfg, {opts.soft_balance});
        const MathProgram prog = assemble_dispatch(cfg, layout, compute_forecasts(cfg));
        std::string run_id;
        const fs::path dir = prepare_run_dir(scenario, opts, "dispatch", run_id);
        if (opts.dump_lp) write_file(dir / "model.lp", [&](std::ostream& os) { write_lp(os, prog); });
        log << fmt::format("dispatch '{}': {} variables ({} binary), {} equalities, {} inequalities\n", cfg.name, prog.n_vars(),
                           prog.n_binary(), prog.n_eq(), prog.n_in());

        const SolveResult res = solve_miqp(prog, opts.solver);
        const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json manifest = base_manifest("dispatch", scenario, cfg, opts, run_id);
        add_result(manifest, res, runtime);
        log << fmt::format("status {} after {} nodes, {:.2f} s\n", status_name(res.status), res.node_count, runtime);
        if (!res.ok()) {
            log << "error: " << res.message << '\n';
            write_json(dir / "manifest.json", manifest);
            return exit_for(res.status);
        }

        DispatchSolution sol = extract_solution(res.x, layout, cfg);
        sol.status = status_name(res.status);
        sol.gap = res.rel_gap;
        const KpiReport kpi = compute_kpis(sol, cfg);
        write_file(dir / "trajectories.csv", [&](std::ostream& os) { write_trajectories(os, sol, cfg); });
        write_json(dir / "kpi.json", kpi_json(kpi, cfg));
        write_plotdata(dir / "plotdata", sol, cfg, nullptr);
        manifest["violations"] = kpi.violations.size();
        write_json(dir / "manifest.json", manifest);
        log << fmt::format("total cost {:.6f} $, gap {:.2e}; wrote {}\n", kpi.total_cost, res.rel_gap, dir.string());
        if (!kpi.violations.empty()) {
            log << "error: solution failed the feasibility check\n";
            log_violations(log, kpi.violations);
            return kExitUnverified;
        }
        return kExitOk;
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return kExitLimit;
    }
}

int cmd_run_opf(const fs::path& scenario, const RunOptions& opts, std::ostream& log) {
    Loaded loaded = load_scenario(scenario, log);
    if (!loaded.ok) return kExitInput;
    const ScenarioConfig& cfg = loaded.cfg;
    if (!cfg.network) {
        log << "error: scenario '" << scenario.string() << "' has no network section; use `mgopt dispatch` instead\n";
        return kExitInput;
    }
    try {
        opts.solver.validate();
        const auto t0 = std::chrono::steady_clock::now();
        const OpfProgram opf = assemble_opf(cfg, compute_forecasts(cfg), {opts.soft_balance});
        std::string run_id;
        const fs::path dir = prepare_run_dir(scenario, opts, "opf", run_id);
        if (opts.dump_lp) write_file(dir / "model.lp", [&](std::ostream& os) { write_lp(os, opf.nlp.base); });
        log << fmt::format("opf '{}': {} buses, {} variables, {} nonlinear rows\n", cfg.name, opf.layout.n_bus,
                           opf.nlp.base.n_vars(), opf.nlp.n_nonlinear());

        const SolveResult res = solve_minlp(opf.nlp, opts.solver);
        const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json manifest = base_manifest("opf", scenario, cfg, opts, run_id);
        add_result(manifest, res, runtime);
        log << fmt::format("status {} after {} outer iterations, {:.2f} s\n", status_name(res.status), res.outer_iterations, runtime);
        if (!res.ok()) {
            log << "error: " << res.message << '\n';
            write_json(dir / "manifest.json", manifest);
            return exit_for(res.status);
        }

        DispatchSolution sol = extract_solution(res.x.head(opf.layout.network_offset()), opf.layout.dispatch, cfg);
        sol.status = status_name(res.status);
        sol.gap = res.rel_gap;
        BusTrajectories bt{extract_power_flow(res.x, opf), reactive_supply(res.x, opf)};
        KpiReport kpi = compute_kpis(sol, cfg, &bt.states);
        for (auto& v : network_violations(sol, cfg, bt, kCheckTol)) kpi.violations.push_back(std::move(v));

        write_file(dir / "trajectories.csv", [&](std::ostream& os) { write_trajectories(os, sol, cfg); });
        write_file(dir / "buses.csv", [&](std::ostream& os) { write_buses(os, bt, *cfg.network); });
        write_json(dir / "kpi.json", kpi_json(kpi, cfg));
        write_plotdata(dir / "plotdata", sol, cfg, &bt);
        manifest["violations"] = kpi.violations.size();
        write_json(dir / "manifest.json", manifest);
        log << fmt::format("total cost {:.6f} $, nonlinear residual {:.2e}; wrote {}\n", kpi.total_cost, res.nonlinear_residual,
                           dir.string());
        if (!kpi.violations.empty()) {
            log << "error: solution failed the feasibility check\n";
            log_violations(log, kpi.violations);
            return kExitUnverified;
        }
        return kExitOk;
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const PowerFlowError& e) {
        log << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return kExitLimit;
    }
}

int cmd_validate(const fs::path& scenario, const fs::path& run_dir, std::ostream& log) {
    Loaded loaded = load_scenario(scenario, log);
    if (!loaded.ok) return kExitInput;
    const ScenarioConfig& cfg = loaded.cfg;
    const fs::path traj = run_dir / "trajectories.csv";
    if (!fs::exists(traj)) {
        log << "error: '" << traj.string() << "' not found\n";
        return kExitInput;
    }
    std::vector<std::string> violations;
    try {
        const DispatchSolution sol = read_trajectories(traj, cfg);
        const fs::path buses = run_dir / "buses.csv";
        std::vector<double> losses;
        if (fs::exists(buses)) {
            const BusTrajectories bt = read_buses(buses, cfg);
            losses = network_losses(bt.states);
            violations = network_violations(sol, cfg, bt, kCheckTol);
        }
        for (const auto& v : check_feasibility(sol, cfg, kCheckTol, losses.empty() ? nullptr : &losses)) {
            violations.push_back(format_violation(v));
        }
        const fs::path kpi_path = run_dir / "kpi.json";
        if (fs::exists(kpi_path)) {
            std::ifstream in(kpi_path);
            const json kpi = json::parse(in);
            const double reported = kpi.at("total_cost").get<double>();
            const double recomputed = compute_costs(sol, cfg).total();
            if (std::abs(reported - recomputed) > 1e-6 * std::max(1.0, std::abs(recomputed))) {
                violations.push_back(fmt::format("kpi.total_cost: reported {} but trajectories give {}", reported, recomputed));
            }
        }
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const json::exception& e) {
        log << "error: kpi.json: " << e.what() << '\n';
        return kExitInput;
    }
    if (!violations.empty()) {
        log << fmt::format("{} violation(s) in {}\n", violations.size(), run_dir.string());
        log_violations(log, violations);
        return kExitInfeasible;
    }
    log << "ok: " << run_dir.string() << " satisfies every constraint\n";
    return kExitOk;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Microgrid economic dispatch and optimal power flow"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    RunOptions run;
    fs::path scenario;
    double gap = run.solver.rel_gap;
    double time_limit = 0.0;
    long max_nodes = kCliNodeLimit;
    std::string out_dir = run.out_dir.string();
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "Scenario JSON file")->required();
        sub->add_flag("--soft-balance", run.soft_balance, "Penalised slack on the balance rows, for diagnosis");
        sub->add_option("--gap", gap, "Relative optimality gap for branch-and-bound")->check(CLI::Range(0.0, 1.0));
        sub->add_option("--out", out_dir, "Output root; results go to <out>/<run-id>/");
        sub->add_option("--run-id", run.run_id, "Run directory name (default <scenario>_<mode>)");
        sub->add_option("--time-limit", time_limit, "Branch-and-bound wall-clock limit in seconds (0 = none)")->check(CLI::NonNegativeNumber);
        sub->add_option("--max-nodes", max_nodes, fmt::format("Branch-and-bound node limit (default {})", kCliNodeLimit))->check(CLI::PositiveNumber);
        sub->add_flag("--dump-lp", run.dump_lp, "Write the assembled program as model.lp");
    };
    CLI::App* dispatch = app.add_subcommand("dispatch", "Unit-commitment economic dispatch");
    add_run_flags(dispatch);
    CLI::App* opf = app.add_subcommand("opf", "Dispatch with AC power-flow constraints");
    add_run_flags(opf);

    SyntheticDataSpec spec;
    std::string data_out = "synthetic.csv";
    CLI::App* gen = app.add_subcommand("gen-data", "Write a seeded synthetic load/weather/price CSV");
    gen->add_option("--days", spec.days, "Number of days");
    gen->add_option("--seed", spec.seed, "RNG seed");
    gen->add_option("--mean-load", spec.mean_load, "Mean load, MW");
    gen->add_option("--load-amplitude", spec.load_amplitude, "Daily load swing, MW");
    gen->add_option("--load-noise", spec.load_noise, "Load noise standard deviation, MW");
    gen->add_option("--mean-wind", spec.mean_wind, "Mean wind speed, m/s");
    gen->add_option("--peak-irradiance", spec.peak_irradiance, "Clear-sky noon irradiance, W/m2");
    gen->add_option("--price-offpeak", spec.price_offpeak, "Buy price outside 08:00-20:00, $/MWh");
    gen->add_option("--price-peak", spec.price_peak, "Buy price 08:00-20:00, $/MWh");
    gen->add_option("--sell-ratio", spec.sell_ratio, "Sell price as a fraction of the buy price");
    gen->add_option("--out", data_out, "Output CSV path");

    fs::path run_dir;
    CLI::App* validate = app.add_subcommand("validate", "Re-check a run directory against its scenario");
    validate->add_option("scenario", scenario, "Scenario JSON file")->required();
    validate->add_option("run-dir", run_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    run.out_dir = out_dir;
    run.solver.rel_gap = gap;
    run.solver.time_limit_s = time_limit;
    run.solver.max_bnb_nodes = max_nodes;
    if (*dispatch) return cmd_run_dispatch(scenario, run, std::cerr);
    if (*opf) return cmd_run_opf(scenario, run, std::cerr);
    if (*gen) return cmd_gen_data(spec, data_out, std::cerr);
    return cmd_validate(scenario, run_dir, std::cerr);
}

} // namespace mgopt
