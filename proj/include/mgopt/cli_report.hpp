#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mgopt/dispatch_model.hpp"
#include "mgopt/opf_model.hpp"
#include "mgopt/scenario_io.hpp"
#include "mgopt/solvers.hpp"

namespace mgopt {

/// Process exit codes shared by every command.
enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 1,       // parse, validation or missing file
    kExitInfeasible = 2,  // infeasible problem, or violations found by validate
    kExitLimit = 3,       // node/time limit without an incumbent, numerical failure
    kExitDiverged = 4,    // NLP divergence (opf)
    kExitUnverified = 5,  // solved, but the independent feasibility check failed
};

struct BatteryKpi {
    double throughput_mwh = 0.0;  // sum of (charge + discharge) * dt
    double e_min = 0.0;
    double e_max = 0.0;
};

struct BusKpi {
    double v_min = 0.0;
    double v_max = 0.0;
};

struct KpiReport {
    double total_cost = 0.0;
    CostBreakdown costs;
    /// Hours with U = 0, per generator.
    std::map<std::string, int> shutdown_counts;
    /// Hours with |P_Gr| < 1e-6 MW; absent when islanded.
    std::optional<int> grid_shutdown_count;
    /// Dispatched / available energy per class; 1 when nothing was available.
    double pv_utilization = 1.0;
    double wind_utilization = 1.0;
    std::map<std::string, BatteryKpi> batteries;
    std::map<std::string, BusKpi> buses;
    std::vector<std::string> violations;
};

inline constexpr double kGridIdleThreshold = 1e-6;

KpiReport compute_kpis(const DispatchSolution& sol, const ScenarioConfig& cfg,
                       const std::vector<PowerFlowState>* states = nullptr);
nlohmann::json kpi_json(const KpiReport& kpi, const ScenarioConfig& cfg);

// --- run directory ----------------------------------------------------------

/// Long-format trajectories: t, device, quantity, value.
void write_trajectories(std::ostream& os, const DispatchSolution& sol, const ScenarioConfig& cfg);
/// Inverse of write_trajectories. Throws ScenarioError on missing or malformed rows.
DispatchSolution read_trajectories(const std::filesystem::path& path, const ScenarioConfig& cfg);

struct BusTrajectories {
    std::vector<PowerFlowState> states;            // [t]
    std::vector<std::vector<double>> q_supply;     // [t][bus]
};
void write_buses(std::ostream& os, const BusTrajectories& bt, const NetworkModel& net);
BusTrajectories read_buses(const std::filesystem::path& path, const ScenarioConfig& cfg);

/// Files under plotdata/: generation_stack, bess_energy, renewable_dispatch
/// and (with bus data) bus_pqv.
void write_plotdata(const std::filesystem::path& dir, const DispatchSolution& sol, const ScenarioConfig& cfg,
                    const BusTrajectories* buses);

/// SHA-256 over the scenario file followed by every bound series file, hex.
std::string scenario_hash(const std::filesystem::path& scenario, const ScenarioConfig& cfg);

// --- commands -----------------------------------------------------------------

struct RunOptions {
    bool soft_balance = false;
    std::filesystem::path out_dir = "out";
    std::string run_id;  // default: <scenario stem>_<mode>
    bool dump_lp = false;
    SolveOptions solver;
};

/// Each command logs progress and errors to `log` and returns an ExitCode.
int cmd_run_dispatch(const std::filesystem::path& scenario, const RunOptions& opts, std::ostream& log);
int cmd_run_opf(const std::filesystem::path& scenario, const RunOptions& opts, std::ostream& log);
int cmd_validate(const std::filesystem::path& scenario, const std::filesystem::path& run_dir, std::ostream& log);

struct SyntheticDataSpec {
    int days = 7;
    std::uint64_t seed = 42;
    double mean_load = 5.0;       // MW
    double load_amplitude = 1.5;  // MW, daily sinusoid
    double load_noise = 0.25;     // MW, standard deviation
    double mean_wind = 9.0;       // m/s
    double peak_irradiance = 950.0;
    double price_offpeak = 27.5;  // $/MWh
    double price_peak = 36.32;    // $/MWh, 08:00-20:00
    double sell_ratio = 0.9458;  // mean sell 30.18 against mean buy 31.91
};

/// Throws ModelError on an invalid specification.
void validate_spec(const SyntheticDataSpec& spec);
/// Columns: hour, load, wind_speed, irradiance, temperature, price_buy, price_sell.
void write_synthetic_csv(std::ostream& os, const SyntheticDataSpec& spec);
int cmd_gen_data(const SyntheticDataSpec& spec, const std::filesystem::path& out, std::ostream& log);

/// Argument parsing and dispatch for the `mgopt` executable.
int run_cli(int argc, char** argv);

} // namespace mgopt
