#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgopt/math_program.hpp"
#include "mgopt/scenario_io.hpp"

namespace mgopt {

/// Per-timestep variable slots of the unit-commitment dispatch program.
enum class Slot {
    GenPower,
    BatteryCharge,
    BatteryDischarge,
    PvPower,
    WindPower,
    GridBuy,
    GridSell,
    BatteryEnergy,
    Commitment,
    Startup,
    Shutdown,
    BalanceShortfall,
    BalanceSurplus,
};
inline constexpr int kSlotCount = 13;

std::string_view slot_name(Slot slot);

struct LayoutOptions {
    /// Adds shortfall/surplus slacks on the balance rows, priced at
    /// kBalancePenalty $/MWh, for diagnosing infeasible scenarios.
    bool soft_balance = false;

    bool operator==(const LayoutOptions&) const = default;
};

inline constexpr double kBalancePenalty = 1e6;

/// Time-major flat indexing: index = t * per_timestep + offset(slot) + device.
class VariableLayout {
public:
    VariableLayout() = default;
    VariableLayout(const ScenarioConfig& cfg, LayoutOptions options = {});

    int index(Slot slot, int device, int t) const;
    int count(Slot slot) const noexcept { return count_[static_cast<int>(slot)]; }
    int horizon() const noexcept { return horizon_; }
    int per_timestep() const noexcept { return per_timestep_; }
    int total_count() const noexcept { return per_timestep_ * horizon_; }
    bool soft_balance() const noexcept { return options_.soft_balance; }
    /// Count with one P_B per battery and one P_Gr, as the variable vector is
    /// usually written down.
    int compact_per_timestep() const;
    /// U, S_up and S_dn slots (binary in the model; only U is branched on).
    int binary_typed_per_timestep() const;

    struct Location {
        Slot slot;
        int device;
        int t;
    };
    Location locate(int index) const;
    std::string variable_name(int index) const;
    const std::string& device_name(Slot slot, int device) const;

    bool operator==(const VariableLayout&) const = default;

private:
    int horizon_ = 0;
    int per_timestep_ = 0;
    LayoutOptions options_{};
    std::array<int, kSlotCount> count_{};
    std::array<int, kSlotCount> offset_{};
    std::array<std::vector<std::string>, kSlotCount> names_{};
};

/// Validates the scenario first; throws ScenarioError when it has violations.
VariableLayout build_layout(const ScenarioConfig& cfg, LayoutOptions options = {});

/// Available renewable output per unit (MW), derived from the weather series.
struct Forecasts {
    std::vector<TimeSeries> wind;
    std::vector<TimeSeries> pv;
};

Forecasts compute_forecasts(const ScenarioConfig& cfg);

/// Builds the mixed-integer QP. Row families:
///   eq: balance[t], bess_dyn[B,t], commit_link[G,t]
///   in: gen_max, gen_min (only when p_min > 0), ramp_up, ramp_dn, start_stop_excl
/// Startup/shutdown indicators are continuous in [0,1]; integrality follows
/// from U through commit_link and start_stop_excl.
MathProgram assemble_dispatch(const ScenarioConfig& cfg, const VariableLayout& layout, const Forecasts& forecasts);

struct CostBreakdown {
    double grid = 0.0;
    std::vector<double> generator;
    std::vector<double> battery;
    std::vector<double> pv;
    std::vector<double> wind;
    double balance_penalty = 0.0;

    double total() const;
};

/// Trajectories are indexed [device][t].
struct DispatchSolution {
    int horizon = 0;
    double dt = 1.0;
    std::vector<std::vector<double>> gen_power;
    std::vector<std::vector<int>> commitment;
    std::vector<std::vector<double>> startup;
    std::vector<std::vector<double>> shutdown;
    std::vector<std::vector<double>> battery_charge;
    std::vector<std::vector<double>> battery_discharge;
    /// discharge - charge (positive feeds the bus).
    std::vector<std::vector<double>> battery_power;
    std::vector<std::vector<double>> battery_energy;
    std::vector<std::vector<double>> pv_power;
    std::vector<std::vector<double>> wind_power;
    /// Empty when islanded.
    std::vector<double> grid_buy;
    std::vector<double> grid_sell;
    /// buy - sell (positive is import).
    std::vector<double> grid_power;
    std::vector<double> balance_shortfall;
    std::vector<double> balance_surplus;

    double objective = 0.0;
    CostBreakdown costs;
    std::string status;
    double gap = 0.0;
};

/// Decodes a solver vector. Commitments must be within 1e-6 of {0,1};
/// startup/shutdown are re-derived from the rounded commitments.
DispatchSolution extract_solution(const Vector& x, const VariableLayout& layout, const ScenarioConfig& cfg);

/// Objective terms evaluated through the device cost functions.
CostBreakdown compute_costs(const DispatchSolution& sol, const ScenarioConfig& cfg);

struct ConstraintViolation {
    std::string family;
    std::string device;
    int t = -1;
    double magnitude = 0.0;
    std::string message;
};

/// Re-evaluates every constraint family directly from the trajectories. Family
/// names match the program's row families. `losses` (MW per t) shifts the
/// balance requirement for network runs.
std::vector<ConstraintViolation> check_feasibility(const DispatchSolution& sol, const ScenarioConfig& cfg, double tol,
                                                   const std::vector<double>* losses = nullptr);

std::string format_violation(const ConstraintViolation& v);

} // namespace mgopt
