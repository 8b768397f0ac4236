#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgopt/dispatch_model.hpp"
#include "mgopt/math_program.hpp"
#include "mgopt/network.hpp"
#include "mgopt/scenario_io.hpp"

namespace mgopt {

using ComplexMatrix = Eigen::MatrixXcd;

struct PowerFlowState {
    std::vector<double> v;      // kV
    std::vector<double> delta;  // rad
    std::vector<double> p_inj;  // MW
    std::vector<double> q_inj;  // MVAr
};

/// Y-bus in siemens. Throws ModelError on a zero-impedance line or a bad bus index.
ComplexMatrix build_admittance(const NetworkModel& net);

struct BusInjections {
    std::vector<double> p;
    std::vector<double> q;
};

BusInjections bus_injections(const std::vector<double>& v, const std::vector<double>& delta, const ComplexMatrix& Y);
BusInjections bus_injections(const PowerFlowState& state, const ComplexMatrix& Y);

/// d(P, Q)/d(delta, V); rows [P_0..P_n-1, Q_0..Q_n-1], columns [delta_0.., V_0..].
Eigen::MatrixXd pf_jacobian(const std::vector<double>& v, const std::vector<double>& delta, const ComplexMatrix& Y);

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
};

struct NewtonResult {
    PowerFlowState state;
    /// Number of mismatch evaluations, the last being the converged one.
    int iterations = 0;
    /// Max-norm mismatch at each evaluation.
    std::vector<double> mismatch;
};

/// Solves for V, delta at every non-slack (PQ) bus given the specified net
/// injections there; the slack holds (slack_kv, 0). Entries of p_spec/q_spec
/// at the slack index are ignored. Flat start at nominal_kv, 0 rad.
/// Throws PowerFlowError on a singular Jacobian, a non-physical iterate or
/// when max_iter is exhausted.
NewtonResult newton_pf(const NetworkModel& net, const ComplexMatrix& Y, const std::vector<double>& p_spec,
                       const std::vector<double>& q_spec, double slack_kv, NewtonOptions opts = {});

/// Linear/quadratic program plus nonlinear equality rows r(x) = 0.
struct NonlinearProgram {
    MathProgram base;
    std::vector<std::string> nl_names;
    std::function<Vector(const Vector&)> residual;
    std::function<SparseMatrix(const Vector&)> jacobian;
    /// Suggested starting point (flat voltages).
    Vector start;
    /// Commitment-only program whose columns are a prefix of `base`.
    std::optional<MathProgram> commitment_program;

    int n_nonlinear() const noexcept { return static_cast<int>(nl_names.size()); }
};

/// Column map of the network block appended after the dispatch columns.
struct OpfLayout {
    VariableLayout dispatch;
    int n_bus = 0;
    int slack_bus = 0;
    bool has_grid_q = false;

    int horizon() const noexcept { return dispatch.horizon(); }
    int network_per_timestep() const noexcept { return 3 * n_bus + (has_grid_q ? 1 : 0); }
    int network_offset() const noexcept { return dispatch.total_count(); }
    int total_count() const noexcept { return network_offset() + network_per_timestep() * horizon(); }
    int v_index(int bus, int t) const;
    int delta_index(int bus, int t) const;
    int qgen_index(int bus, int t) const;
    int qgrid_index(int t) const;
};

struct OpfProgram {
    NonlinearProgram nlp;
    OpfLayout layout;
    ComplexMatrix Y;
};

/// Dispatch program with the copper-plate balance rows replaced by per-bus
/// P and Q balance rows `bus_p[bus,t]`, `bus_q[bus,t]`.
OpfProgram assemble_opf(const ScenarioConfig& cfg, const Forecasts& forecasts, LayoutOptions options = {});

/// One state per timestep; injections are recomputed from V and delta.
std::vector<PowerFlowState> extract_power_flow(const Vector& x, const OpfProgram& opf);

/// Sum of bus injections per timestep (line losses, MW).
std::vector<double> network_losses(const std::vector<PowerFlowState>& states);

/// Net active injection per bus scheduled by a dispatch, [t][bus]: devices at
/// the bus, the grid tie and balance slacks at the slack bus, minus the load share.
std::vector<std::vector<double>> scheduled_injections(const DispatchSolution& sol, const ScenarioConfig& cfg);

/// Reactive supply per bus, [t][bus]: the aggregate generator Q plus the grid
/// tie at the slack bus.
std::vector<std::vector<double>> reactive_supply(const Vector& x, const OpfProgram& opf);

/// Bus residuals recomputed from stored trajectories (no solver internals):
/// P: scheduled - P_l(V, delta), Q: q_supply - reactive load share - Q_l(V, delta).
struct BusResidual {
    int bus = 0;
    int t = 0;
    double p = 0.0;
    double q = 0.0;
};
std::vector<BusResidual> bus_balance_residuals(const DispatchSolution& sol, const ScenarioConfig& cfg,
                                               const std::vector<PowerFlowState>& states,
                                               const std::vector<std::vector<double>>& q_supply);

} // namespace mgopt
