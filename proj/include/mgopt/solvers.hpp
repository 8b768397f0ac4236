#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgopt/math_program.hpp"
#include "mgopt/opf_model.hpp"
#include "mgopt/scenario_io.hpp"

namespace mgopt {

struct SolveOptions {
    double tol_kkt = 1e-8;
    double tol_int = 1e-6;
    double rel_gap = 1e-4;
    long max_bnb_nodes = 100000;
    int max_newton_iter = 50;
    int max_ipm_iter = 200;
    double nlp_penalty_init = 1e2;
    double penalty_growth = 10.0;
    double penalty_cap = 1e10;
    double nlp_tol = 1e-6;
    int max_nlp_outer = 200;
    double time_limit_s = 0.0;  // 0 = unlimited
    int max_rebranch = 5;
    /// Run round-and-repair on the current node relaxation every this many nodes.
    int repair_interval = 50;

    /// Throws ModelError when a tolerance is non-positive or rel_gap < 0.
    void validate() const;
};

enum class SolveStatus { Optimal, GapFeasible, Infeasible, NodeLimit, Diverged, NumericalError };

std::string_view status_name(SolveStatus s);

struct SolveResult {
    SolveStatus status = SolveStatus::NumericalError;
    Vector x;
    double objective = 0.0;
    double rel_gap = 0.0;
    /// Best proven lower bound (branch-and-bound) or the objective itself.
    double bound = 0.0;
    long node_count = 0;
    int iterations = 0;        // IPM iterations (summed over nodes for MIQP)
    int outer_iterations = 0;  // NLP outer loop
    /// Duals: A_eq rows (y), A_in rows (>= 0), lower and upper bounds (>= 0).
    /// Stationarity: Qx + c + A_eq'y + A_in'y_in - z_lower + z_upper = 0.
    Vector y_eq, y_in, z_lower, z_upper;
    double stationarity = 0.0;
    double primal_residual = 0.0;
    double complementarity = 0.0;
    double nonlinear_residual = 0.0;
    /// Human-readable reason for a non-optimal status (e.g. infeasible rows).
    std::string message;

    bool ok() const noexcept { return status == SolveStatus::Optimal || status == SolveStatus::GapFeasible; }
};

/// Convex QP by primal-dual interior point (Mehrotra predictor-corrector).
/// The integrality mask is ignored.
SolveResult solve_qp(const MathProgram& p, const SolveOptions& opts = {});

/// Copy of `p` with the listed columns fixed (lb = ub = value).
MathProgram fix_variables(const MathProgram& p, const std::vector<std::pair<int, double>>& fixes);

/// Rounds binaries at 0.5 and re-solves; when that is infeasible, switches on
/// the shortest feasible prefix of the off binaries ordered by relaxed value.
/// Returns nullopt on failure.
std::optional<SolveResult> round_and_repair(const MathProgram& p, const SolveResult& relaxed, const SolveOptions& opts = {});

/// Best-first branch-and-bound on the binaries of `p`.
SolveResult solve_miqp(const MathProgram& p, const SolveOptions& opts = {});

/// Enumerates every assignment of the binaries (at most kMaxEnumeratedBinaries)
/// and returns the best fixed-binary QP.
inline constexpr int kMaxEnumeratedBinaries = 20;
SolveResult brute_force_binaries(const MathProgram& p, const SolveOptions& opts = {});
SolveResult brute_force_dispatch(const ScenarioConfig& cfg, const SolveOptions& opts = {});

/// Augmented-Lagrangian solve of the nonlinear rows over QP subproblems.
/// Binaries must already be fixed through bounds. Starts from `x0` when given,
/// otherwise from `p.start`.
SolveResult solve_nlp(const NonlinearProgram& p, const SolveOptions& opts = {}, const Vector* x0 = nullptr);

/// Commitment MIQP on `p.commitment_program`, then solve_nlp with those
/// commitments fixed; a failed second stage excludes the commitment with a
/// no-good cut and retries up to opts.max_rebranch times. Feasible-point
/// heuristic, not a global MINLP method.
SolveResult solve_minlp(const NonlinearProgram& p, const SolveOptions& opts = {});

/// Worst entry-wise relative error of J(x) against central differences of r,
/// relative to max(1, |analytic|, |numeric|). Throws ModelError when h <= 0.
double check_gradients(const NonlinearProgram& p, const Vector& x, double h);

} // namespace mgopt
