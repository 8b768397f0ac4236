#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>

#include "mgopt/error.hpp"
#include "mgopt/solvers.hpp"

namespace mgopt {

namespace {

constexpr double kProximal = 1.0;
// Residual below which subproblems also impose the linearized rows.
constexpr double kLinearizeBelow = 1e-2;

double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

void append_le(MathProgram& p, std::string name, const std::vector<std::pair<int, double>>& terms, double rhs) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(p.A_in.nonZeros() + terms.size());
    for (int col = 0; col < p.A_in.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(p.A_in, col); it; ++it) trip.emplace_back(it.row(), col, it.value());
    }
    const int row = p.n_in();
    for (const auto& [j, a] : terms) trip.emplace_back(row, j, a);
    p.A_in.resize(row + 1, p.n_vars());
    p.A_in.setFromTriplets(trip.begin(), trip.end());
    p.b_in.conservativeResize(row + 1);
    p.b_in[row] = rhs;
    p.in_names.push_back(std::move(name));
}

SparseMatrix stack_rows(const SparseMatrix& top, const SparseMatrix& bottom) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(top.nonZeros() + bottom.nonZeros());
    for (int col = 0; col < top.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(top, col); it; ++it) trip.emplace_back(it.row(), col, it.value());
    }
    for (int col = 0; col < bottom.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(bottom, col); it; ++it) trip.emplace_back(top.rows() + it.row(), col, it.value());
    }
    SparseMatrix out(top.rows() + bottom.rows(), top.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

} // namespace

SolveResult solve_nlp(const NonlinearProgram& p, const SolveOptions& opts, const Vector* x0) {
    opts.validate();
    const MathProgram& base = p.base;
    const int n = base.n_vars();
    for (int j = 0; j < n; ++j) {
        if (j < static_cast<int>(base.is_binary.size()) && base.is_binary[j] && base.lb[j] != base.ub[j]) {
            throw ModelError(fmt::format("solve_nlp requires fixed binaries; {} is free", base.var_names.empty() ? std::to_string(j) : base.var_names[j]));
        }
    }
    if (p.n_nonlinear() == 0) {
        SolveResult r = solve_qp(base, opts);
        r.outer_iterations = 0;
        return r;
    }

    Vector x = x0 ? *x0 : p.start;
    if (x.size() != n) throw ModelError("NLP starting point has the wrong dimension");
    x = x.cwiseMax(base.lb).cwiseMin(base.ub);

    // Proximal term on every column; without it the dispatch drifts along
    // flat cost directions and the network block chases it.
    const Vector prox = Vector::Constant(n, kProximal);

    const int m = p.n_nonlinear();
    Vector lambda = Vector::Zero(m);
    double rho = opts.nlp_penalty_init;
    Vector r = p.residual(x);
    double r_norm = inf_norm(r);
    int stalled_at_cap = 0;
    int total_ipm = 0;
    SolveResult last;

    for (int k = 1; k <= opts.max_nlp_outer; ++k) {
        const SparseMatrix J = p.jacobian(x);
        if (J.rows() != m || J.cols() != n) throw ModelError("jacobian dimensions do not match the program");

        // Subproblem in the step d = x - x_k: its linear term is the gradient
        // of the augmented Lagrangian at x_k, which vanishes at convergence.
        MathProgram sub = base;
        SparseMatrix JtJ = SparseMatrix(J.transpose()) * J;
        sub.Q = base.Q + rho * JtJ;
        SparseMatrix P(n, n);
        P.reserve(Eigen::VectorXi::Constant(n, 1));
        for (int j = 0; j < n; ++j) P.insert(j, j) = prox[j];
        sub.Q += P;
        sub.c = base.c + J.transpose() * (lambda + rho * r);
        if (base.Q.nonZeros()) sub.c += base.Q * x;
        sub.constant = 0.0;
        sub.lb = base.lb - x;
        sub.ub = base.ub - x;
        for (int j = 0; j < n; ++j) {
            if (base.lb[j] == base.ub[j]) sub.lb[j] = sub.ub[j] = 0.0;
        }
        if (base.n_eq()) sub.b_eq = base.b_eq - base.A_eq * x;
        if (base.n_in()) sub.b_in = base.b_in - base.A_in * x;

        last = SolveResult{};
        if (r_norm < kLinearizeBelow) {
            MathProgram lin = sub;
            lin.A_eq = stack_rows(sub.A_eq, J);
            lin.b_eq.conservativeResize(sub.n_eq() + m);
            lin.b_eq.tail(m) = -r;
            lin.eq_names.insert(lin.eq_names.end(), p.nl_names.begin(), p.nl_names.end());
            last = solve_qp(lin, opts);
        }
        if (!last.ok()) last = solve_qp(sub, opts);
        total_ipm += last.iterations;
        if (!last.ok()) {
            last.x = x;
            last.outer_iterations = k;
            last.iterations = total_ipm;
            last.nonlinear_residual = r_norm;
            last.message = fmt::format("NLP subproblem {} failed ({}): {}", k, status_name(last.status), last.message);
            return last;
        }
        x += last.x;
        for (int j = 0; j < n; ++j) {
            if (base.lb[j] == base.ub[j]) x[j] = base.lb[j];
        }
        last.x = x;
        const Vector r_new = p.residual(x);
        const double new_norm = inf_norm(r_new);
        lambda += rho * r_new;

        if (new_norm < opts.nlp_tol) {
            SolveResult out = last;
            out.x = x;
            out.status = SolveStatus::Optimal;
            out.objective = base.objective(x);
            out.bound = out.objective;
            out.outer_iterations = k;
            out.iterations = total_ipm;
            out.nonlinear_residual = new_norm;
            return out;
        }
        if (new_norm > 0.25 * r_norm) {
            if (rho >= opts.penalty_cap) {
                ++stalled_at_cap;
                if (stalled_at_cap >= 3 && new_norm > 0.5 * r_norm) {
                    SolveResult out = last;
                    out.status = SolveStatus::Infeasible;
                    out.outer_iterations = k;
                    out.iterations = total_ipm;
                    out.nonlinear_residual = new_norm;
                    int worst = 0;
                    r_new.cwiseAbs().maxCoeff(&worst);
                    out.message = fmt::format("nonlinear rows cannot be met within bounds: residual {:.3e} at {} (penalty at cap {:.1e})",
                                              new_norm, p.nl_names[worst], opts.penalty_cap);
                    return out;
                }
            }
            rho = std::min(rho * opts.penalty_growth, opts.penalty_cap);
        } else {
            stalled_at_cap = 0;
        }
        r = r_new;
        r_norm = new_norm;
    }

    SolveResult out = last;
    out.status = SolveStatus::Diverged;
    out.outer_iterations = opts.max_nlp_outer;
    out.iterations = total_ipm;
    out.nonlinear_residual = r_norm;
    out.message = fmt::format("augmented Lagrangian did not converge in {} outer iterations (residual {:.3e}, penalty {:.1e})",
                              opts.max_nlp_outer, r_norm, rho);
    return out;
}

SolveResult solve_minlp(const NonlinearProgram& p, const SolveOptions& opts) {
    opts.validate();
    if (p.n_nonlinear() == 0) return solve_miqp(p.base, opts);
    if (!p.commitment_program) throw ModelError("nonlinear program has no commitment program");

    MathProgram stage1 = *p.commitment_program;
    const int nc = stage1.n_vars();
    std::vector<int> bins;
    for (int j = 0; j < nc; ++j) {
        if (stage1.is_binary[j]) bins.push_back(j);
    }

    SolveResult fail;
    std::vector<std::string> failures;
    for (int attempt = 0; attempt <= opts.max_rebranch; ++attempt) {
        const SolveResult s1 = solve_miqp(stage1, opts);
        if (!s1.ok()) {
            if (attempt == 0) {
                SolveResult out = s1;
                out.message = "commitment stage: " + s1.message;
                return out;
            }
            fail.message = fmt::format("{}; no further commitment available ({})", fmt::join(failures, "; "), status_name(s1.status));
            return fail;
        }

        NonlinearProgram stage2 = p;
        std::vector<std::pair<int, double>> fixes;
        std::vector<std::pair<int, double>> cut;
        double ones = 0.0;
        for (int j : bins) {
            const double u = std::round(s1.x[j]);
            fixes.emplace_back(j, u);
            cut.emplace_back(j, u > 0.5 ? 1.0 : -1.0);
            ones += u;
        }
        stage2.base = fix_variables(p.base, fixes);
        Vector x0 = p.start;
        x0.head(nc) = s1.x;
        SolveResult s2 = solve_nlp(stage2, opts, &x0);
        if (s2.ok()) {
            s2.status = s1.status;
            s2.node_count = s1.node_count;
            s2.rel_gap = s1.rel_gap;
            if (attempt > 0) s2.message = fmt::format("found after {} excluded commitment(s)", attempt);
            return s2;
        }
        failures.push_back(fmt::format("commitment {} rejected: {}", attempt, s2.message));
        fail = s2;
        append_le(stage1, fmt::format("nogood[{}]", attempt), cut, ones - 1.0);
    }
    fail.message = fmt::format("{}; re-branch limit {} reached", fmt::join(failures, "; "), opts.max_rebranch);
    return fail;
}

double check_gradients(const NonlinearProgram& p, const Vector& x, double h) {
    if (!(h > 0.0)) throw ModelError("finite-difference step must be positive");
    const Eigen::MatrixXd J = Eigen::MatrixXd(p.jacobian(x));
    const int n = static_cast<int>(x.size());
    double worst = 0.0;
    Vector xp = x;
    Vector xm = x;
    for (int j = 0; j < n; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const Vector fd = (p.residual(xp) - p.residual(xm)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
        for (int i = 0; i < fd.size(); ++i) {
            const double a = J(i, j);
            const double e = std::abs(a - fd[i]) / std::max({1.0, std::abs(a), std::abs(fd[i])});
            worst = std::max(worst, e);
        }
    }
    return worst;
}

} // namespace mgopt
