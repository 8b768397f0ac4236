#include <fmt/format.h>
#include <fmt/ranges.h>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mgopt/error.hpp"
#include "mgopt/solvers.hpp"

namespace mgopt {

void SolveOptions::validate() const {
    if (!(tol_kkt > 0) || !(tol_int > 0) || !(nlp_tol > 0)) throw ModelError("solver tolerances must be positive");
    if (!(rel_gap >= 0)) throw ModelError("rel_gap must be non-negative");
    if (max_bnb_nodes < 1 || max_ipm_iter < 1 || max_newton_iter < 1 || max_nlp_outer < 1) {
        throw ModelError("iteration limits must be positive");
    }
    if (!(nlp_penalty_init > 0) || !(penalty_growth > 1) || !(penalty_cap >= nlp_penalty_init)) {
        throw ModelError("penalty schedule needs init > 0, growth > 1 and cap >= init");
    }
    if (time_limit_s < 0) throw ModelError("time_limit_s must be non-negative");
    if (max_rebranch < 0 || repair_interval < 1) throw ModelError("max_rebranch >= 0 and repair_interval >= 1 required");
}

std::string_view status_name(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::GapFeasible: return "gap-feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NodeLimit: return "node-limit";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::NumericalError: return "numerical-error";
    }
    return "?";
}

MathProgram fix_variables(const MathProgram& p, const std::vector<std::pair<int, double>>& fixes) {
    MathProgram out = p;
    for (const auto& [j, value] : fixes) {
        if (j < 0 || j >= p.n_vars()) throw ModelError(fmt::format("cannot fix column {}: out of range", j));
        out.lb[j] = value;
        out.ub[j] = value;
    }
    return out;
}

namespace {

constexpr double kFixedRange = 1e-9;

double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

double finite_inf_norm(const Vector& v) {
    double m = 0.0;
    for (int i = 0; i < v.size(); ++i) {
        if (std::isfinite(v[i])) m = std::max(m, std::abs(v[i]));
    }
    return m;
}

// Free columns of a program with fixed columns substituted out, empty rows
// dropped and each row scaled to unit max-norm.
struct Reduced {
    int n = 0;
    std::vector<int> free_cols;
    Vector x_full;  // original-size point holding the fixed values
    SparseMatrix Q, Ae, Ai;
    Vector c, be, bi, lb, ub;
    std::vector<int> eq_rows, in_rows;
    Vector eq_scale, in_scale;
    double obj_scale = 1.0;
    std::string infeasible;  // non-empty when presolve proved infeasibility
};

Reduced presolve(const MathProgram& p) {
    Reduced r;
    const int n0 = p.n_vars();
    std::vector<std::string> bad;
    for (int j = 0; j < n0; ++j) {
        if (std::isnan(p.lb[j]) || std::isnan(p.ub[j]) || p.lb[j] > p.ub[j]) {
            bad.push_back(fmt::format("{} [{}, {}]", p.var_names.empty() ? std::to_string(j) : p.var_names[j], p.lb[j], p.ub[j]));
        }
    }
    if (!bad.empty()) {
        r.infeasible = fmt::format("inconsistent bounds: {}", fmt::join(bad.begin(), bad.begin() + std::min<std::size_t>(bad.size(), 5), "; "));
        return r;
    }

    std::vector<int> col_map(n0, -1);
    r.x_full = Vector::Zero(n0);
    for (int j = 0; j < n0; ++j) {
        if (std::isfinite(p.lb[j]) && p.ub[j] - p.lb[j] <= kFixedRange * std::max(1.0, std::abs(p.lb[j]))) {
            r.x_full[j] = 0.5 * (p.lb[j] + p.ub[j]);
        } else {
            col_map[j] = static_cast<int>(r.free_cols.size());
            r.free_cols.push_back(j);
        }
    }
    r.n = static_cast<int>(r.free_cols.size());

    const Vector qfix = p.Q.rows() ? Vector(p.Q * r.x_full) : Vector::Zero(n0);
    r.c.resize(r.n);
    r.lb.resize(r.n);
    r.ub.resize(r.n);
    for (int k = 0; k < r.n; ++k) {
        const int j = r.free_cols[k];
        r.c[k] = p.c[j] + qfix[j];
        r.lb[k] = p.lb[j];
        r.ub[k] = p.ub[j];
    }
    std::vector<Eigen::Triplet<double>> qt;
    for (int col = 0; col < p.Q.outerSize(); ++col) {
        if (col_map[col] < 0) continue;
        for (SparseMatrix::InnerIterator it(p.Q, col); it; ++it) {
            if (col_map[it.row()] >= 0 && it.value() != 0.0) qt.emplace_back(col_map[it.row()], col_map[col], it.value());
        }
    }
    r.Q.resize(r.n, r.n);
    r.Q.setFromTriplets(qt.begin(), qt.end());

    auto reduce_rows = [&](const SparseMatrix& A, const Vector& b, const std::vector<std::string>& names, bool equality,
                           SparseMatrix& out, Vector& b_out, std::vector<int>& rows, Vector& scale) {
        const int m = static_cast<int>(b.size());
        const Vector afix = A * r.x_full;
        std::vector<double> row_max(m, 0.0);
        for (int col = 0; col < A.outerSize(); ++col) {
            if (col_map[col] < 0) continue;
            for (SparseMatrix::InnerIterator it(A, col); it; ++it) row_max[it.row()] = std::max(row_max[it.row()], std::abs(it.value()));
        }
        std::vector<int> new_row(m, -1);
        for (int i = 0; i < m; ++i) {
            const double rhs = b[i] - afix[i];
            if (row_max[i] == 0.0) {
                const double tol = 1e-9 * std::max(1.0, std::abs(b[i]));
                const bool violated = equality ? std::abs(rhs) > tol : rhs < -tol;
                if (violated && r.infeasible.empty()) {
                    r.infeasible = fmt::format("row {} cannot be satisfied by the fixed columns (residual {:.6g})",
                                               names.empty() ? std::to_string(i) : names[i], -rhs);
                }
                continue;
            }
            new_row[i] = static_cast<int>(rows.size());
            rows.push_back(i);
        }
        scale.resize(static_cast<int>(rows.size()));
        b_out.resize(static_cast<int>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            scale[static_cast<int>(k)] = 1.0 / row_max[rows[k]];
            b_out[static_cast<int>(k)] = (b[rows[k]] - afix[rows[k]]) * scale[static_cast<int>(k)];
        }
        std::vector<Eigen::Triplet<double>> t;
        for (int col = 0; col < A.outerSize(); ++col) {
            if (col_map[col] < 0) continue;
            for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
                const int nr = new_row[it.row()];
                if (nr >= 0 && it.value() != 0.0) t.emplace_back(nr, col_map[col], it.value() * scale[nr]);
            }
        }
        out.resize(static_cast<int>(rows.size()), r.n);
        out.setFromTriplets(t.begin(), t.end());
    };
    reduce_rows(p.A_eq, p.b_eq, p.eq_names, true, r.Ae, r.be, r.eq_rows, r.eq_scale);
    reduce_rows(p.A_in, p.b_in, p.in_names, false, r.Ai, r.bi, r.in_rows, r.in_scale);

    double obj_mag = std::max(1.0, inf_norm(r.c));
    for (int col = 0; col < r.Q.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(r.Q, col); it; ++it) obj_mag = std::max(obj_mag, std::abs(it.value()));
    }
    r.obj_scale = 1.0 / obj_mag;
    r.c *= r.obj_scale;
    r.Q *= r.obj_scale;
    return r;
}

struct IpmPoint {
    Vector x, y, v, w, zl, zu;
};

enum class IpmExit { Converged, Stalled, IterationLimit, Numerical };

// Original-unit KKT measures. Fills duals of fixed columns from stationarity.
struct Kkt {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
};

Kkt original_kkt(const MathProgram& p, const Vector& x, const Vector& y, const Vector& v, Vector& zl, Vector& zu,
                 const std::vector<bool>& fixed) {
    Vector g = p.c;
    if (p.Q.nonZeros()) g += p.Q * x;
    if (p.n_eq()) g += p.A_eq.transpose() * y;
    if (p.n_in()) g += p.A_in.transpose() * v;
    Kkt k;
    // Same magnitude the objective is scaled by in presolve.
    double c_scale = std::max(1.0, inf_norm(p.c));
    if (p.Q.nonZeros()) c_scale = std::max(c_scale, Eigen::Map<const Vector>(p.Q.valuePtr(), p.Q.nonZeros()).lpNorm<Eigen::Infinity>());
    double stat = 0.0;
    double comp = 0.0;
    for (int j = 0; j < p.n_vars(); ++j) {
        if (fixed[j]) {
            zl[j] = std::max(0.0, g[j]);
            zu[j] = std::max(0.0, -g[j]);
            continue;
        }
        stat = std::max(stat, std::abs(g[j] - zl[j] + zu[j]));
        if (std::isfinite(p.lb[j])) comp = std::max(comp, std::abs((x[j] - p.lb[j]) * zl[j]));
        if (std::isfinite(p.ub[j])) comp = std::max(comp, std::abs((p.ub[j] - x[j]) * zu[j]));
    }
    if (p.n_in()) {
        const Vector s = p.b_in - p.A_in * x;
        for (int i = 0; i < p.n_in(); ++i) comp = std::max(comp, std::abs(s[i] * v[i]));
    }
    const double b_scale = std::max({1.0, finite_inf_norm(p.b_eq), finite_inf_norm(p.b_in)});
    k.stationarity = stat / c_scale;
    k.primal = p.max_violation(x) / b_scale;
    k.complementarity = comp / c_scale;
    return k;
}

class Ipm {
public:
    // `split` takes separate primal and dual step lengths.
    Ipm(const Reduced& r, const SolveOptions& opts, bool split) : r_(r), opts_(opts), split_(split) {
        n_ = r.n;
        me_ = static_cast<int>(r.be.size());
        mi_ = static_cast<int>(r.bi.size());
        has_l_.resize(n_);
        has_u_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            has_l_[j] = std::isfinite(r.lb[j]);
            has_u_[j] = std::isfinite(r.ub[j]);
        }
        n_comp_ = mi_;
        for (int j = 0; j < n_; ++j) n_comp_ += has_l_[j] + has_u_[j];

        // Static lower-triangular part of the KKT matrix.
        for (int col = 0; col < r.Q.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(r.Q, col); it; ++it) {
                if (it.row() > col) static_.emplace_back(it.row(), col, it.value());
                else if (it.row() == col) q_diag_.emplace_back(col, it.value());
            }
        }
        for (int col = 0; col < r.Ae.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(r.Ae, col); it; ++it) static_.emplace_back(n_ + it.row(), col, it.value());
        }
        for (int col = 0; col < r.Ai.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(r.Ai, col); it; ++it) static_.emplace_back(n_ + me_ + it.row(), col, it.value());
        }
        b_scale_ = 1.0 + std::max(inf_norm(r.be), inf_norm(r.bi));
        c_scale_ = 1.0 + inf_norm(r.c);
    }

    template <class Accept>
    IpmExit run(IpmPoint& pt, int& iterations, std::string& trace, Accept&& accept) {
        init(pt);
        double target = 0.01 * opts_.tol_kkt;
        int small_steps = 0;
        std::vector<double> pres_hist;
        const int N = n_ + me_ + mi_;
        bool analyzed = false;

        for (iterations = 0; iterations < opts_.max_ipm_iter; ++iterations) {
            const Vector sl = slack_l(pt.x);
            const Vector su = slack_u(pt.x);
            Vector rd = r_.c + pt.zu - pt.zl;
            if (n_) rd += r_.Q * pt.x;
            if (me_) rd += r_.Ae.transpose() * pt.y;
            if (mi_) rd += r_.Ai.transpose() * pt.v;
            const Vector rpe = me_ ? Vector(r_.Ae * pt.x - r_.be) : Vector();
            const Vector rpi = mi_ ? Vector(r_.Ai * pt.x + pt.w - r_.bi) : Vector();

            double comp_sum = 0.0;
            double comp_max = 0.0;
            for (int j = 0; j < n_; ++j) {
                if (has_l_[j]) comp_sum += sl[j] * pt.zl[j], comp_max = std::max(comp_max, sl[j] * pt.zl[j]);
                if (has_u_[j]) comp_sum += su[j] * pt.zu[j], comp_max = std::max(comp_max, su[j] * pt.zu[j]);
            }
            for (int i = 0; i < mi_; ++i) comp_sum += pt.w[i] * pt.v[i], comp_max = std::max(comp_max, pt.w[i] * pt.v[i]);
            const double mu = n_comp_ ? comp_sum / n_comp_ : 0.0;

            const double pres = std::max(inf_norm(rpe), inf_norm(rpi)) / b_scale_;
            const double dres = inf_norm(rd) / c_scale_;
            pres_hist.push_back(pres);
            if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(mu)) {
                trace += fmt::format("iter {}: non-finite residuals\n", iterations);
                return IpmExit::Numerical;
            }
            // Residuals must be well inside the tolerance to survive unscaling;
            // complementarity is checked in original units only.
            if (pres < target && dres < target && comp_max < 10.0 * target) {
                if (accept(pt)) return IpmExit::Converged;
                target *= 0.1;
                if (target < 1e-15) return IpmExit::Stalled;
            }
            const double dual_mag = std::max({inf_norm(pt.y), inf_norm(pt.v), inf_norm(pt.zl), inf_norm(pt.zu)});
            if (dual_mag > 1e14) {
                trace += fmt::format("iter {}: dual blow-up ({:.3e}), pres {:.3e}\n", iterations, dual_mag, pres);
                return IpmExit::Stalled;
            }
            if (iterations >= 30 && pres > 1e-6 && pres > 0.5 * pres_hist[pres_hist.size() - 16]) {
                trace += fmt::format("iter {}: primal residual stalled at {:.3e}\n", iterations, pres);
                return IpmExit::Stalled;
            }

            // Assemble and factor the quasi-definite system; the regularization
            // grows only when a pivot breaks down.
            Vector wv(mi_);
            for (int i = 0; i < mi_; ++i) wv[i] = pt.w[i] / pt.v[i];
            SparseMatrix K(N, N);
            double reg = kRegMin;
            for (;;) {
                std::vector<Eigen::Triplet<double>> trip = static_;
                trip.reserve(static_.size() + N);
                Vector dx_diag = Vector::Constant(n_, reg);
                for (const auto& [j, q] : q_diag_) dx_diag[j] += q;
                for (int j = 0; j < n_; ++j) {
                    if (has_l_[j]) dx_diag[j] += pt.zl[j] / sl[j];
                    if (has_u_[j]) dx_diag[j] += pt.zu[j] / su[j];
                    trip.emplace_back(j, j, dx_diag[j]);
                }
                for (int i = 0; i < me_; ++i) trip.emplace_back(n_ + i, n_ + i, -reg);
                for (int i = 0; i < mi_; ++i) trip.emplace_back(n_ + me_ + i, n_ + me_ + i, -wv[i] - reg);
                K.setFromTriplets(trip.begin(), trip.end());
                if (!analyzed) {
                    ldlt_.analyzePattern(K);
                    analyzed = true;
                }
                ldlt_.factorize(K);
                if (ldlt_.info() == Eigen::Success) break;
                reg *= 100.0;
                if (reg > kRegMax) {
                    trace += fmt::format("iter {}: KKT factorization failed (mu {:.3e})\n", iterations, mu);
                    return IpmExit::Numerical;
                }
            }

            auto solve = [&](const Vector& rl, const Vector& ru, const Vector& rwv, Vector& dx, Vector& dy, Vector& dv,
                             Vector& dw, Vector& dzl, Vector& dzu) {
                Vector rhs(N);
                for (int j = 0; j < n_; ++j) {
                    double val = -rd[j];
                    if (has_l_[j]) val -= rl[j] / sl[j];
                    if (has_u_[j]) val += ru[j] / su[j];
                    rhs[j] = val;
                }
                for (int i = 0; i < me_; ++i) rhs[n_ + i] = -rpe[i];
                for (int i = 0; i < mi_; ++i) rhs[n_ + me_ + i] = rwv[i] / pt.v[i] - rpi[i];
                Vector sol = ldlt_.solve(rhs);
                for (int pass = 0; pass < 10; ++pass) {
                    Vector Ks = K.selfadjointView<Eigen::Lower>() * sol;
                    Ks.head(n_) -= reg * sol.head(n_);
                    Ks.tail(me_ + mi_) += reg * sol.tail(me_ + mi_);
                    const Vector res = rhs - Ks;
                    if (inf_norm(res) <= 1e-14 * (1.0 + inf_norm(rhs))) break;
                    sol += ldlt_.solve(res);
                }
                dx = sol.head(n_);
                dy = sol.segment(n_, me_);
                dv = sol.tail(mi_);
                dw = mi_ ? Vector(-rpi - r_.Ai * dx) : Vector();
                dzl = Vector::Zero(n_);
                dzu = Vector::Zero(n_);
                for (int j = 0; j < n_; ++j) {
                    if (has_l_[j]) dzl[j] = (-rl[j] - pt.zl[j] * dx[j]) / sl[j];
                    if (has_u_[j]) dzu[j] = (-ru[j] + pt.zu[j] * dx[j]) / su[j];
                }
            };

            // Predictor.
            Vector rl = sl.cwiseProduct(pt.zl);
            Vector ru = su.cwiseProduct(pt.zu);
            Vector rwv = pt.w.cwiseProduct(pt.v);
            Vector dx, dy, dv, dw, dzl, dzu;
            solve(rl, ru, rwv, dx, dy, dv, dw, dzl, dzu);
            auto [ap_aff, ad_aff] = step_lengths(pt, sl, su, dx, dw, dv, dzl, dzu);

            double sigma = 0.0;
            if (n_comp_) {
                double mu_aff = 0.0;
                for (int j = 0; j < n_; ++j) {
                    if (has_l_[j]) mu_aff += (sl[j] + ap_aff * dx[j]) * (pt.zl[j] + ad_aff * dzl[j]);
                    if (has_u_[j]) mu_aff += (su[j] - ap_aff * dx[j]) * (pt.zu[j] + ad_aff * dzu[j]);
                }
                for (int i = 0; i < mi_; ++i) mu_aff += (pt.w[i] + ap_aff * dw[i]) * (pt.v[i] + ad_aff * dv[i]);
                mu_aff /= n_comp_;
                sigma = mu > 0 ? std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0) : 0.0;

                // Corrector.
                for (int j = 0; j < n_; ++j) {
                    if (has_l_[j]) rl[j] += dx[j] * dzl[j] - sigma * mu;
                    if (has_u_[j]) ru[j] += -dx[j] * dzu[j] - sigma * mu;
                }
                for (int i = 0; i < mi_; ++i) rwv[i] += dw[i] * dv[i] - sigma * mu;
                solve(rl, ru, rwv, dx, dy, dv, dw, dzl, dzu);
            }
            auto [ap, ad] = step_lengths(pt, sl, su, dx, dw, dv, dzl, dzu);
            const double alpha = std::min(1.0, kStepFraction * std::min(ap, ad));

            const double alpha_p = split_ ? std::min(1.0, kStepFraction * ap) : alpha;
            const double alpha_d = split_ ? std::min(1.0, kStepFraction * ad) : alpha;
            pt.x += alpha_p * dx;
            pt.w += alpha_p * dw;
            pt.y += alpha_d * dy;
            pt.v += alpha_d * dv;
            pt.zl += alpha_d * dzl;
            pt.zu += alpha_d * dzu;
            keep_interior(pt);
            recenter_slacks(pt);

            small_steps = alpha < 1e-8 ? small_steps + 1 : 0;
            if (small_steps >= 5) {
                trace += fmt::format("iter {}: step length collapsed (pres {:.3e}, dres {:.3e}, mu {:.3e})\n", iterations, pres, dres, mu);
                return IpmExit::Stalled;
            }
        }
        trace += fmt::format("iteration limit {} reached\n", opts_.max_ipm_iter);
        return IpmExit::IterationLimit;
    }

private:
    static constexpr double kRegMin = 1e-9;
    static constexpr double kRegMax = 1e-2;
    static constexpr double kStepFraction = 0.995;
    static constexpr double kCentrality = 1e-4;

    Vector slack_l(const Vector& x) const {
        Vector s = Vector::Ones(n_);
        for (int j = 0; j < n_; ++j) {
            if (has_l_[j]) s[j] = std::max(x[j] - r_.lb[j], 1e-300);
        }
        return s;
    }

    Vector slack_u(const Vector& x) const {
        Vector s = Vector::Ones(n_);
        for (int j = 0; j < n_; ++j) {
            if (has_u_[j]) s[j] = std::max(r_.ub[j] - x[j], 1e-300);
        }
        return s;
    }

    void init(IpmPoint& pt) const {
        pt.x.resize(n_);
        for (int j = 0; j < n_; ++j) {
            const double l = r_.lb[j];
            const double u = r_.ub[j];
            if (has_l_[j] && has_u_[j]) {
                pt.x[j] = 0.5 * (l + u);
            } else if (has_l_[j]) {
                pt.x[j] = l + 1.0;
            } else if (has_u_[j]) {
                pt.x[j] = u - 1.0;
            } else {
                pt.x[j] = 0.0;
            }
        }
        pt.y = Vector::Zero(me_);
        pt.v = Vector::Ones(mi_);
        pt.w = mi_ ? Vector((r_.bi - r_.Ai * pt.x).cwiseMax(1.0)) : Vector();
        pt.zl = Vector::Zero(n_);
        pt.zu = Vector::Zero(n_);
        for (int j = 0; j < n_; ++j) {
            if (has_l_[j]) pt.zl[j] = 1.0;
            if (has_u_[j]) pt.zu[j] = 1.0;
        }
    }

    std::pair<double, double> step_lengths(const IpmPoint& pt, const Vector& sl, const Vector& su, const Vector& dx,
                                           const Vector& dw, const Vector& dv, const Vector& dzl, const Vector& dzu) const {
        double a_p = 1e300;
        double a_d = 1e300;
        for (int j = 0; j < n_; ++j) {
            if (has_l_[j]) {
                if (dx[j] < 0) a_p = std::min(a_p, -sl[j] / dx[j]);
                if (dzl[j] < 0) a_d = std::min(a_d, -pt.zl[j] / dzl[j]);
            }
            if (has_u_[j]) {
                if (dx[j] > 0) a_p = std::min(a_p, su[j] / dx[j]);
                if (dzu[j] < 0) a_d = std::min(a_d, -pt.zu[j] / dzu[j]);
            }
        }
        for (int i = 0; i < mi_; ++i) {
            if (dw[i] < 0) a_p = std::min(a_p, -pt.w[i] / dw[i]);
            if (dv[i] < 0) a_d = std::min(a_d, -pt.v[i] / dv[i]);
        }
        return {std::min(1.0, a_p), std::min(1.0, a_d)};
    }

    // Row slacks are free to move; lifting the ones whose product fell far
    // below the average keeps degenerate (implicitly tight) rows from
    // blocking the step.
    void recenter_slacks(IpmPoint& pt) const {
        if (!n_comp_ || !mi_) return;
        double sum = 0.0;
        for (int j = 0; j < n_; ++j) {
            if (has_l_[j]) sum += (pt.x[j] - r_.lb[j]) * pt.zl[j];
            if (has_u_[j]) sum += (r_.ub[j] - pt.x[j]) * pt.zu[j];
        }
        for (int i = 0; i < mi_; ++i) sum += pt.w[i] * pt.v[i];
        const double floor = kCentrality * sum / n_comp_;
        for (int i = 0; i < mi_; ++i) {
            if (pt.w[i] * pt.v[i] < floor) pt.w[i] = floor / pt.v[i];
        }
    }

    void keep_interior(IpmPoint& pt) const {
        for (int j = 0; j < n_; ++j) {
            if (has_l_[j] && !(pt.x[j] > r_.lb[j])) pt.x[j] = std::nextafter(r_.lb[j], kInf);
            if (has_u_[j] && !(pt.x[j] < r_.ub[j])) pt.x[j] = std::nextafter(r_.ub[j], -kInf);
            if (has_l_[j]) pt.zl[j] = std::max(pt.zl[j], 1e-300);
            if (has_u_[j]) pt.zu[j] = std::max(pt.zu[j], 1e-300);
        }
        for (int i = 0; i < mi_; ++i) {
            pt.w[i] = std::max(pt.w[i], 1e-300);
            pt.v[i] = std::max(pt.v[i], 1e-300);
        }
    }

    const Reduced& r_;
    const SolveOptions& opts_;
    bool split_ = false;
    int n_ = 0, me_ = 0, mi_ = 0, n_comp_ = 0;
    std::vector<char> has_l_, has_u_;
    std::vector<Eigen::Triplet<double>> static_;
    std::vector<std::pair<int, double>> q_diag_;
    double b_scale_ = 1.0, c_scale_ = 1.0;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

SolveResult solve_qp_impl(const MathProgram& p, const SolveOptions& opts, bool diagnose);

// min sum of elastic variables on scaled rows; a positive optimum certifies
// infeasibility and names the rows that cannot be met.
std::string diagnose_infeasibility(const MathProgram& p, const SolveOptions& opts, bool& proven) {
    proven = false;
    const int n = p.n_vars();
    const int me = p.n_eq();
    const int mi = p.n_in();
    std::vector<double> eq_norm(me, 0.0), in_norm(mi, 0.0);
    for (int col = 0; col < p.A_eq.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(p.A_eq, col); it; ++it) eq_norm[it.row()] = std::max(eq_norm[it.row()], std::abs(it.value()));
    }
    for (int col = 0; col < p.A_in.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(p.A_in, col); it; ++it) in_norm[it.row()] = std::max(in_norm[it.row()], std::abs(it.value()));
    }
    for (auto& v : eq_norm) v = v > 0 ? v : 1.0;
    for (auto& v : in_norm) v = v > 0 ? v : 1.0;

    MathProgram e;
    const int ne = n + 2 * me + mi;
    e.Q.resize(ne, ne);
    e.c = Vector::Zero(ne);
    e.c.tail(2 * me + mi).setOnes();
    e.lb = Vector::Zero(ne);
    e.ub = Vector::Constant(ne, kInf);
    e.lb.head(n) = p.lb;
    e.ub.head(n) = p.ub;
    e.is_binary.assign(ne, false);
    std::vector<Eigen::Triplet<double>> te, ti;
    for (int col = 0; col < n; ++col) {
        for (SparseMatrix::InnerIterator it(p.A_eq, col); it; ++it) te.emplace_back(it.row(), col, it.value() / eq_norm[it.row()]);
        for (SparseMatrix::InnerIterator it(p.A_in, col); it; ++it) ti.emplace_back(it.row(), col, it.value() / in_norm[it.row()]);
    }
    for (int i = 0; i < me; ++i) {
        te.emplace_back(i, n + i, 1.0);
        te.emplace_back(i, n + me + i, -1.0);
    }
    for (int i = 0; i < mi; ++i) ti.emplace_back(i, n + 2 * me + i, -1.0);
    e.A_eq.resize(me, ne);
    e.A_eq.setFromTriplets(te.begin(), te.end());
    e.A_in.resize(mi, ne);
    e.A_in.setFromTriplets(ti.begin(), ti.end());
    e.b_eq.resize(me);
    e.b_in.resize(mi);
    for (int i = 0; i < me; ++i) e.b_eq[i] = p.b_eq[i] / eq_norm[i];
    for (int i = 0; i < mi; ++i) e.b_in[i] = p.b_in[i] / in_norm[i];

    SolveOptions o = opts;
    o.tol_kkt = std::max(opts.tol_kkt, 1e-9);
    const SolveResult r = solve_qp_impl(e, o, false);
    if (!r.ok()) return "feasibility check did not converge: " + r.message;
    if (r.objective <= 1e-6) return "solver stalled although a feasible point exists";

    proven = true;
    std::vector<std::pair<double, std::string>> worst;
    for (int i = 0; i < me; ++i) {
        const double mag = (r.x[n + i] + r.x[n + me + i]) * eq_norm[i];
        if (mag > 1e-7) worst.emplace_back(mag, p.eq_names.empty() ? fmt::format("eq{}", i) : p.eq_names[i]);
    }
    for (int i = 0; i < mi; ++i) {
        const double mag = r.x[n + 2 * me + i] * in_norm[i];
        if (mag > 1e-7) worst.emplace_back(mag, p.in_names.empty() ? fmt::format("in{}", i) : p.in_names[i]);
    }
    std::stable_sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> parts;
    for (std::size_t k = 0; k < std::min<std::size_t>(worst.size(), 5); ++k) {
        parts.push_back(fmt::format("{} short by {:.6g}", worst[k].second, worst[k].first));
    }
    return fmt::format("infeasible: {}", fmt::join(parts, "; "));
}

SolveResult solve_qp_impl(const MathProgram& p, const SolveOptions& opts, bool diagnose) {
    SolveResult res;
    const int n0 = p.n_vars();
    if (p.lb.size() != n0 || p.ub.size() != n0 || p.A_eq.cols() != n0 || p.A_in.cols() != n0 ||
        p.A_eq.rows() != p.n_eq() || p.A_in.rows() != p.n_in() || (p.Q.size() && (p.Q.rows() != n0 || p.Q.cols() != n0))) {
        throw ModelError("program dimensions are inconsistent");
    }

    const Reduced r = presolve(p);
    if (!r.infeasible.empty()) {
        res.status = SolveStatus::Infeasible;
        res.message = r.infeasible;
        return res;
    }

    std::vector<bool> fixed(n0, true);
    for (int j : r.free_cols) fixed[j] = false;

    Vector x(n0), y_eq(p.n_eq()), y_in(p.n_in()), zl(n0), zu(n0);
    auto unscale = [&](const IpmPoint& pt) {
        x = r.x_full;
        zl.setZero();
        zu.setZero();
        for (int k = 0; k < r.n; ++k) {
            x[r.free_cols[k]] = pt.x[k];
            zl[r.free_cols[k]] = pt.zl[k] / r.obj_scale;
            zu[r.free_cols[k]] = pt.zu[k] / r.obj_scale;
        }
        y_eq.setZero();
        y_in.setZero();
        for (std::size_t k = 0; k < r.eq_rows.size(); ++k) y_eq[r.eq_rows[k]] = pt.y[static_cast<int>(k)] * r.eq_scale[static_cast<int>(k)] / r.obj_scale;
        for (std::size_t k = 0; k < r.in_rows.size(); ++k) y_in[r.in_rows[k]] = pt.v[static_cast<int>(k)] * r.in_scale[static_cast<int>(k)] / r.obj_scale;
    };

    Kkt kkt;
    auto accept = [&](const IpmPoint& pt) {
        unscale(pt);
        kkt = original_kkt(p, x, y_eq, y_in, zl, zu, fixed);
        return kkt.stationarity < opts.tol_kkt && kkt.primal < opts.tol_kkt && kkt.complementarity < opts.tol_kkt;
    };

    IpmPoint pt;
    int iters = 0;
    std::string trace;
    IpmExit exit = Ipm(r, opts, true).run(pt, iters, trace, accept);
    res.iterations = iters;
    if (exit != IpmExit::Converged) {
        // Degenerate bounds can pin the shared step length near zero.
        exit = Ipm(r, opts, false).run(pt, iters, trace, accept);
        res.iterations += iters;
    }

    if (exit == IpmExit::Converged) {
        res.status = SolveStatus::Optimal;
    } else {
        bool proven = false;
        std::string why = trace;
        if (diagnose && p.n_eq() + p.n_in() > 0) why += diagnose_infeasibility(p, opts, proven);
        res.status = proven ? SolveStatus::Infeasible : SolveStatus::NumericalError;
        res.message = why;
        if (!proven && pt.x.size() == r.n) {
            accept(pt);
            res.x = x;
            res.objective = p.objective(x);
        }
        return res;
    }

    res.x = x;
    res.y_eq = y_eq;
    res.y_in = y_in;
    res.z_lower = zl;
    res.z_upper = zu;
    res.objective = p.objective(x);
    res.bound = res.objective;
    res.stationarity = kkt.stationarity;
    res.primal_residual = kkt.primal;
    res.complementarity = kkt.complementarity;
    return res;
}

} // namespace

SolveResult solve_qp(const MathProgram& p, const SolveOptions& opts) {
    opts.validate();
    return solve_qp_impl(p, opts, true);
}

} // namespace mgopt
