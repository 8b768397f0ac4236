#include "mgopt/opf_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "mgopt/error.hpp"

namespace mgopt {

ComplexMatrix build_admittance(const NetworkModel& net) {
    const int n = net.n_bus();
    ComplexMatrix Y = ComplexMatrix::Zero(n, n);
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        const auto& ln = net.lines[k];
        if (ln.from_bus < 0 || ln.from_bus >= n || ln.to_bus < 0 || ln.to_bus >= n || ln.from_bus == ln.to_bus) {
            throw ModelError(fmt::format("line {} has invalid endpoints ({}, {})", k, ln.from_bus, ln.to_bus));
        }
        const std::complex<double> z(ln.r_ohm, ln.x_ohm);
        if (std::abs(z) == 0.0) throw ModelError(fmt::format("line {} has zero impedance", k));
        const std::complex<double> y = 1.0 / z;
        Y(ln.from_bus, ln.from_bus) += y;
        Y(ln.to_bus, ln.to_bus) += y;
        Y(ln.from_bus, ln.to_bus) -= y;
        Y(ln.to_bus, ln.from_bus) -= y;
    }
    return Y;
}

BusInjections bus_injections(const std::vector<double>& v, const std::vector<double>& delta, const ComplexMatrix& Y) {
    const auto n = static_cast<std::size_t>(Y.rows());
    if (v.size() != n || delta.size() != n) throw ModelError("state dimension does not match admittance matrix");
    BusInjections out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t j = 0; j < n; ++j) {
            const double G = Y(l, j).real();
            const double B = Y(l, j).imag();
            const double th = delta[l] - delta[j];
            out.p[l] += v[l] * v[j] * (G * std::cos(th) + B * std::sin(th));
            out.q[l] += v[l] * v[j] * (G * std::sin(th) - B * std::cos(th));
        }
    }
    return out;
}

BusInjections bus_injections(const PowerFlowState& state, const ComplexMatrix& Y) {
    return bus_injections(state.v, state.delta, Y);
}

Eigen::MatrixXd pf_jacobian(const std::vector<double>& v, const std::vector<double>& delta, const ComplexMatrix& Y) {
    const int n = static_cast<int>(Y.rows());
    const BusInjections inj = bus_injections(v, delta, Y);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int l = 0; l < n; ++l) {
        const double Gll = Y(l, l).real();
        const double Bll = Y(l, l).imag();
        for (int j = 0; j < n; ++j) {
            if (j == l) continue;
            const double G = Y(l, j).real();
            const double B = Y(l, j).imag();
            const double th = delta[l] - delta[j];
            const double c = std::cos(th);
            const double s = std::sin(th);
            J(l, j) = v[l] * v[j] * (G * s - B * c);
            J(l, n + j) = v[l] * (G * c + B * s);
            J(n + l, j) = -v[l] * v[j] * (G * c + B * s);
            J(n + l, n + j) = v[l] * (G * s - B * c);
        }
        J(l, l) = -inj.q[l] - Bll * v[l] * v[l];
        J(l, n + l) = inj.p[l] / v[l] + Gll * v[l];
        J(n + l, l) = inj.p[l] - Gll * v[l] * v[l];
        J(n + l, n + l) = inj.q[l] / v[l] - Bll * v[l];
    }
    return J;
}

NewtonResult newton_pf(const NetworkModel& net, const ComplexMatrix& Y, const std::vector<double>& p_spec,
                       const std::vector<double>& q_spec, double slack_kv, NewtonOptions opts) {
    const int n = static_cast<int>(Y.rows());
    if (n != net.n_bus() || static_cast<int>(p_spec.size()) != n || static_cast<int>(q_spec.size()) != n) {
        throw PowerFlowError("specified injections do not match the network size");
    }
    const int slack = net.slack_bus;
    if (slack < 0 || slack >= n) throw PowerFlowError("slack bus index out of range");
    if (!(slack_kv > 0.0)) throw PowerFlowError("slack voltage must be positive");

    std::vector<int> pq;
    for (int l = 0; l < n; ++l) {
        if (l != slack) pq.push_back(l);
    }
    const int m = static_cast<int>(pq.size());

    NewtonResult res;
    auto& st = res.state;
    st.v.assign(n, net.nominal_kv);
    st.delta.assign(n, 0.0);
    st.v[slack] = slack_kv;

    for (int it = 1;; ++it) {
        const BusInjections inj = bus_injections(st.v, st.delta, Y);
        Eigen::VectorXd f(2 * m);
        for (int k = 0; k < m; ++k) {
            f[k] = inj.p[pq[k]] - p_spec[pq[k]];
            f[m + k] = inj.q[pq[k]] - q_spec[pq[k]];
        }
        const double norm = m > 0 ? f.lpNorm<Eigen::Infinity>() : 0.0;
        res.mismatch.push_back(norm);
        res.iterations = it;
        if (!std::isfinite(norm)) throw PowerFlowError(fmt::format("power flow mismatch is not finite at iteration {}", it));
        if (norm < opts.tol) {
            st.p_inj = inj.p;
            st.q_inj = inj.q;
            return res;
        }
        if (it > opts.max_iter) {
            throw PowerFlowError(fmt::format("power flow did not converge in {} iterations (mismatch {:.3e})", opts.max_iter, norm));
        }

        const Eigen::MatrixXd full = pf_jacobian(st.v, st.delta, Y);
        Eigen::MatrixXd J(2 * m, 2 * m);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < m; ++c) {
                J(r, c) = full(pq[r], pq[c]);
                J(r, m + c) = full(pq[r], n + pq[c]);
                J(m + r, c) = full(n + pq[r], pq[c]);
                J(m + r, m + c) = full(n + pq[r], n + pq[c]);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible() || lu.rcond() < 1e-14) {
            throw PowerFlowError(fmt::format("singular power flow Jacobian at iteration {}", it));
        }
        const Eigen::VectorXd dx = lu.solve(-f);
        for (int k = 0; k < m; ++k) {
            st.delta[pq[k]] += dx[k];
            st.v[pq[k]] += dx[m + k];
            if (!(st.v[pq[k]] > 0.0) || !std::isfinite(st.delta[pq[k]])) {
                throw PowerFlowError(fmt::format("power flow iterate left the physical region at bus {} (iteration {})",
                                                 net.bus_names.empty() ? std::to_string(pq[k]) : net.bus_names[pq[k]], it));
            }
        }
    }
}

int OpfLayout::v_index(int bus, int t) const {
    return network_offset() + t * network_per_timestep() + bus;
}

int OpfLayout::delta_index(int bus, int t) const {
    return network_offset() + t * network_per_timestep() + n_bus + bus;
}

int OpfLayout::qgen_index(int bus, int t) const {
    return network_offset() + t * network_per_timestep() + 2 * n_bus + bus;
}

int OpfLayout::qgrid_index(int t) const {
    if (!has_grid_q) throw ModelError("islanded program has no grid reactive variable");
    return network_offset() + t * network_per_timestep() + 3 * n_bus;
}

namespace {

std::map<std::string, int> device_buses(const ScenarioConfig& cfg) {
    const NetworkModel& net = *cfg.network;
    std::map<std::string, int> bus_of;
    for (int b = 0; b < net.n_bus(); ++b) {
        for (const auto& name : net.bus_devices[b]) bus_of[name] = b;
    }
    auto require = [&](const std::string& name) {
        if (!bus_of.contains(name)) throw ModelError(fmt::format("device '{}' is not mapped to a bus", name));
    };
    for (const auto& d : cfg.generators) require(d.name);
    for (const auto& d : cfg.batteries) require(d.name);
    for (const auto& d : cfg.pv_units) require(d.name);
    for (const auto& d : cfg.wind_units) require(d.name);
    for (const auto& [name, b] : bus_of) {
        if (b < 0 || b >= net.n_bus()) throw ModelError(fmt::format("device '{}' mapped to nonexistent bus {}", name, b));
    }
    return bus_of;
}

// Signed dispatch columns feeding each bus's active balance at timestep t.
struct BusTerm {
    Slot slot;
    int device;
    double sign;
};

std::vector<std::vector<BusTerm>> bus_terms(const ScenarioConfig& cfg, const VariableLayout& layout) {
    const NetworkModel& net = *cfg.network;
    const auto bus_of = device_buses(cfg);
    std::vector<std::vector<BusTerm>> terms(net.n_bus());
    for (int g = 0; g < static_cast<int>(cfg.generators.size()); ++g) {
        terms[bus_of.at(cfg.generators[g].name)].push_back({Slot::GenPower, g, 1.0});
    }
    for (int b = 0; b < static_cast<int>(cfg.batteries.size()); ++b) {
        const int bus = bus_of.at(cfg.batteries[b].name);
        terms[bus].push_back({Slot::BatteryDischarge, b, 1.0});
        terms[bus].push_back({Slot::BatteryCharge, b, -1.0});
    }
    for (int i = 0; i < static_cast<int>(cfg.pv_units.size()); ++i) {
        terms[bus_of.at(cfg.pv_units[i].name)].push_back({Slot::PvPower, i, 1.0});
    }
    for (int i = 0; i < static_cast<int>(cfg.wind_units.size()); ++i) {
        terms[bus_of.at(cfg.wind_units[i].name)].push_back({Slot::WindPower, i, 1.0});
    }
    auto& slack = terms[net.slack_bus];
    if (layout.count(Slot::GridBuy) > 0) {
        slack.push_back({Slot::GridBuy, 0, 1.0});
        slack.push_back({Slot::GridSell, 0, -1.0});
    }
    if (layout.soft_balance()) {
        slack.push_back({Slot::BalanceShortfall, 0, 1.0});
        slack.push_back({Slot::BalanceSurplus, 0, -1.0});
    }
    return terms;
}

// Copies `m` keeping only the listed rows, widened to `n_cols` columns.
SparseMatrix select_rows(const SparseMatrix& m, const std::vector<int>& keep, int n_cols) {
    std::vector<int> new_row(m.rows(), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) new_row[keep[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<double>> trip;
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            if (new_row[it.row()] >= 0) trip.emplace_back(new_row[it.row()], col, it.value());
        }
    }
    SparseMatrix out(static_cast<int>(keep.size()), n_cols);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

SparseMatrix widen(const SparseMatrix& m, int rows, int cols) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) trip.emplace_back(it.row(), col, it.value());
    }
    SparseMatrix out(rows, cols);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

} // namespace

OpfProgram assemble_opf(const ScenarioConfig& cfg, const Forecasts& forecasts, LayoutOptions options) {
    if (!cfg.network) throw ModelError("scenario has no network section");
    const NetworkModel& net = *cfg.network;
    VariableLayout dlayout = build_layout(cfg, options);
    MathProgram dispatch = assemble_dispatch(cfg, dlayout, forecasts);
    const auto terms = bus_terms(cfg, dlayout);

    OpfProgram opf;
    opf.Y = build_admittance(net);
    opf.layout.dispatch = dlayout;
    opf.layout.n_bus = net.n_bus();
    opf.layout.has_grid_q = cfg.grid_connected();
    opf.layout.slack_bus = net.slack_bus;
    const OpfLayout& L = opf.layout;
    const int T = cfg.horizon;
    const int nb = net.n_bus();
    const int nd = dispatch.n_vars();
    const int n = L.total_count();

    MathProgram p;
    p.Q = widen(dispatch.Q, n, n);
    p.c = Vector::Zero(n);
    p.c.head(nd) = dispatch.c;
    p.constant = dispatch.constant;
    p.lb.resize(n);
    p.ub.resize(n);
    p.lb.head(nd) = dispatch.lb;
    p.ub.head(nd) = dispatch.ub;
    p.is_binary = dispatch.is_binary;
    p.is_binary.resize(n, false);
    p.var_names = dispatch.var_names;
    p.var_names.resize(n);

    std::vector<double> q_cap(nb, 0.0);
    {
        const auto bus_of = device_buses(cfg);
        for (const auto& g : cfg.generators) q_cap[bus_of.at(g.name)] += net.q_capability_ratio * g.p_max;
    }
    Vector start = Vector::Zero(n);
    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < nb; ++b) {
            const std::string& bn = net.bus_names[b];
            const int iv = L.v_index(b, t);
            const int id = L.delta_index(b, t);
            const int iq = L.qgen_index(b, t);
            p.var_names[iv] = fmt::format("V[{},{}]", bn, t);
            p.var_names[id] = fmt::format("delta[{},{}]", bn, t);
            p.var_names[iq] = fmt::format("Q_gen[{},{}]", bn, t);
            p.lb[iv] = net.v_min;
            p.ub[iv] = net.v_max;
            p.lb[id] = -std::numbers::pi;
            p.ub[id] = std::numbers::pi;
            p.lb[iq] = -q_cap[b];
            p.ub[iq] = q_cap[b];
            if (b == net.slack_bus) {
                p.lb[id] = p.ub[id] = 0.0;
                if (cfg.grid_connected()) p.lb[iv] = p.ub[iv] = net.nominal_kv;
            }
            start[iv] = std::clamp(net.nominal_kv, p.lb[iv], p.ub[iv]);
        }
        if (L.has_grid_q) {
            const int ig = L.qgrid_index(t);
            p.var_names[ig] = fmt::format("Q_grid[{}]", t);
            p.lb[ig] = -cfg.tariff->grid_power_limit;
            p.ub[ig] = cfg.tariff->grid_power_limit;
        }
    }
    for (int j = 0; j < nd; ++j) start[j] = std::clamp(0.0, dispatch.lb[j], dispatch.ub[j]);

    std::vector<int> keep;
    for (int r = 0; r < dispatch.n_eq(); ++r) {
        if (name_family(dispatch.eq_names[r]) != "balance") {
            keep.push_back(r);
            p.eq_names.push_back(dispatch.eq_names[r]);
        }
    }
    p.A_eq = select_rows(dispatch.A_eq, keep, n);
    p.b_eq.resize(static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) p.b_eq[static_cast<int>(k)] = dispatch.b_eq[keep[k]];
    p.A_in = widen(dispatch.A_in, dispatch.n_in(), n);
    p.b_in = dispatch.b_in;
    p.in_names = dispatch.in_names;
    check_static_bounds(p);

    NonlinearProgram& nlp = opf.nlp;
    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < nb; ++b) nlp.nl_names.push_back(fmt::format("bus_p[{},{}]", net.bus_names[b], t));
        for (int b = 0; b < nb; ++b) nlp.nl_names.push_back(fmt::format("bus_q[{},{}]", net.bus_names[b], t));
    }

    // Constant parts of each row: -share * load (P) and -ratio * share * load (Q).
    Vector rhs(2 * nb * T);
    const TimeSeries& load = cfg.load();
    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < nb; ++b) {
            rhs[2 * nb * t + b] = -net.load_share[b] * load[t];
            rhs[2 * nb * t + nb + b] = -net.reactive_load_ratio * net.load_share[b] * load[t];
        }
    }
    // Linear part of the rows as a fixed sparse matrix.
    std::vector<Eigen::Triplet<double>> lin;
    for (int t = 0; t < T; ++t) {
        const int row0 = 2 * nb * t;
        for (int b = 0; b < nb; ++b) {
            for (const auto& term : terms[b]) lin.emplace_back(row0 + b, dlayout.index(term.slot, term.device, t), term.sign);
            lin.emplace_back(row0 + nb + b, L.qgen_index(b, t), 1.0);
        }
        if (L.has_grid_q) lin.emplace_back(row0 + nb + net.slack_bus, L.qgrid_index(t), 1.0);
    }
    SparseMatrix A_lin(2 * nb * T, n);
    A_lin.setFromTriplets(lin.begin(), lin.end());

    const ComplexMatrix Y = opf.Y;
    const OpfLayout layout = L;
    auto state_at = [layout, nb](const Vector& x, int t, std::vector<double>& v, std::vector<double>& d) {
        v.resize(nb);
        d.resize(nb);
        for (int b = 0; b < nb; ++b) {
            v[b] = x[layout.v_index(b, t)];
            d[b] = x[layout.delta_index(b, t)];
        }
    };

    nlp.residual = [A_lin, rhs, Y, state_at, nb, T, n](const Vector& x) {
        if (x.size() != n) throw ModelError("residual evaluated at a point of the wrong size");
        Vector r = A_lin * x + rhs;
        std::vector<double> v, d;
        for (int t = 0; t < T; ++t) {
            state_at(x, t, v, d);
            const BusInjections inj = bus_injections(v, d, Y);
            for (int b = 0; b < nb; ++b) {
                r[2 * nb * t + b] -= inj.p[b];
                r[2 * nb * t + nb + b] -= inj.q[b];
            }
        }
        return r;
    };

    nlp.jacobian = [lin, layout, Y, state_at, nb, T, n](const Vector& x) {
        if (x.size() != n) throw ModelError("jacobian evaluated at a point of the wrong size");
        std::vector<Eigen::Triplet<double>> trip = lin;
        std::vector<double> v, d;
        for (int t = 0; t < T; ++t) {
            state_at(x, t, v, d);
            const Eigen::MatrixXd J = pf_jacobian(v, d, Y);
            const int row0 = 2 * nb * t;
            for (int r = 0; r < 2 * nb; ++r) {
                for (int b = 0; b < nb; ++b) {
                    if (J(r, b) != 0.0) trip.emplace_back(row0 + r, layout.delta_index(b, t), -J(r, b));
                    if (J(r, nb + b) != 0.0) trip.emplace_back(row0 + r, layout.v_index(b, t), -J(r, nb + b));
                }
            }
        }
        SparseMatrix out(2 * nb * T, n);
        out.setFromTriplets(trip.begin(), trip.end());
        return out;
    };

    nlp.base = std::move(p);
    nlp.start = start;
    nlp.commitment_program = std::move(dispatch);
    return opf;
}

std::vector<PowerFlowState> extract_power_flow(const Vector& x, const OpfProgram& opf) {
    const OpfLayout& L = opf.layout;
    if (x.size() != L.total_count()) throw ModelError("solution length does not match the OPF layout");
    std::vector<PowerFlowState> out(L.horizon());
    for (int t = 0; t < L.horizon(); ++t) {
        auto& st = out[t];
        for (int b = 0; b < L.n_bus; ++b) {
            st.v.push_back(x[L.v_index(b, t)]);
            st.delta.push_back(x[L.delta_index(b, t)]);
        }
        const BusInjections inj = bus_injections(st.v, st.delta, opf.Y);
        st.p_inj = inj.p;
        st.q_inj = inj.q;
    }
    return out;
}

std::vector<double> network_losses(const std::vector<PowerFlowState>& states) {
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& st : states) {
        double s = 0.0;
        for (double p : st.p_inj) s += p;
        out.push_back(s);
    }
    return out;
}

std::vector<std::vector<double>> scheduled_injections(const DispatchSolution& sol, const ScenarioConfig& cfg) {
    if (!cfg.network) throw ModelError("scenario has no network section");
    const NetworkModel& net = *cfg.network;
    const auto bus_of = device_buses(cfg);
    const TimeSeries& load = cfg.load();
    std::vector<std::vector<double>> out(sol.horizon, std::vector<double>(net.n_bus(), 0.0));
    for (int t = 0; t < sol.horizon; ++t) {
        auto& row = out[t];
        for (int b = 0; b < net.n_bus(); ++b) row[b] = -net.load_share[b] * load[t];
        for (std::size_t g = 0; g < cfg.generators.size(); ++g) row[bus_of.at(cfg.generators[g].name)] += sol.gen_power[g][t];
        for (std::size_t b = 0; b < cfg.batteries.size(); ++b) {
            row[bus_of.at(cfg.batteries[b].name)] += sol.battery_discharge[b][t] - sol.battery_charge[b][t];
        }
        for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) row[bus_of.at(cfg.pv_units[i].name)] += sol.pv_power[i][t];
        for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) row[bus_of.at(cfg.wind_units[i].name)] += sol.wind_power[i][t];
        if (!sol.grid_buy.empty()) row[net.slack_bus] += sol.grid_buy[t] - sol.grid_sell[t];
        if (!sol.balance_shortfall.empty()) row[net.slack_bus] += sol.balance_shortfall[t] - sol.balance_surplus[t];
    }
    return out;
}

std::vector<std::vector<double>> reactive_supply(const Vector& x, const OpfProgram& opf) {
    const OpfLayout& L = opf.layout;
    std::vector<std::vector<double>> out(L.horizon(), std::vector<double>(L.n_bus, 0.0));
    for (int t = 0; t < L.horizon(); ++t) {
        for (int b = 0; b < L.n_bus; ++b) out[t][b] = x[L.qgen_index(b, t)];
        if (L.has_grid_q) out[t][L.slack_bus] += x[L.qgrid_index(t)];
    }
    return out;
}

std::vector<BusResidual> bus_balance_residuals(const DispatchSolution& sol, const ScenarioConfig& cfg,
                                               const std::vector<PowerFlowState>& states,
                                               const std::vector<std::vector<double>>& q_supply) {
    if (!cfg.network) throw ModelError("scenario has no network section");
    const NetworkModel& net = *cfg.network;
    if (states.size() != static_cast<std::size_t>(sol.horizon) || q_supply.size() != states.size()) {
        throw ModelError("bus trajectories do not cover the horizon");
    }
    const ComplexMatrix Y = build_admittance(net);
    const auto sched = scheduled_injections(sol, cfg);
    const TimeSeries& load = cfg.load();
    std::vector<BusResidual> out;
    for (int t = 0; t < sol.horizon; ++t) {
        const BusInjections inj = bus_injections(states[t].v, states[t].delta, Y);
        for (int b = 0; b < net.n_bus(); ++b) {
            const double q_load = net.reactive_load_ratio * net.load_share[b] * load[t];
            out.push_back({b, t, sched[t][b] - inj.p[b], q_supply[t][b] - q_load - inj.q[b]});
        }
    }
    return out;
}

} // namespace mgopt
