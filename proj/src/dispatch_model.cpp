#include "mgopt/dispatch_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mgopt/device_models.hpp"
#include "mgopt/error.hpp"

namespace mgopt {

std::string_view slot_name(Slot slot) {
    switch (slot) {
    case Slot::GenPower: return "P_CG";
    case Slot::BatteryCharge: return "P_B_chg";
    case Slot::BatteryDischarge: return "P_B_dis";
    case Slot::PvPower: return "P_PV";
    case Slot::WindPower: return "P_WT";
    case Slot::GridBuy: return "P_Gr_buy";
    case Slot::GridSell: return "P_Gr_sell";
    case Slot::BatteryEnergy: return "E_B";
    case Slot::Commitment: return "U_CG";
    case Slot::Startup: return "S_up";
    case Slot::Shutdown: return "S_dn";
    case Slot::BalanceShortfall: return "slack_short";
    case Slot::BalanceSurplus: return "slack_surplus";
    }
    return "?";
}

namespace {

std::vector<std::string> names_of(const auto& devices) {
    std::vector<std::string> out;
    for (const auto& d : devices) out.push_back(d.name);
    return out;
}

constexpr int slot_index(Slot s) { return static_cast<int>(s); }

} // namespace

VariableLayout::VariableLayout(const ScenarioConfig& cfg, LayoutOptions options)
    : horizon_(cfg.horizon), options_(options) {
    const auto gens = names_of(cfg.generators);
    const auto bats = names_of(cfg.batteries);
    names_[slot_index(Slot::GenPower)] = gens;
    names_[slot_index(Slot::BatteryCharge)] = bats;
    names_[slot_index(Slot::BatteryDischarge)] = bats;
    names_[slot_index(Slot::PvPower)] = names_of(cfg.pv_units);
    names_[slot_index(Slot::WindPower)] = names_of(cfg.wind_units);
    if (cfg.grid_connected()) {
        names_[slot_index(Slot::GridBuy)] = {"grid"};
        names_[slot_index(Slot::GridSell)] = {"grid"};
    }
    names_[slot_index(Slot::BatteryEnergy)] = bats;
    names_[slot_index(Slot::Commitment)] = gens;
    names_[slot_index(Slot::Startup)] = gens;
    names_[slot_index(Slot::Shutdown)] = gens;
    if (options.soft_balance) {
        names_[slot_index(Slot::BalanceShortfall)] = {"balance"};
        names_[slot_index(Slot::BalanceSurplus)] = {"balance"};
    }
    int offset = 0;
    for (int s = 0; s < kSlotCount; ++s) {
        count_[s] = static_cast<int>(names_[s].size());
        offset_[s] = offset;
        offset += count_[s];
    }
    per_timestep_ = offset;
}

int VariableLayout::index(Slot slot, int device, int t) const {
    const int s = slot_index(slot);
    if (device < 0 || device >= count_[s] || t < 0 || t >= horizon_) {
        throw ModelError(fmt::format("layout index out of range: {}[{}] at t={}", slot_name(slot), device, t));
    }
    return t * per_timestep_ + offset_[s] + device;
}

int VariableLayout::compact_per_timestep() const {
    return count(Slot::GenPower) + count(Slot::BatteryCharge) + count(Slot::PvPower) + count(Slot::WindPower) +
           count(Slot::GridBuy) + count(Slot::BatteryEnergy) + count(Slot::Commitment) + count(Slot::Startup) +
           count(Slot::Shutdown);
}

int VariableLayout::binary_typed_per_timestep() const {
    return count(Slot::Commitment) + count(Slot::Startup) + count(Slot::Shutdown);
}

VariableLayout::Location VariableLayout::locate(int index) const {
    if (index < 0 || index >= total_count()) throw ModelError(fmt::format("variable index {} out of range", index));
    const int t = index / per_timestep_;
    const int within = index % per_timestep_;
    for (int s = kSlotCount - 1; s >= 0; --s) {
        if (count_[s] > 0 && within >= offset_[s]) return {static_cast<Slot>(s), within - offset_[s], t};
    }
    throw ModelError("unreachable layout state");
}

std::string VariableLayout::variable_name(int index) const {
    const auto loc = locate(index);
    return fmt::format("{}[{},{}]", slot_name(loc.slot), names_[slot_index(loc.slot)][loc.device], loc.t);
}

const std::string& VariableLayout::device_name(Slot slot, int device) const {
    return names_[slot_index(slot)].at(static_cast<std::size_t>(device));
}

VariableLayout build_layout(const ScenarioConfig& cfg, LayoutOptions options) {
    const auto violations = validate_scenario(cfg);
    if (!violations.empty()) throw ScenarioError(violations.front().field, format_violations(violations));
    return VariableLayout(cfg, options);
}

Forecasts compute_forecasts(const ScenarioConfig& cfg) {
    Forecasts f;
    const auto T = static_cast<std::size_t>(cfg.horizon);
    for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) {
        const TimeSeries& v = cfg.series_at(cfg.renewable_inputs.wind_speed[i]);
        TimeSeries out;
        out.unit = Unit::MW;
        out.dt_hours = cfg.dt;
        for (std::size_t t = 0; t < T; ++t) out.values.push_back(wind_power(v[t], cfg.wind_units[i]));
        f.wind.push_back(std::move(out));
    }
    for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) {
        const TimeSeries& g = cfg.series_at(cfg.renewable_inputs.irradiance[i]);
        const TimeSeries& temp = cfg.series_at(cfg.renewable_inputs.temperature[i]);
        TimeSeries out;
        out.unit = Unit::MW;
        out.dt_hours = cfg.dt;
        for (std::size_t t = 0; t < T; ++t) out.values.push_back(pv_power(g[t], temp[t], cfg.pv_units[i]));
        f.pv.push_back(std::move(out));
    }
    return f;
}

MathProgram assemble_dispatch(const ScenarioConfig& cfg, const VariableLayout& layout, const Forecasts& forecasts) {
    const int T = cfg.horizon;
    const double dt = cfg.dt;
    if (layout.horizon() != T) throw ModelError("layout horizon does not match scenario");
    if (forecasts.wind.size() != cfg.wind_units.size()) throw ModelError("missing wind forecast");
    if (forecasts.pv.size() != cfg.pv_units.size()) throw ModelError("missing PV forecast");
    for (std::size_t i = 0; i < forecasts.wind.size(); ++i) {
        if (forecasts.wind[i].size() < static_cast<std::size_t>(T)) throw ModelError("wind forecast for " + cfg.wind_units[i].name + " shorter than horizon");
    }
    for (std::size_t i = 0; i < forecasts.pv.size(); ++i) {
        if (forecasts.pv[i].size() < static_cast<std::size_t>(T)) throw ModelError("PV forecast for " + cfg.pv_units[i].name + " shorter than horizon");
    }

    const auto& gens = cfg.generators;
    const auto& bats = cfg.batteries;
    const TimeSeries& load = cfg.load();
    ProgramBuilder pb;

    // Columns in layout order.
    for (int t = 0; t < T; ++t) {
        for (int s = 0; s < kSlotCount; ++s) {
            const Slot slot = static_cast<Slot>(s);
            for (int d = 0; d < layout.count(slot); ++d) {
                const std::string name = fmt::format("{}[{},{}]", slot_name(slot), layout.device_name(slot, d), t);
                int col = -1;
                switch (slot) {
                case Slot::GenPower:
                    col = pb.add_var(name, 0.0, gens[d].p_max, gens[d].b * dt);
                    pb.add_quadratic(col, col, gens[d].c * dt);
                    break;
                case Slot::BatteryCharge:
                    col = pb.add_var(name, 0.0, bats[d].p_charge_max, bats[d].op_cost * dt);
                    break;
                case Slot::BatteryDischarge:
                    col = pb.add_var(name, 0.0, bats[d].p_discharge_max, bats[d].op_cost * dt);
                    break;
                case Slot::PvPower:
                    col = pb.add_var(name, 0.0, forecasts.pv[d][t], cfg.pv_units[d].op_cost * dt);
                    break;
                case Slot::WindPower:
                    col = pb.add_var(name, 0.0, forecasts.wind[d][t], cfg.wind_units[d].op_cost * dt);
                    break;
                case Slot::GridBuy:
                    col = pb.add_var(name, 0.0, cfg.tariff->grid_power_limit, cfg.tariff->buy_price[t] * dt);
                    break;
                case Slot::GridSell:
                    col = pb.add_var(name, 0.0, cfg.tariff->grid_power_limit, -cfg.tariff->sell_price[t] * dt);
                    break;
                case Slot::BatteryEnergy:
                    col = pb.add_var(name, bats[d].e_min, bats[d].e_max);
                    break;
                case Slot::Commitment:
                    col = pb.add_var(name, 0.0, 1.0, gens[d].a * dt, true);
                    break;
                case Slot::Startup:
                    col = pb.add_var(name, 0.0, 1.0, gens[d].startup_cost);
                    break;
                case Slot::Shutdown:
                    col = pb.add_var(name, 0.0, 1.0, gens[d].shutdown_cost);
                    break;
                case Slot::BalanceShortfall:
                case Slot::BalanceSurplus:
                    col = pb.add_var(name, 0.0, kInf, kBalancePenalty * dt);
                    break;
                }
                if (col != layout.index(slot, d, t)) throw ModelError("column order diverged from layout");
            }
        }
    }

    auto ix = [&](Slot s, int d, int t) { return layout.index(s, d, t); };

    for (int t = 0; t < T; ++t) {
        std::vector<std::pair<int, double>> terms;
        for (int g = 0; g < layout.count(Slot::GenPower); ++g) terms.emplace_back(ix(Slot::GenPower, g, t), 1.0);
        for (int b = 0; b < layout.count(Slot::BatteryCharge); ++b) {
            terms.emplace_back(ix(Slot::BatteryDischarge, b, t), 1.0);
            terms.emplace_back(ix(Slot::BatteryCharge, b, t), -1.0);
        }
        for (int i = 0; i < layout.count(Slot::PvPower); ++i) terms.emplace_back(ix(Slot::PvPower, i, t), 1.0);
        for (int i = 0; i < layout.count(Slot::WindPower); ++i) terms.emplace_back(ix(Slot::WindPower, i, t), 1.0);
        if (layout.count(Slot::GridBuy) > 0) {
            terms.emplace_back(ix(Slot::GridBuy, 0, t), 1.0);
            terms.emplace_back(ix(Slot::GridSell, 0, t), -1.0);
        }
        if (layout.soft_balance()) {
            terms.emplace_back(ix(Slot::BalanceShortfall, 0, t), 1.0);
            terms.emplace_back(ix(Slot::BalanceSurplus, 0, t), -1.0);
        }
        pb.add_eq(fmt::format("balance[{}]", t), terms, load[t]);

        for (int b = 0; b < layout.count(Slot::BatteryEnergy); ++b) {
            const auto& bp = bats[b];
            std::vector<std::pair<int, double>> row{{ix(Slot::BatteryEnergy, b, t), 1.0},
                                                    {ix(Slot::BatteryCharge, b, t), -dt * bp.eta},
                                                    {ix(Slot::BatteryDischarge, b, t), dt / bp.eta}};
            double rhs = 0.0;
            if (t == 0) {
                rhs = cfg.initial.battery_energy[b];
            } else {
                row.emplace_back(ix(Slot::BatteryEnergy, b, t - 1), -1.0);
            }
            pb.add_eq(fmt::format("bess_dyn[{},{}]", bp.name, t), row, rhs);
        }

        for (int g = 0; g < layout.count(Slot::GenPower); ++g) {
            const auto& gp = gens[g];
            const int u = ix(Slot::Commitment, g, t);
            const int up = ix(Slot::Startup, g, t);
            const int dn = ix(Slot::Shutdown, g, t);

            std::vector<std::pair<int, double>> link{{up, 1.0}, {dn, -1.0}, {u, -1.0}};
            double link_rhs = 0.0;
            if (t == 0) {
                link_rhs = -static_cast<double>(cfg.initial.generator_status[g]);
            } else {
                link.emplace_back(ix(Slot::Commitment, g, t - 1), 1.0);
            }
            pb.add_eq(fmt::format("commit_link[{},{}]", gp.name, t), link, link_rhs);
        }
    }

    for (int t = 0; t < T; ++t) {
        for (int g = 0; g < layout.count(Slot::GenPower); ++g) {
            const auto& gp = gens[g];
            const int p = ix(Slot::GenPower, g, t);
            const int u = ix(Slot::Commitment, g, t);
            pb.add_le(fmt::format("gen_max[{},{}]", gp.name, t), {{p, 1.0}, {u, -gp.p_max}}, 0.0);
            if (gp.p_min > 0.0) pb.add_le(fmt::format("gen_min[{},{}]", gp.name, t), {{u, gp.p_min}, {p, -1.0}}, 0.0);
            if (t == 0) {
                const double p0 = cfg.initial.generator_power[g];
                const double u0 = cfg.initial.generator_status[g];
                pb.add_le(fmt::format("ramp_up[{},{}]", gp.name, t), {{p, 1.0}}, p0 + gp.ramp_up * u0);
                pb.add_le(fmt::format("ramp_dn[{},{}]", gp.name, t), {{p, -1.0}, {u, -gp.ramp_down}}, -p0);
            } else {
                const int p_prev = ix(Slot::GenPower, g, t - 1);
                const int u_prev = ix(Slot::Commitment, g, t - 1);
                pb.add_le(fmt::format("ramp_up[{},{}]", gp.name, t), {{p, 1.0}, {p_prev, -1.0}, {u_prev, -gp.ramp_up}}, 0.0);
                pb.add_le(fmt::format("ramp_dn[{},{}]", gp.name, t), {{p_prev, 1.0}, {p, -1.0}, {u, -gp.ramp_down}}, 0.0);
            }
            pb.add_le(fmt::format("start_stop_excl[{},{}]", gp.name, t),
                      {{ix(Slot::Startup, g, t), 1.0}, {ix(Slot::Shutdown, g, t), 1.0}}, 1.0);
        }
    }

    MathProgram prog = pb.build();
    check_static_bounds(prog);
    return prog;
}

double CostBreakdown::total() const {
    auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    return grid + sum(generator) + sum(battery) + sum(pv) + sum(wind) + balance_penalty;
}

DispatchSolution extract_solution(const Vector& x, const VariableLayout& layout, const ScenarioConfig& cfg) {
    if (x.size() != layout.total_count()) {
        throw ModelError(fmt::format("solution length {} does not match layout ({})", x.size(), layout.total_count()));
    }
    const int T = layout.horizon();
    DispatchSolution sol;
    sol.horizon = T;
    sol.dt = cfg.dt;

    auto trajectory = [&](Slot slot) {
        std::vector<std::vector<double>> out(static_cast<std::size_t>(layout.count(slot)), std::vector<double>(T));
        for (int d = 0; d < layout.count(slot); ++d) {
            for (int t = 0; t < T; ++t) out[d][t] = x[layout.index(slot, d, t)];
        }
        return out;
    };

    sol.gen_power = trajectory(Slot::GenPower);
    sol.battery_charge = trajectory(Slot::BatteryCharge);
    sol.battery_discharge = trajectory(Slot::BatteryDischarge);
    sol.battery_energy = trajectory(Slot::BatteryEnergy);
    sol.pv_power = trajectory(Slot::PvPower);
    sol.wind_power = trajectory(Slot::WindPower);

    const int n_gen = layout.count(Slot::Commitment);
    sol.commitment.assign(n_gen, std::vector<int>(T));
    sol.startup.assign(n_gen, std::vector<double>(T));
    sol.shutdown.assign(n_gen, std::vector<double>(T));
    for (int g = 0; g < n_gen; ++g) {
        int prev = cfg.initial.generator_status[g];
        for (int t = 0; t < T; ++t) {
            const double u = x[layout.index(Slot::Commitment, g, t)];
            const double r = std::round(u);
            if (std::abs(u - r) > 1e-6 || (r != 0.0 && r != 1.0)) {
                throw ModelError(fmt::format("integrality violation: {} = {}", layout.variable_name(layout.index(Slot::Commitment, g, t)), u));
            }
            const int ui = static_cast<int>(r);
            sol.commitment[g][t] = ui;
            sol.startup[g][t] = std::max(0, ui - prev);
            sol.shutdown[g][t] = std::max(0, prev - ui);
            prev = ui;
        }
    }

    sol.battery_power.assign(sol.battery_charge.size(), std::vector<double>(T));
    for (std::size_t b = 0; b < sol.battery_charge.size(); ++b) {
        for (int t = 0; t < T; ++t) sol.battery_power[b][t] = sol.battery_discharge[b][t] - sol.battery_charge[b][t];
    }
    if (layout.count(Slot::GridBuy) > 0) {
        const auto buy = trajectory(Slot::GridBuy);
        const auto sell = trajectory(Slot::GridSell);
        sol.grid_buy = buy[0];
        sol.grid_sell = sell[0];
        sol.grid_power.resize(T);
        for (int t = 0; t < T; ++t) sol.grid_power[t] = sol.grid_buy[t] - sol.grid_sell[t];
    }
    if (layout.soft_balance()) {
        sol.balance_shortfall = trajectory(Slot::BalanceShortfall)[0];
        sol.balance_surplus = trajectory(Slot::BalanceSurplus)[0];
    }
    sol.costs = compute_costs(sol, cfg);
    sol.objective = sol.costs.total();
    return sol;
}

CostBreakdown compute_costs(const DispatchSolution& sol, const ScenarioConfig& cfg) {
    CostBreakdown c;
    const double dt = sol.dt;
    const int T = sol.horizon;
    c.generator.assign(sol.gen_power.size(), 0.0);
    for (std::size_t g = 0; g < sol.gen_power.size(); ++g) {
        const auto& gp = cfg.generators[g];
        for (int t = 0; t < T; ++t) {
            const double p = sol.gen_power[g][t];
            const int u = sol.commitment[g][t];
            // The constant term applies only while committed.
            c.generator[g] += (cg_cost(p, gp) - gp.a * (1 - u)) * dt + gp.startup_cost * sol.startup[g][t] +
                              gp.shutdown_cost * sol.shutdown[g][t];
        }
    }
    c.battery.assign(sol.battery_charge.size(), 0.0);
    for (std::size_t b = 0; b < sol.battery_charge.size(); ++b) {
        for (int t = 0; t < T; ++t) {
            c.battery[b] += linear_op_cost(sol.battery_charge[b][t] + sol.battery_discharge[b][t], cfg.batteries[b].op_cost) * dt;
        }
    }
    c.pv.assign(sol.pv_power.size(), 0.0);
    for (std::size_t i = 0; i < sol.pv_power.size(); ++i) {
        for (int t = 0; t < T; ++t) c.pv[i] += linear_op_cost(sol.pv_power[i][t], cfg.pv_units[i].op_cost) * dt;
    }
    c.wind.assign(sol.wind_power.size(), 0.0);
    for (std::size_t i = 0; i < sol.wind_power.size(); ++i) {
        for (int t = 0; t < T; ++t) c.wind[i] += linear_op_cost(sol.wind_power[i][t], cfg.wind_units[i].op_cost) * dt;
    }
    if (!sol.grid_power.empty() && cfg.tariff) {
        for (int t = 0; t < T; ++t) {
            c.grid += grid_exchange_cost(sol.grid_power[t], cfg.tariff->buy_price[t], cfg.tariff->sell_price[t]) * dt;
        }
    }
    for (std::size_t t = 0; t < sol.balance_shortfall.size(); ++t) {
        c.balance_penalty += kBalancePenalty * (sol.balance_shortfall[t] + sol.balance_surplus[t]) * dt;
    }
    return c;
}

std::vector<ConstraintViolation> check_feasibility(const DispatchSolution& sol, const ScenarioConfig& cfg, double tol,
                                                   const std::vector<double>* losses) {
    std::vector<ConstraintViolation> out;
    const int T = sol.horizon;
    const double dt = sol.dt;
    auto report = [&](const char* family, const std::string& device, int t, double excess, std::string what) {
        if (excess > tol) out.push_back({family, device, t, excess, std::move(what)});
    };
    auto with_size = [&](auto& vec, std::size_t n, const char* what) {
        if (vec.size() != n) {
            out.push_back({"shape", what, -1, 0.0, fmt::format("expected {} entries, found {}", n, vec.size())});
            return false;
        }
        return true;
    };

    if (T != cfg.horizon) {
        out.push_back({"shape", "horizon", -1, 0.0, fmt::format("solution has {} steps, scenario {}", T, cfg.horizon)});
        return out;
    }
    const auto nG = cfg.generators.size();
    const auto nB = cfg.batteries.size();
    bool ok = with_size(sol.gen_power, nG, "gen_power") & with_size(sol.commitment, nG, "commitment") &
              with_size(sol.startup, nG, "startup") & with_size(sol.shutdown, nG, "shutdown") &
              with_size(sol.battery_charge, nB, "battery_charge") & with_size(sol.battery_discharge, nB, "battery_discharge") &
              with_size(sol.battery_energy, nB, "battery_energy") & with_size(sol.pv_power, cfg.pv_units.size(), "pv_power") &
              with_size(sol.wind_power, cfg.wind_units.size(), "wind_power");
    if (!ok) return out;

    const Forecasts fc = compute_forecasts(cfg);

    for (std::size_t g = 0; g < nG; ++g) {
        const auto& gp = cfg.generators[g];
        double p_prev = cfg.initial.generator_power[g];
        int u_prev = cfg.initial.generator_status[g];
        for (int t = 0; t < T; ++t) {
            const double p = sol.gen_power[g][t];
            const int u = sol.commitment[g][t];
            if (u != 0 && u != 1) report("commit_link", gp.name, t, 1.0, fmt::format("commitment {} is not binary", u));
            report("gen_max", gp.name, t, p - gp.p_max * u, fmt::format("P={} above U*P_max={}", p, gp.p_max * u));
            report("gen_min", gp.name, t, gp.p_min * u - p, fmt::format("P={} below U*P_min={}", p, gp.p_min * u));
            report("bound", gp.name, t, -p, fmt::format("P={} negative", p));
            report("ramp_up", gp.name, t, (p - p_prev) - gp.ramp_up * u_prev,
                   fmt::format("ramp {} exceeds {}", p - p_prev, gp.ramp_up * u_prev));
            report("ramp_dn", gp.name, t, (p_prev - p) - gp.ramp_down * u,
                   fmt::format("ramp down {} exceeds {}", p_prev - p, gp.ramp_down * u));
            const double up = sol.startup[g][t];
            const double dn = sol.shutdown[g][t];
            report("commit_link", gp.name, t, std::abs((up - dn) - (u - u_prev)),
                   fmt::format("S_up - S_dn = {} but U(t) - U(t-1) = {}", up - dn, u - u_prev));
            report("start_stop_excl", gp.name, t, up + dn - 1.0, fmt::format("S_up + S_dn = {}", up + dn));
            report("bound", gp.name, t, std::max({-up, -dn, up - 1.0, dn - 1.0}), "startup/shutdown outside [0,1]");
            p_prev = p;
            u_prev = u;
        }
    }

    for (std::size_t b = 0; b < nB; ++b) {
        const auto& bp = cfg.batteries[b];
        double e_prev = cfg.initial.battery_energy[b];
        for (int t = 0; t < T; ++t) {
            const double pc = sol.battery_charge[b][t];
            const double pd = sol.battery_discharge[b][t];
            const double e = sol.battery_energy[b][t];
            report("bound", bp.name, t, std::max(-pc, pc - bp.p_charge_max), fmt::format("charge {} outside [0, {}]", pc, bp.p_charge_max));
            report("bound", bp.name, t, std::max(-pd, pd - bp.p_discharge_max), fmt::format("discharge {} outside [0, {}]", pd, bp.p_discharge_max));
            report("bess_dyn", bp.name, t, std::abs(e - battery_step(e_prev, pc, pd, dt, bp)),
                   fmt::format("E={} but dynamics give {}", e, battery_step(e_prev, pc, pd, dt, bp)));
            report("bess_energy", bp.name, t, std::max(bp.e_min - e, e - bp.e_max),
                   fmt::format("E={} outside [{}, {}]", e, bp.e_min, bp.e_max));
            e_prev = e;
        }
    }

    for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) {
        for (int t = 0; t < T; ++t) {
            const double p = sol.pv_power[i][t];
            report("pv_avail", cfg.pv_units[i].name, t, std::max(-p, p - fc.pv[i][t]),
                   fmt::format("P={} outside [0, {}]", p, fc.pv[i][t]));
        }
    }
    for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) {
        for (int t = 0; t < T; ++t) {
            const double p = sol.wind_power[i][t];
            report("wind_avail", cfg.wind_units[i].name, t, std::max(-p, p - fc.wind[i][t]),
                   fmt::format("P={} outside [0, {}]", p, fc.wind[i][t]));
        }
    }

    const bool has_grid = !sol.grid_buy.empty();
    if (has_grid && !cfg.tariff) out.push_back({"shape", "grid", -1, 0.0, "grid exchange in an islanded scenario"});
    if (has_grid && !(with_size(sol.grid_buy, T, "grid_buy") & with_size(sol.grid_sell, T, "grid_sell"))) return out;
    if (has_grid && cfg.tariff) {
        const double lim = cfg.tariff->grid_power_limit;
        for (int t = 0; t < T; ++t) {
            report("grid_limit", "grid", t, std::max({-sol.grid_buy[t], sol.grid_buy[t] - lim, -sol.grid_sell[t], sol.grid_sell[t] - lim}),
                   fmt::format("buy={} sell={} limit {}", sol.grid_buy[t], sol.grid_sell[t], lim));
        }
    }

    const TimeSeries& load = cfg.load();
    for (int t = 0; t < T; ++t) {
        double gen = 0.0;
        for (std::size_t g = 0; g < nG; ++g) gen += sol.gen_power[g][t];
        for (std::size_t b = 0; b < nB; ++b) gen += sol.battery_discharge[b][t] - sol.battery_charge[b][t];
        for (const auto& p : sol.pv_power) gen += p[t];
        for (const auto& p : sol.wind_power) gen += p[t];
        if (has_grid) gen += sol.grid_buy[t] - sol.grid_sell[t];
        double slack = 0.0;
        if (!sol.balance_shortfall.empty()) {
            slack = sol.balance_shortfall[t] - sol.balance_surplus[t];
            report("balance_slack", "balance", t, std::max(sol.balance_shortfall[t], sol.balance_surplus[t]),
                   fmt::format("unserved {} / surplus {} MW", sol.balance_shortfall[t], sol.balance_surplus[t]));
        }
        const double demand = load[t] + (losses ? (*losses)[t] : 0.0);
        report("balance", "balance", t, std::abs(demand - gen - slack),
               fmt::format("demand {} vs supply {}", demand, gen + slack));
    }
    return out;
}

std::string format_violation(const ConstraintViolation& v) {
    return fmt::format("{}[{}{}] {:.3g}: {}", v.family, v.device, v.t >= 0 ? fmt::format(",t={}", v.t) : "", v.magnitude, v.message);
}

} // namespace mgopt
