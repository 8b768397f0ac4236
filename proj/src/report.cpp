#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>

#include "mgopt/cli_report.hpp"
#include "mgopt/csv.hpp"
#include "mgopt/error.hpp"

namespace mgopt {

using nlohmann::json;

namespace {

double ratio_or_one(double num, double den) {
    if (den <= 0.0) return 1.0;
    return std::clamp(num / den, 0.0, 1.0);
}

double sum_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

} // namespace

KpiReport compute_kpis(const DispatchSolution& sol, const ScenarioConfig& cfg, const std::vector<PowerFlowState>* states) {
    KpiReport k;
    k.costs = compute_costs(sol, cfg);
    k.total_cost = k.costs.total();
    for (std::size_t g = 0; g < cfg.generators.size(); ++g) {
        k.shutdown_counts[cfg.generators[g].name] =
            static_cast<int>(std::count(sol.commitment[g].begin(), sol.commitment[g].end(), 0));
    }
    if (cfg.grid_connected() && !sol.grid_power.empty()) {
        k.grid_shutdown_count = static_cast<int>(
            std::count_if(sol.grid_power.begin(), sol.grid_power.end(), [](double p) { return std::abs(p) < kGridIdleThreshold; }));
    }

    const Forecasts fc = compute_forecasts(cfg);
    double pv_used = 0.0, pv_avail = 0.0, wt_used = 0.0, wt_avail = 0.0;
    for (std::size_t i = 0; i < sol.pv_power.size(); ++i) {
        pv_used += sum_of(sol.pv_power[i]);
        for (int t = 0; t < sol.horizon; ++t) pv_avail += fc.pv[i][t];
    }
    for (std::size_t i = 0; i < sol.wind_power.size(); ++i) {
        wt_used += sum_of(sol.wind_power[i]);
        for (int t = 0; t < sol.horizon; ++t) wt_avail += fc.wind[i][t];
    }
    k.pv_utilization = ratio_or_one(pv_used, pv_avail);
    k.wind_utilization = ratio_or_one(wt_used, wt_avail);

    for (std::size_t b = 0; b < cfg.batteries.size(); ++b) {
        BatteryKpi bk;
        for (int t = 0; t < sol.horizon; ++t) bk.throughput_mwh += (sol.battery_charge[b][t] + sol.battery_discharge[b][t]) * sol.dt;
        const auto [lo, hi] = std::minmax_element(sol.battery_energy[b].begin(), sol.battery_energy[b].end());
        bk.e_min = *lo;
        bk.e_max = *hi;
        k.batteries[cfg.batteries[b].name] = bk;
    }

    std::vector<double> losses;
    if (states && cfg.network) {
        for (int b = 0; b < cfg.network->n_bus(); ++b) {
            BusKpi bk{kInf, -kInf};
            for (const auto& st : *states) {
                bk.v_min = std::min(bk.v_min, st.v[b]);
                bk.v_max = std::max(bk.v_max, st.v[b]);
            }
            k.buses[cfg.network->bus_names[b]] = bk;
        }
        losses = network_losses(*states);
    }
    for (const auto& v : check_feasibility(sol, cfg, 1e-6, losses.empty() ? nullptr : &losses)) k.violations.push_back(format_violation(v));
    return k;
}

json kpi_json(const KpiReport& k, const ScenarioConfig& cfg) {
    json j;
    j["total_cost"] = k.total_cost;
    json costs;
    costs["grid"] = k.costs.grid;
    costs["balance_penalty"] = k.costs.balance_penalty;
    auto per_device = [](const auto& devices, const std::vector<double>& values) {
        json o = json::object();
        for (std::size_t i = 0; i < devices.size() && i < values.size(); ++i) o[devices[i].name] = values[i];
        return o;
    };
    costs["generators"] = per_device(cfg.generators, k.costs.generator);
    costs["batteries"] = per_device(cfg.batteries, k.costs.battery);
    costs["pv"] = per_device(cfg.pv_units, k.costs.pv);
    costs["wind"] = per_device(cfg.wind_units, k.costs.wind);
    j["costs"] = costs;
    j["shutdown_counts"] = k.shutdown_counts;
    j["grid_shutdown_count"] = k.grid_shutdown_count ? json(*k.grid_shutdown_count) : json(nullptr);
    j["pv_utilization"] = k.pv_utilization;
    j["wind_utilization"] = k.wind_utilization;
    json bats = json::object();
    for (const auto& [name, b] : k.batteries) bats[name] = {{"throughput_mwh", b.throughput_mwh}, {"e_min", b.e_min}, {"e_max", b.e_max}};
    j["batteries"] = bats;
    json buses = json::object();
    for (const auto& [name, b] : k.buses) buses[name] = {{"v_min_kv", b.v_min}, {"v_max_kv", b.v_max}};
    j["buses"] = buses;
    j["violations"] = k.violations;
    return j;
}

void write_trajectories(std::ostream& os, const DispatchSolution& sol, const ScenarioConfig& cfg) {
    csv::write_row(os, {"t", "device", "quantity", "value"});
    auto row = [&](int t, const std::string& device, const char* quantity, double value) {
        csv::write_row(os, {std::to_string(t), device, quantity, csv::format_number(value)});
    };
    for (int t = 0; t < sol.horizon; ++t) {
        for (std::size_t g = 0; g < cfg.generators.size(); ++g) {
            const auto& name = cfg.generators[g].name;
            row(t, name, "P", sol.gen_power[g][t]);
            row(t, name, "U", sol.commitment[g][t]);
            row(t, name, "S_up", sol.startup[g][t]);
            row(t, name, "S_dn", sol.shutdown[g][t]);
        }
        for (std::size_t b = 0; b < cfg.batteries.size(); ++b) {
            const auto& name = cfg.batteries[b].name;
            row(t, name, "P_charge", sol.battery_charge[b][t]);
            row(t, name, "P_discharge", sol.battery_discharge[b][t]);
            row(t, name, "P", sol.battery_power[b][t]);
            row(t, name, "E", sol.battery_energy[b][t]);
        }
        for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) row(t, cfg.pv_units[i].name, "P", sol.pv_power[i][t]);
        for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) row(t, cfg.wind_units[i].name, "P", sol.wind_power[i][t]);
        if (!sol.grid_power.empty()) {
            row(t, "grid", "P_buy", sol.grid_buy[t]);
            row(t, "grid", "P_sell", sol.grid_sell[t]);
            row(t, "grid", "P", sol.grid_power[t]);
        }
        if (!sol.balance_shortfall.empty()) {
            row(t, "balance", "shortfall", sol.balance_shortfall[t]);
            row(t, "balance", "surplus", sol.balance_surplus[t]);
        }
    }
}

DispatchSolution read_trajectories(const std::filesystem::path& path, const ScenarioConfig& cfg) {
    const csv::Table table = csv::read(path);
    const std::string file = path.filename().string();
    const auto it_t = table.column("t");
    const auto it_d = table.column("device");
    const auto it_q = table.column("quantity");
    const auto it_v = table.column("value");
    if (it_t < 0 || it_d < 0 || it_q < 0 || it_v < 0) throw ScenarioError(file, "expected columns t, device, quantity, value");
    const int T = cfg.horizon;
    std::map<std::pair<std::string, std::string>, std::vector<double>> data;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.lines.empty() ? r + 2 : table.lines[r];
        int t = -1;
        double value = 0.0;
        try {
            std::size_t pos = 0;
            t = std::stoi(row.at(it_t), &pos);
            if (pos != row.at(it_t).size()) throw std::invalid_argument("t");
            value = std::stod(row.at(it_v), &pos);
            if (pos != row.at(it_v).size() || !std::isfinite(value)) throw std::invalid_argument("value");
        } catch (const std::exception&) {
            throw ScenarioError(fmt::format("{}:{}", file, line), "malformed row");
        }
        if (t < 0 || t >= T) throw ScenarioError(fmt::format("{}:{}", file, line), fmt::format("t={} outside the horizon", t));
        auto& series = data[{row.at(it_d), row.at(it_q)}];
        if (series.empty()) series.assign(T, std::nan(""));
        series[t] = value;
    }
    auto get = [&](const std::string& device, const std::string& quantity) {
        const auto it = data.find({device, quantity});
        if (it == data.end()) throw ScenarioError(file, fmt::format("missing trajectory {}.{}", device, quantity));
        for (int t = 0; t < T; ++t) {
            if (std::isnan(it->second[t])) throw ScenarioError(file, fmt::format("missing {}.{} at t={}", device, quantity, t));
        }
        return it->second;
    };

    DispatchSolution sol;
    sol.horizon = T;
    sol.dt = cfg.dt;
    for (const auto& g : cfg.generators) {
        sol.gen_power.push_back(get(g.name, "P"));
        std::vector<int> u;
        for (double v : get(g.name, "U")) u.push_back(v == 0.0 ? 0 : v == 1.0 ? 1 : -1);
        sol.commitment.push_back(std::move(u));
        sol.startup.push_back(get(g.name, "S_up"));
        sol.shutdown.push_back(get(g.name, "S_dn"));
    }
    for (const auto& b : cfg.batteries) {
        sol.battery_charge.push_back(get(b.name, "P_charge"));
        sol.battery_discharge.push_back(get(b.name, "P_discharge"));
        sol.battery_energy.push_back(get(b.name, "E"));
        std::vector<double> p(T);
        for (int t = 0; t < T; ++t) p[t] = sol.battery_discharge.back()[t] - sol.battery_charge.back()[t];
        sol.battery_power.push_back(std::move(p));
    }
    for (const auto& u : cfg.pv_units) sol.pv_power.push_back(get(u.name, "P"));
    for (const auto& u : cfg.wind_units) sol.wind_power.push_back(get(u.name, "P"));
    if (data.contains({"grid", "P_buy"}) || cfg.grid_connected()) {
        sol.grid_buy = get("grid", "P_buy");
        sol.grid_sell = get("grid", "P_sell");
        sol.grid_power.resize(T);
        for (int t = 0; t < T; ++t) sol.grid_power[t] = sol.grid_buy[t] - sol.grid_sell[t];
    }
    if (data.contains({"balance", "shortfall"})) {
        sol.balance_shortfall = get("balance", "shortfall");
        sol.balance_surplus = get("balance", "surplus");
    }
    sol.costs = compute_costs(sol, cfg);
    sol.objective = sol.costs.total();
    return sol;
}

void write_buses(std::ostream& os, const BusTrajectories& bt, const NetworkModel& net) {
    csv::write_row(os, {"t", "bus", "v_kv", "delta_rad", "p_mw", "q_mvar", "q_supply_mvar"});
    for (std::size_t t = 0; t < bt.states.size(); ++t) {
        const auto& st = bt.states[t];
        for (int b = 0; b < net.n_bus(); ++b) {
            csv::write_row(os, {std::to_string(t), net.bus_names[b], csv::format_number(st.v[b]), csv::format_number(st.delta[b]),
                                csv::format_number(st.p_inj[b]), csv::format_number(st.q_inj[b]),
                                csv::format_number(bt.q_supply[t][b])});
        }
    }
}

BusTrajectories read_buses(const std::filesystem::path& path, const ScenarioConfig& cfg) {
    if (!cfg.network) throw ScenarioError("network", "bus trajectories need a network section");
    const NetworkModel& net = *cfg.network;
    const csv::Table table = csv::read(path);
    const std::string file = path.filename().string();
    const char* cols[] = {"t", "bus", "v_kv", "delta_rad", "q_supply_mvar"};
    std::size_t idx[5];
    for (int k = 0; k < 5; ++k) {
        const int c = table.column(cols[k]);
        if (c < 0) throw ScenarioError(file, fmt::format("missing column '{}'", cols[k]));
        idx[k] = static_cast<std::size_t>(c);
    }
    const int T = cfg.horizon;
    const int nb = net.n_bus();
    BusTrajectories bt;
    bt.states.assign(T, PowerFlowState{std::vector<double>(nb, std::nan("")), std::vector<double>(nb, std::nan("")), {}, {}});
    bt.q_supply.assign(T, std::vector<double>(nb, std::nan("")));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto bus_it = std::find(net.bus_names.begin(), net.bus_names.end(), row.at(idx[1]));
        int t = -1;
        try {
            t = std::stoi(row.at(idx[0]));
        } catch (const std::exception&) {
        }
        if (bus_it == net.bus_names.end() || t < 0 || t >= T) {
            throw ScenarioError(fmt::format("{}:{}", file, r + 2), "unknown bus or timestep");
        }
        const auto b = static_cast<std::size_t>(bus_it - net.bus_names.begin());
        try {
            bt.states[t].v[b] = std::stod(row.at(idx[2]));
            bt.states[t].delta[b] = std::stod(row.at(idx[3]));
            bt.q_supply[t][b] = std::stod(row.at(idx[4]));
        } catch (const std::exception&) {
            throw ScenarioError(fmt::format("{}:{}", file, r + 2), "malformed number");
        }
    }
    const ComplexMatrix Y = build_admittance(net);
    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < nb; ++b) {
            if (std::isnan(bt.states[t].v[b]) || std::isnan(bt.states[t].delta[b]) || std::isnan(bt.q_supply[t][b])) {
                throw ScenarioError(file, fmt::format("missing bus {} at t={}", net.bus_names[b], t));
            }
        }
        const BusInjections inj = bus_injections(bt.states[t], Y);
        bt.states[t].p_inj = inj.p;
        bt.states[t].q_inj = inj.q;
    }
    return bt;
}

void write_plotdata(const std::filesystem::path& dir, const DispatchSolution& sol, const ScenarioConfig& cfg,
                    const BusTrajectories* buses) {
    std::filesystem::create_directories(dir);
    const int T = sol.horizon;
    const TimeSeries& load = cfg.load();
    {
        std::ofstream os(dir / "generation_stack.csv");
        std::vector<std::string> head{"t"};
        for (const auto& g : cfg.generators) head.push_back(g.name);
        for (const auto& b : cfg.batteries) head.push_back(b.name);
        for (const auto& u : cfg.pv_units) head.push_back(u.name);
        for (const auto& u : cfg.wind_units) head.push_back(u.name);
        if (!sol.grid_power.empty()) head.push_back("grid");
        head.push_back("load");
        csv::write_row(os, head);
        for (int t = 0; t < T; ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (const auto& v : sol.gen_power) row.push_back(csv::format_number(v[t]));
            for (const auto& v : sol.battery_power) row.push_back(csv::format_number(v[t]));
            for (const auto& v : sol.pv_power) row.push_back(csv::format_number(v[t]));
            for (const auto& v : sol.wind_power) row.push_back(csv::format_number(v[t]));
            if (!sol.grid_power.empty()) row.push_back(csv::format_number(sol.grid_power[t]));
            row.push_back(csv::format_number(load[t]));
            csv::write_row(os, row);
        }
    }
    {
        std::ofstream os(dir / "bess_energy.csv");
        std::vector<std::string> head{"t"};
        for (const auto& b : cfg.batteries) head.push_back(b.name);
        csv::write_row(os, head);
        for (int t = 0; t < T; ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (const auto& v : sol.battery_energy) row.push_back(csv::format_number(v[t]));
            csv::write_row(os, row);
        }
    }
    {
        const Forecasts fc = compute_forecasts(cfg);
        std::ofstream os(dir / "renewable_dispatch.csv");
        std::vector<std::string> head{"t"};
        for (const auto& u : cfg.pv_units) head.insert(head.end(), {u.name, u.name + "_available"});
        for (const auto& u : cfg.wind_units) head.insert(head.end(), {u.name, u.name + "_available"});
        csv::write_row(os, head);
        for (int t = 0; t < T; ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) {
                row.push_back(csv::format_number(sol.pv_power[i][t]));
                row.push_back(csv::format_number(fc.pv[i][t]));
            }
            for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) {
                row.push_back(csv::format_number(sol.wind_power[i][t]));
                row.push_back(csv::format_number(fc.wind[i][t]));
            }
            csv::write_row(os, row);
        }
    }
    if (buses && cfg.network) {
        const NetworkModel& net = *cfg.network;
        std::ofstream os(dir / "bus_pqv.csv");
        std::vector<std::string> head{"t"};
        for (const auto& name : net.bus_names) head.insert(head.end(), {name + "_V", name + "_P", name + "_Q"});
        csv::write_row(os, head);
        for (int t = 0; t < T; ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (int b = 0; b < net.n_bus(); ++b) {
                row.push_back(csv::format_number(buses->states[t].v[b]));
                row.push_back(csv::format_number(buses->states[t].p_inj[b]));
                row.push_back(csv::format_number(buses->states[t].q_inj[b]));
            }
            csv::write_row(os, row);
        }
    }
}

std::string scenario_hash(const std::filesystem::path& scenario, const ScenarioConfig& cfg) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 unavailable");
    auto feed = [&](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw ScenarioError(p.string(), "cannot read file for hashing");
        char buf[1 << 14];
        while (in) {
            in.read(buf, sizeof buf);
            if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
        }
    };
    feed(scenario);
    for (const auto& [name, binding] : cfg.series_bindings) feed(binding.path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

} // namespace mgopt
