#include "mgopt/scenario_io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "mgopt/error.hpp"

namespace mgopt {

using nlohmann::json;

const TimeSeries& ScenarioConfig::load() const { return series_at("load"); }

const TimeSeries& ScenarioConfig::series_at(const std::string& name) const {
    const auto it = series.find(name);
    if (it == series.end()) throw ScenarioError("series." + name, "series is not bound");
    return it->second;
}

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ScenarioError(path + "." + key, "required field is missing");
    return obj.at(key);
}

double as_number(const json& value, const std::string& path) {
    if (!value.is_number()) throw ScenarioError(path, fmt::format("expected a number, got {}", value.dump()));
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw ScenarioError(path, "value is not finite");
    return v;
}

double number(const json& obj, const std::string& key, const std::string& path) {
    return as_number(require(obj, key, path), path + "." + key);
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    return as_number(obj.at(key), path + "." + key);
}

std::string string_field(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_string()) throw ScenarioError(path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::string string_or(const json& obj, const std::string& key, const std::string& fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string()) throw ScenarioError(path + "." + key, "expected a string");
    return obj.at(key).get<std::string>();
}

const json& array_or_empty(const json& doc, const std::string& key) {
    static const json empty = json::array();
    if (!doc.contains(key)) return empty;
    if (!doc.at(key).is_array()) throw ScenarioError(key, "expected an array");
    return doc.at(key);
}

// Energy-rate cost: a bare number is $/MWh; {"value": x, "unit": "$/kWh"} is converted.
double rate_field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return 0.0;
    const json& v = obj.at(key);
    const std::string p = path + "." + key;
    if (v.is_number()) return as_number(v, p);
    if (!v.is_object()) throw ScenarioError(p, "expected a number or {value, unit}");
    const double value = number(v, "value", p);
    const std::string unit = string_field(v, "unit", p);
    if (unit == "$/MWh") return value;
    if (unit == "$/kWh") return value * 1000.0;
    throw ScenarioError(p + ".unit", fmt::format("unknown rate unit '{}'", unit));
}

// Per-event cost in $. {"value": x, "unit": "$/MW"} scales by the rated power.
double event_cost_field(const json& obj, const std::string& key, double p_max, const std::string& path) {
    if (!obj.contains(key)) return 0.0;
    const json& v = obj.at(key);
    const std::string p = path + "." + key;
    if (v.is_number()) return as_number(v, p);
    if (!v.is_object()) throw ScenarioError(p, "expected a number or {value, unit}");
    const double value = number(v, "value", p);
    const std::string unit = string_field(v, "unit", p);
    if (unit == "$") return value;
    if (unit == "$/MW") return value * p_max;
    throw ScenarioError(p + ".unit", fmt::format("unknown event cost unit '{}'", unit));
}

GeneratorParams parse_generator(const json& j, const std::string& path) {
    GeneratorParams g;
    g.name = string_field(j, "name", path);
    g.a = number(j, "a", path);
    g.b = number(j, "b", path);
    g.c = number(j, "c", path);
    const std::string units = string_or(j, "cost_units", "MW", path);
    if (units == "kW") {
        // a + b*P_kW + c*P_kW^2 with P_kW = 1000 * P_MW.
        g.b *= 1e3;
        g.c *= 1e6;
    } else if (units != "MW") {
        throw ScenarioError(path + ".cost_units", fmt::format("expected \"MW\" or \"kW\", got '{}'", units));
    }
    g.p_min = number_or(j, "p_min", 0.0, path);
    g.p_max = number(j, "p_max", path);
    g.ramp_up = number(j, "ramp_up", path);
    g.ramp_down = number_or(j, "ramp_down", g.ramp_up, path);
    g.startup_cost = event_cost_field(j, "startup_cost", g.p_max, path);
    g.shutdown_cost = event_cost_field(j, "shutdown_cost", g.p_max, path);
    return g;
}

BatteryParams parse_battery(const json& j, const std::string& path) {
    BatteryParams b;
    b.name = string_field(j, "name", path);
    if (j.contains("p_max")) {
        b.p_charge_max = b.p_discharge_max = number(j, "p_max", path);
    }
    b.p_charge_max = number_or(j, "p_charge_max", b.p_charge_max, path);
    b.p_discharge_max = number_or(j, "p_discharge_max", b.p_discharge_max, path);
    b.e_max = number(j, "e_max", path);
    const json& e_min = require(j, "e_min", path);
    if (e_min.is_object()) {
        b.e_min = number(e_min, "fraction_of_e_max", path + ".e_min") * b.e_max;
    } else {
        b.e_min = as_number(e_min, path + ".e_min");
    }
    b.eta = number(j, "eta", path);
    b.op_cost = rate_field(j, "op_cost", path);
    return b;
}

WindTurbineParams parse_wind(const json& j, const std::string& path) {
    WindTurbineParams w;
    w.name = string_field(j, "name", path);
    w.p_rated = number(j, "p_rated", path);
    w.v_cut_in = number(j, "v_cut_in", path);
    w.v_rated = number(j, "v_rated", path);
    w.v_cut_out = number(j, "v_cut_out", path);
    w.op_cost = rate_field(j, "op_cost", path);
    return w;
}

PvParams parse_pv(const json& j, const std::string& path) {
    PvParams p;
    p.name = string_field(j, "name", path);
    p.p_stc = number(j, "p_stc", path);
    p.g_stc = number_or(j, "g_stc", 1000.0, path);
    p.k_temp = number_or(j, "k_temp", -0.0047, path);
    p.t_ref = number_or(j, "t_ref", 25.0, path);
    p.op_cost = rate_field(j, "op_cost", path);
    return p;
}

int int_field(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer()) throw ScenarioError(path + "." + key, "expected an integer");
    return v.get<int>();
}

NetworkModel parse_network(const json& j) {
    const std::string path = "network";
    NetworkModel net;
    net.nominal_kv = number_or(j, "nominal_kv", 6.0, path);
    net.v_min = number_or(j, "v_min", 0.9 * net.nominal_kv, path);
    net.v_max = number_or(j, "v_max", 1.1 * net.nominal_kv, path);
    net.slack_bus = j.contains("slack_bus") ? int_field(j, "slack_bus", path) : 0;
    net.reactive_load_ratio = number_or(j, "reactive_load_ratio", 0.2, path);
    net.q_capability_ratio = number_or(j, "q_capability_ratio", 0.6, path);

    const json& buses = require(j, "buses", path);
    if (!buses.is_array()) throw ScenarioError("network.buses", "expected an array");
    bool any_share = false;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string bp = fmt::format("network.buses[{}]", i);
        const json& b = buses[i];
        net.bus_names.push_back(string_or(b, "name", fmt::format("Bus{}", i + 1), bp));
        std::vector<std::string> devices;
        if (b.contains("devices")) {
            if (!b.at("devices").is_array()) throw ScenarioError(bp + ".devices", "expected an array");
            for (const auto& d : b.at("devices")) {
                if (!d.is_string()) throw ScenarioError(bp + ".devices", "expected device names");
                devices.push_back(d.get<std::string>());
            }
        }
        net.bus_devices.push_back(std::move(devices));
        if (b.contains("load_share")) any_share = true;
        net.load_share.push_back(number_or(b, "load_share", 0.0, bp));
    }
    if (!any_share && !buses.empty()) {
        std::fill(net.load_share.begin(), net.load_share.end(), 1.0 / static_cast<double>(buses.size()));
    }

    const json& lines = require(j, "lines", path);
    if (!lines.is_array()) throw ScenarioError("network.lines", "expected an array");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string lp = fmt::format("network.lines[{}]", i);
        LineParams line;
        line.from_bus = int_field(lines[i], "from", lp);
        line.to_bus = int_field(lines[i], "to", lp);
        line.r_ohm = number_or(lines[i], "r", 0.0, lp);
        line.x_ohm = number_or(lines[i], "x", 0.0, lp);
        net.lines.push_back(line);
    }
    return net;
}

std::string fmt_num(double v) { return fmt::format("{}", v); }

} // namespace

ScenarioConfig parse_scenario_json(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ScenarioError("", "scenario must be a JSON object");
    ScenarioConfig cfg;
    cfg.name = string_or(doc, "name", "scenario", "");

    const json& horizon = require(doc, "horizon", "");
    if (horizon.is_number_integer()) {
        cfg.horizon = horizon.get<int>();
    } else {
        cfg.horizon = int_field(horizon, "T", "horizon");
        cfg.dt = number_or(horizon, "dt", 1.0, "horizon");
    }
    if (cfg.horizon < 1) throw ScenarioError("horizon.T", "horizon must be ≥ 1");
    if (!(cfg.dt > 0.0)) throw ScenarioError("horizon.dt", "dt must be > 0");

    const json& gens = array_or_empty(doc, "generators");
    for (std::size_t i = 0; i < gens.size(); ++i) cfg.generators.push_back(parse_generator(gens[i], fmt::format("generators[{}]", i)));
    const json& bats = array_or_empty(doc, "batteries");
    for (std::size_t i = 0; i < bats.size(); ++i) cfg.batteries.push_back(parse_battery(bats[i], fmt::format("batteries[{}]", i)));
    const json& winds = array_or_empty(doc, "wind");
    for (std::size_t i = 0; i < winds.size(); ++i) {
        const std::string p = fmt::format("wind[{}]", i);
        cfg.wind_units.push_back(parse_wind(winds[i], p));
        cfg.renewable_inputs.wind_speed.push_back(string_or(winds[i], "wind_series", "wind_speed", p));
    }
    const json& pvs = array_or_empty(doc, "pv");
    for (std::size_t i = 0; i < pvs.size(); ++i) {
        const std::string p = fmt::format("pv[{}]", i);
        cfg.pv_units.push_back(parse_pv(pvs[i], p));
        cfg.renewable_inputs.irradiance.push_back(string_or(pvs[i], "irradiance_series", "irradiance", p));
        cfg.renewable_inputs.temperature.push_back(string_or(pvs[i], "temperature_series", "temperature", p));
    }

    // Series bindings load first so the tariff can refer to them by name.
    if (doc.contains("series")) {
        const json& series = doc.at("series");
        if (!series.is_object()) throw ScenarioError("series", "expected an object of name -> {path, column}");
        for (const auto& [name, binding] : series.items()) {
            const std::string p = "series." + name;
            SeriesBinding b;
            b.path = (base_dir / string_field(binding, "path", p)).lexically_normal();
            b.column = string_or(binding, "column", name, p);
            if (binding.contains("unit")) {
                const auto unit = parse_unit(string_field(binding, "unit", p));
                if (!unit) throw ScenarioError(p + ".unit", fmt::format("unknown unit '{}'", binding.at("unit").dump()));
                b.unit = *unit;
                cfg.series.emplace(name, load_timeseries_csv(b.path, b.column, b.unit));
            } else {
                cfg.series.emplace(name, load_timeseries_csv(b.path, b.column));
                b.unit = cfg.series.at(name).unit;
            }
            cfg.series.at(name).dt_hours = cfg.dt;
            cfg.series_bindings.emplace(name, std::move(b));
        }
    }
    if (!cfg.series.contains("load")) throw ScenarioError("series.load", "a load series is required");

    if (doc.contains("load_normalization")) {
        cfg.load_target_mean = number(doc.at("load_normalization"), "target_mean", "load_normalization");
        try {
            cfg.series.at("load") = normalize_load(cfg.series.at("load"), *cfg.load_target_mean);
        } catch (const Error& e) {
            throw ScenarioError("load_normalization", e.what());
        }
    }

    const bool islanded = doc.contains("islanded") && doc.at("islanded").is_boolean() && doc.at("islanded").get<bool>();
    if (doc.contains("tariff") && !islanded) {
        const json& t = doc.at("tariff");
        TariffParams tariff;
        const std::string buy = string_or(t, "buy_series", "price_buy", "tariff");
        const std::string sell = string_or(t, "sell_series", "price_sell", "tariff");
        if (!cfg.series.contains(buy)) throw ScenarioError("tariff.buy_series", fmt::format("series '{}' is not bound", buy));
        if (!cfg.series.contains(sell)) throw ScenarioError("tariff.sell_series", fmt::format("series '{}' is not bound", sell));
        tariff.buy_price = cfg.series.at(buy);
        tariff.sell_price = cfg.series.at(sell);
        tariff.grid_power_limit = number_or(t, "grid_power_limit", 10.0, "tariff");
        cfg.tariff = std::move(tariff);
    }

    if (doc.contains("network") && !doc.at("network").is_null()) cfg.network = parse_network(doc.at("network"));

    // Defaults: everything starts at zero except batteries, which start full.
    cfg.initial.generator_power.assign(cfg.generators.size(), 0.0);
    cfg.initial.generator_status.assign(cfg.generators.size(), 0);
    cfg.initial.battery_energy.resize(cfg.batteries.size());
    for (std::size_t i = 0; i < cfg.batteries.size(); ++i) cfg.initial.battery_energy[i] = cfg.batteries[i].e_max;
    if (doc.contains("initial")) {
        const json& init = doc.at("initial");
        if (init.contains("generators")) {
            for (const auto& [name, v] : init.at("generators").items()) {
                const auto it = std::find_if(cfg.generators.begin(), cfg.generators.end(),
                                             [&](const auto& g) { return g.name == name; });
                if (it == cfg.generators.end()) throw ScenarioError("initial.generators." + name, "unknown generator");
                const auto i = static_cast<std::size_t>(it - cfg.generators.begin());
                const std::string p = "initial.generators." + name;
                cfg.initial.generator_power[i] = number_or(v, "p", 0.0, p);
                cfg.initial.generator_status[i] = v.contains("u") ? int_field(v, "u", p) : 0;
            }
        }
        if (init.contains("batteries")) {
            for (const auto& [name, v] : init.at("batteries").items()) {
                const auto it = std::find_if(cfg.batteries.begin(), cfg.batteries.end(),
                                             [&](const auto& b) { return b.name == name; });
                if (it == cfg.batteries.end()) throw ScenarioError("initial.batteries." + name, "unknown battery");
                const auto i = static_cast<std::size_t>(it - cfg.batteries.begin());
                cfg.initial.battery_energy[i] = number(v, "e", "initial.batteries." + name);
            }
        }
    }

    const auto violations = validate_scenario(cfg);
    if (!violations.empty()) throw ScenarioError(violations.front().field, format_violations(violations));
    return cfg;
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("", fmt::format("scenario file '{}' not found", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ScenarioError("", fmt::format("malformed scenario '{}': {}", path.string(), e.what()));
    }
    return parse_scenario_json(doc, std::filesystem::absolute(path).parent_path());
}

json serialize_scenario(const ScenarioConfig& cfg) {
    json doc;
    doc["name"] = cfg.name;
    doc["horizon"] = {{"T", cfg.horizon}, {"dt", cfg.dt}};
    doc["generators"] = json::array();
    for (const auto& g : cfg.generators) {
        doc["generators"].push_back({{"name", g.name}, {"a", g.a}, {"b", g.b}, {"c", g.c}, {"cost_units", "MW"},
                                     {"p_min", g.p_min}, {"p_max", g.p_max}, {"ramp_up", g.ramp_up},
                                     {"ramp_down", g.ramp_down}, {"startup_cost", g.startup_cost},
                                     {"shutdown_cost", g.shutdown_cost}});
    }
    doc["batteries"] = json::array();
    for (const auto& b : cfg.batteries) {
        doc["batteries"].push_back({{"name", b.name}, {"p_charge_max", b.p_charge_max},
                                    {"p_discharge_max", b.p_discharge_max}, {"e_min", b.e_min}, {"e_max", b.e_max},
                                    {"eta", b.eta}, {"op_cost", b.op_cost}});
    }
    doc["wind"] = json::array();
    for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) {
        const auto& w = cfg.wind_units[i];
        doc["wind"].push_back({{"name", w.name}, {"p_rated", w.p_rated}, {"v_cut_in", w.v_cut_in},
                               {"v_rated", w.v_rated}, {"v_cut_out", w.v_cut_out}, {"op_cost", w.op_cost},
                               {"wind_series", cfg.renewable_inputs.wind_speed[i]}});
    }
    doc["pv"] = json::array();
    for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) {
        const auto& p = cfg.pv_units[i];
        doc["pv"].push_back({{"name", p.name}, {"p_stc", p.p_stc}, {"g_stc", p.g_stc}, {"k_temp", p.k_temp},
                             {"t_ref", p.t_ref}, {"op_cost", p.op_cost},
                             {"irradiance_series", cfg.renewable_inputs.irradiance[i]},
                             {"temperature_series", cfg.renewable_inputs.temperature[i]}});
    }
    json series = json::object();
    for (const auto& [name, b] : cfg.series_bindings) {
        series[name] = {{"path", b.path.string()}, {"column", b.column}, {"unit", std::string(unit_name(b.unit))}};
    }
    doc["series"] = series;
    if (cfg.load_target_mean) doc["load_normalization"] = {{"target_mean", *cfg.load_target_mean}};
    if (cfg.tariff) {
        // Tariff series are stored by value; recover their binding names.
        auto find_name = [&](const TimeSeries& ts, const char* fallback) {
            for (const auto& [name, s] : cfg.series) {
                if (s == ts) return name;
            }
            return std::string(fallback);
        };
        doc["tariff"] = {{"buy_series", find_name(cfg.tariff->buy_price, "price_buy")},
                         {"sell_series", find_name(cfg.tariff->sell_price, "price_sell")},
                         {"grid_power_limit", cfg.tariff->grid_power_limit}};
    } else {
        doc["islanded"] = true;
    }
    if (cfg.network) {
        const auto& net = *cfg.network;
        json buses = json::array();
        for (int b = 0; b < net.n_bus(); ++b) {
            buses.push_back({{"name", net.bus_names[b]}, {"devices", net.bus_devices[b]}, {"load_share", net.load_share[b]}});
        }
        json lines = json::array();
        for (const auto& l : net.lines) lines.push_back({{"from", l.from_bus}, {"to", l.to_bus}, {"r", l.r_ohm}, {"x", l.x_ohm}});
        doc["network"] = {{"nominal_kv", net.nominal_kv}, {"v_min", net.v_min}, {"v_max", net.v_max},
                          {"slack_bus", net.slack_bus}, {"reactive_load_ratio", net.reactive_load_ratio},
                          {"q_capability_ratio", net.q_capability_ratio}, {"buses", buses}, {"lines", lines}};
    }
    json init_g = json::object();
    for (std::size_t i = 0; i < cfg.generators.size(); ++i) {
        init_g[cfg.generators[i].name] = {{"p", cfg.initial.generator_power[i]}, {"u", cfg.initial.generator_status[i]}};
    }
    json init_b = json::object();
    for (std::size_t i = 0; i < cfg.batteries.size(); ++i) init_b[cfg.batteries[i].name] = {{"e", cfg.initial.battery_energy[i]}};
    doc["initial"] = {{"generators", init_g}, {"batteries", init_b}};
    return doc;
}

std::vector<ScenarioViolation> validate_scenario(const ScenarioConfig& cfg) {
    std::vector<ScenarioViolation> out;
    auto add = [&](std::string field, std::string constraint, std::string observed) {
        out.push_back({std::move(field), std::move(constraint), std::move(observed)});
    };

    if (cfg.horizon < 1) add("horizon.T", "horizon must be ≥ 1", std::to_string(cfg.horizon));
    if (!(cfg.dt > 0.0)) add("horizon.dt", "dt > 0", fmt_num(cfg.dt));
    if (cfg.generators.empty() && cfg.batteries.empty() && cfg.wind_units.empty() && cfg.pv_units.empty()) {
        add("devices", "at least one device", "none");
    }

    std::set<std::string> names;
    auto check_name = [&](const std::string& field, const std::string& name) {
        if (name.empty()) add(field + ".name", "non-empty name", "\"\"");
        if (!names.insert(name).second) add(field + ".name", "unique device name", name);
    };

    for (std::size_t i = 0; i < cfg.generators.size(); ++i) {
        const auto& g = cfg.generators[i];
        const std::string f = fmt::format("generators[{}]", i);
        check_name(f, g.name);
        if (!(g.p_min >= 0.0 && g.p_min <= g.p_max)) add(f + ".p_min", "0 ≤ p_min ≤ p_max", fmt::format("p_min={} p_max={}", g.p_min, g.p_max));
        if (!(g.p_max > 0.0)) add(f + ".p_max", "p_max > 0", fmt_num(g.p_max));
        if (!(g.ramp_up > 0.0)) add(f + ".ramp_up", "ramp_up > 0", fmt_num(g.ramp_up));
        if (!(g.ramp_down > 0.0)) add(f + ".ramp_down", "ramp_down > 0", fmt_num(g.ramp_down));
        if (!(g.c >= 0.0)) add(f + ".c", "c ≥ 0 (convex cost)", fmt_num(g.c));
        if (!(g.startup_cost >= 0.0)) add(f + ".startup_cost", "≥ 0", fmt_num(g.startup_cost));
        if (!(g.shutdown_cost >= 0.0)) add(f + ".shutdown_cost", "≥ 0", fmt_num(g.shutdown_cost));
    }
    for (std::size_t i = 0; i < cfg.batteries.size(); ++i) {
        const auto& b = cfg.batteries[i];
        const std::string f = fmt::format("batteries[{}]", i);
        check_name(f, b.name);
        if (!(b.e_min >= 0.0 && b.e_min < b.e_max)) add(f + ".e_min", "0 ≤ e_min < e_max", fmt::format("e_min={} e_max={}", b.e_min, b.e_max));
        if (!(b.p_charge_max > 0.0)) add(f + ".p_charge_max", "> 0", fmt_num(b.p_charge_max));
        if (!(b.p_discharge_max > 0.0)) add(f + ".p_discharge_max", "> 0", fmt_num(b.p_discharge_max));
        if (!(b.eta > 0.0 && b.eta <= 1.0)) add(f + ".eta", "0 < eta ≤ 1", fmt_num(b.eta));
        if (!(b.op_cost >= 0.0)) add(f + ".op_cost", "≥ 0", fmt_num(b.op_cost));
    }
    for (std::size_t i = 0; i < cfg.wind_units.size(); ++i) {
        const auto& w = cfg.wind_units[i];
        const std::string f = fmt::format("wind[{}]", i);
        check_name(f, w.name);
        if (!(0.0 < w.v_cut_in && w.v_cut_in < w.v_rated && w.v_rated < w.v_cut_out)) {
            add(f, "0 < v_cut_in < v_rated < v_cut_out", fmt::format("{}/{}/{}", w.v_cut_in, w.v_rated, w.v_cut_out));
        }
        if (!(w.p_rated > 0.0)) add(f + ".p_rated", "> 0", fmt_num(w.p_rated));
    }
    for (std::size_t i = 0; i < cfg.pv_units.size(); ++i) {
        const auto& p = cfg.pv_units[i];
        const std::string f = fmt::format("pv[{}]", i);
        check_name(f, p.name);
        if (!(p.p_stc > 0.0)) add(f + ".p_stc", "> 0", fmt_num(p.p_stc));
        if (!(p.g_stc > 0.0)) add(f + ".g_stc", "> 0", fmt_num(p.g_stc));
    }

    // Series: presence, unit tag, length, finiteness.
    auto check_series = [&](const std::string& name, Unit unit) {
        const auto it = cfg.series.find(name);
        if (it == cfg.series.end()) {
            add("series." + name, "series must be bound", "missing");
            return;
        }
        const TimeSeries& ts = it->second;
        if (ts.unit != unit) {
            add("series." + name, fmt::format("unit {}", unit_name(unit)), std::string(unit_name(ts.unit)));
        }
        if (ts.size() < static_cast<std::size_t>(std::max(cfg.horizon, 1))) {
            add("series." + name, fmt::format("length ≥ horizon ({})", cfg.horizon),
                fmt::format("series '{}' has {} samples", name, ts.size()));
        }
        for (std::size_t t = 0; t < ts.size(); ++t) {
            if (!std::isfinite(ts.values[t])) {
                add(fmt::format("series.{}[{}]", name, t), "finite value", fmt_num(ts.values[t]));
                break;
            }
        }
    };
    check_series("load", Unit::MW);
    if (cfg.renewable_inputs.wind_speed.size() != cfg.wind_units.size()) add("wind", "one wind series per unit", "mismatch");
    for (const auto& s : cfg.renewable_inputs.wind_speed) check_series(s, Unit::MetersPerSecond);
    for (const auto& s : cfg.renewable_inputs.irradiance) check_series(s, Unit::WattsPerSquareMeter);
    for (const auto& s : cfg.renewable_inputs.temperature) check_series(s, Unit::Celsius);
    if (cfg.renewable_inputs.irradiance.size() != cfg.pv_units.size() ||
        cfg.renewable_inputs.temperature.size() != cfg.pv_units.size()) {
        add("pv", "irradiance and temperature series per unit", "mismatch");
    }

    if (cfg.tariff) {
        const auto& t = *cfg.tariff;
        if (t.buy_price.unit != Unit::DollarPerMWh) add("tariff.buy_series", "unit $/MWh", std::string(unit_name(t.buy_price.unit)));
        if (t.sell_price.unit != Unit::DollarPerMWh) add("tariff.sell_series", "unit $/MWh", std::string(unit_name(t.sell_price.unit)));
        const auto n = static_cast<std::size_t>(std::max(cfg.horizon, 0));
        if (t.buy_price.size() < n) add("tariff.buy_series", "length ≥ horizon", std::to_string(t.buy_price.size()));
        if (t.sell_price.size() < n) add("tariff.sell_series", "length ≥ horizon", std::to_string(t.sell_price.size()));
        for (std::size_t k = 0; k < std::min({n, t.buy_price.size(), t.sell_price.size()}); ++k) {
            if (!(t.buy_price[k] >= t.sell_price[k] && t.sell_price[k] >= 0.0)) {
                add(fmt::format("tariff[t={}]", k), "buy ≥ sell ≥ 0",
                    fmt::format("buy={} sell={}", t.buy_price[k], t.sell_price[k]));
            }
        }
        if (!(t.grid_power_limit > 0.0)) add("tariff.grid_power_limit", "> 0", fmt_num(t.grid_power_limit));
    }

    const auto& init = cfg.initial;
    if (init.generator_power.size() != cfg.generators.size() || init.generator_status.size() != cfg.generators.size() ||
        init.battery_energy.size() != cfg.batteries.size()) {
        add("initial", "one entry per device", "size mismatch");
    } else {
        for (std::size_t i = 0; i < cfg.generators.size(); ++i) {
            const auto& g = cfg.generators[i];
            const std::string f = "initial.generators." + g.name;
            const int u = init.generator_status[i];
            if (u != 0 && u != 1) add(f + ".u", "status in {0,1}", std::to_string(u));
            const double p = init.generator_power[i];
            if (!(p >= u * g.p_min - 1e-12 && p <= u * g.p_max + 1e-12)) {
                add(f + ".p", "u*p_min ≤ p ≤ u*p_max", fmt_num(p));
            }
        }
        for (std::size_t i = 0; i < cfg.batteries.size(); ++i) {
            const auto& b = cfg.batteries[i];
            const double e = init.battery_energy[i];
            if (!(e >= b.e_min && e <= b.e_max)) {
                add("initial.batteries." + b.name + ".e", fmt::format("E_min ≤ E_init ≤ E_max ([{}, {}])", b.e_min, b.e_max), fmt_num(e));
            }
        }
    }

    if (cfg.network) {
        const auto& net = *cfg.network;
        const int n = net.n_bus();
        if (n < 1) add("network.buses", "at least one bus", "0");
        if (net.slack_bus < 0 || net.slack_bus >= n) add("network.slack_bus", "valid bus index", std::to_string(net.slack_bus));
        if (!(net.v_min < net.nominal_kv && net.nominal_kv < net.v_max)) {
            add("network", "v_min < nominal_kv < v_max", fmt::format("{}/{}/{}", net.v_min, net.nominal_kv, net.v_max));
        }
        if (!(net.v_min > 0.0)) add("network.v_min", "> 0", fmt_num(net.v_min));
        const double share = std::accumulate(net.load_share.begin(), net.load_share.end(), 0.0);
        if (std::abs(share - 1.0) > 1e-9) add("network.load_share", "Σ load_share = 1", fmt_num(share));
        for (std::size_t b = 0; b < net.load_share.size(); ++b) {
            if (net.load_share[b] < 0.0) add(fmt::format("network.buses[{}].load_share", b), "≥ 0", fmt_num(net.load_share[b]));
        }
        if (!(net.reactive_load_ratio >= 0.0)) add("network.reactive_load_ratio", "≥ 0", fmt_num(net.reactive_load_ratio));
        if (!(net.q_capability_ratio >= 0.0)) add("network.q_capability_ratio", "≥ 0", fmt_num(net.q_capability_ratio));

        // Connectivity by union-find over valid lines.
        std::vector<int> parent(static_cast<std::size_t>(std::max(n, 0)));
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            const auto& line = net.lines[l];
            const std::string f = fmt::format("network.lines[{}]", l);
            if (line.from_bus < 0 || line.from_bus >= n || line.to_bus < 0 || line.to_bus >= n || line.from_bus == line.to_bus) {
                add(f, "endpoints are two distinct valid buses", fmt::format("{}-{}", line.from_bus, line.to_bus));
                continue;
            }
            if (line.r_ohm == 0.0 && line.x_ohm == 0.0) add(f, "nonzero impedance", "0");
            parent[find(line.from_bus)] = find(line.to_bus);
        }
        for (int b = 1; b < n; ++b) {
            if (find(b) != find(0)) {
                add("network.lines", "connected bus graph", fmt::format("bus {} is isolated from bus 0", b));
                break;
            }
        }

        // Every device on exactly one bus.
        std::map<std::string, int> placed;
        for (int b = 0; b < static_cast<int>(net.bus_devices.size()); ++b) {
            for (const auto& d : net.bus_devices[b]) {
                if (!names.contains(d)) add(fmt::format("network.buses[{}].devices", b), "known device", d);
                if (!placed.emplace(d, b).second) add(fmt::format("network.buses[{}].devices", b), "device on exactly one bus", d);
            }
        }
        for (const auto& name : names) {
            if (!placed.contains(name)) add("network.buses", "every device mapped to a bus", name + " is unmapped");
        }
    }
    return out;
}

std::string format_violations(const std::vector<ScenarioViolation>& violations) {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += fmt::format("{}: {} (observed {})", v.field, v.constraint, v.observed);
    }
    return out;
}

} // namespace mgopt
