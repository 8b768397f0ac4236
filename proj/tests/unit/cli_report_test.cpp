#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mgopt/cli_report.hpp"
#include "mgopt/csv.hpp"
#include "mgopt/error.hpp"
#include "../support/test_support.hpp"

using namespace mgopt;
using namespace mgopt::testing;

namespace {

// run_cli with the log stream silenced.
int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mgopt");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream sink;
    auto* old = std::cerr.rdbuf(sink.rdbuf());
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cerr.rdbuf(old);
    return rc;
}

DispatchSolution zero_solution(const ScenarioConfig& cfg) {
    const VariableLayout layout = build_layout(cfg);
    return extract_solution(Vector::Zero(layout.total_count()), layout, cfg);
}

fs::path write_mini(const TempDir& dir, std::uint64_t seed, bool grid, int horizon = 4) {
    const fs::path p = dir / ("mini_" + std::to_string(seed) + ".json");
    write_json(p, mini_scenario(dir.path(), seed, grid, horizon));
    return p;
}

} // namespace

TEST_CASE("shutdown counts") {
    TempDir dir("cli");
    const auto cfg = mini_config(dir.path(), 61, true);
    auto sol = zero_solution(cfg);
    for (auto& u : sol.commitment) std::fill(u.begin(), u.end(), 1);
    auto k = compute_kpis(sol, cfg);
    CHECK(k.shutdown_counts.at("G1") == 0);
    CHECK(k.shutdown_counts.at("G2") == 0);
    REQUIRE(k.grid_shutdown_count.has_value());
    CHECK(*k.grid_shutdown_count == 4);  // zero exchange every hour

    sol.commitment[0] = {1, 0, 0, 1};
    sol.grid_power = {0.5, 0.0, -1e-7, 2.0};
    k = compute_kpis(sol, cfg);
    CHECK(k.shutdown_counts.at("G1") == 2);
    CHECK(*k.grid_shutdown_count == 2);

    const auto island = mini_config(dir.path(), 61, false);
    CHECK_FALSE(compute_kpis(zero_solution(island), island).grid_shutdown_count.has_value());
}

TEST_CASE("utilization and battery figures") {
    const auto cfg = parse_scenario(bundled("table1_week"));
    const auto fc = compute_forecasts(cfg);
    auto sol = zero_solution(cfg);
    for (std::size_t i = 0; i < fc.pv.size(); ++i) {
        for (int t = 0; t < sol.horizon; ++t) sol.pv_power[i][t] = fc.pv[i][t];
    }
    for (std::size_t i = 0; i < fc.wind.size(); ++i) {
        for (int t = 0; t < sol.horizon; ++t) sol.wind_power[i][t] = fc.wind[i][t];
    }
    auto k = compute_kpis(sol, cfg);
    CHECK(k.pv_utilization == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(k.wind_utilization == doctest::Approx(1.0).epsilon(1e-15));

    for (auto& w : sol.wind_power) {
        for (auto& p : w) p *= 0.25;
    }
    k = compute_kpis(sol, cfg);
    CHECK(k.wind_utilization == doctest::Approx(0.25).epsilon(1e-12));

    sol.battery_charge[0][3] = 1.5;
    sol.battery_discharge[0][7] = 0.5;
    sol.battery_energy[0] = std::vector<double>(sol.horizon, 4.0);
    sol.battery_energy[0][5] = 2.5;
    sol.battery_energy[0][9] = 7.0;
    k = compute_kpis(sol, cfg);
    const auto& b = k.batteries.at(cfg.batteries[0].name);
    CHECK(b.throughput_mwh == doctest::Approx(2.0));
    CHECK(b.e_min == 2.5);
    CHECK(b.e_max == 7.0);

    // Invariants: counts within [0, T], utilization within [0, 1].
    for (const auto& [name, n] : k.shutdown_counts) {
        CHECK(n >= 0);
        CHECK(n <= sol.horizon);
    }
    CHECK(k.pv_utilization >= 0.0);
    CHECK(k.pv_utilization <= 1.0);
}

TEST_CASE("KPI decomposition sums to the total and lands in kpi_json") {
    TempDir dir("cli");
    const auto cfg = mini_config(dir.path(), 62, true);
    const auto layout = build_layout(cfg);
    const auto prog = assemble_dispatch(cfg, layout, compute_forecasts(cfg));
    const auto r = solve_miqp(prog);
    REQUIRE(r.ok());
    const auto sol = extract_solution(r.x, layout, cfg);
    const auto k = compute_kpis(sol, cfg);
    CHECK(k.costs.total() == doctest::Approx(k.total_cost).epsilon(1e-6));
    CHECK(k.total_cost == doctest::Approx(r.objective).epsilon(1e-6));
    CHECK(k.violations.empty());

    const auto j = kpi_json(k, cfg);
    double sum = j.at("costs").at("grid").get<double>() + j.at("costs").at("balance_penalty").get<double>();
    for (const char* group : {"generators", "batteries", "pv", "wind"}) {
        for (const auto& [name, v] : j.at("costs").at(group).items()) sum += v.get<double>();
    }
    CHECK(sum == doctest::Approx(j.at("total_cost").get<double>()).epsilon(1e-6));
}

TEST_CASE("trajectory files round-trip") {
    TempDir dir("cli");
    const auto cfg = mini_config(dir.path(), 63, true);
    const auto layout = build_layout(cfg);
    const auto r = solve_miqp(assemble_dispatch(cfg, layout, compute_forecasts(cfg)));
    REQUIRE(r.ok());
    const auto sol = extract_solution(r.x, layout, cfg);
    {
        std::ofstream os(dir / "trajectories.csv", std::ios::binary);
        write_trajectories(os, sol, cfg);
    }
    const auto back = read_trajectories(dir / "trajectories.csv", cfg);
    CHECK(back.gen_power == sol.gen_power);
    CHECK(back.commitment == sol.commitment);
    CHECK(back.battery_energy == sol.battery_energy);
    CHECK(back.battery_charge == sol.battery_charge);
    CHECK(back.grid_buy == sol.grid_buy);
    CHECK(back.grid_sell == sol.grid_sell);

    write_file(dir / "broken.csv", "t,device,quantity,value\n0,G1,P,1.0\n");
    CHECK_THROWS_AS(read_trajectories(dir / "broken.csv", cfg), ScenarioError);
}

TEST_CASE("dispatch command writes a verifiable run directory") {
    TempDir dir("cli");
    const fs::path scenario = write_mini(dir, 64, true);
    const fs::path out = dir / "out";
    REQUIRE(cli({"dispatch", scenario.string(), "--out", out.string(), "--gap", "1e-6"}) == kExitOk);
    const fs::path run = out / "mini_64_dispatch";
    for (const char* f : {"trajectories.csv", "kpi.json", "manifest.json", "plotdata/generation_stack.csv",
                          "plotdata/bess_energy.csv", "plotdata/renewable_dispatch.csv"}) {
        CHECK(fs::exists(run / f));
    }

    const json m = json::parse(read_file(run / "manifest.json"));
    CHECK(m.at("command") == "dispatch");
    CHECK(m.at("status") == "optimal");
    CHECK(m.at("horizon") == 4);
    CHECK(m.at("options").at("rel_gap").get<double>() == 1e-6);
    CHECK(m.at("violations") == 0);
    CHECK(m.at("runtime_s").get<double>() >= 0.0);
    const std::string hash = m.at("scenario_sha256");
    CHECK(hash.size() == 64);
    CHECK(hash == scenario_hash(scenario, parse_scenario(scenario)));

    CHECK(cli({"validate", scenario.string(), run.string()}) == kExitOk);

    // Corrupt one generator value and the validator names it.
    std::string traj = read_file(run / "trajectories.csv");
    const auto pos = traj.find("\n2,G1,P,");
    REQUIRE(pos != std::string::npos);
    const auto end = traj.find('\n', pos + 1);
    traj.replace(pos, end - pos, "\n2,G1,P,3.95");
    write_file(run / "trajectories.csv", traj);
    std::ostringstream log;
    CHECK(cmd_validate(scenario, run, log) == kExitInfeasible);
    CHECK(log.str().find("G1") != std::string::npos);
    CHECK(log.str().find("violation") != std::string::npos);
}

TEST_CASE("scenario hash covers the series files") {
    TempDir dir("cli");
    const fs::path scenario = write_mini(dir, 65, true);
    const auto cfg = parse_scenario(scenario);
    const std::string h1 = scenario_hash(scenario, cfg);
    CHECK(h1 == scenario_hash(scenario, cfg));
    std::ofstream(dir / "mini_65.csv", std::ios::app) << "\n";
    CHECK(scenario_hash(scenario, cfg) != h1);
}

TEST_CASE("exit codes for bad inputs") {
    TempDir dir("cli");
    CHECK(cli({"dispatch", (dir / "missing.json").string(), "--out", (dir / "o").string()}) == kExitInput);
    CHECK(cli({"opf", bundled("table1_week").string(), "--out", (dir / "o").string()}) == kExitInput);
    std::ostringstream log;
    RunOptions ro;
    ro.out_dir = dir / "o";
    CHECK(cmd_run_opf(bundled("table1_week"), ro, log) == kExitInput);
    CHECK(log.str().find("no network") != std::string::npos);

    CHECK(cli({"validate", bundled("table1_week").string(), (dir / "nothing").string()}) == kExitInput);
    CHECK(cli({"bogus"}) != kExitOk);
    CHECK(cli({"dispatch", bundled("table1_week").string(), "--gap", "-1"}) != kExitOk);
}

TEST_CASE("over-capacity hour exits 2 naming the hour") {
    TempDir dir("cli");
    json doc = mini_scenario(dir.path(), 66, false);
    std::vector<double> load{3.0, 3.0, 40.0, 3.0};
    write_columns(dir / "peak.csv", {{"load", load}});
    doc["series"] = series_block("peak.csv", {"load"});
    const fs::path scenario = dir / "peak.json";
    write_json(scenario, doc);
    std::ostringstream log;
    RunOptions ro;
    ro.out_dir = dir / "o";
    CHECK(cmd_run_dispatch(scenario, ro, log) == kExitInfeasible);
    CHECK(log.str().find("balance[2]") != std::string::npos);
}

TEST_CASE("opf command on the bundled 3-bus day") {
    TempDir dir("cli");
    const fs::path out = dir / "out";
    REQUIRE(cli({"opf", bundled("table1_3bus_day").string(), "--out", out.string()}) == kExitOk);
    const fs::path run = out / "table1_3bus_day_opf";
    CHECK(fs::exists(run / "buses.csv"));
    CHECK(fs::exists(run / "plotdata/bus_pqv.csv"));
    const json k = json::parse(read_file(run / "kpi.json"));
    REQUIRE(k.at("buses").size() == 3);
    for (const auto& [name, b] : k.at("buses").items()) {
        CHECK(b.at("v_min_kv").get<double>() >= 5.4 - 1e-6);
        CHECK(b.at("v_max_kv").get<double>() <= 6.6 + 1e-6);
    }
    CHECK(json::parse(read_file(run / "manifest.json")).at("runtime_s").get<double>() >= 0.0);
    CHECK(cli({"validate", bundled("table1_3bus_day").string(), run.string()}) == kExitOk);
}

TEST_CASE("gen-data is seeded and honours the mean load") {
    TempDir dir("cli");
    const std::string a = (dir / "a.csv").string();
    const std::string b = (dir / "b.csv").string();
    REQUIRE(cli({"gen-data", "--days", "7", "--seed", "42", "--out", a}) == kExitOk);
    REQUIRE(cli({"gen-data", "--days", "7", "--seed", "42", "--out", b}) == kExitOk);
    CHECK(read_file(a) == read_file(b));
    REQUIRE(cli({"gen-data", "--days", "7", "--seed", "43", "--out", b}) == kExitOk);
    CHECK(read_file(a) != read_file(b));

    const auto load = load_timeseries_csv(a, "load");
    CHECK(load.size() == 168);
    const double mean = std::accumulate(load.values.begin(), load.values.end(), 0.0) / load.size();
    CHECK(std::abs(mean - 5.0) < 0.1);
    const auto buy = load_timeseries_csv(a, "price_buy");
    const auto sell = load_timeseries_csv(a, "price_sell");
    for (std::size_t t = 0; t < buy.size(); ++t) CHECK(sell[t] <= buy[t]);

    CHECK(cli({"gen-data", "--days", "0", "--out", a}) != kExitOk);
    SyntheticDataSpec bad;
    bad.days = 0;
    CHECK_THROWS_AS(validate_spec(bad), ModelError);
    bad = {};
    bad.sell_ratio = 1.5;
    CHECK_THROWS_AS(validate_spec(bad), ModelError);
}
