#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mgopt/device_models.hpp"
#include "mgopt/network.hpp"
#include "mgopt/timeseries.hpp"

namespace mgopt {

struct TariffParams {
    TimeSeries buy_price;
    TimeSeries sell_price;
    double grid_power_limit = 10.0;  // MW, symmetric

    bool operator==(const TariffParams&) const = default;
};

/// Where a named series comes from. `path` is absolute after parsing.
struct SeriesBinding {
    std::filesystem::path path;
    std::string column;
    Unit unit = Unit::MW;

    bool operator==(const SeriesBinding&) const = default;
};

struct InitialConditions {
    std::vector<double> generator_power;  // MW, aligned with generators
    std::vector<int> generator_status;    // 0/1
    std::vector<double> battery_energy;   // MWh, aligned with batteries

    bool operator==(const InitialConditions&) const = default;
};

/// Names of the weather series each renewable unit reads.
struct RenewableInputs {
    std::vector<std::string> wind_speed;   // per wind unit
    std::vector<std::string> irradiance;   // per PV unit
    std::vector<std::string> temperature;  // per PV unit

    bool operator==(const RenewableInputs&) const = default;
};

/// One fully resolved study. Every referenced series is loaded; the load
/// series is stored after optional normalization. Immutable after parse.
struct ScenarioConfig {
    std::string name;
    int horizon = 0;   // number of timesteps
    double dt = 1.0;   // hours
    std::vector<GeneratorParams> generators;
    std::vector<BatteryParams> batteries;
    std::vector<WindTurbineParams> wind_units;
    std::vector<PvParams> pv_units;
    /// Absent for islanded operation.
    std::optional<TariffParams> tariff;
    std::optional<NetworkModel> network;
    std::map<std::string, SeriesBinding> series_bindings;
    std::map<std::string, TimeSeries> series;
    std::optional<double> load_target_mean;
    RenewableInputs renewable_inputs;
    InitialConditions initial;

    bool grid_connected() const noexcept { return tariff.has_value(); }
    const TimeSeries& load() const;
    const TimeSeries& series_at(const std::string& name) const;

    bool operator==(const ScenarioConfig&) const = default;
};

struct ScenarioViolation {
    std::string field;
    std::string constraint;
    std::string observed;
};

/// Reads a scenario JSON file and every CSV series it references (paths are
/// relative to the scenario file). Throws ScenarioError naming the offending
/// field on malformed input or any invariant violation.
ScenarioConfig parse_scenario(const std::filesystem::path& path);

/// Same as parse_scenario for an in-memory document.
ScenarioConfig parse_scenario_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Canonical JSON form: costs in $/MWh, coefficients MW-based, absolute
/// series paths. parse_scenario_json(serialize_scenario(cfg)) == cfg.
nlohmann::json serialize_scenario(const ScenarioConfig& cfg);

/// Empty iff every invariant holds.
std::vector<ScenarioViolation> validate_scenario(const ScenarioConfig& cfg);

std::string format_violations(const std::vector<ScenarioViolation>& violations);

} // namespace mgopt
