#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mgopt {

enum class Unit { MW, DollarPerMWh, MetersPerSecond, WattsPerSquareMeter, Celsius };

std::string_view unit_name(Unit unit);

/// Accepts the canonical names plus ASCII spellings ("W/m2", "degC", "C").
std::optional<Unit> parse_unit(std::string_view text);

/// Uniformly sampled series (hourly unless dt_hours says otherwise).
struct TimeSeries {
    std::vector<double> values;
    Unit unit = Unit::MW;
    double dt_hours = 1.0;
    int start_index = 0;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t t) const { return values[t]; }

    bool operator==(const TimeSeries&) const = default;
};

/// Reads one named column of a CSV file with a header row. Every cell of the
/// column must parse as a finite number; NaN/inf and empty cells are errors
/// reporting the 1-based file line. When `unit` is not given it is inferred
/// from well-known column names (load, wind_speed, irradiance, temperature,
/// price_buy, price_sell).
TimeSeries load_timeseries_csv(const std::filesystem::path& path, std::string_view column,
                               std::optional<Unit> unit = std::nullopt);

/// P_n(t) = (P_o(t) - mean(P_o)) / std(P_o) + target_mean, with the population
/// standard deviation (divide by N).
TimeSeries normalize_load(const TimeSeries& raw, double target_mean);

/// sell(t) = ratio * buy(t), ratio in [0, 1].
TimeSeries synthesize_sell_series(const TimeSeries& buy, double ratio);

double series_mean(const std::vector<double>& values);
/// Population standard deviation.
double series_std(const std::vector<double>& values);

} // namespace mgopt
