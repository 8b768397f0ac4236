#include "mgopt/timeseries.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <numeric>

#include "mgopt/csv.hpp"
#include "mgopt/error.hpp"

namespace mgopt {

std::string_view unit_name(Unit unit) {
    switch (unit) {
    case Unit::MW: return "MW";
    case Unit::DollarPerMWh: return "$/MWh";
    case Unit::MetersPerSecond: return "m/s";
    case Unit::WattsPerSquareMeter: return "W/m²";
    case Unit::Celsius: return "°C";
    }
    return "?";
}

std::optional<Unit> parse_unit(std::string_view text) {
    if (text == "MW") return Unit::MW;
    if (text == "$/MWh") return Unit::DollarPerMWh;
    if (text == "m/s") return Unit::MetersPerSecond;
    if (text == "W/m²" || text == "W/m2") return Unit::WattsPerSquareMeter;
    if (text == "°C" || text == "degC" || text == "C") return Unit::Celsius;
    return std::nullopt;
}

namespace {

std::optional<Unit> infer_unit(std::string_view column) {
    if (column == "load") return Unit::MW;
    if (column == "wind_speed") return Unit::MetersPerSecond;
    if (column == "irradiance") return Unit::WattsPerSquareMeter;
    if (column == "temperature") return Unit::Celsius;
    if (column == "price_buy" || column == "price_sell") return Unit::DollarPerMWh;
    return std::nullopt;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace

TimeSeries load_timeseries_csv(const std::filesystem::path& path, std::string_view column,
                               std::optional<Unit> unit) {
    if (!std::filesystem::exists(path)) {
        throw ScenarioError(std::string(column), fmt::format("time series file '{}' not found", path.string()));
    }
    const csv::Table table = csv::read(path);
    if (table.header.empty()) throw ScenarioError(std::string(column), fmt::format("'{}' is empty", path.string()));
    const int col = table.column(column);
    if (col < 0) {
        throw ScenarioError(std::string(column), fmt::format("column '{}' not found in '{}'", column, path.string()));
    }
    if (table.rows.empty()) {
        throw ScenarioError(std::string(column), fmt::format("'{}' has a header but no data rows", path.string()));
    }
    if (!unit) unit = infer_unit(column);
    if (!unit) {
        throw ScenarioError(std::string(column), fmt::format("no unit given and none known for column '{}'", column));
    }

    TimeSeries series;
    series.unit = *unit;
    series.values.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.lines[r];
        if (static_cast<std::size_t>(col) >= row.size()) {
            throw ScenarioError(std::string(column), fmt::format("'{}' line {}: missing cell", path.string(), line));
        }
        const std::string_view cell = trim(row[col]);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
            throw ScenarioError(std::string(column),
                                fmt::format("'{}' line {}: non-numeric cell '{}'", path.string(), line, cell));
        }
        series.values.push_back(value);
    }
    return series;
}

double series_mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double series_std(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double mean = series_mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

TimeSeries normalize_load(const TimeSeries& raw, double target_mean) {
    if (raw.size() < 2) throw Error("load normalization needs at least 2 samples");
    const double mean = series_mean(raw.values);
    const double sd = series_std(raw.values);
    // A relative threshold: a constant series can carry rounding noise in the std.
    double scale = 0.0;
    for (double v : raw.values) scale = std::max(scale, std::abs(v));
    if (!(sd > 1e-14 * std::max(1.0, scale))) throw Error("load normalization: standard deviation is zero");

    TimeSeries out = raw;
    for (double& v : out.values) v = (v - mean) / sd + target_mean;
    return out;
}

TimeSeries synthesize_sell_series(const TimeSeries& buy, double ratio) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(fmt::format("sell ratio {} outside [0, 1]", ratio));
    TimeSeries out = buy;
    for (double& v : out.values) v *= ratio;
    return out;
}

} // namespace mgopt
