#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

#include "mgopt/cli_report.hpp"
#include "mgopt/csv.hpp"
#include "mgopt/error.hpp"

namespace mgopt {

namespace {

constexpr double kWindPersistence = 0.85;
constexpr double kWindInnovation = 1.6;  // m/s
constexpr double kGustProbability = 0.05;
constexpr double kMaxWind = 30.0;

} // namespace

void validate_spec(const SyntheticDataSpec& s) {
    auto require = [](bool ok, const char* flag, const std::string& what) {
        if (!ok) throw ModelError(fmt::format("--{}: {}", flag, what));
    };
    require(s.days >= 1 && s.days <= 3660, "days", fmt::format("must be in [1, 3660], got {}", s.days));
    require(std::isfinite(s.mean_load) && s.mean_load > 0.0, "mean-load", "must be positive");
    require(std::isfinite(s.load_amplitude) && s.load_amplitude >= 0.0, "load-amplitude", "must be non-negative");
    require(std::isfinite(s.load_noise) && s.load_noise >= 0.0, "load-noise", "must be non-negative");
    require(s.load_amplitude < s.mean_load, "load-amplitude", "must be below the mean load so load stays positive");
    require(std::isfinite(s.mean_wind) && s.mean_wind >= 0.0 && s.mean_wind < kMaxWind, "mean-wind", "must be in [0, 30) m/s");
    require(std::isfinite(s.peak_irradiance) && s.peak_irradiance >= 0.0 && s.peak_irradiance <= 1500.0, "peak-irradiance",
            "must be in [0, 1500] W/m2");
    require(std::isfinite(s.price_offpeak) && s.price_offpeak >= 0.0, "price-offpeak", "must be non-negative");
    require(std::isfinite(s.price_peak) && s.price_peak >= s.price_offpeak, "price-peak", "must be at least the off-peak price");
    require(std::isfinite(s.sell_ratio) && s.sell_ratio >= 0.0 && s.sell_ratio <= 1.0, "sell-ratio", "must be in [0, 1]");
}

void write_synthetic_csv(std::ostream& os, const SyntheticDataSpec& s) {
    validate_spec(s);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const int hours = 24 * s.days;
    std::vector<double> load(hours);
    for (int h = 0; h < hours; ++h) {
        const int hd = h % 24;
        load[h] = s.mean_load + s.load_amplitude * std::sin(two_pi * (hd - 9) / 24.0) + s.load_noise * unit(rng);
    }
    // Re-centre so the sample mean is exactly the requested one, then keep
    // strictly positive.
    double mean = 0.0;
    for (double v : load) mean += v;
    mean /= hours;
    for (double& v : load) v = std::max(0.05 * s.mean_load, v - mean + s.mean_load);

    std::vector<double> clear_sky(s.days);
    for (double& c : clear_sky) c = 0.35 + 0.65 * uniform(rng);

    csv::write_row(os, {"hour", "load", "wind_speed", "irradiance", "temperature", "price_buy", "price_sell"});
    double wind = s.mean_wind;
    for (int h = 0; h < hours; ++h) {
        const int hd = h % 24;
        const double sun = std::max(0.0, std::sin(std::numbers::pi * (hd - 6) / 12.0));
        double g = s.peak_irradiance * clear_sky[h / 24] * sun;
        if (g > 0.0) g = std::max(0.0, g * (1.0 + 0.08 * unit(rng)));
        const double temp = 15.0 + 7.0 * std::sin(two_pi * (hd - 9) / 24.0) + 0.03 * g / 10.0 + 0.8 * unit(rng);

        wind = s.mean_wind + kWindPersistence * (wind - s.mean_wind) + kWindInnovation * unit(rng);
        double w = wind;
        if (uniform(rng) < kGustProbability) w += 4.0 + 4.0 * uniform(rng);
        w = std::clamp(w, 0.0, kMaxWind);

        const double buy = (hd >= 8 && hd < 20) ? s.price_peak : s.price_offpeak;
        csv::write_row(os, {std::to_string(h), csv::format_number(load[h]), csv::format_number(w), csv::format_number(g),
                            csv::format_number(temp), csv::format_number(buy), csv::format_number(s.sell_ratio * buy)});
    }
}

int cmd_gen_data(const SyntheticDataSpec& spec, const std::filesystem::path& out, std::ostream& log) {
    try {
        validate_spec(spec);
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    }
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    std::ofstream os(out, std::ios::binary);
    if (!os) {
        log << "error: cannot write '" << out.string() << "'\n";
        return kExitInput;
    }
    write_synthetic_csv(os, spec);
    log << fmt::format("wrote {} hours to {}\n", 24 * spec.days, out.string());
    return kExitOk;
}

} // namespace mgopt
