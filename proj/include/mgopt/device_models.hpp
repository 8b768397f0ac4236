#pragma once

#include <string>

// Closed-form device physics and cost curves. All powers are in MW, energies in
// MWh, rates in $/MWh and durations in hours.

namespace mgopt {

/// Quadratic-cost conventional generator. Cost coefficients are stored for
/// power in MW: cost($/h) = a + b*P + c*P^2. The scenario reader converts
/// kW-based coefficients on request.
struct GeneratorParams {
    std::string name;
    double a = 0.0;  // $/h while committed
    double b = 0.0;  // $/MWh
    double c = 0.0;  // $/MW^2h
    double p_min = 0.0;
    double p_max = 0.0;
    double ramp_up = 0.0;    // MW/h
    double ramp_down = 0.0;  // MW/h
    double startup_cost = 0.0;   // $ per event
    double shutdown_cost = 0.0;  // $ per event

    bool operator==(const GeneratorParams&) const = default;
};

struct BatteryParams {
    std::string name;
    double p_charge_max = 0.0;
    double p_discharge_max = 0.0;
    double e_min = 0.0;
    double e_max = 0.0;
    double eta = 1.0;      // applied on both charge and discharge
    double op_cost = 0.0;  // $/MWh of throughput (charge + discharge)

    bool operator==(const BatteryParams&) const = default;
};

struct WindTurbineParams {
    std::string name;
    double p_rated = 0.0;
    double v_cut_in = 0.0;
    double v_rated = 0.0;
    double v_cut_out = 0.0;
    double op_cost = 0.0;

    bool operator==(const WindTurbineParams&) const = default;
};

struct PvParams {
    std::string name;
    double p_stc = 0.0;
    double g_stc = 1000.0;  // W/m²
    double k_temp = -0.0047;  // 1/°C
    double t_ref = 25.0;    // °C
    double op_cost = 0.0;

    bool operator==(const PvParams&) const = default;
};

/// Piecewise power curve: zero below cut-in and above cut-out, linear between
/// cut-in and rated speed, flat at rated power up to cut-out (inclusive).
double wind_power(double v, const WindTurbineParams& p);

/// P_STC * (g / G_STC) * (1 + K * (T_ref - t_cell)), clamped at zero. The
/// temperature term is oriented reference-minus-actual.
double pv_power(double g, double t_cell, const PvParams& p);

/// a + b*P + c*P^2 in $/h.
double cg_cost(double p_mw, const GeneratorParams& g);

/// ((buy + sell)/2) * p + ((buy - sell)/2) * |p|; p > 0 is import.
double grid_exchange_cost(double p_gr, double c_buy, double c_sell);

/// e_prev + dt * (eta * p_charge - p_discharge / eta). Bounds are not applied.
double battery_step(double e_prev, double p_charge, double p_discharge, double dt, const BatteryParams& b);

inline double linear_op_cost(double p_mw, double rate) { return rate * p_mw; }

} // namespace mgopt
