#include "mgopt/device_models.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "mgopt/error.hpp"

namespace mgopt {

double wind_power(double v, const WindTurbineParams& p) {
    if (!(v >= 0.0)) throw Error(fmt::format("wind speed must be nonnegative, got {}", v));
    if (v < p.v_cut_in || v > p.v_cut_out) return 0.0;
    if (v <= p.v_rated) return p.p_rated * (v - p.v_cut_in) / (p.v_rated - p.v_cut_in);
    return p.p_rated;
}

double pv_power(double g, double t_cell, const PvParams& p) {
    if (!(g >= 0.0)) throw Error(fmt::format("irradiance must be nonnegative, got {}", g));
    const double out = p.p_stc * (g / p.g_stc) * (1.0 + p.k_temp * (p.t_ref - t_cell));
    return std::max(0.0, out);
}

double cg_cost(double p_mw, const GeneratorParams& g) {
    return g.a + g.b * p_mw + g.c * p_mw * p_mw;
}

double grid_exchange_cost(double p_gr, double c_buy, double c_sell) {
    return 0.5 * (c_buy + c_sell) * p_gr + 0.5 * (c_buy - c_sell) * std::abs(p_gr);
}

double battery_step(double e_prev, double p_charge, double p_discharge, double dt, const BatteryParams& b) {
    return e_prev + dt * (b.eta * p_charge - p_discharge / b.eta);
}

} // namespace mgopt
