#pragma once

#include <string>
#include <vector>

namespace mgopt {

struct LineParams {
    int from_bus = 0;
    int to_bus = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;

    bool operator==(const LineParams&) const = default;
};

/// Multi-bus network description. Voltages are line-to-line kV and impedances
/// ohms, so |V|^2 * |Y| products come out directly in MW / MVAr.
struct NetworkModel {
    std::vector<std::string> bus_names;
    std::vector<LineParams> lines;
    double nominal_kv = 6.0;
    double v_min = 5.4;
    double v_max = 6.6;
    /// Device names attached to each bus. The grid tie, when present, sits at
    /// the slack bus and is not listed here.
    std::vector<std::vector<std::string>> bus_devices;
    int slack_bus = 0;
    std::vector<double> load_share;
    double reactive_load_ratio = 0.2;
    /// Aggregate reactive capability per bus: |Q| <= ratio * sum of P_max of
    /// the conventional generators on that bus.
    double q_capability_ratio = 0.6;

    int n_bus() const noexcept { return static_cast<int>(bus_names.size()); }

    bool operator==(const NetworkModel&) const = default;
};

} // namespace mgopt
