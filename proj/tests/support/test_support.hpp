#pragma once

// Helpers shared by the unit and acceptance binaries: temporary directories,
// small scenario documents, hand-rolled random generators and dense oracles.

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgopt/cli_report.hpp"
#include "mgopt/csv.hpp"
#include "mgopt/math_program.hpp"
#include "mgopt/network.hpp"
#include "mgopt/opf_model.hpp"
#include "mgopt/scenario_io.hpp"

namespace mgopt::testing {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef MGOPT_SCENARIO_DIR
#error "MGOPT_SCENARIO_DIR must point at the bundled scenarios"
#endif

inline fs::path scenario_dir() { return fs::path(MGOPT_SCENARIO_DIR); }
inline fs::path bundled(const std::string& name) { return scenario_dir() / (name + ".json"); }

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("mgopt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    os << text;
}

inline void write_json(const fs::path& p, const json& doc) { write_file(p, doc.dump(2)); }

/// Writes `columns` (all of equal length) as a CSV with an `hour` column.
inline void write_columns(const fs::path& p, const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
    std::ofstream os(p, std::ios::binary);
    os << "hour";
    for (const auto& [name, _] : columns) os << ',' << name;
    os << '\n';
    const std::size_t n = columns.empty() ? 0 : columns.front().second.size();
    for (std::size_t r = 0; r < n; ++r) {
        os << r;
        for (const auto& [_, v] : columns) os << ',' << csv::format_number(v[r]);
        os << '\n';
    }
}

inline json series_block(const std::string& file, const std::vector<std::string>& names) {
    json s = json::object();
    for (const auto& n : names) s[n] = {{"path", file}, {"column", n}};
    return s;
}

inline json generator_json(const std::string& name, double a, double b, double c, double p_max, double ramp,
                           double p_min = 0.0) {
    return {{"name", name}, {"a", a}, {"b", b}, {"c", c}, {"p_min", p_min}, {"p_max", p_max}, {"ramp_up", ramp}};
}

/// Mini scenario: two generators, one battery and synthetic load/prices over
/// `horizon` steps, written into `dir`. Generator G1 starts committed at 2 MW.
inline json mini_scenario(const fs::path& dir, std::uint64_t seed, bool grid_tied, int horizon = 4) {
    SyntheticDataSpec spec;
    spec.days = 1;
    spec.seed = seed;
    spec.mean_load = 3.0;
    spec.load_amplitude = 1.0;
    spec.load_noise = 0.3;
    const std::string file = "mini_" + std::to_string(seed) + ".csv";
    {
        std::ofstream os(dir / file, std::ios::binary);
        write_synthetic_csv(os, spec);
    }
    json doc = {
        {"name", "mini_" + std::to_string(seed) + (grid_tied ? "_grid" : "_island")},
        {"horizon", {{"T", horizon}, {"dt", 1}}},
        {"generators",
         {generator_json("G1", 40, 22, 1.5, 4, 2.5), generator_json("G2", 15, 34, 0.8, 3, 3)}},
        {"batteries",
         {{{"name", "B1"}, {"p_max", 1.5}, {"e_max", 3}, {"e_min", {{"fraction_of_e_max", 0.15}}}, {"eta", 0.95}, {"op_cost", 2}}}},
        {"series", series_block(file, {"load", "price_buy", "price_sell"})},
        {"initial", {{"generators", {{"G1", {{"p", 2.0}, {"u", 1}}}}}}},
    };
    doc["generators"][0]["startup_cost"] = 3.0;
    doc["generators"][1]["startup_cost"] = 1.0;
    doc["generators"][1]["shutdown_cost"] = 0.5;
    if (grid_tied) doc["tariff"] = {{"buy_series", "price_buy"}, {"sell_series", "price_sell"}, {"grid_power_limit", 3}};
    else doc["islanded"] = true;
    return doc;
}

inline ScenarioConfig mini_config(const fs::path& dir, std::uint64_t seed, bool grid_tied, int horizon = 4) {
    return parse_scenario_json(mini_scenario(dir, seed, grid_tied, horizon), dir);
}

/// Lossless triangle, Z = j1 ohm on every edge, 6 kV nominal.
inline NetworkModel triangle_network() {
    NetworkModel net;
    net.bus_names = {"Bus1", "Bus2", "Bus3"};
    net.lines = {{0, 1, 0.0, 1.0}, {1, 2, 0.0, 1.0}, {0, 2, 0.0, 1.0}};
    net.bus_devices = {{}, {}, {}};
    net.load_share = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    return net;
}

inline NetworkModel two_bus_network() {
    NetworkModel net;
    net.bus_names = {"Slack", "Load"};
    net.lines = {{0, 1, 0.0, 1.0}};
    net.bus_devices = {{}, {}};
    net.load_share = {0.0, 1.0};
    return net;
}

// --- random instances ----------------------------------------------------

struct Rng {
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine); }
    std::mt19937_64 engine;
};

/// Dense view of a random QP used by both the solver and the oracle.
struct DenseQp {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_in;
    Eigen::VectorXd b_in;
    Eigen::VectorXd lb, ub;
};

inline MathProgram to_program(const DenseQp& d) {
    ProgramBuilder b;
    const int n = static_cast<int>(d.c.size());
    for (int j = 0; j < n; ++j) b.add_var("x[" + std::to_string(j) + "]", d.lb[j], d.ub[j], d.c[j]);
    for (int i = 0; i < n; ++i) {
        if (d.Q(i, i) != 0.0) b.add_quadratic(i, i, 0.5 * d.Q(i, i));
        for (int j = i + 1; j < n; ++j) {
            if (d.Q(i, j) != 0.0) b.add_quadratic(i, j, d.Q(i, j));
        }
    }
    auto row = [&](const Eigen::MatrixXd& A, int i) {
        std::vector<std::pair<int, double>> t;
        for (int j = 0; j < n; ++j) t.emplace_back(j, A(i, j));
        return t;
    };
    for (int i = 0; i < d.A_eq.rows(); ++i) b.add_eq("eq[" + std::to_string(i) + "]", row(d.A_eq, i), d.b_eq[i]);
    for (int i = 0; i < d.A_in.rows(); ++i) b.add_le("in[" + std::to_string(i) + "]", row(d.A_in, i), d.b_in[i]);
    return b.build();
}

/// Strictly convex, equality constrained, free variables; n <= 20.
inline DenseQp random_equality_qp(Rng& rng) {
    const int n = rng.integer(2, 20);
    const int m = rng.integer(1, n - 1);
    DenseQp d;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = rng.uniform(-1, 1);
    d.Q = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    d.c.resize(n);
    for (auto& v : d.c) v = rng.uniform(-1, 1);
    d.A_eq.resize(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) d.A_eq(i, j) = rng.uniform(-1, 1);
    d.b_eq.resize(m);
    for (auto& v : d.b_eq) v = rng.uniform(-1, 1);
    d.A_in.resize(0, n);
    d.b_in.resize(0);
    d.lb = Eigen::VectorXd::Constant(n, -kInf);
    d.ub = Eigen::VectorXd::Constant(n, kInf);
    return d;
}

/// Convex (sometimes only PSD or linear), boxed, with equality and inequality
/// rows that keep a random interior point feasible.
inline DenseQp random_inequality_qp(Rng& rng) {
    const int n = rng.integer(2, 20);
    const int me = rng.integer(0, std::min(2, n - 1));
    const int mi = rng.integer(1, 8);
    DenseQp d;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = rng.uniform(-1, 1);
    const int kind = rng.integer(0, 3);
    d.Q = kind == 0 ? Eigen::MatrixXd::Zero(n, n) : Eigen::MatrixXd(M * M.transpose());
    if (kind == 1) {
        // Rank-deficient PSD.
        Eigen::MatrixXd L = M.leftCols(std::max(1, n / 3));
        d.Q = L * L.transpose();
    }
    d.c.resize(n);
    for (auto& v : d.c) v = rng.uniform(-1, 1);
    d.lb.resize(n);
    d.ub.resize(n);
    Eigen::VectorXd x0(n);
    for (int j = 0; j < n; ++j) {
        d.lb[j] = -1.0 - rng.uniform(0, 1);
        d.ub[j] = 1.0 + rng.uniform(0, 1);
        x0[j] = rng.uniform(-1, 1);
    }
    d.A_eq.resize(me, n);
    for (int i = 0; i < me; ++i)
        for (int j = 0; j < n; ++j) d.A_eq(i, j) = rng.uniform(-1, 1);
    d.b_eq = d.A_eq * x0;
    d.A_in.resize(mi, n);
    for (int i = 0; i < mi; ++i)
        for (int j = 0; j < n; ++j) d.A_in(i, j) = rng.uniform(-1, 1);
    d.b_in = d.A_in * x0;
    for (auto& v : d.b_in) v += rng.uniform(0, 0.3);
    return d;
}

/// Direct solve of [Q A'; A 0][x; y] = [-c; b].
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> kkt_oracle(const DenseQp& d) {
    const int n = static_cast<int>(d.c.size());
    const int m = static_cast<int>(d.b_eq.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = d.Q;
    K.topRightCorner(n, m) = d.A_eq.transpose();
    K.bottomLeftCorner(m, n) = d.A_eq;
    Eigen::VectorXd rhs(n + m);
    rhs << -d.c, d.b_eq;
    const Eigen::VectorXd s = K.fullPivLu().solve(rhs);
    return {s.head(n), s.tail(m)};
}

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
    double dual_sign = 0.0;  // most negative inequality/bound multiplier, as a positive number

    double worst() const { return std::max({stationarity, primal, complementarity, dual_sign}); }
};

/// Residuals recomputed from the dense data and the returned multipliers.
inline KktResiduals kkt_residuals(const DenseQp& d, const Eigen::VectorXd& x, const Eigen::VectorXd& y_eq,
                                  const Eigen::VectorXd& y_in, const Eigen::VectorXd& zl, const Eigen::VectorXd& zu) {
    KktResiduals r;
    Eigen::VectorXd g = d.Q * x + d.c - zl + zu;
    if (d.A_eq.rows()) g += d.A_eq.transpose() * y_eq;
    if (d.A_in.rows()) g += d.A_in.transpose() * y_in;
    r.stationarity = g.lpNorm<Eigen::Infinity>();
    if (d.A_eq.rows()) r.primal = (d.A_eq * x - d.b_eq).lpNorm<Eigen::Infinity>();
    for (int i = 0; i < d.A_in.rows(); ++i) {
        const double s = d.b_in[i] - d.A_in.row(i).dot(x);
        r.primal = std::max(r.primal, -s);
        r.complementarity = std::max(r.complementarity, std::abs(s * y_in[i]));
        r.dual_sign = std::max(r.dual_sign, -y_in[i]);
    }
    for (int j = 0; j < x.size(); ++j) {
        r.primal = std::max({r.primal, d.lb[j] - x[j], x[j] - d.ub[j]});
        if (std::isfinite(d.lb[j])) r.complementarity = std::max(r.complementarity, std::abs((x[j] - d.lb[j]) * zl[j]));
        if (std::isfinite(d.ub[j])) r.complementarity = std::max(r.complementarity, std::abs((d.ub[j] - x[j]) * zu[j]));
        r.dual_sign = std::max({r.dual_sign, -zl[j], -zu[j]});
    }
    return r;
}

// --- power-flow oracles -------------------------------------------------------

/// P_l, Q_l written out term by term in polar form.
inline std::pair<std::vector<double>, std::vector<double>> polar_injections(const std::vector<double>& v,
                                                                            const std::vector<double>& delta,
                                                                            const ComplexMatrix& Y) {
    const int n = static_cast<int>(v.size());
    std::vector<double> p(n, 0.0), q(n, 0.0);
    for (int l = 0; l < n; ++l) {
        for (int j = 0; j < n; ++j) {
            const double g = Y(l, j).real();
            const double b = Y(l, j).imag();
            const double th = delta[l] - delta[j];
            p[l] += v[l] * v[j] * (g * std::cos(th) + b * std::sin(th));
            q[l] += v[l] * v[j] * (g * std::sin(th) - b * std::cos(th));
        }
    }
    return {p, q};
}

/// Central differences of bus_injections, column order [delta.., V..].
inline Eigen::MatrixXd fd_jacobian(const std::vector<double>& v, const std::vector<double>& delta, const ComplexMatrix& Y,
                                   double h) {
    const int n = static_cast<int>(v.size());
    Eigen::MatrixXd J(2 * n, 2 * n);
    for (int k = 0; k < 2 * n; ++k) {
        auto vp = v, vm = v, dp = delta, dm = delta;
        if (k < n) {
            dp[k] += h;
            dm[k] -= h;
        } else {
            vp[k - n] += h;
            vm[k - n] -= h;
        }
        const auto [pp, qp] = polar_injections(vp, dp, Y);
        const auto [pm, qm] = polar_injections(vm, dm, Y);
        for (int r = 0; r < n; ++r) {
            J(r, k) = (pp[r] - pm[r]) / (2 * h);
            J(n + r, k) = (qp[r] - qm[r]) / (2 * h);
        }
    }
    return J;
}

} // namespace mgopt::testing
