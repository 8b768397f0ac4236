#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>

#include "mgopt/dispatch_model.hpp"
#include "mgopt/error.hpp"
#include "mgopt/solvers.hpp"

namespace mgopt {

namespace {

using Fixes = std::vector<std::pair<int, double>>;

std::vector<int> binary_columns(const MathProgram& p) {
    std::vector<int> out;
    for (int j = 0; j < p.n_vars(); ++j) {
        if (j < static_cast<int>(p.is_binary.size()) && p.is_binary[j]) out.push_back(j);
    }
    return out;
}

bool is_integral(const Vector& x, const std::vector<int>& bins, double tol) {
    return std::all_of(bins.begin(), bins.end(), [&](int j) { return std::abs(x[j] - std::round(x[j])) <= tol; });
}

// Binary bounds intersected with [0, 1].
MathProgram relaxation(const MathProgram& p, const std::vector<int>& bins) {
    MathProgram r = p;
    for (int j : bins) {
        r.lb[j] = std::max(r.lb[j], 0.0);
        r.ub[j] = std::min(r.ub[j], 1.0);
    }
    return r;
}

SolveResult solve_with_binaries(const MathProgram& relaxed, const std::vector<int>& bins, const std::vector<double>& values,
                                const SolveOptions& opts) {
    Fixes fixes;
    fixes.reserve(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) fixes.emplace_back(bins[k], values[k]);
    return solve_qp(fix_variables(relaxed, fixes), opts);
}

struct Node {
    double bound = 0.0;
    long id = 0;
    Fixes fixes;
    std::vector<double> binary_values;  // relaxation values of the binaries
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

double relative_gap(double incumbent, double bound) {
    if (!std::isfinite(incumbent)) return kInf;
    return std::max(0.0, incumbent - bound) / std::max(std::abs(incumbent), 1e-9);
}

} // namespace

std::optional<SolveResult> round_and_repair(const MathProgram& p, const SolveResult& relaxed, const SolveOptions& opts) {
    const std::vector<int> bins = binary_columns(p);
    if (relaxed.x.size() != p.n_vars()) return std::nullopt;
    const MathProgram r = relaxation(p, bins);

    std::vector<double> values(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const int j = bins[k];
        if (r.lb[j] == r.ub[j]) values[k] = r.lb[j];
        else values[k] = relaxed.x[j] >= 0.5 ? 1.0 : 0.0;
    }
    std::optional<SolveResult> best;
    auto attempt = [&](const std::vector<double>& v) {
        SolveResult res = solve_with_binaries(r, bins, v, opts);
        if (!res.ok()) return false;
        if (!best || res.objective < best->objective) best = std::move(res);
        return true;
    };
    if (attempt(values)) return best;

    // Free binaries left at 0, most promising first.
    std::vector<std::size_t> off;
    for (std::size_t k = 0; k < bins.size(); ++k) {
        if (values[k] == 0.0 && r.ub[bins[k]] >= 1.0) off.push_back(k);
    }
    std::stable_sort(off.begin(), off.end(), [&](std::size_t a, std::size_t b) { return relaxed.x[bins[a]] > relaxed.x[bins[b]]; });
    auto with_prefix = [&](std::size_t n) {
        std::vector<double> v = values;
        for (std::size_t i = 0; i < n; ++i) v[off[i]] = 1.0;
        return v;
    };

    // Shortest prefix that is feasible: first every binary the relaxation
    // touches, then bisect on the threshold.
    std::size_t support = 0;
    while (support < off.size() && relaxed.x[bins[off[support]]] > opts.tol_int) ++support;
    std::size_t lo = 0;
    std::size_t hi = off.size();
    if (support > 0 && attempt(with_prefix(support))) hi = support;
    else if (!attempt(with_prefix(off.size()))) return std::nullopt;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (attempt(with_prefix(mid))) hi = mid;
        else lo = mid;
    }
    return best;
}

SolveResult solve_miqp(const MathProgram& p, const SolveOptions& opts) {
    opts.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    const std::vector<int> bins = binary_columns(p);
    const MathProgram r = relaxation(p, bins);
    SolveResult root = solve_qp(r, opts);
    root.node_count = 1;
    if (bins.empty() || !root.ok()) return root;

    long nodes = 1;
    int iterations = root.iterations;
    SolveResult best;
    best.status = SolveStatus::Infeasible;
    double best_obj = kInf;
    auto offer = [&](const SolveResult& cand) {
        if (cand.ok() && cand.objective < best_obj) {
            best = cand;
            best_obj = cand.objective;
        }
    };
    auto values_of = [&](const Vector& x) {
        std::vector<double> v(bins.size());
        for (std::size_t k = 0; k < bins.size(); ++k) v[k] = x[bins[k]];
        return v;
    };
    auto rounded = [&](const Vector& x) {
        std::vector<double> v(bins.size());
        for (std::size_t k = 0; k < bins.size(); ++k) v[k] = std::round(x[bins[k]]);
        return v;
    };

    if (is_integral(root.x, bins, opts.tol_int)) {
        SolveResult clean = solve_with_binaries(r, bins, rounded(root.x), opts);
        SolveResult out = clean.ok() ? clean : root;
        out.status = SolveStatus::Optimal;
        out.node_count = 1;
        out.iterations = iterations + clean.iterations;
        out.bound = root.objective;
        out.rel_gap = relative_gap(out.objective, root.objective);
        return out;
    }
    if (auto rep = round_and_repair(p, root, opts)) offer(*rep);

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long next_id = 0;
    open.push({root.objective, next_id++, {}, values_of(root.x)});
    bool limit_hit = false;
    long numerical_nodes = 0;
    // Subtrees dropped after a numerical failure keep their parent's bound.
    double lost_bound = kInf;
    long last_repair = 0;
    double global_bound = root.objective;

    while (!open.empty()) {
        global_bound = std::min({open.top().bound, best_obj, lost_bound});
        if (relative_gap(best_obj, global_bound) <= opts.rel_gap) break;
        if (nodes >= opts.max_bnb_nodes || (opts.time_limit_s > 0 && elapsed() > opts.time_limit_s)) {
            limit_hit = true;
            break;
        }
        Node node = open.top();
        open.pop();
        if (std::isfinite(best_obj) && relative_gap(best_obj, node.bound) <= opts.rel_gap) continue;

        std::size_t pick = 0;
        double pick_score = -1.0;
        for (std::size_t k = 0; k < bins.size(); ++k) {
            const double v = node.binary_values[k];
            const double score = std::min(v - std::floor(v), std::ceil(v) - v);
            if (score > opts.tol_int && score > pick_score) {
                pick = k;
                pick_score = score;
            }
        }
        if (pick_score < 0) continue;

        for (double val : {0.0, 1.0}) {
            Node child{0.0, next_id++, node.fixes, {}};
            child.fixes.emplace_back(bins[pick], val);
            const SolveResult cr = solve_qp(fix_variables(r, child.fixes), opts);
            ++nodes;
            iterations += cr.iterations;
            if (!cr.ok()) {
                if (cr.status != SolveStatus::Infeasible) {
                    ++numerical_nodes;
                    lost_bound = std::min(lost_bound, node.bound);
                }
                continue;
            }
            child.bound = std::max(cr.objective, node.bound);
            if (is_integral(cr.x, bins, opts.tol_int)) {
                SolveResult clean = solve_with_binaries(r, bins, rounded(cr.x), opts);
                offer(clean.ok() ? clean : cr);
                continue;
            }
            if (std::isfinite(best_obj) && relative_gap(best_obj, child.bound) <= opts.rel_gap) continue;
            if (nodes - last_repair >= opts.repair_interval) {
                last_repair = nodes;
                if (auto rep = round_and_repair(p, cr, opts)) offer(*rep);
            }
            child.binary_values = values_of(cr.x);
            open.push(std::move(child));
        }
    }
    if (open.empty()) global_bound = std::min(best_obj, lost_bound);

    SolveResult out = best;
    out.node_count = nodes;
    out.iterations = iterations;
    if (!std::isfinite(best_obj)) {
        out.status = limit_hit ? SolveStatus::NodeLimit : SolveStatus::Infeasible;
        out.message = limit_hit ? "search limit reached without a feasible commitment" : "no feasible commitment exists";
        out.bound = global_bound;
        return out;
    }
    out.bound = std::min(global_bound, best_obj);
    out.rel_gap = relative_gap(best_obj, out.bound);
    out.status = out.rel_gap > opts.rel_gap ? SolveStatus::GapFeasible : SolveStatus::Optimal;
    if (numerical_nodes) out.message = fmt::format("{} nodes discarded after numerical failure", numerical_nodes);
    return out;
}

SolveResult brute_force_binaries(const MathProgram& p, const SolveOptions& opts) {
    opts.validate();
    const std::vector<int> bins = binary_columns(p);
    if (static_cast<int>(bins.size()) > kMaxEnumeratedBinaries) {
        throw ModelError(fmt::format("{} binaries exceed the enumeration bound of {}", bins.size(), kMaxEnumeratedBinaries));
    }
    const MathProgram r = relaxation(p, bins);
    SolveResult best;
    best.status = SolveStatus::Infeasible;
    best.message = "no binary assignment is feasible";
    double best_obj = kInf;
    long solved = 0;
    const unsigned long patterns = 1ul << bins.size();
    std::vector<double> values(bins.size());
    for (unsigned long mask = 0; mask < patterns; ++mask) {
        bool admissible = true;
        for (std::size_t k = 0; k < bins.size(); ++k) {
            values[k] = (mask >> k) & 1ul ? 1.0 : 0.0;
            if (values[k] < r.lb[bins[k]] || values[k] > r.ub[bins[k]]) admissible = false;
        }
        if (!admissible) continue;
        const SolveResult res = solve_with_binaries(r, bins, values, opts);
        ++solved;
        if (res.ok() && res.objective < best_obj) {
            best = res;
            best_obj = res.objective;
        }
    }
    best.node_count = solved;
    if (std::isfinite(best_obj)) {
        best.status = SolveStatus::Optimal;
        best.bound = best_obj;
        best.rel_gap = 0.0;
    }
    return best;
}

SolveResult brute_force_dispatch(const ScenarioConfig& cfg, const SolveOptions& opts) {
    const VariableLayout layout = build_layout(cfg);
    const int n_bin = layout.count(Slot::Commitment) * layout.horizon();
    if (n_bin > kMaxEnumeratedBinaries) {
        throw ModelError(fmt::format("{} generators x {} steps = {} binaries exceed the enumeration bound of {}",
                                     layout.count(Slot::Commitment), layout.horizon(), n_bin, kMaxEnumeratedBinaries));
    }
    return brute_force_binaries(assemble_dispatch(cfg, layout, compute_forecasts(cfg)), opts);
}

} // namespace mgopt
