#include "mgopt/math_program.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mgopt/error.hpp"

namespace mgopt {

int MathProgram::n_binary() const {
    return static_cast<int>(std::count(is_binary.begin(), is_binary.end(), true));
}

double MathProgram::objective(const Vector& x) const {
    return 0.5 * x.dot(Q * x) + c.dot(x) + constant;
}

double MathProgram::max_violation(const Vector& x) const {
    double worst = 0.0;
    if (n_eq() > 0) worst = std::max(worst, (A_eq * x - b_eq).cwiseAbs().maxCoeff());
    if (n_in() > 0) worst = std::max(worst, (A_in * x - b_in).maxCoeff());
    for (int j = 0; j < n_vars(); ++j) {
        worst = std::max({worst, lb[j] - x[j], x[j] - ub[j]});
    }
    return worst;
}

std::string name_family(const std::string& name) {
    const auto pos = name.find('[');
    return pos == std::string::npos ? name : name.substr(0, pos);
}

int ProgramBuilder::add_var(std::string name, double lb, double ub, double cost, bool binary) {
    c_.push_back(cost);
    lb_.push_back(lb);
    ub_.push_back(ub);
    binary_.push_back(binary);
    var_names_.push_back(std::move(name));
    return static_cast<int>(c_.size()) - 1;
}

void ProgramBuilder::add_quadratic(int i, int j, double coeff) {
    if (coeff == 0.0) return;
    if (i == j) {
        q_.emplace_back(i, i, 2.0 * coeff);
    } else {
        q_.emplace_back(i, j, coeff);
        q_.emplace_back(j, i, coeff);
    }
}

int ProgramBuilder::add_eq(std::string name, const std::vector<std::pair<int, double>>& terms, double rhs) {
    const int row = static_cast<int>(b_eq_.size());
    for (const auto& [j, a] : terms) {
        if (a != 0.0) eq_.emplace_back(row, j, a);
    }
    b_eq_.push_back(rhs);
    eq_names_.push_back(std::move(name));
    return row;
}

int ProgramBuilder::add_le(std::string name, const std::vector<std::pair<int, double>>& terms, double rhs) {
    const int row = static_cast<int>(b_in_.size());
    for (const auto& [j, a] : terms) {
        if (a != 0.0) in_.emplace_back(row, j, a);
    }
    b_in_.push_back(rhs);
    in_names_.push_back(std::move(name));
    return row;
}

MathProgram ProgramBuilder::build() const {
    const int n = n_vars();
    MathProgram p;
    p.c = Eigen::Map<const Vector>(c_.data(), n);
    p.lb = Eigen::Map<const Vector>(lb_.data(), n);
    p.ub = Eigen::Map<const Vector>(ub_.data(), n);
    p.constant = constant_;
    p.is_binary = binary_;
    p.var_names = var_names_;
    p.eq_names = eq_names_;
    p.in_names = in_names_;
    p.Q.resize(n, n);
    p.Q.setFromTriplets(q_.begin(), q_.end());
    p.A_eq.resize(static_cast<int>(b_eq_.size()), n);
    p.A_eq.setFromTriplets(eq_.begin(), eq_.end());
    p.b_eq = Eigen::Map<const Vector>(b_eq_.data(), static_cast<int>(b_eq_.size()));
    p.A_in.resize(static_cast<int>(b_in_.size()), n);
    p.A_in.setFromTriplets(in_.begin(), in_.end());
    p.b_in = Eigen::Map<const Vector>(b_in_.data(), static_cast<int>(b_in_.size()));
    return p;
}

void check_static_bounds(const MathProgram& p) {
    std::string bad;
    for (int j = 0; j < p.n_vars(); ++j) {
        if (p.lb[j] > p.ub[j]) {
            if (!bad.empty()) bad += ", ";
            bad += fmt::format("{} (lb={} > ub={})", p.var_names[j], p.lb[j], p.ub[j]);
        }
    }
    if (!bad.empty()) throw ModelError("infeasible static bounds: " + bad);
}

namespace {

using RowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

void write_row(std::ostream& os, const RowMajor& a, int row, const std::vector<std::string>& names) {
    bool first = true;
    for (RowMajor::InnerIterator it(a, row); it; ++it) {
        os << (it.value() < 0 ? " - " : (first ? " " : " + ")) << std::abs(it.value()) << ' ' << names[it.col()];
        first = false;
    }
    if (first) os << " 0";
}

} // namespace

void write_lp(std::ostream& os, const MathProgram& p) {
    os << "\\ " << p.n_vars() << " columns, " << p.n_eq() << " equalities, " << p.n_in() << " inequalities\n";
    os << "Minimize\n obj:";
    for (int j = 0; j < p.n_vars(); ++j) {
        if (p.c[j] != 0.0) os << (p.c[j] < 0 ? " - " : " + ") << std::abs(p.c[j]) << ' ' << p.var_names[j];
    }
    if (p.Q.nonZeros() > 0) {
        os << " + [";
        for (int j = 0; j < p.Q.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(p.Q, j); it; ++it) {
                if (it.row() > j) continue;
                const double coeff = it.row() == j ? it.value() : 2.0 * it.value();
                os << (coeff < 0 ? " - " : " + ") << std::abs(coeff) << ' ' << p.var_names[it.row()];
                if (it.row() == j) {
                    os << " ^ 2";
                } else {
                    os << " * " << p.var_names[j];
                }
            }
        }
        os << " ] / 2";
    }
    if (p.constant != 0.0) os << " + " << p.constant;
    os << "\nSubject To\n";
    const RowMajor eq = p.A_eq;
    const RowMajor in = p.A_in;
    for (int i = 0; i < p.n_eq(); ++i) {
        os << ' ' << p.eq_names[i] << ':';
        write_row(os, eq, i, p.var_names);
        os << " = " << p.b_eq[i] << '\n';
    }
    for (int i = 0; i < p.n_in(); ++i) {
        os << ' ' << p.in_names[i] << ':';
        write_row(os, in, i, p.var_names);
        os << " <= " << p.b_in[i] << '\n';
    }
    os << "Bounds\n";
    for (int j = 0; j < p.n_vars(); ++j) {
        os << ' ' << p.lb[j] << " <= " << p.var_names[j] << " <= " << p.ub[j] << '\n';
    }
    os << "Binaries\n";
    for (int j = 0; j < p.n_vars(); ++j) {
        if (p.is_binary[j]) os << ' ' << p.var_names[j] << '\n';
    }
    os << "End\n";
}

} // namespace mgopt
