#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace mgopt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min ½ xᵀQx + cᵀx + constant
/// s.t. A_eq x = b_eq,  A_in x ≤ b_in,  lb ≤ x ≤ ub,  x_j ∈ {0,1} where is_binary[j].
///
/// Q is stored as the full symmetric matrix. Every row and column carries a
/// name of the form `family[device,t]` so diagnostics can point at the model.
struct MathProgram {
    SparseMatrix Q;
    Vector c;
    double constant = 0.0;
    Vector lb;
    Vector ub;
    SparseMatrix A_eq;
    Vector b_eq;
    SparseMatrix A_in;
    Vector b_in;
    std::vector<bool> is_binary;
    std::vector<std::string> var_names;
    std::vector<std::string> eq_names;
    std::vector<std::string> in_names;

    int n_vars() const noexcept { return static_cast<int>(c.size()); }
    int n_eq() const noexcept { return static_cast<int>(b_eq.size()); }
    int n_in() const noexcept { return static_cast<int>(b_in.size()); }
    int n_binary() const;

    double objective(const Vector& x) const;
    /// max |A_eq x - b_eq|, max (A_in x - b_in)+, max bound excess.
    double max_violation(const Vector& x) const;
};

/// Family part of a row/column name: "ramp_up[CHP,3]" -> "ramp_up".
std::string name_family(const std::string& name);

/// Incremental builder; rows are collected as triplets and compressed at the end.
class ProgramBuilder {
public:
    int add_var(std::string name, double lb, double ub, double cost = 0.0, bool binary = false);
    /// Adds coeff * x_i * x_j to the objective (i == j gives coeff * x_i²).
    void add_quadratic(int i, int j, double coeff);
    void add_cost(int i, double coeff) { c_[i] += coeff; }
    void add_constant(double value) { constant_ += value; }
    int add_eq(std::string name, const std::vector<std::pair<int, double>>& terms, double rhs);
    int add_le(std::string name, const std::vector<std::pair<int, double>>& terms, double rhs);
    int n_vars() const noexcept { return static_cast<int>(c_.size()); }

    MathProgram build() const;

private:
    std::vector<double> c_, lb_, ub_;
    std::vector<bool> binary_;
    std::vector<std::string> var_names_, eq_names_, in_names_;
    std::vector<Eigen::Triplet<double>> q_, eq_, in_;
    std::vector<double> b_eq_, b_in_;
    double constant_ = 0.0;
};

/// Throws ModelError listing every variable with lb > ub.
void check_static_bounds(const MathProgram& p);

/// Plain-text LP-style dump with named rows and columns, for debugging.
void write_lp(std::ostream& os, const MathProgram& p);

} // namespace mgopt
