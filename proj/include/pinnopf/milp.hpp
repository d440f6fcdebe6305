#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pinnopf/lp.hpp"

namespace pinnopf::milp {

struct Term {
    int var = 0;
    double coef = 0.0;
};

/// sum(coef * x[var]) + constant
struct LinearExpr {
    std::vector<Term> terms;
    double constant = 0.0;

    double evaluate(const std::vector<double>& x) const;
    LinearExpr& add(int var, double coef);
};

struct Row {
    std::vector<Term> terms;
    lp::Relation relation = lp::Relation::LessEqual;
    double rhs = 0.0;
    std::string name;
};

/// Sparse mixed-binary model; the objective is maximised.
struct MilpModel {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<bool> binary;
    std::vector<std::string> names;
    std::vector<double> objective;
    double objective_constant = 0.0;
    std::vector<Row> rows;

    int add_continuous(double lo, double hi, std::string name);
    int add_binary(std::string name);
    std::size_t add_row(std::vector<Term> terms, lp::Relation relation, double rhs, std::string name = {});
    /// lhs(expr) relation rhs, with the expression constant moved to the right.
    std::size_t add_row(const LinearExpr& expr, lp::Relation relation, double rhs, std::string name = {});
    void set_objective(const LinearExpr& expr);

    std::size_t n_vars() const { return lower.size(); }
    std::size_t n_binaries() const;
    /// Throws DimensionError / ValidationError.
    void validate() const;
    /// Minimisation form (negated objective) with dense rows.
    lp::LinearProgram to_lp() const;
};

enum class MilpStatus { Optimal, Infeasible, NodeLimit, Unbounded, NumericalFailure };
const char* to_string(MilpStatus status);

/// Proposes a value for every binary (entries for other variables ignored),
/// given the current node's LP solution. Return nullopt to skip.
using Heuristic = std::function<std::optional<std::vector<double>>(const std::vector<double>& lp_x)>;

struct MilpOptions {
    std::size_t node_limit = 200000;
    double abs_gap_target = 0.0;
    double integrality_tol = 1e-6;
    /// Only solutions strictly above this value are of interest; nodes whose
    /// bound does not exceed it are pruned.
    double cutoff = -std::numeric_limits<double>::infinity();
    Heuristic heuristic;
    /// Run the heuristic at the root and then every this many nodes.
    std::size_t heuristic_period = 25;
};

struct MilpSolution {
    MilpStatus status = MilpStatus::NumericalFailure;
    bool has_incumbent = false;
    std::vector<double> x;
    double objective = -std::numeric_limits<double>::infinity();
    /// Upper bound on the optimum (max of cutoff and open-node bounds).
    double best_bound = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    std::size_t nodes = 0;
    std::size_t lp_iterations = 0;
};

/// Best-bound branch and bound on LP relaxations. Branches on the most
/// fractional binary (lowest index on ties); open nodes are ordered by bound,
/// then by creation index. Status Optimal with has_incumbent == false means
/// the optimum does not exceed options.cutoff.
MilpSolution solve_milp(const MilpModel& model, const MilpOptions& options = {});

} // namespace pinnopf::milp
