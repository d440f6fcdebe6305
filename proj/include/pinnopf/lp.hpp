#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace pinnopf::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Constraint {
    std::vector<double> coeffs;
    Relation relation = Relation::LessEqual;
    double rhs = 0.0;
};

/// minimize objective^T x subject to the constraints and lower <= x <= upper.
struct LinearProgram {
    std::size_t n_vars = 0;
    std::vector<double> objective;
    std::vector<Constraint> constraints;
    std::vector<double> lower;
    std::vector<double> upper;

    LinearProgram() = default;
    /// n variables, zero cost, bounds [0, +inf).
    explicit LinearProgram(std::size_t n);

    std::size_t add_constraint(std::vector<double> coeffs, Relation relation, double rhs);
    std::size_t n_constraints() const { return constraints.size(); }

    /// Throws DimensionError / ValidationError when the invariants fail.
    void validate() const;
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(Status status);

/// Simplex basis over structural + slack columns. Used to warm start a
/// re-solve of the same constraint matrix with different bounds.
struct Basis {
    enum class State : std::uint8_t { Basic, AtLower, AtUpper, Free };
    std::vector<State> states; // size n_vars + n_rows
    std::vector<int> basic;    // column index per row
    bool empty() const { return basic.empty(); }
};

struct LpSolution {
    Status status = Status::NumericalFailure;
    std::vector<double> x;
    /// d objective / d rhs for each constraint (0 for dropped empty rows).
    std::vector<double> duals;
    /// objective_j - duals^T A_j for each structural variable.
    std::vector<double> reduced_costs;
    double objective_value = 0.0;
    std::size_t iterations = 0;
    Basis basis;
};

struct SolveOptions {
    /// Optional basis from a previous solve of the same matrix.
    const Basis* warm_start = nullptr;
    /// Bound overrides (empty span = use the program's bounds).
    std::span<const double> lower;
    std::span<const double> upper;
};

/// Bounded-variable revised simplex with dense algebra.
///
/// Phase 1 minimizes the sum of bound infeasibilities of the basic
/// variables starting from the slack basis (or the warm-start basis), then
/// phase 2 minimizes the true objective. Pricing is Dantzig's rule; after a
/// run of degenerate pivots the solver switches to Bland's smallest-index
/// rule until the objective moves again. Iteration cap is
/// 50 * (n_vars + n_constraints); exceeding it reports NumericalFailure.
LpSolution solve_lp(const LinearProgram& program, const SolveOptions& options = {});

/// Human-readable dump for bug reports.
void write_lp(std::ostream& out, const LinearProgram& program);

} // namespace pinnopf::lp
