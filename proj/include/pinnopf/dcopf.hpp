#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "pinnopf/grid.hpp"
#include "pinnopf/lp.hpp"

namespace pinnopf::opf {

/// Dense per-case data used by the OPF, the loss and the verifier. Line
/// flows are ptdf_gen * pg - ptdf_load * pd.
struct Network {
    Eigen::VectorXd cost;
    Eigen::VectorXd p_min;
    Eigen::VectorXd p_max;
    Eigen::VectorXd flow_limit;
    Eigen::VectorXd pd_nominal;
    Eigen::MatrixXd ptdf_gen;  // lines x generators
    Eigen::MatrixXd ptdf_load; // lines x loads

    static Network build(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf);

    Eigen::Index n_gen() const { return cost.size(); }
    Eigen::Index n_load() const { return pd_nominal.size(); }
    Eigen::Index n_line() const { return flow_limit.size(); }
    /// Length of the dual vector layout: 1 + 2 N_g + 2 N_line.
    Eigen::Index n_dual() const { return 1 + 2 * n_gen() + 2 * n_line(); }

    Eigen::VectorXd flows(const Eigen::VectorXd& pg, const Eigen::VectorXd& pd) const;
    /// Generator range with zero ranges mapped to 1 (for normalisation).
    Eigen::VectorXd gen_scale() const;
    /// max |cost|, or 1 when all costs are zero.
    double cost_scale() const;
};

/// Multipliers of the DC-OPF in the form used by the stationarity row
///   c + lambda + mu_g_upper - mu_g_lower + ptdf_gen^T (mu_l_upper - mu_l_lower) = 0.
/// lambda is therefore minus the system marginal price.
struct DualVariables {
    double lambda = 0.0;
    Eigen::VectorXd mu_g_upper;
    Eigen::VectorXd mu_g_lower;
    Eigen::VectorXd mu_l_upper;
    Eigen::VectorXd mu_l_lower;

    /// Packed as [lambda, mu_g_upper, mu_g_lower, mu_l_upper, mu_l_lower].
    Eigen::VectorXd pack() const;
    static DualVariables unpack(const Eigen::VectorXd& packed, Eigen::Index n_gen,
                                Eigen::Index n_line);
};

struct OpfSolution {
    Eigen::VectorXd pg;
    DualVariables duals;
    double objective = 0.0;
};

struct KktResiduals {
    double eps_stat = 0.0;
    double eps_comp = 0.0;
    double eps_dual = 0.0;
    double eps_prim = 0.0;
};

struct PredictionMetrics {
    double mae_pct = 0.0;
    double v_g = 0.0;    // MW
    double v_line = 0.0; // MW
    double v_dist = 0.0; // %
    double v_opt = 0.0;  // %
    /// Generators with p_max == p_min were left out of the normalised metrics.
    bool excluded_degenerate = false;
};

struct RecoveredDuals {
    DualVariables duals;
    /// True when the active set did not determine the multipliers uniquely
    /// and the LP duals were returned instead.
    bool degenerate = false;
};

/// Variables: generator outputs. Rows: one balance equality, then for every
/// line an upper-direction and a lower-direction flow inequality.
lp::LinearProgram build_opf_lp(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf,
                               const Eigen::VectorXd& pd);
lp::LinearProgram build_opf_lp(const Network& net, const Eigen::VectorXd& pd);

/// Throws InfeasibleError when the demand cannot be served, NumericalError on
/// solver failure, DimensionError on a wrong pd length.
OpfSolution solve_dcopf(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf,
                        const Eigen::VectorXd& pd);
OpfSolution solve_dcopf(const Network& net, const Eigen::VectorXd& pd);
/// Non-throwing variant for infeasible demands.
std::optional<OpfSolution> try_solve_dcopf(const Network& net, const Eigen::VectorXd& pd);

/// Rebuilds the multipliers from the stationarity system restricted to the
/// constraints active at pg_star. Falls back to the LP duals when that system
/// is not uniquely solvable.
RecoveredDuals recover_duals_from_kkt(const Network& net, const Eigen::VectorXd& pd,
                                      const Eigen::VectorXd& pg_star);

/// Residuals in physical units. eps_dual penalises negative multipliers.
KktResiduals kkt_residuals(const Network& net, const Eigen::VectorXd& pd,
                           const Eigen::VectorXd& pg_hat, const DualVariables& duals_hat);

PredictionMetrics prediction_metrics(const Network& net, const Eigen::VectorXd& pd,
                                     const Eigen::VectorXd& pg_hat, const Eigen::VectorXd& pg_ref);

/// Max generator-limit violation (MW) of a dispatch.
double generator_violation(const Network& net, const Eigen::VectorXd& pg);
/// Max line-limit violation (MW) of a dispatch.
double line_violation(const Network& net, const Eigen::VectorXd& pg, const Eigen::VectorXd& pd);

} // namespace pinnopf::opf
