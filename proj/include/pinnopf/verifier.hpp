#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnopf/dcopf.hpp"
#include "pinnopf/milp.hpp"
#include "pinnopf/pinn.hpp"
#include "pinnopf/sampling.hpp"

namespace pinnopf::verify {

/// The pg head with the input and output scalers folded into the first and
/// last layers: it maps physical demand to physical dispatch.
struct PhysicalNet {
    std::vector<pinn::Layer> layers;

    static PhysicalNet from_params(const pinn::NetworkParams& params);
    Eigen::VectorXd forward(const Eigen::VectorXd& pd) const;
    /// Pre-activations of every hidden layer.
    std::vector<Eigen::VectorXd> pre_activations(const Eigen::VectorXd& pd) const;
};

struct LayerBounds {
    Eigen::VectorXd z_min;
    Eigen::VectorXd z_max;
};

struct NeuronBounds {
    std::vector<LayerBounds> hidden; // pre-activation bounds per hidden layer
    LayerBounds output;              // physical pg bounds

    std::size_t n_unstable() const;
    std::size_t n_hidden() const;
};

/// Interval propagation of the physical demand box through the pg head.
NeuronBounds propagate_bounds(const pinn::NetworkParams& params, const sampling::InputDomain& domain);
NeuronBounds propagate_bounds(const PhysicalNet& net, const sampling::InputDomain& domain);

enum class NeuronKind { Inactive, Active, Unstable };

struct NeuronVars {
    NeuronKind kind = NeuronKind::Inactive;
    std::size_t layer = 0;
    Eigen::Index index = 0;
    milp::LinearExpr pre; // W * previous + b in model variables
    int post = -1;        // -1 when constant zero
    int binary = -1;
    double z_min = 0.0;
    double z_max = 0.0;
};

struct NetworkEncoding {
    std::vector<int> input;  // pd variables
    std::vector<int> output; // pg_hat variables
    std::vector<NeuronVars> neurons;

    std::size_t n_binaries() const;
};

/// Adds pd variables bounded by the domain and the ReLU rows of every hidden
/// neuron. Unstable neurons get one binary and four rows; stable neurons none.
NetworkEncoding encode_network(const PhysicalNet& net, const NeuronBounds& bounds,
                               const sampling::InputDomain& domain, milp::MilpModel& model);

/// Big-M pair of one inner inequality: mu <= m_dual * r, slack <= m_primal * (1 - r).
struct ComplementarityPair {
    int dual = -1;
    int binary = -1;
    milp::LinearExpr slack; // >= 0 at any feasible point
    double m_primal = 0.0;
    double m_dual = 0.0;
};

struct KktEncoding {
    std::vector<int> pg;
    int lambda = -1;
    std::vector<int> mu_g_upper, mu_g_lower, mu_l_upper, mu_l_lower;
    std::vector<ComplementarityPair> pairs; // gen upper, gen lower, line upper, line lower
};

struct BigM {
    Eigen::VectorXd primal; // per inequality, same order as KktEncoding::pairs
    double dual = 0.0;
};

/// Primal M from the generator ranges and the largest flow reachable over the
/// domain; dual M from the cost spread and the largest PTDF row norm.
BigM default_big_m(const opf::Network& net, const sampling::InputDomain& domain);

/// Adds the inner OPF optimality conditions for the demand variables `pd`.
KktEncoding encode_opf_kkt(const opf::Network& net, const std::vector<int>& pd, const BigM& m,
                           milp::MilpModel& model);

struct ValidityReport {
    bool ok = true;
    bool complementarity_ok = true;
    bool big_m_ok = true;
    bool relu_ok = true;
    double max_complementarity = 0.0;
    /// Smallest (M - value) / M over the deactivated sides of every big-M pair.
    double min_big_m_slack = 1.0;
    std::vector<std::string> failures;
};

ValidityReport check_solution_validity(const NetworkEncoding* network, const KktEncoding* kkt,
                                       const std::vector<double>& x);

/// Completes a relaxation point into a binary assignment: ReLU phases from a
/// forward pass at its demand, and (with kkt) the active set of the OPF there.
milp::Heuristic make_heuristic(const PhysicalNet* physical, const NetworkEncoding* network,
                               const opf::Network& net, const KktEncoding* kkt, const std::vector<int>& pd_vars,
                               std::size_t n_vars);

enum class WorstCaseKind { GenViolation, LineViolation, Distance, Suboptimality };
const char* to_string(WorstCaseKind kind);

struct Certificate {
    double incumbent = 0.0;
    double best_bound = 0.0;
    std::size_t nodes = 0;
    std::size_t milps_solved = 0;
    std::size_t milps_skipped = 0;
};

struct WorstCase {
    WorstCaseKind kind = WorstCaseKind::GenViolation;
    double value = 0.0;
    std::string units;
    /// Secondary figure: % of total maximum load for MW results, % of the
    /// inner optimal cost for sub-optimality, equal to value otherwise.
    double value_pct = 0.0;
    std::string pct_basis;
    Eigen::VectorXd argmax_pd;
    /// Which generator / line and direction attains the value, e.g. "gen 3 upper".
    std::string argmax_label;
    double bound_gap = 0.0;
    Certificate certificate;
    bool verified = true;
    std::vector<std::string> notes;
    /// The metric recomputed from argmax_pd with forward / solve_dcopf.
    double resimulated = 0.0;
};

struct VerifyOptions {
    std::size_t node_limit = 200000;
    unsigned threads = 1;
    int max_big_m_doublings = 3;
    bool use_heuristic = true;
};

WorstCase worst_case_gen_violation(const pinn::NetworkParams& params, const opf::Network& net,
                                   const sampling::InputDomain& domain, const VerifyOptions& options = {});
WorstCase worst_case_line_violation(const pinn::NetworkParams& params, const opf::Network& net,
                                    const sampling::InputDomain& domain, const VerifyOptions& options = {});
WorstCase worst_case_distance(const pinn::NetworkParams& params, const opf::Network& net,
                              const sampling::InputDomain& domain, const VerifyOptions& options = {});
WorstCase worst_case_suboptimality(const pinn::NetworkParams& params, const opf::Network& net,
                                   const sampling::InputDomain& domain, const VerifyOptions& options = {});

/// Metric behind each kind at one demand, computed without the MILP.
/// Returns nullopt for Distance / Suboptimality when the OPF is infeasible.
std::optional<double> true_metric(WorstCaseKind kind, const pinn::NetworkParams& params, const opf::Network& net,
                                  const Eigen::VectorXd& pd);

} // namespace pinnopf::verify
