#pragma once

// Independent reference computations used only by the test suites. None of
// these route through the library code paths they are used to check.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnopf/grid.hpp"
#include "pinnopf/lp.hpp"
#include "pinnopf/pinn.hpp"

namespace pinnopf::testing {

std::string case_path(const std::string& name);

/// Line flows from a direct solve of B theta = p with theta_slack = 0.
/// The slack absorbs any imbalance in p.
Eigen::VectorXd direct_dc_flows(const grid::GridCase& grid, const Eigen::VectorXd& injection);

/// Minimum of a bounded LP by enumerating every basic solution. Returns
/// nullopt when no vertex is feasible. Variables must have finite bounds.
std::optional<double> vertex_enumeration_min(const lp::LinearProgram& program, double tol = 1e-9);

/// Connected random case with n_bus buses, a random spanning tree plus extra
/// edges, and 1..max_gen generators / 1..max_load loads.
grid::GridCase random_case(std::mt19937_64& rng, int n_bus, int max_gen = 3, int max_load = 3);

grid::GridCase two_bus_case(double cost = 10.0, double p_max = 100.0, double limit = 1000.0);
grid::GridCase three_bus_ring();

/// Two generators and one load effectively on one bus (huge line limits).
grid::GridCase two_gen_case();

/// a^T out + e^T in + constant for a network with inputs `in` and outputs `out`.
struct AffineObjective {
    Eigen::VectorXd on_output;
    Eigen::VectorXd on_input;
    double constant = 0.0;
};

/// Maximum of each objective over the box lo <= in <= hi for a ReLU stack
/// (last layer affine), found by fixing every hidden neuron's phase in turn
/// and solving one LP per phase pattern. Hidden width must total <= 16.
std::vector<double> relu_pattern_max(const std::vector<pinn::Layer>& layers, const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi, const std::vector<AffineObjective>& objectives);

} // namespace pinnopf::testing
