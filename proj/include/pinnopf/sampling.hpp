#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnopf/dcopf.hpp"
#include "pinnopf/grid.hpp"

namespace pinnopf::sampling {

/// Per-load demand box.
struct InputDomain {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    /// [lo_frac, hi_frac] times each load's nominal demand.
    static InputDomain from_case(const grid::GridCase& grid, double lo_frac = 0.6, double hi_frac = 1.0);

    Eigen::Index dims() const { return lo.size(); }
    bool contains(const Eigen::VectorXd& pd, double tol = 1e-9) const;
};

/// n x dims Latin-hypercube design: per dimension each of the n equal-width
/// strata holds exactly one sample.
Eigen::MatrixXd lhs_sample(std::size_t n, const InputDomain& bounds, std::uint64_t seed);

struct LabeledRecord {
    Eigen::VectorXd pd;
    Eigen::VectorXd pg_star;
    Eigen::VectorXd duals_star; // packed, see DualVariables::pack
};

struct Dataset {
    std::string case_id;
    std::vector<LabeledRecord> labeled;
    std::vector<Eigen::VectorXd> collocation;
    std::vector<LabeledRecord> unseen_test;
    InputDomain input_domain;
    std::uint64_t seed = 0;
    std::size_t infeasible_redraws = 0;
    std::size_t degenerate_duals = 0;
};

struct Split {
    double labeled_frac = 0.2;
    double collocation_frac = 0.5;
};

struct BuildOptions {
    unsigned threads = 1;
    double lo_frac = 0.6;
    double hi_frac = 1.0;
};

/// Draws n_total LHS points; the first labeled_frac share is labeled, the next
/// collocation_frac share is left unlabeled, the rest is the unseen test pool.
/// Every point is checked for OPF feasibility; infeasible draws are redrawn
/// inside their strata (10 attempts) and then anywhere in the domain.
/// Throws ValidationError on a bad split and InfeasibleError when more than
/// half of the first draws are infeasible.
Dataset build_dataset(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf, std::size_t n_total,
                      const Split& split, std::uint64_t seed, const BuildOptions& options = {});

/// Dimension and domain checks against a case; optionally re-solves every
/// labeled record and compares within tol. Throws ValidationError.
void validate_dataset(const Dataset& ds, const opf::Network& net, bool resolve = false, double tol = 1e-6);

void save_dataset(const Dataset& ds, std::ostream& sink);
Dataset load_dataset(std::istream& source);
void save_dataset_file(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_file(const std::filesystem::path& path);

inline constexpr int kDatasetSchemaVersion = 1;

} // namespace pinnopf::sampling
