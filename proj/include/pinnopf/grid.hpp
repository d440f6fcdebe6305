#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pinnopf::grid {

// Bus indices are 0-based everywhere in memory; case files are 1-based.

struct Generator {
    int bus = 0;
    double p_min = 0.0; // MW
    double p_max = 0.0; // MW
    double cost = 0.0;  // $/MWh
};

struct Load {
    int bus = 0;
    double p_max_nominal = 0.0; // MW, taken as 100% loading
};

struct Line {
    int from_bus = 0;
    int to_bus = 0;
    double susceptance = 0.0; // p.u.
    double flow_limit = 0.0;  // MW
};

struct GridCase {
    std::string name;
    int n_bus = 0;
    int slack_bus = 0;
    double base_mva = 100.0;
    std::vector<Generator> generators;
    std::vector<Load> loads;
    std::vector<Line> lines;

    std::size_t n_gen() const { return generators.size(); }
    std::size_t n_load() const { return loads.size(); }
    std::size_t n_line() const { return lines.size(); }
    double total_nominal_load() const;
    double total_capacity() const;
};

/// Dense line-by-bus sensitivity matrix (MW of line flow per MW injected at
/// a bus and withdrawn at the slack).
struct PtdfMatrix {
    Eigen::MatrixXd entries;

    Eigen::Index rows() const { return entries.rows(); }
    Eigen::Index cols() const { return entries.cols(); }
    double operator()(Eigen::Index line, Eigen::Index bus) const { return entries(line, bus); }
};

/// Parses a JSON case document and validates it. Throws ParseError,
/// ValidationError or ConnectivityError.
GridCase load_case(std::istream& source);
GridCase load_case_file(const std::filesystem::path& path);

/// Writes the case back in the same document format (1-based buses).
void save_case(const GridCase& grid, std::ostream& sink);

/// Checks every GridCase invariant including connectivity.
void validate_case(const GridCase& grid);

bool is_connected(const GridCase& grid);

/// Slack-referenced PTDF from the inverse of the reduced nodal susceptance
/// matrix. Throws NumericalError if the reduced matrix is singular.
PtdfMatrix compute_ptdf(const GridCase& grid);

} // namespace pinnopf::grid
