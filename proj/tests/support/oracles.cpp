#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <numeric>

namespace pinnopf::testing {

std::string case_path(const std::string& name)
{
    return std::string(PINNOPF_SOURCE_DIR) + "/cases/" + name + ".json";
}

Eigen::VectorXd direct_dc_flows(const grid::GridCase& grid, const Eigen::VectorXd& injection)
{
    const int n = grid.n_bus;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const auto& l : grid.lines) {
        b(l.from_bus, l.from_bus) += l.susceptance;
        b(l.to_bus, l.to_bus) += l.susceptance;
        b(l.from_bus, l.to_bus) -= l.susceptance;
        b(l.to_bus, l.from_bus) -= l.susceptance;
    }
    // Replace the slack equation with theta_slack = 0.
    Eigen::VectorXd rhs = injection;
    b.row(grid.slack_bus).setZero();
    b(grid.slack_bus, grid.slack_bus) = 1.0;
    rhs(grid.slack_bus) = 0.0;
    Eigen::VectorXd theta = b.fullPivLu().solve(rhs);
    Eigen::VectorXd flows(static_cast<Eigen::Index>(grid.n_line()));
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
        const auto& l = grid.lines[i];
        flows(static_cast<Eigen::Index>(i)) = l.susceptance * (theta(l.from_bus) - theta(l.to_bus));
    }
    return flows;
}

std::optional<double> vertex_enumeration_min(const lp::LinearProgram& program, double tol)
{
    const std::size_t n = program.n_vars;
    // Candidate hyperplanes: rows (as equalities) and variable bounds.
    struct Plane {
        Eigen::VectorXd a;
        double b;
        bool mandatory;
    };
    std::vector<Plane> planes;
    for (const auto& c : program.constraints) {
        Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(c.coeffs.data(),
                                                              static_cast<Eigen::Index>(n));
        planes.push_back({a, c.rhs, c.relation == lp::Relation::Equal});
    }
    for (std::size_t j = 0; j < n; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
        planes.push_back({e, program.lower[j], false});
        planes.push_back({e, program.upper[j], false});
    }

    auto feasible = [&](const Eigen::VectorXd& x) {
        for (std::size_t j = 0; j < n; ++j) {
            double v = x(static_cast<Eigen::Index>(j));
            if (v < program.lower[j] - tol * (1 + std::abs(program.lower[j])) ||
                v > program.upper[j] + tol * (1 + std::abs(program.upper[j])))
                return false;
        }
        for (const auto& c : program.constraints) {
            double lhs = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                lhs += c.coeffs[j] * x(static_cast<Eigen::Index>(j));
            double t = tol * (1 + std::abs(c.rhs));
            if (c.relation == lp::Relation::LessEqual && lhs > c.rhs + t)
                return false;
            if (c.relation == lp::Relation::GreaterEqual && lhs < c.rhs - t)
                return false;
            if (c.relation == lp::Relation::Equal && std::abs(lhs - c.rhs) > t)
                return false;
        }
        return true;
    };

    std::optional<double> best;
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> recurse = [&](std::size_t start) {
        if (pick.size() == n) {
            for (std::size_t i = 0; i < planes.size(); ++i)
                if (planes[i].mandatory && std::find(pick.begin(), pick.end(), i) == pick.end())
                    return;
            Eigen::MatrixXd a(n, n);
            Eigen::VectorXd b(n);
            for (std::size_t r = 0; r < n; ++r) {
                a.row(static_cast<Eigen::Index>(r)) = planes[pick[r]].a.transpose();
                b(static_cast<Eigen::Index>(r)) = planes[pick[r]].b;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
            if (!lu.isInvertible())
                return;
            Eigen::VectorXd x = lu.solve(b);
            if (!feasible(x))
                return;
            double value = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                value += program.objective[j] * x(static_cast<Eigen::Index>(j));
            if (!best || value < *best)
                best = value;
            return;
        }
        for (std::size_t i = start; i < planes.size(); ++i) {
            pick.push_back(i);
            recurse(i + 1);
            pick.pop_back();
        }
    };
    if (n == 0)
        return 0.0;
    recurse(0);
    return best;
}

grid::GridCase random_case(std::mt19937_64& rng, int n_bus, int max_gen, int max_load)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto pick = [&](int n) { return static_cast<int>(std::min<double>(n - 1, std::floor(unit(rng) * n))); };

    grid::GridCase g;
    g.name = "random";
    g.n_bus = n_bus;
    g.slack_bus = pick(n_bus);
    std::vector<std::pair<int, int>> edges;
    for (int b = 1; b < n_bus; ++b)
        edges.emplace_back(pick(b), b);
    int extra = pick(n_bus);
    for (int e = 0; e < extra; ++e) {
        int a = pick(n_bus), b = pick(n_bus);
        if (a != b)
            edges.emplace_back(a, b);
    }
    for (auto [a, b] : edges)
        g.lines.push_back({a, b, uniform(5.0, 20.0), uniform(40.0, 250.0)});

    int ng = 1 + pick(max_gen);
    for (int i = 0; i < ng; ++i) {
        double pmin = uniform(0.0, 20.0);
        g.generators.push_back({pick(n_bus), pmin, pmin + uniform(60.0, 200.0), uniform(10.0, 50.0)});
    }
    int nd = 1 + pick(max_load);
    for (int i = 0; i < nd; ++i)
        g.loads.push_back({pick(n_bus), uniform(20.0, 100.0)});
    return g;
}

grid::GridCase two_bus_case(double cost, double p_max, double limit)
{
    grid::GridCase g;
    g.name = "two_bus";
    g.n_bus = 2;
    g.slack_bus = 0;
    g.generators.push_back({0, 0.0, p_max, cost});
    g.loads.push_back({1, 50.0});
    g.lines.push_back({0, 1, 10.0, limit});
    return g;
}

grid::GridCase three_bus_ring()
{
    grid::GridCase g;
    g.name = "three_bus_ring";
    g.n_bus = 3;
    g.slack_bus = 0;
    g.generators.push_back({0, 0.0, 200.0, 10.0});
    g.generators.push_back({2, 0.0, 200.0, 20.0});
    g.loads.push_back({1, 100.0});
    g.lines.push_back({0, 1, 10.0, 1000.0});
    g.lines.push_back({1, 2, 10.0, 1000.0});
    g.lines.push_back({2, 0, 10.0, 1000.0});
    return g;
}

grid::GridCase two_gen_case()
{
    grid::GridCase g;
    g.name = "two_gen";
    g.n_bus = 2;
    g.slack_bus = 0;
    g.generators.push_back({0, 0.0, 60.0, 10.0});
    g.generators.push_back({0, 0.0, 100.0, 20.0});
    g.loads.push_back({1, 80.0});
    g.lines.push_back({0, 1, 10.0, 10000.0});
    return g;
}

} // namespace pinnopf::testing

namespace pinnopf::testing {

std::vector<double> relu_pattern_max(const std::vector<pinn::Layer>& layers, const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi, const std::vector<AffineObjective>& objectives)
{
    std::size_t n_hidden = 0;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        n_hidden += static_cast<std::size_t>(layers[i].weights.rows());
    if (n_hidden > 16)
        throw std::invalid_argument("relu_pattern_max: too many hidden neurons");
    const auto n_in = static_cast<std::size_t>(lo.size());

    std::vector<double> best(objectives.size(), -std::numeric_limits<double>::infinity());
    for (std::uint32_t mask = 0; mask < (1u << n_hidden); ++mask) {
        // With phases fixed every unit is affine in the input: value = A in + c.
        lp::LinearProgram p(n_in);
        p.lower.assign(lo.data(), lo.data() + lo.size());
        p.upper.assign(hi.data(), hi.data() + hi.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(lo.size(), lo.size());
        Eigen::VectorXd c = Eigen::VectorXd::Zero(lo.size());
        std::size_t bit = 0;
        for (std::size_t li = 0; li < layers.size(); ++li) {
            Eigen::MatrixXd Az = layers[li].weights * A;
            Eigen::VectorXd cz = layers[li].weights * c + layers[li].biases;
            if (li + 1 == layers.size()) {
                A = Az;
                c = cz;
                break;
            }
            for (Eigen::Index k = 0; k < Az.rows(); ++k, ++bit) {
                const bool on = (mask >> bit) & 1u;
                const Eigen::RowVectorXd r = Az.row(k);
                std::vector<double> row(r.data(), r.data() + n_in);
                // on: Az pd + cz >= 0; off: <= 0
                p.add_constraint(row, on ? lp::Relation::GreaterEqual : lp::Relation::LessEqual, -cz(k));
                if (!on) {
                    Az.row(k).setZero();
                    cz(k) = 0.0;
                }
            }
            A = Az;
            c = cz;
        }
        if (lp::solve_lp(p).status != lp::Status::Optimal)
            continue;
        for (std::size_t o = 0; o < objectives.size(); ++o) {
            const auto& obj = objectives[o];
            Eigen::VectorXd grad = A.transpose() * obj.on_output + obj.on_input;
            lp::LinearProgram q = p;
            for (std::size_t j = 0; j < n_in; ++j)
                q.objective[j] = -grad(static_cast<Eigen::Index>(j));
            auto s = lp::solve_lp(q);
            if (s.status != lp::Status::Optimal)
                continue;
            best[o] = std::max(best[o], -s.objective_value + obj.on_output.dot(c) + obj.constant);
        }
    }
    return best;
}

} // namespace pinnopf::testing
