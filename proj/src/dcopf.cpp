#include "pinnopf/dcopf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pinnopf/errors.hpp"

namespace pinnopf::opf {

namespace {

constexpr double kActiveTol = 1e-6;

void check_pd(const Network& net, const Eigen::VectorXd& pd)
{
    if (pd.size() != net.n_load())
        throw DimensionError("opf: demand vector has " + std::to_string(pd.size()) +
                             " entries, case has " + std::to_string(net.n_load()) + " loads");
    if ((pd.array() < 0.0).any() || !pd.allFinite())
        throw ValidationError("opf: demand must be finite and non-negative");
}

double relu(double v) { return v > 0.0 ? v : 0.0; }

} // namespace

Network Network::build(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf)
{
    if (ptdf.rows() != static_cast<Eigen::Index>(grid.n_line()) || ptdf.cols() != grid.n_bus)
        throw DimensionError("opf: PTDF shape does not match the case");
    Network net;
    const auto ng = static_cast<Eigen::Index>(grid.n_gen());
    const auto nd = static_cast<Eigen::Index>(grid.n_load());
    const auto nl = static_cast<Eigen::Index>(grid.n_line());
    net.cost.resize(ng);
    net.p_min.resize(ng);
    net.p_max.resize(ng);
    net.ptdf_gen.resize(nl, ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        const auto& gen = grid.generators[static_cast<std::size_t>(g)];
        net.cost(g) = gen.cost;
        net.p_min(g) = gen.p_min;
        net.p_max(g) = gen.p_max;
        net.ptdf_gen.col(g) = ptdf.entries.col(gen.bus);
    }
    net.pd_nominal.resize(nd);
    net.ptdf_load.resize(nl, nd);
    for (Eigen::Index d = 0; d < nd; ++d) {
        const auto& load = grid.loads[static_cast<std::size_t>(d)];
        net.pd_nominal(d) = load.p_max_nominal;
        net.ptdf_load.col(d) = ptdf.entries.col(load.bus);
    }
    net.flow_limit.resize(nl);
    for (Eigen::Index l = 0; l < nl; ++l)
        net.flow_limit(l) = grid.lines[static_cast<std::size_t>(l)].flow_limit;
    return net;
}

Eigen::VectorXd Network::flows(const Eigen::VectorXd& pg, const Eigen::VectorXd& pd) const
{
    return ptdf_gen * pg - ptdf_load * pd;
}

Eigen::VectorXd Network::gen_scale() const
{
    Eigen::VectorXd range = p_max - p_min;
    for (Eigen::Index g = 0; g < range.size(); ++g)
        if (!(range(g) > 0.0))
            range(g) = 1.0;
    return range;
}

double Network::cost_scale() const
{
    double s = cost.size() ? cost.cwiseAbs().maxCoeff() : 0.0;
    return s > 0.0 ? s : 1.0;
}

Eigen::VectorXd DualVariables::pack() const
{
    const Eigen::Index ng = mu_g_upper.size();
    const Eigen::Index nl = mu_l_upper.size();
    Eigen::VectorXd out(1 + 2 * ng + 2 * nl);
    out(0) = lambda;
    out.segment(1, ng) = mu_g_upper;
    out.segment(1 + ng, ng) = mu_g_lower;
    out.segment(1 + 2 * ng, nl) = mu_l_upper;
    out.segment(1 + 2 * ng + nl, nl) = mu_l_lower;
    return out;
}

DualVariables DualVariables::unpack(const Eigen::VectorXd& packed, Eigen::Index n_gen,
                                    Eigen::Index n_line)
{
    if (packed.size() != 1 + 2 * n_gen + 2 * n_line)
        throw DimensionError("opf: packed dual vector has the wrong length");
    DualVariables d;
    d.lambda = packed(0);
    d.mu_g_upper = packed.segment(1, n_gen);
    d.mu_g_lower = packed.segment(1 + n_gen, n_gen);
    d.mu_l_upper = packed.segment(1 + 2 * n_gen, n_line);
    d.mu_l_lower = packed.segment(1 + 2 * n_gen + n_line, n_line);
    return d;
}

lp::LinearProgram build_opf_lp(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf,
                               const Eigen::VectorXd& pd)
{
    return build_opf_lp(Network::build(grid, ptdf), pd);
}

lp::LinearProgram build_opf_lp(const Network& net, const Eigen::VectorXd& pd)
{
    check_pd(net, pd);
    const auto ng = static_cast<std::size_t>(net.n_gen());
    lp::LinearProgram program(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        program.objective[g] = net.cost(static_cast<Eigen::Index>(g));
        program.lower[g] = net.p_min(static_cast<Eigen::Index>(g));
        program.upper[g] = net.p_max(static_cast<Eigen::Index>(g));
    }
    program.add_constraint(std::vector<double>(ng, 1.0), lp::Relation::Equal, pd.sum());

    const Eigen::VectorXd load_flow = net.ptdf_load * pd;
    for (Eigen::Index l = 0; l < net.n_line(); ++l) {
        std::vector<double> row(ng);
        for (std::size_t g = 0; g < ng; ++g)
            row[g] = net.ptdf_gen(l, static_cast<Eigen::Index>(g));
        std::vector<double> neg(row);
        for (double& v : neg)
            v = -v;
        program.add_constraint(std::move(row), lp::Relation::LessEqual,
                               net.flow_limit(l) + load_flow(l));
        program.add_constraint(std::move(neg), lp::Relation::LessEqual,
                               net.flow_limit(l) - load_flow(l));
    }
    return program;
}

std::optional<OpfSolution> try_solve_dcopf(const Network& net, const Eigen::VectorXd& pd)
{
    lp::LinearProgram program = build_opf_lp(net, pd);
    lp::LpSolution sol = lp::solve_lp(program);
    if (sol.status == lp::Status::Infeasible)
        return std::nullopt;
    if (sol.status != lp::Status::Optimal)
        throw NumericalError(std::string("opf: LP solver returned ") + lp::to_string(sol.status));

    const Eigen::Index ng = net.n_gen();
    const Eigen::Index nl = net.n_line();
    OpfSolution out;
    out.pg = Eigen::Map<const Eigen::VectorXd>(sol.x.data(), ng);
    out.objective = sol.objective_value;
    // LP duals are d(cost)/d(rhs); the balance row gives the marginal price.
    out.duals.lambda = -sol.duals[0];
    out.duals.mu_g_upper.resize(ng);
    out.duals.mu_g_lower.resize(ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        double d = sol.reduced_costs[static_cast<std::size_t>(g)];
        out.duals.mu_g_lower(g) = std::max(d, 0.0);
        out.duals.mu_g_upper(g) = std::max(-d, 0.0);
    }
    out.duals.mu_l_upper.resize(nl);
    out.duals.mu_l_lower.resize(nl);
    for (Eigen::Index l = 0; l < nl; ++l) {
        out.duals.mu_l_upper(l) = std::max(-sol.duals[static_cast<std::size_t>(1 + 2 * l)], 0.0);
        out.duals.mu_l_lower(l) = std::max(-sol.duals[static_cast<std::size_t>(2 + 2 * l)], 0.0);
    }
    return out;
}

OpfSolution solve_dcopf(const Network& net, const Eigen::VectorXd& pd)
{
    auto sol = try_solve_dcopf(net, pd);
    if (!sol)
        throw InfeasibleError("opf: demand cannot be served within generator and line limits");
    return *sol;
}

OpfSolution solve_dcopf(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf,
                        const Eigen::VectorXd& pd)
{
    return solve_dcopf(Network::build(grid, ptdf), pd);
}

RecoveredDuals recover_duals_from_kkt(const Network& net, const Eigen::VectorXd& pd,
                                      const Eigen::VectorXd& pg_star)
{
    check_pd(net, pd);
    if (pg_star.size() != net.n_gen())
        throw DimensionError("opf: dispatch vector has the wrong length");
    const Eigen::Index ng = net.n_gen();
    const Eigen::Index nl = net.n_line();
    const Eigen::VectorXd flow = net.flows(pg_star, pd);

    // Unknown columns: lambda, then one multiplier per active constraint.
    enum class Kind { GenUpper, GenLower, LineUpper, LineLower };
    struct Active {
        Kind kind;
        Eigen::Index index;
    };
    std::vector<Active> active;
    for (Eigen::Index g = 0; g < ng; ++g) {
        double tol = kActiveTol * (1.0 + std::abs(net.p_max(g)));
        bool at_upper = std::abs(pg_star(g) - net.p_max(g)) <= tol;
        bool at_lower = std::abs(pg_star(g) - net.p_min(g)) <= tol;
        if (at_upper && at_lower) {
            // Fixed unit: both multipliers enter with opposite sign, not identifiable.
            active.push_back({Kind::GenUpper, g});
            active.push_back({Kind::GenLower, g});
        } else if (at_upper) {
            active.push_back({Kind::GenUpper, g});
        } else if (at_lower) {
            active.push_back({Kind::GenLower, g});
        }
    }
    for (Eigen::Index l = 0; l < nl; ++l) {
        double tol = kActiveTol * (1.0 + net.flow_limit(l));
        if (std::abs(flow(l) - net.flow_limit(l)) <= tol)
            active.push_back({Kind::LineUpper, l});
        else if (std::abs(flow(l) + net.flow_limit(l)) <= tol)
            active.push_back({Kind::LineLower, l});
    }

    const Eigen::Index k = 1 + static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(ng, k);
    system.col(0).setOnes();
    for (std::size_t a = 0; a < active.size(); ++a) {
        Eigen::Index col = 1 + static_cast<Eigen::Index>(a);
        switch (active[a].kind) {
        case Kind::GenUpper: system(active[a].index, col) = 1.0; break;
        case Kind::GenLower: system(active[a].index, col) = -1.0; break;
        case Kind::LineUpper: system.col(col) = net.ptdf_gen.row(active[a].index).transpose(); break;
        case Kind::LineLower: system.col(col) = -net.ptdf_gen.row(active[a].index).transpose(); break;
        }
    }
    const Eigen::VectorXd rhs = -net.cost;

    RecoveredDuals out;
    bool unique = false;
    Eigen::VectorXd solution;
    if (k <= ng) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system);
        qr.setThreshold(1e-10);
        if (qr.rank() == k) {
            solution = qr.solve(rhs);
            double residual = (system * solution - rhs).lpNorm<Eigen::Infinity>();
            unique = residual <= 1e-7 * (1.0 + net.cost_scale());
        }
    }
    if (unique) {
        for (Eigen::Index i = 1; i < k; ++i)
            if (solution(i) < -1e-7 * (1.0 + net.cost_scale()))
                unique = false;
    }

    if (!unique) {
        out.degenerate = true;
        auto sol = try_solve_dcopf(net, pd);
        if (!sol)
            throw InfeasibleError("opf: demand cannot be served within generator and line limits");
        out.duals = sol->duals;
        return out;
    }

    out.duals.lambda = solution(0);
    out.duals.mu_g_upper = Eigen::VectorXd::Zero(ng);
    out.duals.mu_g_lower = Eigen::VectorXd::Zero(ng);
    out.duals.mu_l_upper = Eigen::VectorXd::Zero(nl);
    out.duals.mu_l_lower = Eigen::VectorXd::Zero(nl);
    for (std::size_t a = 0; a < active.size(); ++a) {
        double v = std::max(solution(1 + static_cast<Eigen::Index>(a)), 0.0);
        switch (active[a].kind) {
        case Kind::GenUpper: out.duals.mu_g_upper(active[a].index) = v; break;
        case Kind::GenLower: out.duals.mu_g_lower(active[a].index) = v; break;
        case Kind::LineUpper: out.duals.mu_l_upper(active[a].index) = v; break;
        case Kind::LineLower: out.duals.mu_l_lower(active[a].index) = v; break;
        }
    }
    return out;
}

KktResiduals kkt_residuals(const Network& net, const Eigen::VectorXd& pd,
                           const Eigen::VectorXd& pg_hat, const DualVariables& d)
{
    const Eigen::Index ng = net.n_gen();
    const Eigen::Index nl = net.n_line();
    if (pd.size() != net.n_load() || pg_hat.size() != ng || d.mu_g_upper.size() != ng ||
        d.mu_g_lower.size() != ng || d.mu_l_upper.size() != nl || d.mu_l_lower.size() != nl)
        throw DimensionError("kkt: vector dimensions do not match the case");

    KktResiduals r;
    Eigen::VectorXd stat = net.cost.array() + d.lambda;
    stat += d.mu_g_upper - d.mu_g_lower;
    stat += net.ptdf_gen.transpose() * (d.mu_l_upper - d.mu_l_lower);
    r.eps_stat = stat.cwiseAbs().sum();

    const Eigen::VectorXd flow = net.flows(pg_hat, pd);
    for (Eigen::Index g = 0; g < ng; ++g) {
        r.eps_comp += std::abs(d.mu_g_upper(g) * (net.p_max(g) - pg_hat(g)));
        r.eps_comp += std::abs(d.mu_g_lower(g) * (pg_hat(g) - net.p_min(g)));
        r.eps_prim += relu(pg_hat(g) - net.p_max(g)) + relu(net.p_min(g) - pg_hat(g));
    }
    for (Eigen::Index l = 0; l < nl; ++l) {
        r.eps_comp += std::abs(d.mu_l_upper(l) * (flow(l) - net.flow_limit(l)));
        r.eps_comp += std::abs(d.mu_l_lower(l) * (-flow(l) - net.flow_limit(l)));
        r.eps_prim += relu(flow(l) - net.flow_limit(l)) + relu(-flow(l) - net.flow_limit(l));
    }
    r.eps_prim += std::abs(pg_hat.sum() - pd.sum());

    auto negative_part = [](const Eigen::VectorXd& v) { return (-v).cwiseMax(0.0).sum(); };
    r.eps_dual = negative_part(d.mu_g_upper) + negative_part(d.mu_g_lower) +
                 negative_part(d.mu_l_upper) + negative_part(d.mu_l_lower);
    return r;
}

double generator_violation(const Network& net, const Eigen::VectorXd& pg)
{
    double worst = 0.0;
    for (Eigen::Index g = 0; g < net.n_gen(); ++g)
        worst = std::max({worst, pg(g) - net.p_max(g), net.p_min(g) - pg(g)});
    return worst;
}

double line_violation(const Network& net, const Eigen::VectorXd& pg, const Eigen::VectorXd& pd)
{
    const Eigen::VectorXd flow = net.flows(pg, pd);
    double worst = 0.0;
    for (Eigen::Index l = 0; l < net.n_line(); ++l)
        worst = std::max(worst, std::abs(flow(l)) - net.flow_limit(l));
    return worst;
}

PredictionMetrics prediction_metrics(const Network& net, const Eigen::VectorXd& pd,
                                     const Eigen::VectorXd& pg_hat, const Eigen::VectorXd& pg_ref)
{
    check_pd(net, pd);
    if (pg_hat.size() != net.n_gen() || pg_ref.size() != net.n_gen())
        throw DimensionError("metrics: dispatch vector has the wrong length");
    PredictionMetrics m;
    m.v_g = generator_violation(net, pg_hat);
    m.v_line = line_violation(net, pg_hat, pd);

    double sum = 0.0;
    Eigen::Index counted = 0;
    for (Eigen::Index g = 0; g < net.n_gen(); ++g) {
        double range = net.p_max(g) - net.p_min(g);
        if (!(range > 0.0)) {
            m.excluded_degenerate = true;
            continue;
        }
        double dist = std::abs(pg_hat(g) - pg_ref(g)) / range * 100.0;
        m.v_dist = std::max(m.v_dist, dist);
        sum += dist;
        ++counted;
    }
    m.mae_pct = counted ? sum / static_cast<double>(counted) : 0.0;

    double ref_cost = net.cost.dot(pg_ref);
    double diff = net.cost.dot(pg_hat - pg_ref);
    // Cheaper-than-optimal (infeasible) predictions count as zero sub-optimality.
    m.v_opt = ref_cost != 0.0 ? std::max(diff / ref_cost * 100.0, 0.0) : 0.0;
    return m;
}

} // namespace pinnopf::opf
