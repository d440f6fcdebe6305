#include <algorithm>
#include <cmath>

#include "pinnopf/errors.hpp"
#include "pinnopf/verifier.hpp"

namespace pinnopf::verify {

using lp::Relation;

BigM default_big_m(const opf::Network& net, const sampling::InputDomain& domain)
{
    const Eigen::Index ng = net.n_gen(), nl = net.n_line();
    BigM m;
    m.primal.resize(2 * ng + 2 * nl);
    for (Eigen::Index g = 0; g < ng; ++g) {
        const double range = net.p_max(g) - net.p_min(g);
        m.primal(g) = m.primal(ng + g) = 1.1 * range + 1.0;
    }
    const Eigen::VectorXd gen_mag = net.p_min.cwiseAbs().cwiseMax(net.p_max.cwiseAbs());
    const Eigen::VectorXd load_mag = domain.lo.cwiseAbs().cwiseMax(domain.hi.cwiseAbs());
    for (Eigen::Index l = 0; l < nl; ++l) {
        const double fmax = net.ptdf_gen.row(l).cwiseAbs().dot(gen_mag.transpose()) +
                            net.ptdf_load.row(l).cwiseAbs().dot(load_mag.transpose());
        m.primal(2 * ng + l) = m.primal(2 * ng + nl + l) = 1.1 * (net.flow_limit(l) + fmax) + 1.0;
    }

    double spread = ng ? net.cost.maxCoeff() - net.cost.minCoeff() : 0.0;
    if (!(spread > 0.0))
        spread = ng ? net.cost.cwiseAbs().maxCoeff() : 0.0;
    if (!(spread > 0.0))
        spread = 1.0;
    double row_norm = 0.0;
    for (Eigen::Index l = 0; l < nl; ++l)
        row_norm = std::max(row_norm, net.ptdf_gen.row(l).norm());
    m.dual = 10.0 * spread * (1.0 + row_norm);
    return m;
}

KktEncoding encode_opf_kkt(const opf::Network& net, const std::vector<int>& pd, const BigM& m,
                           milp::MilpModel& model)
{
    const Eigen::Index ng = net.n_gen(), nl = net.n_line();
    if (static_cast<Eigen::Index>(pd.size()) != net.n_load())
        throw DimensionError("kkt: demand variable count differs from the case loads");
    if (m.primal.size() != 2 * ng + 2 * nl)
        throw DimensionError("kkt: primal big-M vector has the wrong length");

    KktEncoding k;
    for (Eigen::Index g = 0; g < ng; ++g)
        k.pg.push_back(model.add_continuous(net.p_min(g), net.p_max(g), "pg_opt" + std::to_string(g)));
    k.lambda = model.add_continuous(-lp::kInf, lp::kInf, "lambda");
    auto add_duals = [&](std::vector<int>& dst, Eigen::Index n, const std::string& name) {
        for (Eigen::Index i = 0; i < n; ++i)
            dst.push_back(model.add_continuous(0.0, m.dual, name + std::to_string(i)));
    };
    add_duals(k.mu_g_upper, ng, "mu_g_up");
    add_duals(k.mu_g_lower, ng, "mu_g_lo");
    add_duals(k.mu_l_upper, nl, "mu_l_up");
    add_duals(k.mu_l_lower, nl, "mu_l_lo");

    // c + lambda + mu_g_up - mu_g_lo + G^T (mu_l_up - mu_l_lo) = 0
    for (Eigen::Index g = 0; g < ng; ++g) {
        milp::LinearExpr e;
        e.add(k.lambda, 1.0).add(k.mu_g_upper[g], 1.0).add(k.mu_g_lower[g], -1.0);
        for (Eigen::Index l = 0; l < nl; ++l) {
            e.add(k.mu_l_upper[l], net.ptdf_gen(l, g));
            e.add(k.mu_l_lower[l], -net.ptdf_gen(l, g));
        }
        model.add_row(e, Relation::Equal, -net.cost(g), "stat" + std::to_string(g));
    }

    milp::LinearExpr balance;
    for (int v : k.pg)
        balance.add(v, 1.0);
    for (int v : pd)
        balance.add(v, -1.0);
    model.add_row(balance, Relation::Equal, 0.0, "balance");

    // Line flow f = G pg - D pd as an expression.
    std::vector<milp::LinearExpr> flow(static_cast<std::size_t>(nl));
    for (Eigen::Index l = 0; l < nl; ++l) {
        for (Eigen::Index g = 0; g < ng; ++g)
            flow[l].add(k.pg[g], net.ptdf_gen(l, g));
        for (Eigen::Index d = 0; d < net.n_load(); ++d)
            flow[l].add(pd[d], -net.ptdf_load(l, d));
    }
    for (Eigen::Index l = 0; l < nl; ++l) {
        model.add_row(flow[l], Relation::LessEqual, net.flow_limit(l), "line_up" + std::to_string(l));
        model.add_row(flow[l], Relation::GreaterEqual, -net.flow_limit(l), "line_lo" + std::to_string(l));
    }

    auto scaled = [](const milp::LinearExpr& e, double s, double c) {
        milp::LinearExpr out;
        for (const auto& t : e.terms)
            out.add(t.var, s * t.coef);
        out.constant = s * e.constant + c;
        return out;
    };
    auto pair = [&](int dual, milp::LinearExpr slack, double mp, const std::string& name) {
        ComplementarityPair p;
        p.dual = dual;
        p.binary = model.add_binary("r_" + name);
        p.slack = std::move(slack);
        p.m_primal = mp;
        p.m_dual = m.dual;
        // mu - M_d r <= 0
        model.add_row({{dual, 1.0}, {p.binary, -m.dual}}, Relation::LessEqual, 0.0, "fa_dual_" + name);
        // slack + M_p r <= M_p
        milp::LinearExpr e = p.slack;
        e.add(p.binary, mp);
        model.add_row(e, Relation::LessEqual, mp, "fa_primal_" + name);
        k.pairs.push_back(std::move(p));
    };
    for (Eigen::Index g = 0; g < ng; ++g)
        pair(k.mu_g_upper[g], milp::LinearExpr{{{k.pg[g], -1.0}}, net.p_max(g)}, m.primal(g),
             "g_up" + std::to_string(g));
    for (Eigen::Index g = 0; g < ng; ++g)
        pair(k.mu_g_lower[g], milp::LinearExpr{{{k.pg[g], 1.0}}, -net.p_min(g)}, m.primal(ng + g),
             "g_lo" + std::to_string(g));
    for (Eigen::Index l = 0; l < nl; ++l)
        pair(k.mu_l_upper[l], scaled(flow[l], -1.0, net.flow_limit(l)), m.primal(2 * ng + l),
             "l_up" + std::to_string(l));
    for (Eigen::Index l = 0; l < nl; ++l)
        pair(k.mu_l_lower[l], scaled(flow[l], 1.0, net.flow_limit(l)), m.primal(2 * ng + nl + l),
             "l_lo" + std::to_string(l));
    return k;
}

ValidityReport check_solution_validity(const NetworkEncoding* network, const KktEncoding* kkt,
                                       const std::vector<double>& x)
{
    ValidityReport rep;
    auto at = [&](int v) { return x.at(static_cast<std::size_t>(v)); };
    if (kkt) {
        for (const auto& p : kkt->pairs) {
            const double mu = at(p.dual);
            const double s = p.slack.evaluate(x);
            const double prod = std::abs(mu * s);
            rep.max_complementarity = std::max(rep.max_complementarity, prod);
            if (prod > 1e-6) {
                rep.complementarity_ok = false;
                rep.failures.push_back("complementarity " + std::to_string(prod) + " at " + std::to_string(p.binary));
            }
            const bool on = at(p.binary) > 0.5;
            const double ratio = on ? (p.m_dual - mu) / p.m_dual : (p.m_primal - s) / p.m_primal;
            rep.min_big_m_slack = std::min(rep.min_big_m_slack, ratio);
            if (ratio < 1e-4) {
                rep.big_m_ok = false;
                rep.failures.push_back(std::string(on ? "dual" : "primal") + " big-M binding at binary " +
                                       std::to_string(p.binary));
            }
        }
    }
    if (network) {
        for (const auto& n : network->neurons) {
            const double pre = n.pre.evaluate(x);
            const double tol = 1e-6 * (1.0 + std::abs(pre));
            const double post = n.post >= 0 ? at(n.post) : 0.0;
            bool bad = std::abs(post - std::max(pre, 0.0)) > tol;
            if (n.kind == NeuronKind::Unstable) {
                const bool on = at(n.binary) > 0.5;
                bad = bad || (!on && pre > 1e-6) || (on && pre < -1e-6);
            }
            if (bad) {
                rep.relu_ok = false;
                rep.failures.push_back("relu inconsistent at layer " + std::to_string(n.layer) + " neuron " +
                                       std::to_string(n.index));
            }
        }
    }
    rep.ok = rep.complementarity_ok && rep.big_m_ok && rep.relu_ok;
    return rep;
}

milp::Heuristic make_heuristic(const PhysicalNet* physical, const NetworkEncoding* network,
                               const opf::Network& net, const KktEncoding* kkt, const std::vector<int>& pd_vars,
                               std::size_t n_vars)
{
    return [=, &net](const std::vector<double>& x) -> std::optional<std::vector<double>> {
        Eigen::VectorXd pd(static_cast<Eigen::Index>(pd_vars.size()));
        for (std::size_t i = 0; i < pd_vars.size(); ++i)
            pd(static_cast<Eigen::Index>(i)) = x[static_cast<std::size_t>(pd_vars[i])];
        std::vector<double> out(n_vars, 0.0);
        if (physical && network) {
            auto pre = physical->pre_activations(pd);
            for (const auto& n : network->neurons)
                if (n.binary >= 0)
                    out[static_cast<std::size_t>(n.binary)] = pre[n.layer](n.index) > 0.0 ? 1.0 : 0.0;
        }
        if (kkt) {
            auto sol = opf::try_solve_dcopf(net, pd);
            if (!sol)
                return std::nullopt;
            std::vector<double> probe = x;
            for (std::size_t g = 0; g < kkt->pg.size(); ++g)
                probe[static_cast<std::size_t>(kkt->pg[g])] = sol->pg(static_cast<Eigen::Index>(g));
            for (const auto& p : kkt->pairs) {
                const double s = p.slack.evaluate(probe);
                out[static_cast<std::size_t>(p.binary)] = std::abs(s) <= 1e-7 * (1.0 + p.m_primal) ? 1.0 : 0.0;
            }
        }
        return out;
    };
}

} // namespace pinnopf::verify
