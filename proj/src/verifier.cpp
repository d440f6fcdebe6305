#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "pinnopf/errors.hpp"
#include "pinnopf/verifier.hpp"

namespace pinnopf::verify {

using lp::Relation;

PhysicalNet PhysicalNet::from_params(const pinn::NetworkParams& params)
{
    params.validate();
    PhysicalNet p;
    p.layers = params.pg_head.layers;
    if (p.layers.empty())
        throw ValidationError("verifier: pg head has no layers");
    const auto& in = params.input_scaler;
    if ((in.scale.array() == 0.0).any())
        throw ValidationError("verifier: input scaler has a zero scale");
    // x = (pd - offset) / scale
    auto& first = p.layers.front();
    const Eigen::VectorXd inv = in.scale.cwiseInverse();
    first.biases -= first.weights * in.offset.cwiseProduct(inv);
    first.weights = first.weights * inv.asDiagonal();
    // pg = offset + scale .* y
    auto& last = p.layers.back();
    last.weights = params.pg_scaler.scale.asDiagonal() * last.weights;
    last.biases = params.pg_scaler.offset + params.pg_scaler.scale.cwiseProduct(last.biases);
    return p;
}

Eigen::VectorXd PhysicalNet::forward(const Eigen::VectorXd& pd) const
{
    Eigen::VectorXd a = pd;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Eigen::VectorXd z = layers[i].weights * a + layers[i].biases;
        a = i + 1 < layers.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return a;
}

std::vector<Eigen::VectorXd> PhysicalNet::pre_activations(const Eigen::VectorXd& pd) const
{
    std::vector<Eigen::VectorXd> out;
    Eigen::VectorXd a = pd;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        Eigen::VectorXd z = layers[i].weights * a + layers[i].biases;
        a = z.cwiseMax(0.0);
        out.push_back(std::move(z));
    }
    return out;
}

std::size_t NeuronBounds::n_unstable() const
{
    std::size_t n = 0;
    for (const auto& l : hidden)
        for (Eigen::Index i = 0; i < l.z_min.size(); ++i)
            n += l.z_min(i) < 0.0 && l.z_max(i) > 0.0;
    return n;
}

std::size_t NeuronBounds::n_hidden() const
{
    std::size_t n = 0;
    for (const auto& l : hidden)
        n += static_cast<std::size_t>(l.z_min.size());
    return n;
}

NeuronBounds propagate_bounds(const PhysicalNet& net, const sampling::InputDomain& domain)
{
    if (net.layers.empty() || domain.dims() != net.layers.front().weights.cols())
        throw DimensionError("propagate_bounds: domain and network input differ");
    NeuronBounds b;
    Eigen::VectorXd lo = domain.lo, hi = domain.hi;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        const Eigen::MatrixXd pos = l.weights.cwiseMax(0.0);
        const Eigen::MatrixXd neg = l.weights.cwiseMin(0.0);
        LayerBounds lb{pos * lo + neg * hi + l.biases, pos * hi + neg * lo + l.biases};
        if (i + 1 < net.layers.size()) {
            lo = lb.z_min.cwiseMax(0.0);
            hi = lb.z_max.cwiseMax(0.0);
            b.hidden.push_back(std::move(lb));
        } else {
            b.output = std::move(lb);
        }
    }
    return b;
}

NeuronBounds propagate_bounds(const pinn::NetworkParams& params, const sampling::InputDomain& domain)
{
    return propagate_bounds(PhysicalNet::from_params(params), domain);
}

std::size_t NetworkEncoding::n_binaries() const
{
    return static_cast<std::size_t>(
        std::count_if(neurons.begin(), neurons.end(), [](const NeuronVars& n) { return n.binary >= 0; }));
}

namespace {

/// Outward rounding margin for interval bounds used as variable bounds / big-M.
double widen(double v) { return 1e-7 * (1.0 + std::abs(v)); }

} // namespace

NetworkEncoding encode_network(const PhysicalNet& net, const NeuronBounds& bounds,
                               const sampling::InputDomain& domain, milp::MilpModel& model)
{
    if (bounds.hidden.size() + 1 != net.layers.size())
        throw DimensionError("encode_network: bounds do not match the network depth");
    NetworkEncoding enc;
    for (Eigen::Index d = 0; d < domain.dims(); ++d)
        enc.input.push_back(model.add_continuous(domain.lo(d), domain.hi(d), "pd" + std::to_string(d)));

    // Previous layer as (variable or -1 for constant zero) per unit.
    std::vector<int> prev = enc.input;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& layer = net.layers[li];
        const bool hidden = li + 1 < net.layers.size();
        std::vector<int> next;
        for (Eigen::Index k = 0; k < layer.weights.rows(); ++k) {
            milp::LinearExpr pre;
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
                if (prev[static_cast<std::size_t>(j)] >= 0)
                    pre.add(prev[static_cast<std::size_t>(j)], layer.weights(k, j));
            pre.constant = layer.biases(k);
            const std::string tag = std::to_string(li) + "_" + std::to_string(k);

            if (!hidden) {
                const double lo = bounds.output.z_min(k), hi = bounds.output.z_max(k);
                int v = model.add_continuous(lo - widen(lo), hi + widen(hi), "pg_hat" + std::to_string(k));
                milp::LinearExpr row = pre;
                row.add(v, -1.0);
                model.add_row(row, Relation::Equal, 0.0, "out" + std::to_string(k));
                enc.output.push_back(v);
                continue;
            }

            NeuronVars n;
            n.layer = li;
            n.index = k;
            n.z_min = bounds.hidden[li].z_min(k);
            n.z_max = bounds.hidden[li].z_max(k);
            n.pre = pre;
            const double zmin = n.z_min - widen(n.z_min), zmax = n.z_max + widen(n.z_max);
            if (n.z_max <= 0.0) {
                n.kind = NeuronKind::Inactive;
            } else if (n.z_min >= 0.0) {
                n.kind = NeuronKind::Active;
                n.post = model.add_continuous(zmin, zmax, "z" + tag);
                milp::LinearExpr row = pre;
                row.add(n.post, -1.0);
                model.add_row(row, Relation::Equal, 0.0, "act" + tag);
            } else {
                n.kind = NeuronKind::Unstable;
                n.post = model.add_continuous(0.0, zmax, "z" + tag);
                n.binary = model.add_binary("y" + tag);
                // Z <= pre - zmin (1 - y)
                milp::LinearExpr a;
                a.add(n.post, 1.0);
                for (const auto& t : pre.terms)
                    a.add(t.var, -t.coef);
                a.add(n.binary, -zmin);
                model.add_row(a, Relation::LessEqual, pre.constant - zmin, "relu_a" + tag);
                // Z >= pre
                milp::LinearExpr b;
                b.add(n.post, 1.0);
                for (const auto& t : pre.terms)
                    b.add(t.var, -t.coef);
                model.add_row(b, Relation::GreaterEqual, pre.constant, "relu_b" + tag);
                // Z <= zmax y
                model.add_row({{n.post, 1.0}, {n.binary, -zmax}}, Relation::LessEqual, 0.0, "relu_c" + tag);
                // Z >= 0
                model.add_row({{n.post, 1.0}}, Relation::GreaterEqual, 0.0, "relu_d" + tag);
            }
            next.push_back(n.post);
            enc.neurons.push_back(std::move(n));
        }
        prev = std::move(next);
    }
    return enc;
}

const char* to_string(WorstCaseKind kind)
{
    switch (kind) {
    case WorstCaseKind::GenViolation: return "gen_violation";
    case WorstCaseKind::LineViolation: return "line_violation";
    case WorstCaseKind::Distance: return "distance";
    case WorstCaseKind::Suboptimality: return "suboptimality";
    }
    return "?";
}

std::optional<double> true_metric(WorstCaseKind kind, const pinn::NetworkParams& params, const opf::Network& net,
                                  const Eigen::VectorXd& pd)
{
    const Eigen::VectorXd pg_hat = pinn::forward_pg(params, pd).col(0);
    switch (kind) {
    case WorstCaseKind::GenViolation: return opf::generator_violation(net, pg_hat);
    case WorstCaseKind::LineViolation: return opf::line_violation(net, pg_hat, pd);
    case WorstCaseKind::Distance:
    case WorstCaseKind::Suboptimality: break;
    }
    auto sol = opf::try_solve_dcopf(net, pd);
    if (!sol)
        return std::nullopt;
    if (kind == WorstCaseKind::Suboptimality)
        return net.cost.dot(pg_hat - sol->pg);
    double worst = 0.0;
    for (Eigen::Index g = 0; g < net.n_gen(); ++g) {
        const double range = net.p_max(g) - net.p_min(g);
        if (range > 0.0)
            worst = std::max(worst, std::abs(pg_hat(g) - sol->pg(g)) / range * 100.0);
    }
    return worst;
}

namespace {

struct Problem {
    milp::MilpModel model;
    PhysicalNet physical;
    NetworkEncoding network;
    std::optional<KktEncoding> kkt;
};

Problem build_problem(const PhysicalNet& physical, const NeuronBounds& bounds, const opf::Network& net,
                      const sampling::InputDomain& domain, const BigM* big_m)
{
    Problem p;
    p.physical = physical;
    p.network = encode_network(physical, bounds, domain, p.model);
    if (big_m)
        p.kkt = encode_opf_kkt(net, p.network.input, *big_m, p.model);
    return p;
}

struct Objective {
    milp::LinearExpr expr;
    double upper = lp::kInf; // interval bound; MILP skipped when it cannot beat the floor
    std::string label;
    double scale = 1.0; // reported value = scale * objective
};

struct FamilyResult {
    bool found = false;
    double value = 0.0;
    std::vector<double> x;
    std::string label;
    double bound = 0.0;
    std::size_t nodes = 0, solved = 0, skipped = 0;
    bool node_limited = false;
    bool numerical_failure = false;
    ValidityReport validity;
};

/// Solves max over the objectives of (objective), starting from `floor`.
FamilyResult solve_family(const Problem& problem, const std::vector<Objective>& objectives, double floor,
                          const opf::Network& net, const VerifyOptions& options)
{
    std::vector<std::size_t> order(objectives.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return objectives[a].upper > objectives[b].upper; });

    auto heuristic = options.use_heuristic
                         ? make_heuristic(&problem.physical, &problem.network, net,
                                          problem.kkt ? &*problem.kkt : nullptr, problem.network.input,
                                          problem.model.n_vars())
                         : milp::Heuristic{};

    auto run_one = [&](std::size_t i, double cutoff) {
        milp::MilpModel m = problem.model;
        m.set_objective(objectives[i].expr);
        milp::MilpOptions o;
        o.node_limit = options.node_limit;
        o.cutoff = cutoff;
        o.heuristic = heuristic;
        return milp::solve_milp(m, o);
    };

    FamilyResult r;
    r.value = floor;
    r.bound = floor;
    std::vector<std::optional<milp::MilpSolution>> sols(objectives.size());

    auto absorb = [&](std::size_t i, const milp::MilpSolution& s) {
        ++r.solved;
        r.nodes += s.nodes;
        if (s.status == milp::MilpStatus::NodeLimit)
            r.node_limited = true;
        if (s.status == milp::MilpStatus::NumericalFailure || s.status == milp::MilpStatus::Unbounded)
            r.numerical_failure = true;
        if (s.status != milp::MilpStatus::Infeasible)
            r.bound = std::max(r.bound, s.best_bound);
        if (s.has_incumbent) {
            auto v = check_solution_validity(&problem.network, problem.kkt ? &*problem.kkt : nullptr, s.x);
            if (!v.ok) {
                r.validity.ok = false;
                r.validity.complementarity_ok &= v.complementarity_ok;
                r.validity.big_m_ok &= v.big_m_ok;
                r.validity.relu_ok &= v.relu_ok;
                for (auto& f : v.failures)
                    r.validity.failures.push_back(objectives[i].label + ": " + f);
            }
            r.validity.max_complementarity = std::max(r.validity.max_complementarity, v.max_complementarity);
            r.validity.min_big_m_slack = std::min(r.validity.min_big_m_slack, v.min_big_m_slack);
            if (s.objective > r.value) {
                r.value = s.objective;
                r.x = s.x;
                r.label = objectives[i].label;
                r.found = true;
            }
        }
    };

    if (options.threads <= 1) {
        for (std::size_t i : order) {
            if (objectives[i].upper <= r.value) {
                ++r.skipped;
                continue;
            }
            absorb(i, run_one(i, r.value));
        }
    } else {
        std::vector<std::size_t> todo;
        for (std::size_t i : order) {
            if (objectives[i].upper <= floor)
                ++r.skipped;
            else
                todo.push_back(i);
        }
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(options.threads);
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < options.threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t k = next++; k < todo.size(); k = next++)
                        sols[todo[k]] = run_one(todo[k], floor);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool)
            th.join();
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
        for (std::size_t i : todo)
            absorb(i, *sols[i]);
    }
    r.bound = std::max(r.bound, r.value);
    return r;
}

double total_max_load(const sampling::InputDomain& domain) { return domain.hi.sum(); }

Eigen::VectorXd pd_of(const Problem& p, const std::vector<double>& x)
{
    Eigen::VectorXd pd(static_cast<Eigen::Index>(p.network.input.size()));
    for (std::size_t i = 0; i < p.network.input.size(); ++i)
        pd(static_cast<Eigen::Index>(i)) = x[static_cast<std::size_t>(p.network.input[i])];
    return pd;
}

WorstCase finish(WorstCaseKind kind, const FamilyResult& r, const Problem& p, const pinn::NetworkParams& params,
                 const opf::Network& net, const sampling::InputDomain& domain, double scale)
{
    WorstCase w;
    w.kind = kind;
    w.value = scale * r.value;
    w.argmax_pd = r.found ? pd_of(p, r.x) : Eigen::VectorXd(0.5 * (domain.lo + domain.hi));
    w.argmax_label = r.found ? r.label : "none";
    if (std::isfinite(r.value))
        w.bound_gap = std::max(0.0, scale * (r.bound - r.value));
    else
        w.bound_gap = r.bound > r.value ? lp::kInf : 0.0;
    w.certificate = {scale * r.value, scale * r.bound, r.nodes, r.solved, r.skipped};
    w.verified = r.validity.ok && !r.numerical_failure;
    if (!r.found)
        w.notes.push_back("no objective exceeded the floor; argmax_pd is the domain centre");
    if (r.node_limited)
        w.notes.push_back("node limit reached; value is a lower bound only");
    if (r.numerical_failure)
        w.notes.push_back("an LP relaxation failed numerically");
    for (const auto& f : r.validity.failures)
        w.notes.push_back("validity: " + f);
    auto sim = true_metric(kind, params, net, w.argmax_pd);
    w.resimulated = sim ? *sim : std::nan("");
    return w;
}

void fill_mw_pct(WorstCase& w, const sampling::InputDomain& domain)
{
    w.units = "MW";
    const double total = total_max_load(domain);
    w.value_pct = total > 0.0 ? w.value / total * 100.0 : 0.0;
    w.pct_basis = "% of max load";
}

double row_max(const Eigen::RowVectorXd& coef, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    return coef.cwiseMax(0.0).dot(hi) + coef.cwiseMin(0.0).dot(lo);
}

} // namespace

WorstCase worst_case_gen_violation(const pinn::NetworkParams& params, const opf::Network& net,
                                   const sampling::InputDomain& domain, const VerifyOptions& options)
{
    if (params.n_gen != net.n_gen() || params.input_dim() != net.n_load())
        throw DimensionError("verifier: model and case dimensions differ");
    const PhysicalNet phys = PhysicalNet::from_params(params);
    const NeuronBounds bounds = propagate_bounds(phys, domain);
    const Problem p = build_problem(phys, bounds, net, domain, nullptr);
    std::vector<Objective> objs;
    for (Eigen::Index g = 0; g < net.n_gen(); ++g) {
        const int v = p.network.output[static_cast<std::size_t>(g)];
        objs.push_back({milp::LinearExpr{{{v, 1.0}}, -net.p_max(g)}, bounds.output.z_max(g) - net.p_max(g),
                        "gen " + std::to_string(g) + " upper"});
        objs.push_back({milp::LinearExpr{{{v, -1.0}}, net.p_min(g)}, net.p_min(g) - bounds.output.z_min(g),
                        "gen " + std::to_string(g) + " lower"});
    }
    auto r = solve_family(p, objs, 0.0, net, options);
    WorstCase w = finish(WorstCaseKind::GenViolation, r, p, params, net, domain, 1.0);
    fill_mw_pct(w, domain);
    return w;
}

WorstCase worst_case_line_violation(const pinn::NetworkParams& params, const opf::Network& net,
                                    const sampling::InputDomain& domain, const VerifyOptions& options)
{
    if (params.n_gen != net.n_gen() || params.input_dim() != net.n_load())
        throw DimensionError("verifier: model and case dimensions differ");
    const PhysicalNet phys = PhysicalNet::from_params(params);
    const NeuronBounds bounds = propagate_bounds(phys, domain);
    const Problem p = build_problem(phys, bounds, net, domain, nullptr);
    std::vector<Objective> objs;
    for (Eigen::Index l = 0; l < net.n_line(); ++l) {
        milp::LinearExpr f;
        for (Eigen::Index g = 0; g < net.n_gen(); ++g)
            f.add(p.network.output[static_cast<std::size_t>(g)], net.ptdf_gen(l, g));
        for (Eigen::Index d = 0; d < net.n_load(); ++d)
            f.add(p.network.input[static_cast<std::size_t>(d)], -net.ptdf_load(l, d));
        const Eigen::RowVectorXd G = net.ptdf_gen.row(l), D = net.ptdf_load.row(l);
        const double f_max = row_max(G, bounds.output.z_min, bounds.output.z_max) + row_max(-D, domain.lo, domain.hi);
        const double f_min = -row_max(-G, bounds.output.z_min, bounds.output.z_max) - row_max(D, domain.lo, domain.hi);
        milp::LinearExpr up = f, down;
        up.constant = -net.flow_limit(l);
        for (const auto& t : f.terms)
            down.add(t.var, -t.coef);
        down.constant = -net.flow_limit(l);
        objs.push_back({up, f_max - net.flow_limit(l), "line " + std::to_string(l) + " forward"});
        objs.push_back({down, -f_min - net.flow_limit(l), "line " + std::to_string(l) + " reverse"});
    }
    auto r = solve_family(p, objs, 0.0, net, options);
    WorstCase w = finish(WorstCaseKind::LineViolation, r, p, params, net, domain, 1.0);
    fill_mw_pct(w, domain);
    return w;
}

namespace {

/// Runs a bilevel family, doubling the dual big-M while the validity check
/// reports a binding constant.
template <class MakeObjectives>
WorstCase bilevel(WorstCaseKind kind, const pinn::NetworkParams& params, const opf::Network& net,
                  const sampling::InputDomain& domain, const VerifyOptions& options, double floor, double scale,
                  MakeObjectives make_objectives)
{
    if (params.n_gen != net.n_gen() || params.input_dim() != net.n_load())
        throw DimensionError("verifier: model and case dimensions differ");
    const PhysicalNet phys = PhysicalNet::from_params(params);
    const NeuronBounds bounds = propagate_bounds(phys, domain);
    BigM m = default_big_m(net, domain);
    int doublings = 0;
    for (;;) {
        const Problem p = build_problem(phys, bounds, net, domain, &m);
        auto r = solve_family(p, make_objectives(p, bounds), floor, net, options);
        if (r.validity.big_m_ok || doublings >= options.max_big_m_doublings) {
            WorstCase w = finish(kind, r, p, params, net, domain, scale);
            if (doublings > 0)
                w.notes.push_back("dual big-M doubled " + std::to_string(doublings) + " time(s) to " +
                                  std::to_string(m.dual));
            return w;
        }
        m.dual *= 2.0;
        m.primal *= 2.0;
        ++doublings;
    }
}

} // namespace

WorstCase worst_case_distance(const pinn::NetworkParams& params, const opf::Network& net,
                              const sampling::InputDomain& domain, const VerifyOptions& options)
{
    auto make = [&](const Problem& p, const NeuronBounds& b) {
        std::vector<Objective> objs;
        for (Eigen::Index g = 0; g < net.n_gen(); ++g) {
            const double range = net.p_max(g) - net.p_min(g);
            if (!(range > 0.0))
                continue;
            const int hat = p.network.output[static_cast<std::size_t>(g)];
            const int opt = p.kkt->pg[static_cast<std::size_t>(g)];
            objs.push_back({milp::LinearExpr{{{hat, 1.0 / range}, {opt, -1.0 / range}}, 0.0},
                            (b.output.z_max(g) - net.p_min(g)) / range, "gen " + std::to_string(g) + " above"});
            objs.push_back({milp::LinearExpr{{{hat, -1.0 / range}, {opt, 1.0 / range}}, 0.0},
                            (net.p_max(g) - b.output.z_min(g)) / range, "gen " + std::to_string(g) + " below"});
        }
        return objs;
    };
    WorstCase w = bilevel(WorstCaseKind::Distance, params, net, domain, options, 0.0, 100.0, make);
    w.units = "%";
    w.value_pct = w.value;
    w.pct_basis = "% of generator range";
    if (std::isfinite(w.resimulated) && std::abs(w.resimulated - w.value) > 1e-5)
        w.notes.push_back("inner OPF optimum not unique at argmax_pd; distance measured to the encoded optimum");
    return w;
}

WorstCase worst_case_suboptimality(const pinn::NetworkParams& params, const opf::Network& net,
                                   const sampling::InputDomain& domain, const VerifyOptions& options)
{
    auto make = [&](const Problem& p, const NeuronBounds&) {
        milp::LinearExpr e;
        for (Eigen::Index g = 0; g < net.n_gen(); ++g) {
            e.add(p.network.output[static_cast<std::size_t>(g)], net.cost(g));
            e.add(p.kkt->pg[static_cast<std::size_t>(g)], -net.cost(g));
        }
        return std::vector<Objective>{{e, lp::kInf, "total cost"}};
    };
    WorstCase w = bilevel(WorstCaseKind::Suboptimality, params, net, domain, options, -lp::kInf, 1.0, make);
    w.units = "$/h";
    w.pct_basis = "% of optimal cost at argmax_pd";
    if (auto sol = opf::try_solve_dcopf(net, w.argmax_pd); sol && sol->objective != 0.0)
        w.value_pct = w.value / sol->objective * 100.0;
    if (!std::isfinite(w.value)) {
        w.value = 0.0;
        w.verified = false;
        w.notes.push_back("no demand in the domain admits a feasible inner OPF");
    }
    return w;
}

} // namespace pinnopf::verify
