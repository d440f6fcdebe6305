// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "pinnopf/dcopf.hpp"
#include "pinnopf/grid.hpp"
#include "pinnopf/pinn.hpp"
#include "pinnopf/random.hpp"
#include "pinnopf/sampling.hpp"
#include "pinnopf/verifier.hpp"

using namespace pinnopf;
using verify::WorstCaseKind;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Fixture {
    grid::GridCase grid;
    opf::Network net;
    sampling::InputDomain domain;

    explicit Fixture(grid::GridCase g)
        : grid(std::move(g)), net(opf::Network::build(grid, grid::compute_ptdf(grid))),
          domain(sampling::InputDomain::from_case(grid))
    {
    }
};

/// A zero-gap worst case kept for the sampling soundness check.
struct Certified {
    std::string origin;
    verify::WorstCase w;
    pinn::NetworkParams params;
    const Fixture* fixture;
};

std::vector<std::unique_ptr<Fixture>> g_fixtures;
std::vector<Certified> g_certified;

const Fixture* keep(Fixture f)
{
    g_fixtures.push_back(std::make_unique<Fixture>(std::move(f)));
    return g_fixtures.back().get();
}

void remember(const std::string& origin, const verify::WorstCase& w, const pinn::NetworkParams& p,
              const Fixture* f)
{
    if (w.bound_gap == 0.0)
        g_certified.push_back({origin, w, p, f});
}

pinn::NetworkParams random_params(const Fixture& f, const std::vector<int>& hidden, std::mt19937_64& rng)
{
    auto arch = pinn::Architecture::for_network(f.net, hidden, {3});
    auto p = pinn::init_params(arch, rng());
    pinn::fit_scalers(p, f.net, f.domain, {});
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-0.2, 1.2);
    for (std::size_t i = 0; i < p.pg_head.layers.size(); ++i) {
        auto& l = p.pg_head.layers[i];
        const double s = 2.0 / std::sqrt(static_cast<double>(l.weights.cols()));
        l.weights = l.weights.unaryExpr([&](double) { return s * n(rng); });
        const bool last = i + 1 == p.pg_head.layers.size();
        l.biases = l.biases.unaryExpr([&](double) { return last ? u(rng) : 0.7 * n(rng); });
    }
    return p;
}

std::vector<sampling::LabeledRecord> label(const opf::Network& net, const Eigen::MatrixXd& pd)
{
    std::vector<sampling::LabeledRecord> out;
    for (Eigen::Index i = 0; i < pd.cols(); ++i) {
        auto sol = opf::solve_dcopf(net, pd.col(i));
        out.push_back({pd.col(i), sol.pg, opf::recover_duals_from_kkt(net, pd.col(i), sol.pg).duals.pack()});
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome opf_oracle()
{
    Clock clock;
    std::mt19937_64 rng(4711);
    int compared = 0, infeasible = 0, mismatched = 0;
    double worst = 0.0;
    for (int c = 0; c < 25; ++c) {
        auto g = testing::random_case(rng, 2 + c % 4);
        opf::Network net = opf::Network::build(g, grid::compute_ptdf(g));
        auto samples = sampling::lhs_sample(20, sampling::InputDomain::from_case(g), 1000 + c);
        for (Eigen::Index s = 0; s < samples.rows(); ++s) {
            Eigen::VectorXd pd = samples.row(s).transpose();
            auto oracle = testing::vertex_enumeration_min(opf::build_opf_lp(net, pd));
            auto sol = opf::try_solve_dcopf(net, pd);
            if (sol.has_value() != oracle.has_value()) {
                ++mismatched;
                continue;
            }
            if (!oracle) {
                ++infeasible;
                continue;
            }
            const double rel = std::abs(sol->objective - *oracle) / std::max(1.0, std::abs(*oracle));
            worst = std::max(worst, rel);
            ++compared;
        }
    }
    const double t = clock.seconds();
    Outcome o;
    o.pass = mismatched == 0 && worst <= 1e-7 && compared + infeasible == 500 && t < 60.0;
    o.detail = std::to_string(compared) + " optima, " + std::to_string(infeasible) + " infeasible on both sides, max rel err " +
               fmt("%.2e", worst) + ", " + fmt("%.1f", t) + " s";
    return o;
}

Outcome kkt_residuals()
{
    Clock clock;
    Fixture f(grid::load_case_file(testing::case_path("case39")));
    auto samples = sampling::lhs_sample(100, f.domain, 2);
    double worst = 0.0;
    int solved = 0;
    for (Eigen::Index s = 0; s < samples.rows(); ++s) {
        Eigen::VectorXd pd = samples.row(s).transpose();
        auto sol = opf::try_solve_dcopf(f.net, pd);
        if (!sol)
            continue;
        ++solved;
        auto rec = opf::recover_duals_from_kkt(f.net, pd, sol->pg);
        auto r = opf::kkt_residuals(f.net, pd, sol->pg, rec.duals);
        worst = std::max({worst, r.eps_stat, r.eps_comp, r.eps_dual, r.eps_prim});
    }
    const double t = clock.seconds();
    return {solved == 100 && worst <= 1e-6 && t < 120.0,
            "case39, " + std::to_string(solved) + "/100 points, max residual " + fmt("%.2e", worst) + ", " +
                fmt("%.1f", t) + " s"};
}

Outcome gradient_fidelity()
{
    Clock clock;
    auto g = testing::three_bus_ring();
    g.lines[0].flow_limit = 50.0;
    Fixture f(g);
    auto labels = label(f.net, sampling::lhs_sample(6, f.domain, 1).transpose());
    std::vector<Eigen::VectorXd> colloc;
    Eigen::MatrixXd cpd = sampling::lhs_sample(5, f.domain, 2);
    for (Eigen::Index i = 0; i < cpd.rows(); ++i)
        colloc.push_back(cpd.row(i).transpose());
    auto batch = pinn::make_batch(labels, colloc);

    Rng rng(2718);
    int checked = 0, failed = 0;
    double worst = 0.0;
    for (auto v : {pinn::Variant::Plain, pinn::Variant::PgAbs, pinn::Variant::PgSqr, pinn::Variant::PgExp,
                   pinn::Variant::Kkt}) {
        for (int draw = 0; draw < 10; ++draw) {
            auto p = pinn::init_params(pinn::Architecture::for_network(f.net, {5, 4}, {6}), 500 + draw);
            pinn::fit_scalers(p, f.net, f.domain, labels);
            Eigen::VectorXd theta = pinn::flatten(p);
            for (Eigen::Index i = 0; i < theta.size(); ++i)
                theta(i) = rng.uniform(-1.5, 1.5);
            pinn::unflatten(p, theta);
            pinn::LossWeights w{v, 1.0, 0.7, 0.9};
            pinn::NetworkParams grad;
            pinn::loss_and_gradient(p, batch, f.net, w, grad);
            const Eigen::VectorXd analytic = pinn::flatten(grad);
            for (int c = 0; c < 50; ++c) {
                const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
                const double h = 1e-5;
                Eigen::VectorXd t = theta;
                t(k) += h;
                pinn::unflatten(p, t);
                const double up = pinn::loss(p, batch, f.net, w).total;
                t(k) -= 2 * h;
                pinn::unflatten(p, t);
                const double down = pinn::loss(p, batch, f.net, w).total;
                const double fd = (up - down) / (2 * h);
                const double scale = std::max({std::abs(analytic(k)), std::abs(fd), 1e-3});
                const double rel = std::abs(analytic(k) - fd) / scale;
                worst = std::max(worst, rel);
                failed += rel > 1e-4;
                ++checked;
            }
        }
    }
    const double t = clock.seconds();
    return {failed == 0 && checked == 2500 && t < 120.0,
            "5 variants x 10 draws x 50 coordinates, max rel diff " + fmt("%.2e", worst) + ", " + fmt("%.1f", t) +
                " s"};
}

/// Gen/line objectives of the violation programs in normalized coordinates.
struct OracleSetup {
    Eigen::VectorXd x_lo, x_hi;
    std::vector<testing::AffineObjective> gen, line;
};

OracleSetup oracle_setup(const Fixture& f, const pinn::NetworkParams& p)
{
    OracleSetup s;
    const auto& in = p.input_scaler;
    const auto& out = p.pg_scaler;
    s.x_lo = (f.domain.lo - in.offset).cwiseQuotient(in.scale);
    s.x_hi = (f.domain.hi - in.offset).cwiseQuotient(in.scale);
    const Eigen::Index ng = f.net.n_gen(), nd = f.net.n_load();
    for (Eigen::Index g = 0; g < ng; ++g) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(ng);
        a(g) = out.scale(g);
        s.gen.push_back({a, Eigen::VectorXd::Zero(nd), out.offset(g) - f.net.p_max(g)});
        s.gen.push_back({-a, Eigen::VectorXd::Zero(nd), f.net.p_min(g) - out.offset(g)});
    }
    for (Eigen::Index l = 0; l < f.net.n_line(); ++l) {
        const Eigen::VectorXd G = f.net.ptdf_gen.row(l).transpose();
        const Eigen::VectorXd D = f.net.ptdf_load.row(l).transpose();
        const Eigen::VectorXd a = G.cwiseProduct(out.scale);
        const Eigen::VectorXd e = -D.cwiseProduct(in.scale);
        const double c = G.dot(out.offset) - D.dot(in.offset);
        s.line.push_back({a, e, c - f.net.flow_limit(l)});
        s.line.push_back({-a, -e, -c - f.net.flow_limit(l)});
    }
    return s;
}

double clamped_max(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, x);
    return m;
}

Outcome milp_exactness()
{
    Clock clock;
    std::mt19937_64 rng(31337);
    int nets = 0, mismatched = 0, open = 0, max_unstable = 0;
    double worst = 0.0;
    while (nets < 10) {
        const Fixture* f = keep(Fixture(testing::random_case(rng, 2 + static_cast<int>(rng() % 4), 3, 3)));
        const std::vector<int> hidden = nets % 2 ? std::vector<int>{4, 4, 4} : std::vector<int>{6, 6};
        auto p = random_params(*f, hidden, rng);
        const int unstable = static_cast<int>(verify::propagate_bounds(p, f->domain).n_unstable());
        if (unstable < 2 || unstable > 12)
            continue;
        ++nets;
        max_unstable = std::max(max_unstable, unstable);
        auto setup = oracle_setup(*f, p);
        const double gen_ref = clamped_max(testing::relu_pattern_max(p.pg_head.layers, setup.x_lo, setup.x_hi, setup.gen));
        const double line_ref =
            clamped_max(testing::relu_pattern_max(p.pg_head.layers, setup.x_lo, setup.x_hi, setup.line));
        auto gen = verify::worst_case_gen_violation(p, f->net, f->domain);
        auto line = verify::worst_case_line_violation(p, f->net, f->domain);
        for (auto [w, ref] : {std::pair{&gen, gen_ref}, std::pair{&line, line_ref}}) {
            const double err = std::abs(w->value - ref) / std::max(1.0, std::abs(ref));
            worst = std::max(worst, err);
            mismatched += err > 1e-6;
            open += w->bound_gap != 0.0;
            remember("random net " + std::to_string(nets), *w, p, f);
        }
    }
    const double t = clock.seconds();
    return {mismatched == 0 && open == 0 && t < 600.0,
            "10 nets, <= " + std::to_string(max_unstable) + " unstable neurons, max rel err " + fmt("%.2e", worst) +
                ", " + std::to_string(open) + " open gaps, " + fmt("%.1f", t) + " s"};
}

Outcome bilevel_correctness()
{
    Clock clock;
    Fixture f(grid::load_case_file(testing::case_path("case39")));
    auto big_m = verify::default_big_m(f.net, f.domain);
    auto pts = sampling::lhs_sample(50, f.domain, 404);
    int compared = 0, bad = 0;
    double worst_pg = 0.0, worst_comp = 0.0, min_slack = lp::kInf;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        Eigen::VectorXd pd = pts.row(i).transpose();
        auto ref = opf::try_solve_dcopf(f.net, pd);
        if (!ref)
            continue;
        milp::MilpModel m;
        std::vector<int> pd_vars;
        for (Eigen::Index d = 0; d < pd.size(); ++d)
            pd_vars.push_back(m.add_continuous(pd(d), pd(d), "pd"));
        auto kkt = verify::encode_opf_kkt(f.net, pd_vars, big_m, m);
        milp::MilpOptions o;
        o.heuristic = verify::make_heuristic(nullptr, nullptr, f.net, &kkt, pd_vars, m.n_vars());
        auto s = milp::solve_milp(m, o);
        ++compared;
        if (s.status != milp::MilpStatus::Optimal || !s.has_incumbent) {
            ++bad;
            continue;
        }
        double err = 0.0;
        for (Eigen::Index g = 0; g < f.net.n_gen(); ++g)
            err = std::max(err, std::abs(s.x[kkt.pg[g]] - ref->pg(g)));
        auto v = verify::check_solution_validity(nullptr, &kkt, s.x);
        worst_pg = std::max(worst_pg, err);
        worst_comp = std::max(worst_comp, v.max_complementarity);
        min_slack = std::min(min_slack, v.min_big_m_slack);
        bad += err > 1e-6 || !v.ok;
    }
    return {compared == 50 && bad == 0 && worst_comp <= 1e-6 && min_slack >= 1e-4,
            "case39, " + std::to_string(compared) + " points, max pg err " + fmt("%.2e", worst_pg) +
                " MW, max |mu*s| " + fmt("%.2e", worst_comp) + ", min big-M slack ratio " + fmt("%.3g", min_slack) +
                ", " + fmt("%.1f", clock.seconds()) + " s"};
}

Outcome table_three_direction()
{
    Clock clock;
    const Fixture* f = keep(Fixture(grid::load_case_file(testing::case_path("case39"))));
    std::ostringstream detail;
    bool pass = false;
    for (std::uint64_t seed : {7, 11, 13}) {
        auto ds = sampling::build_dataset(f->grid, grid::compute_ptdf(f->grid), 10000, {0.2, 0.5}, seed);
        if (ds.labeled.size() != 2000 || ds.collocation.size() != 5000)
            return {false, "dataset split is not 2000 labeled / 5000 collocation"};
        std::map<pinn::Variant, verify::WorstCase> certified;
        for (auto v : {pinn::Variant::Plain, pinn::Variant::PgAbs}) {
            pinn::TrainConfig c;
            c.pg_hidden = {10, 10};
            c.epochs = 5000;
            c.weights.variant = v;
            c.seed = seed;
            auto r = pinn::train(ds, f->net, c);
            auto w = verify::worst_case_gen_violation(r.params, f->net, f->domain);
            std::cerr << "  seed " << seed << " " << pinn::to_string(v) << ": certified v_g " << w.value << " MW, gap "
                      << w.bound_gap << ", " << clock.seconds() << " s\n";
            remember(std::string("case39 ") + pinn::to_string(v) + " seed " + std::to_string(seed), w, r.params, f);
            certified.emplace(v, w);
        }
        const auto& plain = certified.at(pinn::Variant::Plain);
        const auto& abs = certified.at(pinn::Variant::PgAbs);
        const double reduction = plain.value > 0.0 ? 1.0 - abs.value / plain.value : 0.0;
        detail << "seed " << seed << ": Plain " << fmt("%.1f", plain.value) << " MW, PgAbs " << fmt("%.1f", abs.value)
               << " MW, reduction " << fmt("%.1f", 100.0 * reduction) << "%; ";
        const bool closed = plain.bound_gap == 0.0 && abs.bound_gap == 0.0;
        if (closed && reduction >= 0.10) {
            pass = true;
            break;
        }
    }
    const double t = clock.seconds();
    detail << fmt("%.0f", t) << " s";
    return {pass && t <= 3600.0, detail.str()};
}

/// Counts of samples per equal-width stratum of [lo, hi].
std::vector<int> strata(const Eigen::VectorXd& x, double lo, double hi)
{
    const auto n = static_cast<std::size_t>(x.size());
    std::vector<int> counts(n, 0);
    for (double v : x) {
        auto k = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(n)));
        counts[std::min(k, n - 1)]++;
    }
    return counts;
}

Outcome lhs_stratification()
{
    auto g = grid::load_case_file(testing::case_path("case39"));
    auto domain = sampling::InputDomain::from_case(g);
    int bad_dims = 0, dims = 0;
    for (std::size_t n : {4, 100, 1000}) {
        for (std::uint64_t seed : {1, 2, 3}) {
            auto s = sampling::lhs_sample(n, domain, seed);
            for (Eigen::Index d = 0; d < s.cols(); ++d) {
                auto c = strata(s.col(d), domain.lo(d), domain.hi(d));
                ++dims;
                bad_dims += std::count(c.begin(), c.end(), 1) != static_cast<long>(n);
            }
        }
    }
    return {bad_dims == 0, std::to_string(dims - bad_dims) + "/" + std::to_string(dims) +
                               " dimension draws exactly stratified (n = 4, 100, 1000; 3 seeds)"};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Runs the case39 CLI pipeline in dir and returns the payloads to compare.
std::map<std::string, std::string> cli_pipeline(const fs::path& dir, std::string& error)
{
    std::ostringstream out, err;
    auto run = [&](std::vector<std::string> args) {
        args.insert(args.end(), {"--threads", "1"});
        if (cli::run(args, out, err) != cli::kSuccess)
            error = "command failed: " + args[0] + ": " + err.str();
        return error.empty();
    };
    const auto p = [&](const char* name) { return (dir / name).string(); };
    const std::string ds = p("ds.txt");
    if (!run({"dataset", "--case", "case39", "--n", "1000", "--seed", "7", "--out", ds}))
        return {};
    for (const std::string v : {"plain", "pgabs"})
        if (!run({"train", "--case", "case39", "--dataset", ds, "--variant", v, "--epochs", "100", "--seed", "7",
                  "--pg-hidden", "10,10", "--out", p((v + ".model").c_str())}))
            return {};
    if (!run({"evaluate", "--case", "case39", "--dataset", ds, "--model", p("plain.model"), "--model",
              p("pgabs.model"), "--out", p("eval.json")}))
        return {};
    for (const std::string v : {"plain", "pgabs"})
        if (!run({"verify", "--case", "case39", "--model", p((v + ".model").c_str()), "--objectives", "gen,line",
                  "--out", p((v + ".verify.json").c_str())}))
            return {};
    if (!run({"report", p("eval.json"), p("plain.verify.json"), p("pgabs.verify.json"), "--out", p("report")}))
        return {};

    std::map<std::string, std::string> payload;
    for (const char* f : {"ds.txt", "plain.model", "pgabs.model", "plain.model.history.csv", "pgabs.model.history.csv",
                          "eval.json", "report/metrics.json", "report/tables.md"})
        payload[f] = slurp(dir / f);
    for (const char* f : {"plain.verify.json", "pgabs.verify.json"}) {
        auto j = nlohmann::json::parse(slurp(dir / f));
        j.erase("timing");
        payload[f] = j.dump();
    }
    return payload;
}

Outcome determinism()
{
    Clock clock;
    std::random_device rd;
    const fs::path dir = fs::temp_directory_path() / ("pinnopf_acceptance_" + std::to_string(rd()));
    fs::create_directories(dir);
    std::string error;
    auto first = cli_pipeline(dir, error);
    auto second = error.empty() ? cli_pipeline(dir, error) : decltype(first){};
    fs::remove_all(dir);
    if (!error.empty())
        return {false, error};
    std::vector<std::string> differing;
    for (const auto& [name, bytes] : first)
        if (second.at(name) != bytes)
            differing.push_back(name);
    std::string detail = std::to_string(first.size() - differing.size()) + "/" + std::to_string(first.size()) +
                         " payloads byte-identical across two case39 runs";
    for (const auto& d : differing)
        detail += ", differs: " + d;
    return {differing.empty(), detail + ", " + fmt("%.1f", clock.seconds()) + " s"};
}

Outcome structure_counts()
{
    auto g = grid::load_case_file(testing::case_path("case39"));
    opf::Network net = opf::Network::build(g, grid::compute_ptdf(g));
    auto p = pinn::init_params(pinn::Architecture::for_network(net), 1);
    auto lp = opf::build_opf_lp(net, net.pd_nominal);
    std::size_t eq = 0, ineq = 0;
    for (const auto& c : lp.constraints)
        (c.relation == lp::Relation::Equal ? eq : ineq)++;
    std::vector<Eigen::Index> pg_dims{p.input_dim()}, dual_dims{p.input_dim()};
    for (const auto& l : p.pg_head.layers)
        pg_dims.push_back(l.weights.rows());
    for (const auto& l : p.dual_head.layers)
        dual_dims.push_back(l.weights.rows());
    const bool ok = g.generators.size() == 10 && g.lines.size() == 46 && g.loads.size() == 21 && g.n_bus == 39 &&
                    p.dual_dim() == 113 && pg_dims == std::vector<Eigen::Index>{21, 20, 20, 20, 10} &&
                    dual_dims == std::vector<Eigen::Index>{21, 30, 30, 30, 113} && lp.n_vars == 10 && eq == 1 &&
                    ineq == 92;
    return {ok, std::to_string(g.n_bus) + " buses, " + std::to_string(g.generators.size()) + " gens, " +
                    std::to_string(g.lines.size()) + " lines, dual output " + std::to_string(p.dual_dim()) +
                    ", LP " + std::to_string(lp.n_vars) + " vars / " + std::to_string(eq) + " eq / " +
                    std::to_string(ineq) + " ineq"};
}

Outcome sampling_soundness()
{
    Clock clock;
    // Bilevel kinds on a congested ring so that every objective is covered.
    auto ring = testing::three_bus_ring();
    ring.lines[0].flow_limit = 50.0;
    const Fixture* f = keep(Fixture(ring));
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 3; ++trial) {
        auto p = random_params(*f, {5, 5}, rng);
        remember("ring net " + std::to_string(trial), verify::worst_case_distance(p, f->net, f->domain), p, f);
        remember("ring net " + std::to_string(trial), verify::worst_case_suboptimality(p, f->net, f->domain), p, f);
    }
    int violated = 0;
    std::set<std::string> kinds;
    double worst_excess = -lp::kInf;
    for (const auto& c : g_certified) {
        auto pts = sampling::lhs_sample(10000, c.fixture->domain, 99);
        double best = -lp::kInf;
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
            if (auto m = verify::true_metric(c.w.kind, c.params, c.fixture->net, pts.row(i).transpose()))
                best = std::max(best, *m);
        worst_excess = std::max(worst_excess, best - c.w.value);
        if (best > c.w.value + 1e-6) {
            ++violated;
            std::cerr << "  " << c.origin << " " << verify::to_string(c.w.kind) << ": sampled " << best
                      << " > certified " << c.w.value << "\n";
        }
        kinds.insert(verify::to_string(c.w.kind));
    }
    return {violated == 0 && !g_certified.empty(),
            std::to_string(g_certified.size()) + " zero-gap worst cases over " + std::to_string(kinds.size()) +
                " objective kinds, max(sampled - certified) " + fmt("%.3g", worst_excess) + ", " +
                fmt("%.1f", clock.seconds()) + " s"};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<int, std::string>> titles{
        {1, "OPF oracle equivalence"},     {2, "KKT zero residual"},          {3, "gradient fidelity"},
        {4, "MILP verifier exactness"},    {5, "soundness under sampling"},   {6, "bilevel correctness"},
        {7, "PgAbs certified v_g vs Plain"}, {8, "LHS stratification"},       {9, "determinism"},
        {10, "structure counts"}};
    const std::map<int, std::function<Outcome()>> checks{
        {1, opf_oracle},          {2, kkt_residuals},     {3, gradient_fidelity}, {4, milp_exactness},
        {5, sampling_soundness},  {6, bilevel_correctness}, {7, table_three_direction}, {8, lhs_stratification},
        {9, determinism},         {10, structure_counts}};

    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::atoi(argv[i]));
    if (selected.empty())
        for (const auto& [n, t] : titles)
            selected.insert(n);

    // Soundness samples the worst cases certified by the other criteria, so it runs last.
    std::vector<int> order(selected.begin(), selected.end());
    std::stable_partition(order.begin(), order.end(), [](int n) { return n != 5; });

    std::map<int, Outcome> results;
    for (int n : order) {
        if (!checks.count(n)) {
            std::cerr << "unknown criterion " << n << "\n";
            return 2;
        }
        std::cerr << "running criterion " << n << "\n";
        try {
            results[n] = checks.at(n)();
        } catch (const std::exception& e) {
            results[n] = {false, std::string("exception: ") + e.what()};
        }
    }
    bool all = true;
    for (const auto& [n, title] : titles) {
        if (!results.count(n))
            continue;
        const auto& r = results[n];
        all = all && r.pass;
        std::cout << "criterion " << n << ": " << (r.pass ? "PASS" : "FAIL") << "  " << title << " (" << r.detail
                  << ")\n";
    }
    return all ? 0 : 1;
}
