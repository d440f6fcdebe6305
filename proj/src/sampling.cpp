#include "pinnopf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <thread>

#include "pinnopf/blockfile.hpp"
#include "pinnopf/errors.hpp"
#include "pinnopf/random.hpp"

namespace pinnopf::sampling {

InputDomain InputDomain::from_case(const grid::GridCase& grid, double lo_frac, double hi_frac)
{
    if (!(lo_frac >= 0.0 && lo_frac <= hi_frac))
        throw ValidationError("input domain: need 0 <= lo_frac <= hi_frac");
    InputDomain d;
    const auto n = static_cast<Eigen::Index>(grid.n_load());
    d.lo.resize(n);
    d.hi.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double nominal = grid.loads[static_cast<std::size_t>(i)].p_max_nominal;
        d.lo(i) = lo_frac * nominal;
        d.hi(i) = hi_frac * nominal;
    }
    return d;
}

bool InputDomain::contains(const Eigen::VectorXd& pd, double tol) const
{
    if (pd.size() != lo.size())
        return false;
    for (Eigen::Index i = 0; i < pd.size(); ++i)
        if (pd(i) < lo(i) - tol * (1.0 + std::abs(lo(i))) || pd(i) > hi(i) + tol * (1.0 + std::abs(hi(i))))
            return false;
    return true;
}

namespace {

struct Design {
    Eigen::MatrixXd points;
    Eigen::MatrixXi strata;
};

Design lhs_design(std::size_t n, const InputDomain& bounds, std::uint64_t seed)
{
    if (n == 0)
        throw ValidationError("lhs_sample: n must be at least 1");
    if (bounds.lo.size() != bounds.hi.size())
        throw DimensionError("lhs_sample: lo and hi differ in length");
    for (Eigen::Index d = 0; d < bounds.dims(); ++d)
        if (!(bounds.lo(d) <= bounds.hi(d)))
            throw ValidationError("lhs_sample: lo > hi in dimension " + std::to_string(d));

    const auto rows = static_cast<Eigen::Index>(n);
    Design out{Eigen::MatrixXd(rows, bounds.dims()), Eigen::MatrixXi(rows, bounds.dims())};
    Rng rng(seed);
    std::vector<int> perm(n);
    for (Eigen::Index d = 0; d < bounds.dims(); ++d) {
        for (std::size_t i = 0; i < n; ++i)
            perm[i] = static_cast<int>(i);
        rng.shuffle(perm);
        const double width = (bounds.hi(d) - bounds.lo(d)) / static_cast<double>(n);
        for (Eigen::Index i = 0; i < rows; ++i) {
            int s = perm[static_cast<std::size_t>(i)];
            out.strata(i, d) = s;
            out.points(i, d) = bounds.lo(d) + width * (s + rng.uniform());
        }
    }
    return out;
}

struct PointResult {
    Eigen::VectorXd pd;
    std::optional<opf::OpfSolution> solution;
    bool first_draw_infeasible = false;
    std::size_t redraws = 0;
    bool degenerate = false;
};

constexpr int kStratumAttempts = 10;
constexpr int kFreeAttempts = 200;

PointResult settle_point(const opf::Network& net, const InputDomain& domain, const Design& design,
                         Eigen::Index row, std::size_t n, bool label, std::uint64_t stream_seed)
{
    PointResult r;
    r.pd = design.points.row(row).transpose();
    r.solution = opf::try_solve_dcopf(net, r.pd);
    if (r.solution) {
        if (label) {
            auto rec = opf::recover_duals_from_kkt(net, r.pd, r.solution->pg);
            r.solution->duals = rec.duals;
            r.degenerate = rec.degenerate;
        }
        return r;
    }
    r.first_draw_infeasible = true;
    Rng rng(stream_seed);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int attempt = 0; attempt < kStratumAttempts + kFreeAttempts; ++attempt) {
        ++r.redraws;
        for (Eigen::Index d = 0; d < domain.dims(); ++d) {
            double span = domain.hi(d) - domain.lo(d);
            double u = attempt < kStratumAttempts ? (design.strata(row, d) + rng.uniform()) * inv_n : rng.uniform();
            r.pd(d) = domain.lo(d) + span * u;
        }
        r.solution = opf::try_solve_dcopf(net, r.pd);
        if (r.solution) {
            if (label) {
                auto rec = opf::recover_duals_from_kkt(net, r.pd, r.solution->pg);
                r.solution->duals = rec.duals;
                r.degenerate = rec.degenerate;
            }
            return r;
        }
    }
    return r;
}

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, Eigen::Index cols)
{
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

std::vector<Eigen::VectorXd> unstack(const Eigen::MatrixXd& m)
{
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        out.emplace_back(m.row(i).transpose());
    return out;
}

} // namespace

Eigen::MatrixXd lhs_sample(std::size_t n, const InputDomain& bounds, std::uint64_t seed)
{
    return lhs_design(n, bounds, seed).points;
}

Dataset build_dataset(const grid::GridCase& grid, const grid::PtdfMatrix& ptdf, std::size_t n_total,
                      const Split& split, std::uint64_t seed, const BuildOptions& options)
{
    if (!(split.labeled_frac > 0.0 && split.labeled_frac < 1.0) ||
        !(split.collocation_frac > 0.0 && split.collocation_frac < 1.0) ||
        split.labeled_frac + split.collocation_frac > 1.0 + 1e-12)
        throw ValidationError("build_dataset: fractions must lie in (0,1) and sum to at most 1");
    if (n_total == 0)
        throw ValidationError("build_dataset: n_total must be at least 1");

    const auto n_lab = static_cast<std::size_t>(std::llround(split.labeled_frac * static_cast<double>(n_total)));
    const auto n_col = std::min(n_total - n_lab,
                                static_cast<std::size_t>(std::llround(split.collocation_frac * static_cast<double>(n_total))));

    const opf::Network net = opf::Network::build(grid, ptdf);
    Dataset ds;
    ds.case_id = grid.name;
    ds.seed = seed;
    ds.input_domain = InputDomain::from_case(grid, options.lo_frac, options.hi_frac);

    const Design design = lhs_design(n_total, ds.input_domain, seed);
    std::vector<PointResult> results(n_total);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n_total; i += stride) {
            bool label = i < n_lab || i >= n_lab + n_col;
            results[i] = settle_point(net, ds.input_domain, design, static_cast<Eigen::Index>(i), n_total,
                                      label, derive_seed(seed, i));
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_total)));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(work, t, threads);
        for (auto& th : pool)
            th.join();
    }

    std::size_t first_infeasible = 0;
    for (const auto& r : results) {
        first_infeasible += r.first_draw_infeasible ? 1 : 0;
        ds.infeasible_redraws += r.redraws;
    }
    if (2 * first_infeasible > n_total)
        throw InfeasibleError("build_dataset: " + std::to_string(first_infeasible) + " of " +
                              std::to_string(n_total) +
                              " samples have no feasible dispatch; the input domain is likely mis-specified");

    for (std::size_t i = 0; i < n_total; ++i) {
        auto& r = results[i];
        if (!r.solution)
            throw InfeasibleError("build_dataset: no feasible redraw found for sample " + std::to_string(i));
        if (i >= n_lab && i < n_lab + n_col) {
            ds.collocation.push_back(std::move(r.pd));
            continue;
        }
        ds.degenerate_duals += r.degenerate ? 1 : 0;
        LabeledRecord rec{std::move(r.pd), r.solution->pg, r.solution->duals.pack()};
        (i < n_lab ? ds.labeled : ds.unseen_test).push_back(std::move(rec));
    }
    return ds;
}

void validate_dataset(const Dataset& ds, const opf::Network& net, bool resolve, double tol)
{
    const Eigen::Index nd = net.n_load();
    if (ds.input_domain.dims() != nd)
        throw ValidationError("dataset: input domain has " + std::to_string(ds.input_domain.dims()) +
                              " dimensions, case has " + std::to_string(nd) + " loads");
    auto check_pd = [&](const Eigen::VectorXd& pd, const char* pool) {
        if (pd.size() != nd)
            throw ValidationError(std::string("dataset: ") + pool + " record has the wrong pd length");
        if (!ds.input_domain.contains(pd))
            throw ValidationError(std::string("dataset: ") + pool + " record lies outside the input domain");
    };
    auto check_labeled = [&](const LabeledRecord& r, const char* pool) {
        check_pd(r.pd, pool);
        if (r.pg_star.size() != net.n_gen() || r.duals_star.size() != net.n_dual())
            throw ValidationError(std::string("dataset: ") + pool + " label has the wrong length");
        double scale = 1.0 + net.p_max.cwiseAbs().maxCoeff();
        if (std::abs(r.pg_star.sum() - r.pd.sum()) > tol * scale || opf::generator_violation(net, r.pg_star) > tol * scale ||
            opf::line_violation(net, r.pg_star, r.pd) > tol * scale)
            throw ValidationError(std::string("dataset: ") + pool + " label is not a feasible dispatch");
        if (resolve) {
            auto sol = opf::solve_dcopf(net, r.pd);
            double ref = net.cost.dot(sol.pg);
            if (std::abs(net.cost.dot(r.pg_star) - ref) > tol * (1.0 + std::abs(ref)))
                throw ValidationError(std::string("dataset: ") + pool + " label is not optimal");
        }
    };
    for (const auto& r : ds.labeled)
        check_labeled(r, "labeled");
    for (const auto& r : ds.unseen_test)
        check_labeled(r, "unseen_test");
    for (const auto& pd : ds.collocation)
        check_pd(pd, "collocation");
}

void save_dataset(const Dataset& ds, std::ostream& sink)
{
    const Eigen::Index nd = ds.input_domain.dims();
    const Eigen::Index ng = ds.labeled.empty() ? (ds.unseen_test.empty() ? 0 : ds.unseen_test[0].pg_star.size())
                                               : ds.labeled[0].pg_star.size();
    const Eigen::Index nm = ds.labeled.empty() ? (ds.unseen_test.empty() ? 0 : ds.unseen_test[0].duals_star.size())
                                               : ds.labeled[0].duals_star.size();
    io::BlockDocument doc;
    doc.kind = "pinnopf-dataset";
    doc.schema_version = kDatasetSchemaVersion;
    doc.set("case_id", ds.case_id.empty() ? "-" : ds.case_id);
    doc.set("seed", std::to_string(ds.seed));
    doc.set("n_labeled", std::to_string(ds.labeled.size()));
    doc.set("n_collocation", std::to_string(ds.collocation.size()));
    doc.set("n_unseen_test", std::to_string(ds.unseen_test.size()));
    doc.set("infeasible_redraws", std::to_string(ds.infeasible_redraws));
    doc.set("degenerate_duals", std::to_string(ds.degenerate_duals));

    Eigen::MatrixXd domain(2, nd);
    domain.row(0) = ds.input_domain.lo.transpose();
    domain.row(1) = ds.input_domain.hi.transpose();
    doc.add_block("input_domain", domain);

    auto add_pool = [&](const std::vector<LabeledRecord>& pool, const std::string& name) {
        std::vector<Eigen::VectorXd> pd, pg, du;
        for (const auto& r : pool) {
            if (r.pd.size() != nd || r.pg_star.size() != ng || r.duals_star.size() != nm)
                throw DimensionError("save_dataset: inconsistent record lengths in " + name);
            pd.push_back(r.pd);
            pg.push_back(r.pg_star);
            du.push_back(r.duals_star);
        }
        doc.add_block(name + "_pd", stack(pd, nd));
        doc.add_block(name + "_pg_star", stack(pg, ng));
        doc.add_block(name + "_duals_star", stack(du, nm));
    };
    add_pool(ds.labeled, "labeled");
    for (const auto& pd : ds.collocation)
        if (pd.size() != nd)
            throw DimensionError("save_dataset: inconsistent collocation length");
    doc.add_block("collocation_pd", stack(ds.collocation, nd));
    add_pool(ds.unseen_test, "unseen_test");
    io::write_document(doc, sink);
}

Dataset load_dataset(std::istream& source)
{
    auto doc = io::read_document(source, "pinnopf-dataset", kDatasetSchemaVersion);
    Dataset ds;
    ds.case_id = doc.get("case_id");
    if (ds.case_id == "-")
        ds.case_id.clear();
    try {
        ds.seed = std::stoull(doc.get("seed"));
        ds.infeasible_redraws = std::stoull(doc.get("infeasible_redraws"));
        ds.degenerate_duals = std::stoull(doc.get("degenerate_duals"));
    } catch (const std::logic_error&) {
        throw ParseError("dataset: bad integer header field");
    }
    const auto& domain = doc.block("input_domain");
    if (domain.rows() != 2)
        throw ParseError("dataset: input_domain block must have 2 rows");
    ds.input_domain.lo = domain.row(0).transpose();
    ds.input_domain.hi = domain.row(1).transpose();

    auto read_pool = [&](const std::string& name) {
        auto pd = unstack(doc.block(name + "_pd"));
        auto pg = unstack(doc.block(name + "_pg_star"));
        auto du = unstack(doc.block(name + "_duals_star"));
        if (pg.size() != pd.size() || du.size() != pd.size())
            throw ParseError("dataset: " + name + " blocks differ in row count");
        std::vector<LabeledRecord> out;
        for (std::size_t i = 0; i < pd.size(); ++i)
            out.push_back({std::move(pd[i]), std::move(pg[i]), std::move(du[i])});
        return out;
    };
    ds.labeled = read_pool("labeled");
    ds.collocation = unstack(doc.block("collocation_pd"));
    ds.unseen_test = read_pool("unseen_test");
    if (std::to_string(ds.labeled.size()) != doc.get("n_labeled") ||
        std::to_string(ds.collocation.size()) != doc.get("n_collocation") ||
        std::to_string(ds.unseen_test.size()) != doc.get("n_unseen_test"))
        throw ParseError("dataset: header counts disagree with the blocks");
    return ds;
}

void save_dataset_file(const Dataset& ds, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    save_dataset(ds, out);
}

Dataset load_dataset_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    return load_dataset(in);
}

} // namespace pinnopf::sampling
