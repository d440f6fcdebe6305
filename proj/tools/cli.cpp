#include "cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pinnopf/blockfile.hpp"
#include "pinnopf/dcopf.hpp"
#include "pinnopf/errors.hpp"
#include "pinnopf/grid.hpp"
#include "pinnopf/pinn.hpp"
#include "pinnopf/sampling.hpp"
#include "pinnopf/verifier.hpp"

namespace pinnopf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct Settings {
    std::string case_name;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;

    std::size_t n_total = 10000;
    double labeled_frac = 0.2;
    double collocation_frac = 0.5;
    double lo_frac = 0.6;
    double hi_frac = 1.0;

    pinn::TrainConfig train;

    std::vector<std::string> objectives{"gen", "line", "distance", "suboptimality"};
    std::size_t node_limit = 200000;
    std::string pool = "unseen";
};

template <class T>
void take(const json& obj, const char* key, T& dst)
{
    if (obj.contains(key))
        dst = obj.at(key).get<T>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where)
{
    for (const auto& [k, v] : obj.items())
        if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
            throw UsageError("config: unknown key '" + k + "' in " + where);
}

void apply_config(Settings& s, const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config: " + std::string(e.what()));
    }
    try {
        reject_unknown(j, {"case", "seed", "threads", "dataset", "train", "verify", "evaluate"}, "top level");
        take(j, "case", s.case_name);
        if (j.contains("seed"))
            s.seed = j.at("seed").get<std::uint64_t>();
        take(j, "threads", s.threads);
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            reject_unknown(d, {"n_total", "labeled_frac", "collocation_frac", "lo_frac", "hi_frac"}, "dataset");
            take(d, "n_total", s.n_total);
            take(d, "labeled_frac", s.labeled_frac);
            take(d, "collocation_frac", s.collocation_frac);
            take(d, "lo_frac", s.lo_frac);
            take(d, "hi_frac", s.hi_frac);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t,
                           {"variant", "epochs", "batches", "learning_rate", "validation_frac", "pg_hidden",
                            "dual_hidden", "lambda_p", "lambda_l", "lambda_eps"},
                           "train");
            if (t.contains("variant"))
                s.train.weights.variant = pinn::parse_variant(t.at("variant").get<std::string>());
            take(t, "epochs", s.train.epochs);
            take(t, "batches", s.train.batches);
            take(t, "learning_rate", s.train.learning_rate);
            take(t, "validation_frac", s.train.validation_frac);
            take(t, "pg_hidden", s.train.pg_hidden);
            take(t, "dual_hidden", s.train.dual_hidden);
            take(t, "lambda_p", s.train.weights.lambda_p);
            take(t, "lambda_l", s.train.weights.lambda_l);
            take(t, "lambda_eps", s.train.weights.lambda_eps);
        }
        if (j.contains("verify")) {
            const auto& v = j.at("verify");
            reject_unknown(v, {"objectives", "node_limit"}, "verify");
            take(v, "objectives", s.objectives);
            take(v, "node_limit", s.node_limit);
        }
        if (j.contains("evaluate")) {
            const auto& e = j.at("evaluate");
            reject_unknown(e, {"pool"}, "evaluate");
            take(e, "pool", s.pool);
        }
    } catch (const json::exception& e) {
        throw UsageError("config: " + std::string(e.what()));
    }
}

json settings_json(const std::string& command, const Settings& s)
{
    json j;
    j["command"] = command;
    j["case"] = s.case_name;
    j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
    if (command == "dataset")
        j["dataset"] = {{"n_total", s.n_total},
                        {"labeled_frac", s.labeled_frac},
                        {"collocation_frac", s.collocation_frac},
                        {"lo_frac", s.lo_frac},
                        {"hi_frac", s.hi_frac}};
    if (command == "train")
        j["train"] = {{"variant", pinn::to_string(s.train.weights.variant)},
                      {"epochs", s.train.epochs},
                      {"batches", s.train.batches},
                      {"learning_rate", s.train.learning_rate},
                      {"validation_frac", s.train.validation_frac},
                      {"pg_hidden", s.train.pg_hidden},
                      {"dual_hidden", s.train.dual_hidden},
                      {"lambda_p", s.train.weights.lambda_p},
                      {"lambda_l", s.train.weights.lambda_l},
                      {"lambda_eps", s.train.weights.lambda_eps}};
    if (command == "verify")
        j["verify"] = {{"objectives", s.objectives},
                       {"node_limit", s.node_limit},
                       {"lo_frac", s.lo_frac},
                       {"hi_frac", s.hi_frac}};
    if (command == "evaluate")
        j["evaluate"] = {{"pool", s.pool}};
    return j;
}

json provenance(const std::string& command, const Settings& s, const std::vector<std::string>& inputs)
{
    json settings = settings_json(command, s);
    json p;
    p["config_hash"] = io::sha256_hex(settings.dump());
    p["code_version"] = PINNOPF_VERSION;
    p["seed"] = settings["seed"];
    p["settings"] = settings;
    p["inputs"] = inputs;
    return p;
}

std::uint64_t require_seed(const Settings& s)
{
    if (!s.seed)
        throw UsageError("a seed is required (--seed or \"seed\" in the config)");
    return *s.seed;
}

std::vector<int> parse_layers(const std::string& text)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            int v = std::stoi(item, &used);
            if (used != item.size() || v < 1)
                throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::logic_error&) {
            throw UsageError("bad layer list '" + text + "'");
        }
    }
    if (out.empty())
        throw UsageError("empty layer list");
    return out;
}

struct LoadedCase {
    grid::GridCase grid;
    grid::PtdfMatrix ptdf;
    opf::Network net;
    fs::path path;
};

LoadedCase load_case(const Settings& s)
{
    if (s.case_name.empty())
        throw UsageError("a case is required (--case or \"case\" in the config)");
    LoadedCase c;
    c.path = resolve_case(s.case_name);
    c.grid = grid::load_case_file(c.path);
    c.ptdf = grid::compute_ptdf(c.grid);
    c.net = opf::Network::build(c.grid, c.ptdf);
    return c;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    out << text;
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void require_file(const std::string& path, const char* what)
{
    if (!fs::is_regular_file(path))
        throw UsageError(std::string(what) + " '" + path + "' not found");
}

void ensure_parent(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
}

fs::path meta_path(const fs::path& model) { return fs::path(model.string() + ".meta.json"); }

/// Label and seed recorded next to a model by `train`; falls back to the file stem.
json model_meta(const fs::path& model)
{
    if (fs::exists(meta_path(model)))
        return read_json(meta_path(model));
    return json{{"label", model.stem().string()}, {"seed", nullptr}, {"config_hash", nullptr}};
}

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------

int cmd_dataset(const Settings& s, const std::string& out_path, std::ostream& out)
{
    if (out_path.empty())
        throw UsageError("dataset: --out is required");
    const auto seed = require_seed(s);
    auto c = load_case(s);
    sampling::BuildOptions opts;
    opts.threads = s.threads;
    opts.lo_frac = s.lo_frac;
    opts.hi_frac = s.hi_frac;
    auto ds = sampling::build_dataset(c.grid, c.ptdf, s.n_total, {s.labeled_frac, s.collocation_frac}, seed, opts);
    ensure_parent(out_path);
    sampling::save_dataset_file(ds, out_path);
    out << "dataset " << out_path << ": " << ds.labeled.size() << " labeled, " << ds.collocation.size()
        << " collocation, " << ds.unseen_test.size() << " unseen test\n";
    out << "infeasible redraws: " << ds.infeasible_redraws << "\n";
    if (ds.degenerate_duals)
        out << "degenerate dual labels: " << ds.degenerate_duals << "\n";
    return kSuccess;
}

int cmd_train(const Settings& s, const std::string& dataset_path, const std::string& out_path, std::ostream& out)
{
    if (dataset_path.empty() || out_path.empty())
        throw UsageError("train: --dataset and --out are required");
    pinn::TrainConfig cfg = s.train;
    cfg.seed = require_seed(s);
    require_file(dataset_path, "dataset");
    auto c = load_case(s);
    auto ds = sampling::load_dataset_file(dataset_path);
    sampling::validate_dataset(ds, c.net);
    if (cfg.weights.variant == pinn::Variant::Plain)
        out << "variant Plain: " << ds.collocation.size() << " collocation points ignored\n";
    auto r = pinn::train(ds, c.net, cfg);
    ensure_parent(out_path);
    pinn::save_model_file(r.params, out_path);
    std::ostringstream hist;
    pinn::save_history(r.history, hist);
    write_text(out_path + ".history.csv", hist.str());
    json prov = provenance("train", s, {dataset_path});
    json meta{{"label", pinn::to_string(cfg.weights.variant)},
              {"seed", cfg.seed},
              {"config_hash", prov["config_hash"]},
              {"provenance", prov}};
    write_text(meta_path(out_path), meta.dump(2) + "\n");
    out << "model " << out_path << ": best epoch " << r.history.best_epoch << " of " << r.history.epochs.size()
        << "\n";
    return kSuccess;
}

std::vector<double> parse_grid(const std::string& text, double fallback)
{
    if (text.empty())
        return {fallback};
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size() || v < 0.0)
                throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::logic_error&) {
            throw UsageError("bad weight list '" + text + "'");
        }
    }
    return out;
}

std::string grid_tag(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

/// Trains one model per weight combination and ranks them by validation loss.
int cmd_sweep(const Settings& s, const std::string& dataset_path, const std::array<std::string, 3>& grids,
              const std::string& out_dir, std::ostream& out)
{
    if (dataset_path.empty() || out_dir.empty())
        throw UsageError("sweep: --dataset and --out are required");
    const auto seed = require_seed(s);
    require_file(dataset_path, "dataset");
    const auto lp = parse_grid(grids[0], s.train.weights.lambda_p);
    const auto ll = parse_grid(grids[1], s.train.weights.lambda_l);
    const auto le = parse_grid(grids[2], s.train.weights.lambda_eps);
    auto c = load_case(s);
    auto ds = sampling::load_dataset_file(dataset_path);
    sampling::validate_dataset(ds, c.net);
    fs::create_directories(out_dir);

    json doc;
    doc["kind"] = "sweep";
    doc["case"] = c.grid.name;
    doc["provenance"] = provenance("train", s, {dataset_path});
    doc["provenance"]["settings"]["sweep"] = {{"lambda_p", lp}, {"lambda_l", ll}, {"lambda_eps", le}};
    doc["provenance"]["config_hash"] = io::sha256_hex(doc["provenance"]["settings"].dump());
    doc["rows"] = json::array();
    for (double p : lp)
        for (double l : ll)
            for (double e : le) {
                Settings run = s;
                run.train.weights.lambda_p = p;
                run.train.weights.lambda_l = l;
                run.train.weights.lambda_eps = e;
                pinn::TrainConfig cfg = run.train;
                cfg.seed = seed;
                auto r = pinn::train(ds, c.net, cfg);
                const std::string name = std::string(pinn::to_string(cfg.weights.variant)) + "_p" + grid_tag(p) +
                                         "_l" + grid_tag(l) + "_e" + grid_tag(e) + ".model";
                const fs::path model = fs::path(out_dir) / name;
                pinn::save_model_file(r.params, model);
                json prov = provenance("train", run, {dataset_path});
                json meta{{"label", pinn::to_string(cfg.weights.variant)},
                          {"seed", seed},
                          {"config_hash", prov["config_hash"]},
                          {"provenance", prov}};
                write_text(meta_path(model), meta.dump(2) + "\n");
                const auto& best = r.history.epochs[static_cast<std::size_t>(r.history.best_epoch)].validation;
                const auto ev = pinn::evaluate(r.params, ds.unseen_test, c.net);
                doc["rows"].push_back({{"model", name},
                                       {"lambda_p", p},
                                       {"lambda_l", l},
                                       {"lambda_eps", e},
                                       {"best_epoch", r.history.best_epoch},
                                       {"validation_loss", best.total},
                                       {"mae_pct", ev.mae_pct},
                                       {"v_g", ev.v_g},
                                       {"v_line", ev.v_line},
                                       {"max_v_g", ev.max_v_g},
                                       {"max_v_line", ev.max_v_line}});
                out << name << ": validation loss " << best.total << ", MAE " << fixed(ev.mae_pct, 2) << " %, v_g "
                    << fixed(ev.v_g, 2) << " MW, v_line " << fixed(ev.v_line, 2) << " MW\n";
            }
    write_text(fs::path(out_dir) / "sweep.json", doc.dump(2) + "\n");
    return kSuccess;
}

json evaluation_row(const std::string& label, const std::string& source, const json& meta,
                    const pinn::Evaluation& e, const std::string& pool)
{
    return json{{"label", label},
                {"model", source},
                {"seed", meta.value("seed", json(nullptr))},
                {"config_hash", meta.value("config_hash", json(nullptr))},
                {"pool", pool},
                {"samples", e.samples},
                {"mae_pct", e.mae_pct},
                {"v_g", e.v_g},
                {"v_line", e.v_line},
                {"v_dist", e.v_dist},
                {"v_opt", e.v_opt},
                {"max_v_g", e.max_v_g},
                {"max_v_line", e.max_v_line},
                {"share_gen_violated", e.share_gen_violated},
                {"share_line_violated", e.share_line_violated}};
}

int cmd_evaluate(const Settings& s, const std::string& dataset_path, const std::vector<std::string>& models,
                 bool with_labels, const std::string& out_path, std::ostream& out)
{
    if (dataset_path.empty() || (models.empty() && !with_labels))
        throw UsageError("evaluate: --dataset and at least one --model (or --labels) are required");
    if (s.pool != "unseen" && s.pool != "labeled")
        throw UsageError("evaluate: --pool must be 'unseen' or 'labeled'");
    require_file(dataset_path, "dataset");
    for (const auto& m : models)
        require_file(m, "model");
    auto c = load_case(s);
    auto ds = sampling::load_dataset_file(dataset_path);
    sampling::validate_dataset(ds, c.net);
    const auto& pool = s.pool == "unseen" ? ds.unseen_test : ds.labeled;

    json doc;
    doc["kind"] = "evaluation";
    std::vector<std::string> inputs{dataset_path};
    inputs.insert(inputs.end(), models.begin(), models.end());
    doc["provenance"] = provenance("evaluate", s, inputs);
    doc["case"] = c.grid.name;
    doc["rows"] = json::array();
    if (with_labels) {
        Eigen::MatrixXd pg(c.net.n_gen(), static_cast<Eigen::Index>(pool.size()));
        for (std::size_t i = 0; i < pool.size(); ++i)
            pg.col(static_cast<Eigen::Index>(i)) = pool[i].pg_star;
        doc["rows"].push_back(
            evaluation_row("labels", "dataset labels", json{{"seed", ds.seed}}, pinn::evaluate_predictions(pg, pool, c.net), s.pool));
    }
    for (const auto& m : models) {
        auto params = pinn::load_model_file(m);
        auto meta = model_meta(m);
        doc["rows"].push_back(
            evaluation_row(meta["label"].get<std::string>(), m, meta, pinn::evaluate(params, pool, c.net), s.pool));
    }
    if (!out_path.empty())
        write_text(out_path, doc.dump(2) + "\n");
    out << render_tables({doc});
    return kSuccess;
}

std::optional<verify::WorstCaseKind> parse_objective(const std::string& name)
{
    if (name == "gen")
        return verify::WorstCaseKind::GenViolation;
    if (name == "line")
        return verify::WorstCaseKind::LineViolation;
    if (name == "distance")
        return verify::WorstCaseKind::Distance;
    if (name == "suboptimality")
        return verify::WorstCaseKind::Suboptimality;
    return std::nullopt;
}

json worst_case_json(const verify::WorstCase& w)
{
    std::vector<double> pd(w.argmax_pd.data(), w.argmax_pd.data() + w.argmax_pd.size());
    return json{{"kind", verify::to_string(w.kind)},
                {"value", w.value},
                {"units", w.units},
                {"value_pct", w.value_pct},
                {"pct_basis", w.pct_basis},
                {"argmax_pd", pd},
                {"argmax_label", w.argmax_label},
                {"gap", std::isfinite(w.bound_gap) ? json(w.bound_gap) : json("inf")},
                {"incumbent", w.certificate.incumbent},
                {"best_bound", std::isfinite(w.certificate.best_bound) ? json(w.certificate.best_bound) : json("inf")},
                {"node_count", w.certificate.nodes},
                {"milps_solved", w.certificate.milps_solved},
                {"milps_skipped", w.certificate.milps_skipped},
                {"validity", w.verified ? "passed" : "failed"},
                {"resimulated", std::isfinite(w.resimulated) ? json(w.resimulated) : json(nullptr)},
                {"notes", w.notes}};
}

int cmd_verify(const Settings& s, const std::string& model_path, const std::string& out_path, std::ostream& out)
{
    if (model_path.empty())
        throw UsageError("verify: --model is required");
    std::vector<verify::WorstCaseKind> kinds;
    for (const auto& o : s.objectives) {
        auto k = parse_objective(o);
        if (!k)
            throw UsageError("verify: unknown objective '" + o + "' (gen, line, distance, suboptimality)");
        kinds.push_back(*k);
    }
    if (kinds.empty())
        throw UsageError("verify: no objectives selected");
    require_file(model_path, "model");
    auto c = load_case(s);
    auto params = pinn::load_model_file(model_path);
    if (params.input_dim() != c.net.n_load() || params.n_gen != c.net.n_gen() || params.n_line != c.net.n_line())
        throw DimensionError("verify: model and case dimensions differ");
    auto meta = model_meta(model_path);
    const auto domain = sampling::InputDomain::from_case(c.grid, s.lo_frac, s.hi_frac);
    verify::VerifyOptions opts;
    opts.node_limit = s.node_limit;
    opts.threads = s.threads;

    json doc;
    doc["kind"] = "verification";
    doc["provenance"] = provenance("verify", s, {model_path});
    doc["case"] = c.grid.name;
    doc["label"] = meta["label"];
    doc["model"] = model_path;
    doc["seed"] = meta.value("seed", json(nullptr));
    doc["config_hash"] = meta.value("config_hash", json(nullptr));
    doc["results"] = json::array();
    doc["timing"] = json::object();
    bool gap = false, failed = false;
    for (auto k : kinds) {
        const auto t0 = std::chrono::steady_clock::now();
        verify::WorstCase w;
        switch (k) {
        case verify::WorstCaseKind::GenViolation: w = verify::worst_case_gen_violation(params, c.net, domain, opts); break;
        case verify::WorstCaseKind::LineViolation: w = verify::worst_case_line_violation(params, c.net, domain, opts); break;
        case verify::WorstCaseKind::Distance: w = verify::worst_case_distance(params, c.net, domain, opts); break;
        case verify::WorstCaseKind::Suboptimality: w = verify::worst_case_suboptimality(params, c.net, domain, opts); break;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        doc["results"].push_back(worst_case_json(w));
        doc["timing"][verify::to_string(k)] = secs;
        gap = gap || w.bound_gap > 0.0;
        failed = failed || !w.verified;
        out << verify::to_string(k) << ": " << w.value << " " << w.units << " (" << fixed(w.value_pct, 2) << " "
            << w.pct_basis << "), gap " << w.bound_gap << ", nodes " << w.certificate.nodes << ", validity "
            << (w.verified ? "passed" : "failed") << "\n";
        for (const auto& n : w.notes)
            out << "  note: " << n << "\n";
    }
    if (!out_path.empty())
        write_text(out_path, doc.dump(2) + "\n");
    if (failed)
        return kSolverFailure;
    return gap ? kVerifiedWithGap : kSuccess;
}

int cmd_report(const Settings& s, const std::vector<std::string>& inputs, const std::string& out_dir, std::ostream& out)
{
    if (inputs.empty())
        throw UsageError("report: no input files given");
    if (out_dir.empty())
        throw UsageError("report: --out is required");
    std::vector<json> docs;
    for (const auto& p : inputs) {
        auto d = read_json(p);
        const auto kind = d.value("kind", std::string{});
        if (kind != "evaluation" && kind != "verification")
            throw UsageError("report: " + p + " is neither an evaluation nor a verification file");
        docs.push_back(std::move(d));
    }
    json metrics;
    metrics["kind"] = "report";
    metrics["provenance"] = provenance("report", s, inputs);
    metrics["rows"] = merge_rows(docs);
    const std::string tables = render_tables(docs);
    std::ostringstream md;
    md << "<!-- config_hash " << metrics["provenance"]["config_hash"].get<std::string>() << " code_version "
       << PINNOPF_VERSION << " -->\n\n"
       << tables;
    write_text(fs::path(out_dir) / "metrics.json", metrics.dump(2) + "\n");
    write_text(fs::path(out_dir) / "tables.md", md.str());
    out << tables;
    return kSuccess;
}

int cmd_inspect(const Settings& s, std::ostream& out)
{
    auto c = load_case(s);
    const auto lp = opf::build_opf_lp(c.net, c.net.pd_nominal);
    std::size_t eq = 0;
    for (const auto& r : lp.constraints)
        eq += r.relation == lp::Relation::Equal;
    auto arch = pinn::Architecture::for_network(c.net);
    out << "case " << c.grid.name << " (" << c.path.string() << ")\n"
        << "buses " << c.grid.n_bus << ", generators " << c.net.n_gen() << ", loads " << c.net.n_load()
        << ", lines " << c.net.n_line() << "\n"
        << "max load " << c.net.pd_nominal.sum() << " MW, generation capacity " << c.net.p_max.sum() << " MW\n"
        << "opf lp: " << lp.n_vars << " variables, " << eq << " equality, " << lp.constraints.size() - eq
        << " inequality rows\n"
        << "model: input " << arch.input_dim << ", pg output " << arch.n_gen << ", dual output " << arch.dual_dim()
        << "\n";
    return kSuccess;
}

} // namespace

fs::path resolve_case(const std::string& name)
{
    fs::path p(name);
    if (fs::is_regular_file(p))
        return p;
    for (const fs::path& dir : {fs::path("cases"), fs::path(PINNOPF_CASE_DIR)}) {
        fs::path candidate = dir / (name + ".json");
        if (fs::is_regular_file(candidate))
            return candidate;
    }
    throw UsageError("case '" + name + "' not found");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Physics-informed DC-OPF surrogates with worst-case verification", "pinnopf"};
    app.require_subcommand(1);
    app.set_version_flag("--version", PINNOPF_VERSION);

    std::string config_path, case_name, out_path, dataset_path, variant, pg_hidden, dual_hidden, objectives, pool;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t n_total = 0, node_limit = 0;
    int epochs = 0, batches = 0;
    double lr = 0, lambda_p = 0, lambda_l = 0, lambda_eps = 0, lo_frac = 0, hi_frac = 0;
    std::vector<std::string> models, inputs;
    bool with_labels = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--case", case_name, "case name or path");
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", out_path, "output path");
        sub->add_option("--threads", threads, "worker threads (1 = deterministic reference mode)")
            ->check(CLI::PositiveNumber);
    };
    auto* ds = app.add_subcommand("dataset", "sample demands and solve the OPF labels");
    common(ds);
    ds->add_option("--n", n_total, "total number of samples");
    ds->add_option("--lo-frac", lo_frac, "lower demand fraction");
    ds->add_option("--hi-frac", hi_frac, "upper demand fraction");

    auto* tr = app.add_subcommand("train", "train one model variant");
    common(tr);
    tr->add_option("--dataset", dataset_path, "dataset file");
    tr->add_option("--variant", variant, "plain, pgabs, pgsqr, pgexp or kkt");
    tr->add_option("--epochs", epochs);
    tr->add_option("--batches", batches);
    tr->add_option("--lr", lr);
    tr->add_option("--pg-hidden", pg_hidden, "comma-separated layer widths");
    tr->add_option("--dual-hidden", dual_hidden, "comma-separated layer widths");
    tr->add_option("--lambda-p", lambda_p);
    tr->add_option("--lambda-l", lambda_l);
    tr->add_option("--lambda-eps", lambda_eps);

    std::array<std::string, 3> weight_grids;
    auto* sw = app.add_subcommand("sweep", "train one model per loss-weight combination");
    common(sw);
    sw->add_option("--dataset", dataset_path, "dataset file");
    sw->add_option("--variant", variant, "plain, pgabs, pgsqr, pgexp or kkt");
    sw->add_option("--epochs", epochs);
    sw->add_option("--batches", batches);
    sw->add_option("--lr", lr);
    sw->add_option("--pg-hidden", pg_hidden, "comma-separated layer widths");
    sw->add_option("--dual-hidden", dual_hidden, "comma-separated layer widths");
    sw->add_option("--lambda-p", weight_grids[0], "comma-separated values");
    sw->add_option("--lambda-l", weight_grids[1], "comma-separated values");
    sw->add_option("--lambda-eps", weight_grids[2], "comma-separated values");

    auto* ev = app.add_subcommand("evaluate", "average metrics over a test pool");
    common(ev);
    ev->add_option("--dataset", dataset_path, "dataset file");
    ev->add_option("--model", models, "model file (repeatable)");
    ev->add_option("--pool", pool, "unseen or labeled");
    ev->add_flag("--labels", with_labels, "add a row that replays the dataset labels");

    auto* vf = app.add_subcommand("verify", "worst-case guarantees over the input domain");
    common(vf);
    vf->add_option("--model", models, "model file")->expected(1);
    vf->add_option("--objectives", objectives, "comma-separated: gen,line,distance,suboptimality");
    vf->add_option("--node-limit", node_limit);
    vf->add_option("--lo-frac", lo_frac);
    vf->add_option("--hi-frac", hi_frac);

    auto* rp = app.add_subcommand("report", "aggregate evaluation and verification files");
    common(rp);
    rp->add_option("inputs", inputs, "evaluation / verification JSON files");

    auto* ic = app.add_subcommand("inspect-case", "print case dimensions");
    common(ic);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        Settings s;
        if (!config_path.empty())
            apply_config(s, config_path);
        auto given = [&](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };
        if (given("--case"))
            s.case_name = case_name;
        if (given("--seed"))
            s.seed = seed;
        if (given("--threads"))
            s.threads = threads;
        if (given("--n"))
            s.n_total = n_total;
        if (given("--lo-frac"))
            s.lo_frac = lo_frac;
        if (given("--hi-frac"))
            s.hi_frac = hi_frac;
        if (given("--variant"))
            s.train.weights.variant = pinn::parse_variant(variant);
        if (given("--epochs"))
            s.train.epochs = epochs;
        if (given("--batches"))
            s.train.batches = batches;
        if (given("--lr"))
            s.train.learning_rate = lr;
        if (given("--pg-hidden"))
            s.train.pg_hidden = parse_layers(pg_hidden);
        if (given("--dual-hidden"))
            s.train.dual_hidden = parse_layers(dual_hidden);
        if (sub == tr && given("--lambda-p"))
            s.train.weights.lambda_p = lambda_p;
        if (sub == tr && given("--lambda-l"))
            s.train.weights.lambda_l = lambda_l;
        if (sub == tr && given("--lambda-eps"))
            s.train.weights.lambda_eps = lambda_eps;
        if (given("--pool"))
            s.pool = pool;
        if (given("--node-limit"))
            s.node_limit = node_limit;
        if (given("--objectives")) {
            s.objectives.clear();
            std::stringstream ss(objectives);
            for (std::string item; std::getline(ss, item, ',');)
                s.objectives.push_back(item);
        }

        const std::string name = sub->get_name();
        if (name == "dataset")
            return cmd_dataset(s, out_path, out);
        if (name == "train")
            return cmd_train(s, dataset_path, out_path, out);
        if (name == "sweep")
            return cmd_sweep(s, dataset_path, weight_grids, out_path, out);
        if (name == "evaluate")
            return cmd_evaluate(s, dataset_path, models, with_labels, out_path, out);
        if (name == "verify")
            return cmd_verify(s, models.empty() ? std::string{} : models.front(), out_path, out);
        if (name == "report")
            return cmd_report(s, inputs, out_path, out);
        return cmd_inspect(s, out);
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const InfeasibleError& e) {
        err << "error: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ChecksumError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kSolverFailure;
    }
}

} // namespace pinnopf::cli
