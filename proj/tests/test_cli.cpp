#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "pinnopf/grid.hpp"

using namespace pinnopf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("pinnopf_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string write_ring(const TempDir& dir)
{
    const auto p = dir / "ring.json";
    std::ofstream f(p);
    grid::save_case(testing::three_bus_ring(), f);
    return p;
}

/// dataset -> train (plain, pgabs) -> evaluate -> verify -> report in dir.
void pipeline(const TempDir& dir, const std::string& case_path)
{
    const auto ds = dir / "ds.txt";
    REQUIRE(invoke({"dataset", "--case", case_path, "--n", "120", "--seed", "5", "--out", ds}).code == 0);
    for (const std::string v : {"plain", "pgabs"}) {
        auto r = invoke({"train", "--case", case_path, "--dataset", ds, "--variant", v, "--epochs", "15",
                         "--seed", "5", "--pg-hidden", "4,4", "--dual-hidden", "6", "--out", dir / (v + ".model")});
        REQUIRE_MESSAGE(r.code == 0, r.err);
    }
    auto ev = invoke({"evaluate", "--case", case_path, "--dataset", ds, "--model", dir / "plain.model", "--model",
                      dir / "pgabs.model", "--labels", "--out", dir / "eval.json"});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    for (const std::string v : {"plain", "pgabs"}) {
        auto r = invoke({"verify", "--case", case_path, "--model", dir / (v + ".model"), "--objectives", "gen,line",
                         "--out", dir / (v + ".verify.json")});
        REQUIRE_MESSAGE(r.code == 0, r.err);
    }
    auto rp = invoke({"report", dir / "eval.json", dir / "plain.verify.json", dir / "pgabs.verify.json", "--out",
                      dir / "report"});
    REQUIRE_MESSAGE(rp.code == 0, rp.err);
}

json read_json(const std::string& p)
{
    return json::parse(slurp(p));
}

} // namespace

TEST_CASE("inspect-case prints case39 structure counts")
{
    auto r = invoke({"inspect-case", "--case", "case39"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("buses 39, generators 10, loads 21, lines 46") != std::string::npos);
    CHECK(r.out.find("dual output 113") != std::string::npos);
}

TEST_CASE("usage errors exit with 2")
{
    TempDir dir;
    CHECK(invoke({}).code == cli::kUsageError);
    CHECK(invoke({"frobnicate"}).code == cli::kUsageError);
    CHECK(invoke({"inspect-case", "--case", "no_such_case"}).code == cli::kUsageError);
    CHECK(invoke({"dataset", "--case", "case39", "--n", "10", "--out", dir / "d.txt"}).code == cli::kUsageError);
    CHECK(invoke({"train", "--case", "case39", "--dataset", dir / "missing.txt", "--seed", "1", "--out",
                  dir / "m.model"})
              .code == cli::kUsageError);
    CHECK(invoke({"verify", "--case", "case39", "--model", dir / "missing.model"}).code == cli::kUsageError);
    CHECK(invoke({"report", "--out", dir / "r"}).code == cli::kUsageError);

    const auto ring = write_ring(dir);
    invoke({"dataset", "--case", ring, "--n", "40", "--seed", "1", "--out", dir / "d.txt"});
    CHECK(invoke({"train", "--case", ring, "--dataset", dir / "d.txt", "--seed", "1", "--variant", "bogus", "--out",
                  dir / "m.model"})
              .code == cli::kUsageError);
}

TEST_CASE("config files reject unknown keys and flags override them")
{
    TempDir dir;
    const auto ring = write_ring(dir);
    {
        std::ofstream f(dir / "bad.json");
        f << R"({"seed": 3, "trian": {}})";
    }
    CHECK(invoke({"dataset", "--config", dir / "bad.json", "--case", ring, "--out", dir / "d.txt"}).code ==
          cli::kUsageError);
    {
        std::ofstream f(dir / "good.json");
        f << R"({"case": ")" << ring << R"(", "seed": 3, "dataset": {"n_total": 40},
               "train": {"epochs": 2, "pg_hidden": [3], "dual_hidden": [4]}})";
    }
    REQUIRE(invoke({"dataset", "--config", dir / "good.json", "--out", dir / "d.txt"}).code == 0);
    auto r = invoke({"train", "--config", dir / "good.json", "--seed", "9", "--dataset", dir / "d.txt", "--out",
                     dir / "m.model"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto meta = read_json(dir / "m.model.meta.json");
    CHECK(meta["seed"] == 9);
    CHECK(meta["label"] == "Kkt");
    CHECK(meta["provenance"]["settings"]["train"]["epochs"] == 2);
    CHECK(meta["config_hash"].get<std::string>().size() == 64);
    CHECK(fs::exists(dir / "m.model.history.csv"));
}

TEST_CASE("pipeline on the ring writes metrics, tables and sidecars")
{
    TempDir dir;
    pipeline(dir, write_ring(dir));

    auto ev = read_json(dir / "eval.json");
    REQUIRE(ev["rows"].size() == 3);
    json labels;
    for (const auto& row : ev["rows"])
        if (row["label"] == "labels")
            labels = row;
    REQUIRE(labels.is_object());
    CHECK(labels["mae_pct"].get<double>() < 1e-6);
    CHECK(labels["v_g"].get<double>() < 1e-6);

    auto v = read_json(dir / "plain.verify.json");
    CHECK(v["label"] == "Plain");
    REQUIRE(v["results"].size() == 2);
    for (const auto& w : v["results"]) {
        CHECK(w["gap"].get<double>() == 0.0);
        CHECK(w["validity"] == "passed");
        CHECK(w["value"].get<double>() >= 0.0);
    }
    CHECK(v.contains("timing"));

    const auto tables = slurp(dir / "report/tables.md");
    CHECK(tables.rfind("<!-- config_hash ", 0) == 0);
    CHECK(tables.find("| NN |") != std::string::npos);
    CHECK(tables.find("| Pg Abs |") != std::string::npos);
    CHECK(tables.find("Worst-case constraint violations") != std::string::npos);
    auto metrics = read_json(dir / "report/metrics.json");
    CHECK(metrics["kind"] == "report");
    CHECK(metrics["rows"][0]["label"] == "Plain");
    CHECK(metrics["rows"][0].contains("worst"));
}

TEST_CASE("repeating the pipeline gives identical bytes")
{
    TempDir dir;
    const auto ring = write_ring(dir);
    pipeline(dir, ring);
    std::vector<std::string> files{"ds.txt", "plain.model", "pgabs.model", "eval.json", "report/metrics.json",
                                   "report/tables.md"};
    std::vector<std::string> first;
    for (const auto& f : files)
        first.push_back(slurp(dir / f));
    json v1 = read_json(dir / "plain.verify.json");
    pipeline(dir, ring);
    for (std::size_t i = 0; i < files.size(); ++i)
        CHECK_MESSAGE(slurp(dir / files[i]) == first[i], files[i]);
    json v2 = read_json(dir / "plain.verify.json");
    v1.erase("timing");
    v2.erase("timing");
    CHECK(v1 == v2);
}

TEST_CASE("verify exits with 3 when the node limit leaves a gap")
{
    TempDir dir;
    REQUIRE(invoke({"dataset", "--case", "case39", "--n", "100", "--seed", "7", "--out", dir / "d.txt"}).code == 0);
    REQUIRE(invoke({"train", "--case", "case39", "--dataset", dir / "d.txt", "--epochs", "3", "--seed", "7",
                    "--pg-hidden", "10,10", "--dual-hidden", "8", "--out", dir / "m.model"})
                .code == 0);
    auto r = invoke({"verify", "--case", "case39", "--model", dir / "m.model", "--objectives", "gen", "--node-limit",
                     "1", "--out", dir / "v.json"});
    CHECK(r.code == cli::kVerifiedWithGap);
    auto v = read_json(dir / "v.json");
    CHECK(v["results"][0]["gap"].get<double>() > 0.0);
}

TEST_CASE("report rows follow the model order")
{
    std::vector<json> docs{
        json{{"kind", "verification"},
             {"label", "Kkt"},
             {"case", "x"},
             {"results", json::array()}},
        json{{"kind", "evaluation"},
             {"case", "x"},
             {"rows",
              {{{"label", "labels"}, {"pool", "unseen"}, {"samples", 1}, {"mae_pct", 0.0}, {"v_g", 0.0},
                {"v_line", 0.0}, {"v_dist", 0.0}, {"v_opt", 0.0}},
               {{"label", "PgExp"}, {"pool", "unseen"}, {"samples", 1}, {"mae_pct", 1.0}, {"v_g", 2.0},
                {"v_line", 3.0}, {"v_dist", 4.0}, {"v_opt", 5.0}},
               {{"label", "Plain"}, {"pool", "unseen"}, {"samples", 1}, {"mae_pct", 1.0}, {"v_g", 2.0},
                {"v_line", 3.0}, {"v_dist", 4.0}, {"v_opt", 5.0}}}}}};
    auto rows = cli::merge_rows(docs);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0]["label"] == "Plain");
    CHECK(rows[1]["label"] == "PgExp");
    CHECK(rows[2]["label"] == "Kkt");
    CHECK(rows[3]["label"] == "labels");
    CHECK(cli::display_label("PgSqr") == "Pg Sqr");
    CHECK(cli::display_label("Kkt") == "KKT");
    CHECK(cli::display_label("other") == "other");
}

TEST_CASE("sweep trains one model per weight combination")
{
    TempDir dir;
    const auto ring = write_ring(dir);
    REQUIRE(invoke({"dataset", "--case", ring, "--n", "60", "--seed", "2", "--out", dir / "d.txt"}).code == 0);
    auto r = invoke({"sweep", "--case", ring, "--dataset", dir / "d.txt", "--seed", "2", "--variant", "pgsqr",
                     "--epochs", "3", "--pg-hidden", "3", "--dual-hidden", "4", "--lambda-p", "0.5,2", "--lambda-eps",
                     "0,1", "--out", dir / "sweep"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto doc = read_json(dir / "sweep/sweep.json");
    REQUIRE(doc["rows"].size() == 4);
    CHECK(doc["rows"][0]["lambda_p"] == 0.5);
    CHECK(doc["rows"][0]["lambda_l"] == 0.1);
    CHECK(doc["rows"][3]["lambda_eps"] == 1.0);
    for (const auto& row : doc["rows"]) {
        CHECK(fs::exists(dir.path / "sweep" / row["model"].get<std::string>()));
        CHECK(read_json(dir / ("sweep/" + row["model"].get<std::string>() + ".meta.json"))["label"] == "PgSqr");
    }
    CHECK(invoke({"sweep", "--case", ring, "--dataset", dir / "d.txt", "--seed", "2", "--lambda-l", "-1", "--out",
                  dir / "s2"})
              .code == cli::kUsageError);
}
