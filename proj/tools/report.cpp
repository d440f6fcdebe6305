#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "cli.hpp"

namespace pinnopf::cli {

using nlohmann::json;

namespace {

const std::vector<std::string> kOrder{"Plain", "PgAbs", "PgSqr", "PgExp", "Kkt"};

int rank(const std::string& label)
{
    auto it = std::find(kOrder.begin(), kOrder.end(), label);
    if (it != kOrder.end())
        return static_cast<int>(it - kOrder.begin());
    return label == "labels" ? static_cast<int>(kOrder.size()) : static_cast<int>(kOrder.size()) + 1;
}

std::string cell(const json& row, const char* key, int digits)
{
    if (!row.contains(key) || row[key].is_null())
        return "-";
    if (row[key].is_string())
        return row[key].get<std::string>();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, row[key].get<double>());
    return buf;
}

std::string short_hash(const json& row)
{
    if (!row.contains("config_hash") || !row["config_hash"].is_string())
        return "-";
    return row["config_hash"].get<std::string>().substr(0, 12);
}

std::string seed_of(const json& row)
{
    if (!row.contains("seed") || row["seed"].is_null())
        return "-";
    return row["seed"].dump();
}

} // namespace

std::string display_label(const std::string& label)
{
    static const std::map<std::string, std::string> names{
        {"Plain", "NN"}, {"PgAbs", "Pg Abs"}, {"PgSqr", "Pg Sqr"}, {"PgExp", "Pg Exp"}, {"Kkt", "KKT"}};
    auto it = names.find(label);
    return it == names.end() ? label : it->second;
}

json merge_rows(const std::vector<json>& documents)
{
    std::map<std::string, json> rows;
    auto row_for = [&](const std::string& label) -> json& {
        auto& r = rows[label];
        if (r.is_null())
            r = json{{"label", label}};
        return r;
    };
    for (const auto& doc : documents) {
        const std::string case_name = doc.value("case", std::string{});
        if (doc.value("kind", std::string{}) == "evaluation") {
            for (const auto& e : doc.at("rows")) {
                auto& r = row_for(e.at("label").get<std::string>());
                r["case"] = case_name;
                r["seed"] = e.value("seed", json(nullptr));
                r["config_hash"] = e.value("config_hash", json(nullptr));
                for (const char* k : {"pool", "samples", "mae_pct", "v_g", "v_line", "v_dist", "v_opt"})
                    r["avg"][k] = e.at(k);
            }
        } else {
            auto& r = row_for(doc.at("label").get<std::string>());
            r["case"] = case_name;
            r["seed"] = doc.value("seed", json(nullptr));
            r["config_hash"] = doc.value("config_hash", json(nullptr));
            for (const auto& w : doc.at("results")) {
                json entry{{"value", w.at("value")},
                           {"value_pct", w.at("value_pct")},
                           {"units", w.at("units")},
                           {"gap", w.at("gap")},
                           {"node_count", w.at("node_count")},
                           {"validity", w.at("validity")}};
                r["worst"][w.at("kind").get<std::string>()] = entry;
            }
        }
    }
    std::vector<json> ordered;
    for (auto& [label, r] : rows)
        ordered.push_back(r);
    std::stable_sort(ordered.begin(), ordered.end(), [](const json& a, const json& b) {
        const auto la = a["label"].get<std::string>(), lb = b["label"].get<std::string>();
        return rank(la) != rank(lb) ? rank(la) < rank(lb) : la < lb;
    });
    return json(ordered);
}

std::string render_tables(const std::vector<json>& documents)
{
    const json rows = merge_rows(documents);
    std::ostringstream md;
    bool any_avg = false, any_violation = false, any_bilevel = false;
    for (const auto& r : rows) {
        any_avg = any_avg || r.contains("avg");
        if (r.contains("worst")) {
            any_violation = any_violation || r["worst"].contains("gen_violation") || r["worst"].contains("line_violation");
            any_bilevel = any_bilevel || r["worst"].contains("distance") || r["worst"].contains("suboptimality");
        }
    }
    auto worst = [](const json& r, const char* kind) {
        return r.contains("worst") && r["worst"].contains(kind) ? r["worst"][kind] : json::object();
    };
    auto gap = [&](const json& r, std::initializer_list<const char*> kinds) {
        double g = 0.0;
        bool seen = false;
        for (const char* k : kinds) {
            auto w = worst(r, k);
            if (!w.contains("gap"))
                continue;
            seen = true;
            if (w["gap"].is_string())
                return std::string("inf");
            g = std::max(g, w["gap"].get<double>());
        }
        if (!seen)
            return std::string("-");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g", g);
        return std::string(buf);
    };

    if (any_avg) {
        md << "### Average performance over the test pool\n\n"
           << "| Model | MAE (%) | v_g (MW) | v_line (MW) | v_dist (%) | v_opt (%) | samples | seed | config |\n"
           << "|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            if (!r.contains("avg"))
                continue;
            const auto& a = r["avg"];
            md << "| " << display_label(r["label"]) << " | " << cell(a, "mae_pct", 2) << " | " << cell(a, "v_g", 2)
               << " | " << cell(a, "v_line", 2) << " | " << cell(a, "v_dist", 2) << " | " << cell(a, "v_opt", 2)
               << " | " << a["samples"].dump() << " | " << seed_of(r) << " | " << short_hash(r) << " |\n";
        }
        md << "\n";
    }
    if (any_violation) {
        md << "### Worst-case constraint violations\n\n"
           << "| Model | v_g (MW) | v_g (% max load) | v_line (MW) | v_line (% max load) | gap | seed | config |\n"
           << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            auto g = worst(r, "gen_violation"), l = worst(r, "line_violation");
            if (g.empty() && l.empty())
                continue;
            md << "| " << display_label(r["label"]) << " | " << cell(g, "value", 2) << " | "
               << cell(g, "value_pct", 2) << " | " << cell(l, "value", 2) << " | " << cell(l, "value_pct", 2) << " | "
               << gap(r, {"gen_violation", "line_violation"}) << " | " << seed_of(r) << " | " << short_hash(r) << " |\n";
        }
        md << "\n";
    }
    if (any_bilevel) {
        md << "### Worst-case distance and sub-optimality\n\n"
           << "| Model | v_dist (%) | v_opt (%) | v_opt ($/h) | gap | seed | config |\n"
           << "|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            auto d = worst(r, "distance"), o = worst(r, "suboptimality");
            if (d.empty() && o.empty())
                continue;
            md << "| " << display_label(r["label"]) << " | " << cell(d, "value", 2) << " | "
               << cell(o, "value_pct", 2) << " | " << cell(o, "value", 2) << " | "
               << gap(r, {"distance", "suboptimality"}) << " | " << seed_of(r) << " | " << short_hash(r) << " |\n";
        }
        md << "\n";
    }
    return md.str();
}

} // namespace pinnopf::cli
