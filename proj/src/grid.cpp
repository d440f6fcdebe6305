#include "pinnopf/grid.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "pinnopf/errors.hpp"

namespace pinnopf::grid {

using nlohmann::json;

double GridCase::total_nominal_load() const
{
    return std::accumulate(loads.begin(), loads.end(), 0.0,
                           [](double acc, const Load& l) { return acc + l.p_max_nominal; });
}

double GridCase::total_capacity() const
{
    return std::accumulate(generators.begin(), generators.end(), 0.0,
                           [](double acc, const Generator& g) { return acc + g.p_max; });
}

namespace {

int bus_from_file(const json& value, int n_bus, const std::string& where)
{
    if (!value.is_number_integer())
        throw ParseError(where + ": bus index must be an integer");
    int one_based = value.get<int>();
    if (one_based < 1 || one_based > n_bus)
        throw ValidationError(where + ": bus " + std::to_string(one_based) + " outside 1.." +
                              std::to_string(n_bus));
    return one_based - 1;
}

double number(const json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(where + ": missing field '" + key + "'");
    if (!it->is_number())
        throw ParseError(where + ": field '" + key + "' is not a number");
    return it->get<double>();
}

const json& array_field(const json& doc, const char* key)
{
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_array())
        throw ParseError(std::string("case: missing array '") + key + "'");
    return *it;
}

} // namespace

GridCase load_case(std::istream& source)
{
    json doc;
    try {
        doc = json::parse(source);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("case: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError("case: top level must be an object");

    GridCase grid;
    grid.name = doc.value("name", std::string{});
    if (!doc.contains("n_bus") || !doc["n_bus"].is_number_integer())
        throw ParseError("case: 'n_bus' must be an integer");
    grid.n_bus = doc["n_bus"].get<int>();
    if (grid.n_bus < 1)
        throw ValidationError("case: n_bus must be positive");
    if (!doc.contains("slack_bus"))
        throw ParseError("case: missing 'slack_bus'");
    grid.slack_bus = bus_from_file(doc["slack_bus"], grid.n_bus, "slack_bus");
    grid.base_mva = doc.contains("base_mva") ? number(doc, "base_mva", "case") : 100.0;

    const json& gens = array_field(doc, "generators");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        std::string where = "generators[" + std::to_string(i) + "]";
        const json& g = gens[i];
        if (!g.is_object() || !g.contains("bus"))
            throw ParseError(where + ": expected object with 'bus'");
        grid.generators.push_back({bus_from_file(g["bus"], grid.n_bus, where),
                                   number(g, "p_min", where), number(g, "p_max", where),
                                   number(g, "cost", where)});
    }
    const json& loads = array_field(doc, "loads");
    for (std::size_t i = 0; i < loads.size(); ++i) {
        std::string where = "loads[" + std::to_string(i) + "]";
        const json& l = loads[i];
        if (!l.is_object() || !l.contains("bus"))
            throw ParseError(where + ": expected object with 'bus'");
        grid.loads.push_back({bus_from_file(l["bus"], grid.n_bus, where),
                              number(l, "p_max_nominal", where)});
    }
    const json& lines = array_field(doc, "lines");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string where = "lines[" + std::to_string(i) + "]";
        const json& l = lines[i];
        if (!l.is_object() || !l.contains("from_bus") || !l.contains("to_bus"))
            throw ParseError(where + ": expected object with 'from_bus' and 'to_bus'");
        grid.lines.push_back({bus_from_file(l["from_bus"], grid.n_bus, where),
                              bus_from_file(l["to_bus"], grid.n_bus, where),
                              number(l, "susceptance", where), number(l, "flow_limit", where)});
    }

    validate_case(grid);
    return grid;
}

GridCase load_case_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open case file " + path.string());
    GridCase grid = load_case(in);
    if (grid.name.empty())
        grid.name = path.stem().string();
    return grid;
}

void save_case(const GridCase& grid, std::ostream& sink)
{
    json doc;
    doc["name"] = grid.name;
    doc["n_bus"] = grid.n_bus;
    doc["slack_bus"] = grid.slack_bus + 1;
    doc["base_mva"] = grid.base_mva;
    doc["generators"] = json::array();
    for (const auto& g : grid.generators)
        doc["generators"].push_back(
            {{"bus", g.bus + 1}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"cost", g.cost}});
    doc["loads"] = json::array();
    for (const auto& l : grid.loads)
        doc["loads"].push_back({{"bus", l.bus + 1}, {"p_max_nominal", l.p_max_nominal}});
    doc["lines"] = json::array();
    for (const auto& l : grid.lines)
        doc["lines"].push_back({{"from_bus", l.from_bus + 1},
                                {"to_bus", l.to_bus + 1},
                                {"susceptance", l.susceptance},
                                {"flow_limit", l.flow_limit}});
    sink << doc.dump(2) << '\n';
}

bool is_connected(const GridCase& grid)
{
    if (grid.n_bus <= 0)
        return false;
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(grid.n_bus));
    for (const auto& line : grid.lines) {
        adjacency[static_cast<std::size_t>(line.from_bus)].push_back(line.to_bus);
        adjacency[static_cast<std::size_t>(line.to_bus)].push_back(line.from_bus);
    }
    std::vector<bool> seen(static_cast<std::size_t>(grid.n_bus), false);
    std::queue<int> frontier;
    frontier.push(grid.slack_bus);
    seen[static_cast<std::size_t>(grid.slack_bus)] = true;
    int reached = 1;
    while (!frontier.empty()) {
        int bus = frontier.front();
        frontier.pop();
        for (int next : adjacency[static_cast<std::size_t>(bus)]) {
            if (!seen[static_cast<std::size_t>(next)]) {
                seen[static_cast<std::size_t>(next)] = true;
                ++reached;
                frontier.push(next);
            }
        }
    }
    return reached == grid.n_bus;
}

void validate_case(const GridCase& grid)
{
    if (grid.n_bus < 1)
        throw ValidationError("case: n_bus must be positive");
    if (grid.slack_bus < 0 || grid.slack_bus >= grid.n_bus)
        throw ValidationError("case: slack bus out of range");
    if (grid.generators.empty())
        throw ValidationError("case: at least one generator required");
    if (grid.loads.empty())
        throw ValidationError("case: at least one load required");

    auto check_bus = [&](int bus, const std::string& where) {
        if (bus < 0 || bus >= grid.n_bus)
            throw ValidationError(where + ": bus out of range");
    };
    for (std::size_t i = 0; i < grid.generators.size(); ++i) {
        const auto& g = grid.generators[i];
        std::string where = "generator " + std::to_string(i);
        check_bus(g.bus, where);
        if (!(g.p_min >= 0.0) || !(g.p_min <= g.p_max))
            throw ValidationError(where + ": need 0 <= p_min <= p_max");
        if (!std::isfinite(g.p_max) || !std::isfinite(g.cost))
            throw ValidationError(where + ": non-finite data");
    }
    for (std::size_t i = 0; i < grid.loads.size(); ++i) {
        const auto& l = grid.loads[i];
        std::string where = "load " + std::to_string(i);
        check_bus(l.bus, where);
        if (!(l.p_max_nominal >= 0.0) || !std::isfinite(l.p_max_nominal))
            throw ValidationError(where + ": nominal demand must be finite and >= 0");
    }
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
        const auto& l = grid.lines[i];
        std::string where = "line " + std::to_string(i);
        check_bus(l.from_bus, where);
        check_bus(l.to_bus, where);
        if (l.from_bus == l.to_bus)
            throw ValidationError(where + ": self loop");
        if (!(l.flow_limit > 0.0) || !std::isfinite(l.flow_limit))
            throw ValidationError(where + ": flow_limit must be > 0");
        if (!(l.susceptance > 0.0) || !std::isfinite(l.susceptance))
            throw ValidationError(where + ": susceptance must be > 0");
    }
    if (!is_connected(grid))
        throw ConnectivityError("case: network graph is not connected");
}

PtdfMatrix compute_ptdf(const GridCase& grid)
{
    const Eigen::Index n = grid.n_bus;
    const Eigen::Index slack = grid.slack_bus;

    // Reduced index map: every bus except the slack.
    std::vector<Eigen::Index> reduced(static_cast<std::size_t>(n), -1);
    Eigen::Index next = 0;
    for (Eigen::Index b = 0; b < n; ++b)
        if (b != slack)
            reduced[static_cast<std::size_t>(b)] = next++;

    Eigen::MatrixXd b_red = Eigen::MatrixXd::Zero(n - 1, n - 1);
    for (const auto& line : grid.lines) {
        Eigen::Index f = reduced[static_cast<std::size_t>(line.from_bus)];
        Eigen::Index t = reduced[static_cast<std::size_t>(line.to_bus)];
        if (f >= 0)
            b_red(f, f) += line.susceptance;
        if (t >= 0)
            b_red(t, t) += line.susceptance;
        if (f >= 0 && t >= 0) {
            b_red(f, t) -= line.susceptance;
            b_red(t, f) -= line.susceptance;
        }
    }

    Eigen::MatrixXd x_red;
    if (n > 1) {
        Eigen::LLT<Eigen::MatrixXd> llt(b_red);
        if (llt.info() != Eigen::Success)
            throw NumericalError("ptdf: reduced susceptance matrix is singular");
        x_red = llt.solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
        if (!x_red.allFinite())
            throw NumericalError("ptdf: reduced susceptance matrix is singular");
    }

    PtdfMatrix ptdf;
    ptdf.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.n_line()), n);
    for (std::size_t l = 0; l < grid.lines.size(); ++l) {
        const auto& line = grid.lines[l];
        Eigen::Index f = reduced[static_cast<std::size_t>(line.from_bus)];
        Eigen::Index t = reduced[static_cast<std::size_t>(line.to_bus)];
        for (Eigen::Index b = 0; b < n; ++b) {
            Eigen::Index k = reduced[static_cast<std::size_t>(b)];
            if (k < 0)
                continue;
            double theta_f = f >= 0 ? x_red(f, k) : 0.0;
            double theta_t = t >= 0 ? x_red(t, k) : 0.0;
            ptdf.entries(static_cast<Eigen::Index>(l), b) = line.susceptance * (theta_f - theta_t);
        }
    }
    return ptdf;
}

} // namespace pinnopf::grid
