#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pinnopf/errors.hpp"
#include "pinnopf/grid.hpp"

using namespace pinnopf;

namespace {

grid::GridCase parse(const std::string& text)
{
    std::istringstream in(text);
    return grid::load_case(in);
}

const char* kTwoBus = R"({
  "n_bus": 2, "slack_bus": 1, "base_mva": 100,
  "generators": [{"bus": 1, "p_min": 0, "p_max": 100, "cost": 10}],
  "loads": [{"bus": 2, "p_max_nominal": 50}],
  "lines": [{"from_bus": 1, "to_bus": 2, "susceptance": 10, "flow_limit": 80}]
})";

} // namespace

TEST_CASE("bundled case39 matches the published characteristics")
{
    auto g = grid::load_case_file(testing::case_path("case39"));
    CHECK(g.n_bus == 39);
    CHECK(g.n_load() == 21);
    CHECK(g.n_gen() == 10);
    CHECK(g.n_line() == 46);
    CHECK(std::round(g.total_nominal_load()) == 6254.0);
    CHECK(g.slack_bus == 30);
}

TEST_CASE("minimal two-bus case parses")
{
    auto g = parse(kTwoBus);
    CHECK(g.n_gen() == 1);
    CHECK(g.n_load() == 1);
    CHECK(g.slack_bus == 0);
    CHECK(g.loads[0].bus == 1);
}

TEST_CASE("case loading rejects bad input")
{
    SUBCASE("disconnected bus")
    {
        const char* text = R"({"n_bus": 3, "slack_bus": 1,
          "generators": [{"bus": 1, "p_min": 0, "p_max": 100, "cost": 10}],
          "loads": [{"bus": 2, "p_max_nominal": 50}],
          "lines": [{"from_bus": 1, "to_bus": 2, "susceptance": 10, "flow_limit": 80}]})";
        CHECK_THROWS_AS(parse(text), ConnectivityError);
    }
    SUBCASE("malformed json")
    {
        CHECK_THROWS_AS(parse("{\"n_bus\": 2,"), ParseError);
    }
    SUBCASE("non-numeric field")
    {
        std::string text = kTwoBus;
        text.replace(text.find("\"cost\": 10"), 10, "\"cost\": \"x\"");
        CHECK_THROWS_AS(parse(text), ParseError);
    }
    SUBCASE("p_min above p_max")
    {
        std::string text = kTwoBus;
        text.replace(text.find("\"p_min\": 0"), 10, "\"p_min\": 500");
        CHECK_THROWS_AS(parse(text), ValidationError);
    }
    SUBCASE("zero susceptance")
    {
        std::string text = kTwoBus;
        text.replace(text.find("\"susceptance\": 10"), 17, "\"susceptance\": 0");
        CHECK_THROWS_AS(parse(text), ValidationError);
    }
    SUBCASE("bus index out of range")
    {
        std::string text = kTwoBus;
        text.replace(text.find("\"bus\": 2"), 8, "\"bus\": 7");
        CHECK_THROWS_AS(parse(text), ValidationError);
    }
}

TEST_CASE("save_case round-trips")
{
    auto g = grid::load_case_file(testing::case_path("case39"));
    std::stringstream buf;
    grid::save_case(g, buf);
    auto back = grid::load_case(buf);
    CHECK(back.n_line() == g.n_line());
    CHECK(grid::compute_ptdf(back).entries == grid::compute_ptdf(g).entries);
}

TEST_CASE("ptdf of a two-bus case")
{
    auto p = grid::compute_ptdf(parse(kTwoBus));
    REQUIRE(p.rows() == 1);
    CHECK(p(0, 0) == 0.0);
    CHECK(p(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ptdf of a three-bus ring")
{
    auto g = testing::three_bus_ring();
    auto p = grid::compute_ptdf(g);
    // Oracle: inject 1 MW at bus 2 (index 1), withdraw at the slack.
    Eigen::VectorXd inj = Eigen::VectorXd::Zero(3);
    inj(1) = 1.0;
    inj(0) = -1.0;
    Eigen::VectorXd flows = testing::direct_dc_flows(g, inj);
    CHECK(flows(0) == doctest::Approx(-2.0 / 3.0));
    CHECK(flows(1) == doctest::Approx(1.0 / 3.0));
    CHECK(flows(2) == doctest::Approx(1.0 / 3.0));
    for (int l = 0; l < 3; ++l)
        CHECK(p(l, 1) == doctest::Approx(flows(l)).epsilon(1e-12));
}

TEST_CASE("ptdf invariants on case39")
{
    auto g = grid::load_case_file(testing::case_path("case39"));
    auto p = grid::compute_ptdf(g);
    CHECK(p.entries.col(g.slack_bus).isZero(0.0));
    CHECK(p.entries.maxCoeff() <= 1.0 + 1e-9);
    CHECK(p.entries.minCoeff() >= -1.0 - 1e-9);
    CHECK(grid::compute_ptdf(g).entries == p.entries);
}

TEST_CASE("ptdf agrees with a direct DC power-flow solve on random cases")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (int trial = 0; trial < 40; ++trial) {
        int n_bus = 3 + trial % 8;
        auto g = testing::random_case(rng, n_bus);
        auto p = grid::compute_ptdf(g);
        CHECK(p.entries.col(g.slack_bus).isZero(0.0));
        Eigen::VectorXd inj(n_bus);
        for (int b = 0; b < n_bus; ++b)
            inj(b) = u(rng);
        inj(g.slack_bus) -= inj.sum(); // balanced
        Eigen::VectorXd direct = testing::direct_dc_flows(g, inj);
        Eigen::VectorXd via_ptdf = p.entries * inj;
        double scale = 1.0 + direct.cwiseAbs().maxCoeff();
        CHECK((direct - via_ptdf).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    }
}
