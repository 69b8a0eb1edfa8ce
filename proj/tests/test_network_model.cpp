#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>

#include "gridattack/network_model.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gridattack;

namespace {

/// Write `text` to a fresh temp file and return its path.
std::string temp_json(const std::string& tag, const std::string& text) {
    const std::string path = "/tmp/gridattack_netmodel_" + tag + ".json";
    std::ofstream out(path);
    out << text;
    return path;
}

}  // namespace

TEST_CASE("three-bus case loads with its declared shape") {
    const GridCase grid = testutil::tri3();
    REQUIRE(grid.name == "tri3");
    REQUIRE(grid.n_buses() == 3);
    REQUIRE(grid.n_branches() == 3);
    REQUIRE(grid.slack_bus == 1);
    REQUIRE(grid.n_states() == 2);
    REQUIRE(grid.n_measurements() == 9);
    REQUIRE(grid.branch_position(2, 3) == 2);
    REQUIRE(grid.branch_position(3, 2) == 2);  // order-insensitive lookup
}

TEST_CASE("ieee14 case loads with 14 buses, 20 branches, 54 meters") {
    const GridCase grid = testutil::ieee14();
    REQUIRE(grid.n_buses() == 14);
    REQUIRE(grid.n_branches() == 20);
    REQUIRE(grid.n_measurements() == 54);
    REQUIRE(grid.branch_position(3, 4) == 5);
    REQUIRE(grid.branch_position(7, 8) == 13);
    REQUIRE(grid.operating_injections.has_value());
}

TEST_CASE("three-bus Jacobian matches the hand-written matrix") {
    const GridCase grid = testutil::tri3();
    const Mat H = build_jacobian(grid);
    REQUIRE(H.rows() == 9);
    REQUIRE(H.cols() == 2);
    // rows: P_1, P_2, P_3, P_12, P_13, P_23, P_21, P_31, P_32; columns: theta_2, theta_3
    const double expected[9][2] = {{-1, -1}, {2, -1}, {-1, 2}, {-1, 0}, {0, -1},
                                   {1, -1},  {1, 0},  {0, 1},  {-1, 1}};
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 2; ++j) REQUIRE(H(i, j) == expected[i][j]);
}

TEST_CASE("noiseless simulation reproduces H x exactly") {
    const GridCase grid = testutil::tri3();
    Vec x(2);
    x << -0.1, -0.2;
    const MeasurementVector z = simulate_measurements(grid, x, 0.0, 1);
    const double expected[9] = {0.3, 0.0, -0.3, 0.1, 0.2, 0.1, -0.1, -0.2, -0.1};
    for (int i = 0; i < 9; ++i) REQUIRE(z.values[i] == Catch::Approx(expected[i]).margin(1e-12));

    const GridCase big = testutil::ieee14();
    std::mt19937_64 rng(11);
    const Vec xs = testutil::random_vec(big.n_states(), rng, 0.3);
    const MeasurementVector zb = simulate_measurements(big, xs, 0.0, 1);
    const Vec direct = build_jacobian(big) * xs;
    REQUIRE((zb.values - direct).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("reverse flow rows are the exact negation of forward flow rows") {
    for (const GridCase& grid : {testutil::tri3(), testutil::ieee14()}) {
        const Mat H = build_jacobian(grid);
        const MeasurementLayout layout(grid);
        for (int k = 0; k < grid.n_branches(); ++k)
            for (int c = 0; c < grid.n_states(); ++c)
                REQUIRE(H(layout.to_flow(k), c) == -H(layout.from_flow(k), c));
    }
}

TEST_CASE("injection rows sum to the zero row") {
    const GridCase grid = testutil::ieee14();
    const Mat H = build_jacobian(grid);
    Vec sum = Vec::Zero(grid.n_states());
    for (int b = 0; b < grid.n_buses(); ++b) sum += H.row(b).transpose();
    REQUIRE(sum.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("measurement Jacobian has full column rank on connected cases") {
    REQUIRE(oracles::rank(build_jacobian(testutil::tri3())) == 2);
    REQUIRE(oracles::rank(build_jacobian(testutil::ieee14())) == 13);
}

TEST_CASE("dc power flow solves the three-bus network by hand") {
    const GridCase grid = testutil::tri3();
    Vec inj(3);
    inj << 0.3, 0.0, -0.3;
    const Vec theta = dc_power_flow(grid, inj);
    REQUIRE(theta[0] == Catch::Approx(-0.1).margin(1e-12));
    REQUIRE(theta[1] == Catch::Approx(-0.2).margin(1e-12));
}

TEST_CASE("operating state reproduces the case injections") {
    const GridCase grid = testutil::ieee14();
    const Vec x = operating_state(grid);
    const Vec z = build_jacobian(grid) * x;
    // injection meters must match the injections the state was solved from
    for (int b = 0; b < grid.n_buses(); ++b)
        REQUIRE(z[b] == Catch::Approx((*grid.operating_injections)[b]).margin(1e-10));
}

TEST_CASE("measurement simulation is seed-reproducible") {
    const GridCase grid = testutil::ieee14();
    const Vec x = operating_state(grid);
    const MeasurementVector a = simulate_measurements(grid, x, 0.01, 42);
    const MeasurementVector b = simulate_measurements(grid, x, 0.01, 42);
    const MeasurementVector c = simulate_measurements(grid, x, 0.01, 43);
    REQUIRE((a.values - b.values).lpNorm<Eigen::Infinity>() == 0.0);
    REQUIRE((a.values - c.values).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("status overrides that disconnect the graph are rejected by default") {
    const GridCase grid = testutil::ieee14();
    std::vector<bool> closed = case_status(grid);
    closed[grid.branch_position(7, 8)] = false;  // bus 8 hangs off branch 7-8 alone
    REQUIRE_THROWS_AS(build_jacobian(grid, closed), connectivity_error);
    // the permissive path still assembles the matrix for difference models
    const Mat H = build_jacobian(grid, closed, false);
    REQUIRE(H.rows() == 54);
    REQUIRE(oracles::rank(H) < grid.n_states());
}

TEST_CASE("malformed and inconsistent case files are rejected") {
    REQUIRE_THROWS_AS(load_case("/nonexistent/case.json"), parse_error);
    REQUIRE_THROWS_AS(load_case(temp_json("syntax", "{not json")), parse_error);
    REQUIRE_THROWS_AS(load_case(temp_json("missing", R"({"name":"x"})")), parse_error);

    const std::string dup = R"({"name":"dup","slack_bus":1,"buses":[1,2],
        "branches":[{"from":1,"to":2,"susceptance":1.0},
                    {"from":2,"to":1,"susceptance":2.0}]})";
    REQUIRE_THROWS_AS(load_case(temp_json("dup", dup)), validation_error);

    const std::string ghost = R"({"name":"ghost","slack_bus":1,"buses":[1,2],
        "branches":[{"from":1,"to":9,"susceptance":1.0}]})";
    REQUIRE_THROWS_AS(load_case(temp_json("ghost", ghost)), validation_error);

    const std::string negsus = R"({"name":"neg","slack_bus":1,"buses":[1,2],
        "branches":[{"from":1,"to":2,"susceptance":-1.0}]})";
    REQUIRE_THROWS_AS(load_case(temp_json("neg", negsus)), validation_error);

    const std::string badslack = R"({"name":"slack","slack_bus":7,"buses":[1,2],
        "branches":[{"from":1,"to":2,"susceptance":1.0}]})";
    REQUIRE_THROWS_AS(load_case(temp_json("slack", badslack)), validation_error);

    const std::string split = R"({"name":"split","slack_bus":1,"buses":[1,2,3,4],
        "branches":[{"from":1,"to":2,"susceptance":1.0},
                    {"from":3,"to":4,"susceptance":1.0}]})";
    REQUIRE_THROWS_AS(load_case(temp_json("split", split)), connectivity_error);

    const std::string open_split = R"({"name":"open","slack_bus":1,"buses":[1,2,3],
        "branches":[{"from":1,"to":2,"susceptance":1.0},
                    {"from":2,"to":3,"susceptance":1.0,"status":"open"}]})";
    REQUIRE_THROWS_AS(load_case(temp_json("open", open_split)), connectivity_error);
}

TEST_CASE("measurement files roundtrip and validate their layout") {
    const GridCase grid = testutil::tri3();
    const std::string good =
        R"({"layout":"canonical","values":[0.3,0,-0.3,0.1,0.2,0.1,-0.1,-0.2,-0.1]})";
    const MeasurementVector z = load_measurements(temp_json("meas", good), grid);
    REQUIRE(z.values[0] == 0.3);
    REQUIRE(z.values[8] == -0.1);

    const std::string badlayout = R"({"layout":"rowmajor","values":[1,2,3]})";
    REQUIRE_THROWS_AS(load_measurements(temp_json("layout", badlayout), grid),
                      validation_error);
    const std::string shortvals = R"({"layout":"canonical","values":[1,2,3]})";
    REQUIRE_THROWS_AS(load_measurements(temp_json("short", shortvals), grid),
                      dimension_error);
}

TEST_CASE("weight files must cover every meter with positive sigma") {
    const GridCase grid = testutil::tri3();
    const std::string good = R"({"sigma":[0.01,0.01,0.01,0.02,0.02,0.02,0.02,0.02,0.02]})";
    const WeightModel w = load_weights(temp_json("w", good), grid);
    REQUIRE(w.sigma.size() == 9);
    REQUIRE(w.sigma[3] == 0.02);

    const std::string shortw = R"({"sigma":[0.01,0.01]})";
    REQUIRE_THROWS_AS(load_weights(temp_json("wshort", shortw), grid), dimension_error);
    const std::string zerow = R"({"sigma":[0.01,0,0.01,0.01,0.01,0.01,0.01,0.01,0.01]})";
    REQUIRE_THROWS_AS(load_weights(temp_json("wzero", zerow), grid), validation_error);
}
