#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <random>

#include "gridattack/forecasting.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gridattack;

namespace {

/// Synthetic scalar AR(p) series wrapped as a one-variable state history.
StateHistory synth_ar(const std::vector<double>& phi, double noise_sd, int length,
                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise_sd);
    StateHistory h;
    h.timestep_s = 60.0;
    std::vector<double> series(length, 0.0);
    const int p = static_cast<int>(phi.size());
    for (int t = 0; t < length; ++t) {
        double v = gauss(rng);
        for (int j = 0; j < p; ++j)
            if (t - 1 - j >= 0) v += phi[j] * series[t - 1 - j];
        series[t] = v;
        h.snapshots.push_back(Vec::Constant(1, v));
    }
    return h;
}

/// Random autocorrelation sequence guaranteed to be positive definite:
/// a mixture of cosines with nonnegative weights is a valid spectrum. The
/// 0.9 factor blends in a white-noise floor, which keeps the Toeplitz system
/// well conditioned no matter how the cosine frequencies cluster.
Vec valid_autocorrelations(int p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int terms = 4;
    std::vector<double> w(terms), omega(terms);
    double total = 0.0;
    for (int j = 0; j < terms; ++j) {
        w[j] = 0.05 + u(rng);
        omega[j] = 0.1 + 2.9 * u(rng);
        total += w[j];
    }
    Vec rho(p);
    for (int k = 1; k <= p; ++k) {
        double acc = 0.0;
        for (int j = 0; j < terms; ++j) acc += w[j] * std::cos(k * omega[j]);
        rho[k - 1] = 0.9 * acc / total;
    }
    return rho;
}

}  // namespace

TEST_CASE("order-2 coefficients for an AR(1)-shaped autocorrelation") {
    // rho_k = 0.5^k is exactly AR(1) with phi = 0.5; the second coefficient
    // of an order-2 fit must vanish
    Vec rho(2);
    rho << 0.5, 0.25;
    const Vec phi = solve_yule_walker(rho, 2);
    REQUIRE(phi[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(phi[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("recursive solve agrees with a dense Toeplitz solve") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 25; ++trial) {
        const int p = 1 + static_cast<int>(rng() % 5);
        const Vec rho = valid_autocorrelations(p, rng);
        const Vec fast = solve_yule_walker(rho, p);
        const Vec dense = oracles::yule_walker_dense(rho, p);
        REQUIRE((fast - dense).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("fit recovers AR(1) dynamics from a long series") {
    const StateHistory h = synth_ar({0.8}, 0.1, 2000, 4242);
    const ARModel model = fit_yule_walker(h, 1);
    REQUIRE(model.coefficients[0][0] == Catch::Approx(0.8).margin(0.05));
}

TEST_CASE("innovation variance estimate tracks the driving noise") {
    const StateHistory h = synth_ar({0.6, -0.2}, 0.05, 4000, 777);
    const ARModel model = fit_yule_walker(h, 2);
    REQUIRE(model.noise_variance[0] ==
            Catch::Approx(0.05 * 0.05).epsilon(0.2));  // within 20%
}

TEST_CASE("one-step forecast errors match the fitted innovation variance") {
    const StateHistory h = synth_ar({0.6, -0.2}, 0.05, 5000, 1234);
    const ARModel model = fit_yule_walker(h, 2);
    // roll the fitted predictor across the series and accumulate its errors
    double sq_err = 0.0;
    int count = 0;
    for (int t = 2; t < h.length(); ++t) {
        const double pred =
            model.mean[0] + model.coefficients[0][0] * (h.snapshots[t - 1][0] - model.mean[0]) +
            model.coefficients[0][1] * (h.snapshots[t - 2][0] - model.mean[0]);
        const double err = h.snapshots[t][0] - pred;
        sq_err += err * err;
        ++count;
    }
    const double empirical = sq_err / count;
    REQUIRE(empirical == Catch::Approx(model.noise_variance[0]).epsilon(0.2));
}

TEST_CASE("forecast applies the recursion to the newest snapshots") {
    ARModel model;
    model.order = 2;
    model.coefficients = {(Vec(2) << 0.5, 0.25).finished()};
    model.noise_variance = Vec::Constant(1, 0.01);
    model.mean = Vec::Constant(1, 1.0);
    StateHistory h;
    h.timestep_s = 60.0;
    h.snapshots = {Vec::Constant(1, 1.4), Vec::Constant(1, 1.2)};  // oldest first
    const Vec next = forecast(model, h);
    // mean + 0.5 (1.2 - 1) + 0.25 (1.4 - 1)
    REQUIRE(next[0] == Catch::Approx(1.0 + 0.5 * 0.2 + 0.25 * 0.4).margin(1e-12));
}

TEST_CASE("per-variable models are fitted independently") {
    // two variables with visibly different dynamics
    const StateHistory a = synth_ar({0.8}, 0.1, 1500, 10);
    const StateHistory b = synth_ar({-0.5}, 0.1, 1500, 20);
    StateHistory joint;
    joint.timestep_s = 60.0;
    for (int t = 0; t < a.length(); ++t)
        joint.snapshots.push_back((Vec(2) << a.snapshots[t][0], b.snapshots[t][0]).finished());
    const ARModel model = fit_yule_walker(joint, 1);
    REQUIRE(model.coefficients[0][0] == Catch::Approx(0.8).margin(0.06));
    REQUIRE(model.coefficients[1][0] == Catch::Approx(-0.5).margin(0.06));
}

TEST_CASE("worth check compares the misestimate against the forecast") {
    Vec target(2), fc(2);
    target << 0.5, 0.5;
    fc << 0.2, 0.1;  // difference (0.3, 0.4), norm 0.5
    const WorthCheck w = attack_worth_check(target, fc, 0.4);
    REQUIRE(w.gap == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(w.worth);
    REQUIRE_FALSE(attack_worth_check(target, fc, 0.5).worth);  // gap must exceed delta
    REQUIRE_THROWS_AS(attack_worth_check(target, Vec::Zero(3), 0.1), dimension_error);
    REQUIRE_THROWS_AS(attack_worth_check(target, fc, -1.0), validation_error);
}

TEST_CASE("degenerate histories are rejected") {
    StateHistory flat;
    flat.timestep_s = 60.0;
    for (int t = 0; t < 50; ++t) flat.snapshots.push_back(Vec::Constant(1, 3.14));
    REQUIRE_THROWS_AS(fit_yule_walker(flat, 2), fitting_error);

    StateHistory tiny;
    tiny.timestep_s = 60.0;
    tiny.snapshots = {Vec::Constant(1, 1.0), Vec::Constant(1, 2.0)};
    REQUIRE_THROWS_AS(fit_yule_walker(tiny, 2), fitting_error);
    REQUIRE_THROWS_AS(fit_yule_walker(synth_ar({0.5}, 0.1, 100, 1), 0), validation_error);
}

TEST_CASE("generated grid histories are seed-reproducible power-flow states") {
    const GridCase grid = testutil::ieee14();
    const StateHistory a = generate_history(grid, 16, 0.01, 5);
    const StateHistory b = generate_history(grid, 16, 0.01, 5);
    const StateHistory c = generate_history(grid, 16, 0.01, 6);
    REQUIRE(a.length() == 16);
    REQUIRE(a.n_variables() == grid.n_states());
    for (int t = 0; t < 16; ++t)
        REQUIRE((a.snapshots[t] - b.snapshots[t]).lpNorm<Eigen::Infinity>() == 0.0);
    REQUIRE((a.snapshots[15] - c.snapshots[15]).lpNorm<Eigen::Infinity>() > 0.0);
    // first snapshot is the unperturbed operating point
    REQUIRE((a.snapshots[0] - operating_state(grid)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("history files parse and validate") {
    const std::string path = "/tmp/gridattack_history_test.json";
    {
        std::ofstream out(path);
        out << R"({"timestep_s": 300.0, "snapshots": [[0.1, 0.2], [0.15, 0.25]]})";
    }
    const StateHistory h = load_history(path);
    REQUIRE(h.timestep_s == 300.0);
    REQUIRE(h.length() == 2);
    REQUIRE(h.snapshots[1][1] == 0.25);

    {
        std::ofstream out(path);
        out << R"({"timestep_s": 300.0, "snapshots": [[0.1, 0.2], [0.15]]})";
    }
    REQUIRE_THROWS_AS(load_history(path), dimension_error);
    REQUIRE_THROWS_AS(load_history("/nonexistent/history.json"), parse_error);
}
