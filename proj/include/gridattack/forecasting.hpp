#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gridattack/network_model.hpp"
#include "gridattack/types.hpp"

/// Short-horizon state forecasting with per-variable autoregressive models
/// fitted by the Yule-Walker method. The attacker uses the forecast as a
/// stand-in for the operating state it cannot observe, to judge whether a
/// planned misestimate is large enough to matter.
namespace gridattack {

struct StateHistory {
    double timestep_s = 0.0;
    std::vector<Vec> snapshots;  ///< oldest first; each of length n_states

    [[nodiscard]] int length() const { return static_cast<int>(snapshots.size()); }
    [[nodiscard]] int n_variables() const {
        return snapshots.empty() ? 0 : static_cast<int>(snapshots.front().size());
    }
};

inline StateHistory load_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open history file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("malformed history file " + path + ": " + e.what());
    }
    StateHistory h;
    try {
        h.timestep_s = doc.at("timestep_s").get<double>();
        for (const auto& row : doc.at("snapshots")) {
            auto vals = row.get<std::vector<double>>();
            h.snapshots.push_back(
                Eigen::Map<const Vec>(vals.data(), static_cast<int>(vals.size())));
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("history file " + path + " missing/ill-typed field: " + e.what());
    }
    for (const auto& s : h.snapshots)
        if (s.size() != h.snapshots.front().size())
            throw dimension_error("history snapshots must all have the same length");
    return h;
}

/// Solve the order-p Yule-Walker system for one variable from its
/// autocorrelations rho_1..rho_p using Levinson-Durbin recursion on the
/// implied Toeplitz system. Returns the AR coefficients phi_1..phi_p.
inline Vec solve_yule_walker(const Vec& rho, int p) {
    if (p < 1) throw validation_error("autoregressive order must be at least 1");
    if (rho.size() < p) throw dimension_error("need autocorrelations up to lag p");
    Vec phi = Vec::Zero(p);
    Vec prev = Vec::Zero(p);
    double err = 1.0;  // normalized innovation variance, starts at rho_0 = 1
    for (int k = 0; k < p; ++k) {
        double acc = rho[k];
        for (int j = 0; j < k; ++j) acc -= prev[j] * rho[k - 1 - j];
        if (!(std::abs(err) > 1e-14))
            throw fitting_error("autocorrelation sequence is singular at lag " +
                                std::to_string(k + 1));
        const double reflection = acc / err;
        phi[k] = reflection;
        for (int j = 0; j < k; ++j) phi[j] = prev[j] - reflection * prev[k - 1 - j];
        err *= 1.0 - reflection * reflection;
        prev.head(k + 1) = phi.head(k + 1);
    }
    return phi;
}

struct ARModel {
    int order = 0;
    std::vector<Vec> coefficients;   ///< per variable, phi_1..phi_p
    Vec noise_variance;              ///< per variable innovation variance
    Vec mean;                        ///< per variable sample mean

    [[nodiscard]] int n_variables() const { return static_cast<int>(coefficients.size()); }
};

/// Fit an independent AR(p) model to every state variable by the Yule-Walker
/// method: biased (1/N) sample autocovariances of the mean-removed series,
/// solved by Levinson-Durbin.
inline ARModel fit_yule_walker(const StateHistory& history, int p) {
    if (p < 1) throw validation_error("autoregressive order must be at least 1");
    const int N = history.length();
    if (N < p + 2)
        throw fitting_error("history of length " + std::to_string(N) +
                            " too short for order " + std::to_string(p));
    const int nv = history.n_variables();
    ARModel model;
    model.order = p;
    model.noise_variance = Vec::Zero(nv);
    model.mean = Vec::Zero(nv);
    for (int v = 0; v < nv; ++v) {
        Vec series(N);
        for (int t = 0; t < N; ++t) series[t] = history.snapshots[t][v];
        const double mu = series.mean();
        series.array() -= mu;
        Vec c = Vec::Zero(p + 1);  // autocovariances c_0..c_p, 1/N convention
        for (int lag = 0; lag <= p; ++lag) {
            double acc = 0.0;
            for (int t = lag; t < N; ++t) acc += series[t] * series[t - lag];
            c[lag] = acc / N;
        }
        if (!(c[0] > 0.0))
            throw fitting_error("variable " + std::to_string(v + 1) +
                                " is constant; cannot fit an autoregressive model");
        const Vec rho = c.tail(p) / c[0];
        const Vec phi = solve_yule_walker(rho, p);
        model.coefficients.push_back(phi);
        model.noise_variance[v] = c[0] * (1.0 - phi.dot(rho));
        model.mean[v] = mu;
    }
    return model;
}

/// One-step-ahead forecast from the last p snapshots of the history.
inline Vec forecast(const ARModel& model, const StateHistory& history) {
    if (history.n_variables() != model.n_variables())
        throw dimension_error("history and model disagree on variable count");
    if (history.length() < model.order)
        throw dimension_error("history shorter than the model order");
    const int N = history.length();
    Vec next(model.n_variables());
    for (int v = 0; v < model.n_variables(); ++v) {
        double acc = model.mean[v];
        for (int j = 0; j < model.order; ++j)
            acc += model.coefficients[v][j] * (history.snapshots[N - 1 - j][v] - model.mean[v]);
        next[v] = acc;
    }
    return next;
}

struct WorthCheck {
    double gap = 0.0;   ///< || target - forecast ||_2
    bool worth = false; ///< gap exceeds delta
};

/// An attack is only worth mounting if the misestimate it creates differs
/// from where the system is already headed by more than delta.
inline WorthCheck attack_worth_check(const Vec& target_state, const Vec& forecast_state,
                                     double delta) {
    if (target_state.size() != forecast_state.size())
        throw dimension_error("target and forecast states must have equal length");
    if (!(delta >= 0.0)) throw validation_error("delta must be non-negative");
    WorthCheck w;
    w.gap = (target_state - forecast_state).norm();
    w.worth = w.gap > delta;
    return w;
}

/// Synthetic operating history: injections drift as a seeded random walk
/// around the case operating point, and each snapshot is the resulting DC
/// power-flow state. Used by the CLI when no measured history is supplied.
inline StateHistory generate_history(const GridCase& grid, int length, double step_pu,
                                     std::uint64_t seed) {
    if (length < 1) throw validation_error("history length must be positive");
    if (!grid.operating_injections)
        throw validation_error("case '" + grid.name + "' bundles no operating injections");
    StateHistory h;
    h.timestep_s = 300.0;  // five-minute scan interval
    std::mt19937_64 rng(detail::splitmix64(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec inj = *grid.operating_injections;
    const int slack_pos = grid.bus_position(grid.slack_bus);
    for (int t = 0; t < length; ++t) {
        h.snapshots.push_back(dc_power_flow(grid, inj));
        for (int b = 0; b < grid.n_buses(); ++b) {
            if (b == slack_pos) continue;  // slack absorbs the drift
            inj[b] += step_pu * gauss(rng);
        }
    }
    return h;
}

}  // namespace gridattack
