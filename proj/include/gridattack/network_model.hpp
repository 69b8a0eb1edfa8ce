#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gridattack/types.hpp"

/// Grid case parsing/validation, DC measurement Jacobian construction,
/// ground-truth measurement simulation, and the DC power flow used to place
/// the system at an operating point.
namespace gridattack {

namespace detail {

/// SplitMix64 step; used to turn user seeds into well-mixed engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline bool closed_graph_connected(const GridCase& grid, const std::vector<bool>& closed) {
    const int n = grid.n_buses();
    if (n == 0) return false;
    std::vector<std::vector<int>> adj(n);
    for (int k = 0; k < grid.n_branches(); ++k) {
        if (!closed[k]) continue;
        const int a = grid.bus_position(grid.branches[k].from);
        const int b = grid.bus_position(grid.branches[k].to);
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int reached = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = true;
                ++reached;
                stack.push_back(w);
            }
    }
    return reached == n;
}

}  // namespace detail

/// Branch statuses taken from the case file itself.
inline std::vector<bool> case_status(const GridCase& grid) {
    std::vector<bool> closed(grid.n_branches());
    for (int k = 0; k < grid.n_branches(); ++k) closed[k] = grid.branches[k].closed;
    return closed;
}

inline void validate_case(const GridCase& grid) {
    if (grid.buses.empty()) throw validation_error("case has no buses");
    std::set<int> ids(grid.buses.begin(), grid.buses.end());
    if (static_cast<int>(ids.size()) != grid.n_buses())
        throw validation_error("bus ids must be unique");
    if (!ids.count(grid.slack_bus))
        throw validation_error("slack bus " + std::to_string(grid.slack_bus) +
                               " is not a member of buses");
    std::set<std::pair<int, int>> seen;
    for (const auto& br : grid.branches) {
        if (!ids.count(br.from) || !ids.count(br.to))
            throw validation_error("branch " + std::to_string(br.from) + "-" +
                                   std::to_string(br.to) + " references unknown bus");
        if (br.from == br.to)
            throw validation_error("branch endpoints must differ");
        if (br.susceptance <= 0.0)
            throw validation_error("branch susceptance must be positive");
        auto key = std::minmax(br.from, br.to);
        if (!seen.insert(key).second)
            throw validation_error("duplicate branch " + std::to_string(br.from) + "-" +
                                   std::to_string(br.to));
    }
    if (grid.operating_injections &&
        grid.operating_injections->size() != grid.n_buses())
        throw dimension_error("injections_pu must provide one value per bus");
    if (!detail::closed_graph_connected(grid, case_status(grid)))
        throw connectivity_error("closed branches leave the case '" + grid.name +
                                 "' disconnected");
}

/// Parse and validate a case file (schema documented in the README).
inline GridCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open case file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("malformed case file " + path + ": " + e.what());
    }
    GridCase grid;
    try {
        grid.name = doc.at("name").get<std::string>();
        grid.slack_bus = doc.at("slack_bus").get<int>();
        grid.buses = doc.at("buses").get<std::vector<int>>();
        for (const auto& jb : doc.at("branches")) {
            Branch br;
            br.from = jb.at("from").get<int>();
            br.to = jb.at("to").get<int>();
            br.susceptance = jb.at("susceptance").get<double>();
            br.closed = jb.value("status", std::string("closed")) != "open";
            grid.branches.push_back(br);
        }
        if (doc.contains("injections_pu")) {
            Vec inj = Vec::Zero(grid.n_buses());
            for (const auto& [key, val] : doc.at("injections_pu").items()) {
                int bus = 0;
                try {
                    bus = std::stoi(key);
                } catch (const std::exception&) {
                    throw parse_error("injections_pu key '" + key + "' is not a bus id");
                }
                inj[grid.bus_position(bus)] = val.get<double>();
            }
            grid.operating_injections = inj;
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("case file " + path + " missing/ill-typed field: " + e.what());
    }
    validate_case(grid);
    return grid;
}

/// Dense m x (n-1) DC measurement Jacobian for the given branch statuses.
/// `require_connected = false` skips the full-rank/connectivity gate; the
/// topology-error module uses that path to form Jacobian differences for
/// errors that would split the graph (e.g. opening a bridge branch).
inline Mat build_jacobian(const GridCase& grid, const std::vector<bool>& closed,
                          bool require_connected = true) {
    if (static_cast<int>(closed.size()) != grid.n_branches())
        throw dimension_error("status override must cover every branch");
    if (require_connected && !detail::closed_graph_connected(grid, closed))
        throw connectivity_error("topology override disconnects case '" + grid.name + "'");

    const MeasurementLayout layout(grid);
    Mat H = Mat::Zero(layout.size(), grid.n_states());
    auto add = [&](int row, int bus_id, double coeff) {
        if (bus_id == grid.slack_bus) return;  // slack angle fixed at 0
        H(row, grid.state_column(bus_id)) += coeff;
    };
    for (int k = 0; k < grid.n_branches(); ++k) {
        if (!closed[k]) continue;
        const auto& br = grid.branches[k];
        const double b = br.susceptance;
        // P_ij = b (theta_i - theta_j); P_ji = -P_ij
        add(layout.from_flow(k), br.from, b);
        add(layout.from_flow(k), br.to, -b);
        add(layout.to_flow(k), br.from, -b);
        add(layout.to_flow(k), br.to, b);
        // injections accumulate incident flows
        add(layout.injection(grid.bus_position(br.from)), br.from, b);
        add(layout.injection(grid.bus_position(br.from)), br.to, -b);
        add(layout.injection(grid.bus_position(br.to)), br.to, b);
        add(layout.injection(grid.bus_position(br.to)), br.from, -b);
    }
    return H;
}

inline Mat build_jacobian(const GridCase& grid) {
    return build_jacobian(grid, case_status(grid));
}

/// z = H x + e with e ~ N(0, diag(sigma^2)), seed-reproducible.
inline MeasurementVector simulate_measurements(const GridCase& grid, const Vec& true_state,
                                               const Vec& sigma, std::uint64_t seed) {
    if (true_state.size() != grid.n_states())
        throw dimension_error("true state must have n-1 entries");
    const Mat H = build_jacobian(grid);
    if (sigma.size() != H.rows())
        throw dimension_error("noise model must cover every measurement");
    std::mt19937_64 rng(detail::splitmix64(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);
    MeasurementVector z;
    z.values = H * true_state;
    for (int i = 0; i < z.values.size(); ++i) z.values[i] += sigma[i] * gauss(rng);
    return z;
}

inline MeasurementVector simulate_measurements(const GridCase& grid, const Vec& true_state,
                                               double sigma, std::uint64_t seed) {
    return simulate_measurements(grid, true_state,
                                 Vec::Constant(grid.n_measurements(), sigma), seed);
}

/// Solve B' theta = P for the non-slack buses (theta_slack = 0). The slack
/// bus absorbs any injection imbalance.
inline Vec dc_power_flow(const GridCase& grid, const Vec& injections) {
    if (injections.size() != grid.n_buses())
        throw dimension_error("injections must provide one value per bus");
    if (!detail::closed_graph_connected(grid, case_status(grid)))
        throw connectivity_error("dc power flow requires a connected graph");
    const int ns = grid.n_states();
    Mat bprime = Mat::Zero(ns, ns);
    for (int k = 0; k < grid.n_branches(); ++k) {
        if (!grid.branches[k].closed) continue;
        const auto& br = grid.branches[k];
        const double b = br.susceptance;
        const bool from_slack = br.from == grid.slack_bus;
        const bool to_slack = br.to == grid.slack_bus;
        if (!from_slack) bprime(grid.state_column(br.from), grid.state_column(br.from)) += b;
        if (!to_slack) bprime(grid.state_column(br.to), grid.state_column(br.to)) += b;
        if (!from_slack && !to_slack) {
            bprime(grid.state_column(br.from), grid.state_column(br.to)) -= b;
            bprime(grid.state_column(br.to), grid.state_column(br.from)) -= b;
        }
    }
    Vec p(ns);
    for (int c = 0; c < ns; ++c)
        p[c] = injections[grid.bus_position(grid.state_bus(c))];
    Eigen::FullPivLU<Mat> lu(bprime);
    if (!lu.isInvertible())
        throw numerical_error("singular susceptance system in dc power flow");
    return lu.solve(p);
}

/// Operating-point state from the case's bundled injections.
inline Vec operating_state(const GridCase& grid) {
    if (!grid.operating_injections)
        throw validation_error("case '" + grid.name + "' bundles no operating injections");
    return dc_power_flow(grid, *grid.operating_injections);
}

// --- measurement file I/O -----------------------------------------------------

inline MeasurementVector load_measurements(const std::string& path, const GridCase& grid) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open measurement file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("malformed measurement file " + path + ": " + e.what());
    }
    if (doc.value("layout", "") != "canonical")
        throw validation_error("measurement file must declare \"layout\": \"canonical\"");
    std::vector<double> vals;
    try {
        vals = doc.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("measurement file values ill-typed: " + std::string(e.what()));
    }
    if (static_cast<int>(vals.size()) != grid.n_measurements())
        throw dimension_error("layout mismatch: expected " +
                              std::to_string(grid.n_measurements()) + " values, got " +
                              std::to_string(vals.size()));
    MeasurementVector z;
    z.values = Eigen::Map<const Vec>(vals.data(), static_cast<int>(vals.size()));
    return z;
}

inline WeightModel load_weights(const std::string& path, const GridCase& grid) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open weight file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("malformed weight file " + path + ": " + e.what());
    }
    std::vector<double> s;
    try {
        s = doc.at("sigma").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("weight file sigma ill-typed: " + std::string(e.what()));
    }
    if (static_cast<int>(s.size()) != grid.n_measurements())
        throw dimension_error("weight file must cover every measurement");
    WeightModel w;
    w.sigma = Eigen::Map<const Vec>(s.data(), static_cast<int>(s.size()));
    w.validate();
    return w;
}

}  // namespace gridattack
