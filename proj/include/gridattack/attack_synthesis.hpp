#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gridattack/bvls.hpp"
#include "gridattack/topology_error.hpp"
#include "gridattack/types.hpp"
#include "gridattack/wls_estimator.hpp"

/// Synthesis of false-data injections that make a correctly modelled state
/// estimator produce the state and residue signature of a chosen branch
/// topology error, while touching only the meters the attacker can reach and
/// staying within plausible measurement ranges.
namespace gridattack {

struct AttackSpec {
    TopologyError error;
    double epsilon = 0.8;  ///< allowed per-meter deviation from the residue signature
    double delta = 0.01;   ///< minimum misestimate size for the attack to be worthwhile
    std::vector<int> locked;  ///< meters the attacker cannot touch (0-based, sorted)
    double default_halfwidth = 2.0;  ///< plausible range of a meter around its true value
    std::map<int, std::pair<double, double>> range_overrides;  ///< absolute [lo, hi] per meter
};

/// Parse an attack scenario file. Meter indices are 1-based on disk and
/// converted here; the error branch is resolved against the case.
inline AttackSpec load_attack_spec(const std::string& path, const GridCase& grid) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open scenario file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("malformed scenario file " + path + ": " + e.what());
    }
    AttackSpec spec;
    try {
        const auto& jerr = doc.at("error");
        const auto endpoints = jerr.at("branch").get<std::vector<int>>();
        if (endpoints.size() != 2)
            throw validation_error("error.branch must be a [from, to] pair");
        const std::string kind = jerr.at("kind").get<std::string>();
        if (kind != "inclusion" && kind != "exclusion")
            throw validation_error("error.kind must be \"inclusion\" or \"exclusion\"");
        spec.error = make_error(grid, endpoints[0], endpoints[1],
                                kind == "inclusion" ? ErrorKind::inclusion
                                                    : ErrorKind::exclusion);
        spec.epsilon = doc.value("epsilon", spec.epsilon);
        spec.delta = doc.value("delta", spec.delta);
        if (doc.contains("locked")) {
            for (int idx : doc.at("locked").get<std::vector<int>>()) {
                if (idx < 1 || idx > grid.n_measurements())
                    throw validation_error("locked meter index " + std::to_string(idx) +
                                           " out of range");
                spec.locked.push_back(idx - 1);
            }
            std::sort(spec.locked.begin(), spec.locked.end());
            spec.locked.erase(std::unique(spec.locked.begin(), spec.locked.end()),
                              spec.locked.end());
        }
        if (doc.contains("bounds")) {
            const auto& jb = doc.at("bounds");
            spec.default_halfwidth = jb.value("default_halfwidth", spec.default_halfwidth);
            if (jb.contains("overrides")) {
                for (const auto& [key, val] : jb.at("overrides").items()) {
                    int idx = 0;
                    try {
                        idx = std::stoi(key);
                    } catch (const std::exception&) {
                        throw parse_error("bound override key '" + key +
                                          "' is not a meter index");
                    }
                    if (idx < 1 || idx > grid.n_measurements())
                        throw validation_error("bound override index " + key + " out of range");
                    const auto pair = val.get<std::vector<double>>();
                    if (pair.size() != 2 || !(pair[0] <= pair[1]))
                        throw validation_error("bound override " + key +
                                               " must be [lo, hi] with lo <= hi");
                    spec.range_overrides[idx - 1] = {pair[0], pair[1]};
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("scenario file " + path + " missing/ill-typed field: " + e.what());
    }
    if (!(spec.epsilon > 0.0)) throw validation_error("epsilon must be positive");
    if (!(spec.delta >= 0.0)) throw validation_error("delta must be non-negative");
    if (!(spec.default_halfwidth > 0.0))
        throw validation_error("default_halfwidth must be positive");
    return spec;
}

/// The misestimate the attack aims for: what the estimator would report if it
/// ran the erroneous model on the actual measurements.
inline Vec target_state(const TopologyErrorModel& model, const Vec& sigma, const Vec& z_true) {
    if (!model.estimator_observable)
        throw numerical_error(
            "erroneous model loses observability (rank-deficient Jacobian); no target state");
    return estimate(model.H_model, sigma, z_true).state;
}

struct AttackProblem {
    BoxLSProblem box;    ///< minimize ||A z_a - b||_2 over the meter box
    Vec z_true;          ///< actual measurements z_t
    Vec target;          ///< misestimate the attack steers to
    Vec signature;       ///< (I - M_e) D x_target, the residue pattern to plant
    Vec residue_center;  ///< H_true x_target + signature; ideal attacked values
    std::vector<int> locked;  ///< 0-based pinned meters
};

/// Assemble the box least-squares problem. Attackable meters are confined to
/// the intersection of their plausible range with the epsilon band around the
/// residue center; locked meters are pinned to their true values (where the
/// signature simply shows whatever deviation it shows). Weights are scaled so
/// the largest is 1, keeping the objective well inside double precision.
inline AttackProblem build_attack_problem(const TopologyErrorModel& model,
                                          const AttackSpec& spec, const Vec& sigma,
                                          const Vec& z_true) {
    const int m = static_cast<int>(model.H_true.rows());
    if (z_true.size() != m) throw dimension_error("measurement vector length mismatch");
    if (sigma.size() != m) throw dimension_error("noise model must cover every measurement");

    AttackProblem prob;
    prob.z_true = z_true;
    prob.target = target_state(model, sigma, z_true);
    const Vec dx = model.D * prob.target;
    prob.signature = dx - model.hat_model * dx;
    prob.residue_center = model.H_true * prob.target + prob.signature;
    prob.locked = spec.locked;

    const std::set<int> locked_set(spec.locked.begin(), spec.locked.end());
    prob.box.lower = Vec(m);
    prob.box.upper = Vec(m);
    std::vector<int> empty_boxes;
    for (int i = 0; i < m; ++i) {
        if (locked_set.count(i)) {
            // A locked meter keeps its true value, which must itself sit
            // inside the signature band or no attack can plant the residue.
            if (std::abs(z_true[i] - prob.residue_center[i]) > spec.epsilon) {
                empty_boxes.push_back(i + 1);
                continue;
            }
            prob.box.lower[i] = z_true[i];
            prob.box.upper[i] = z_true[i];
            continue;
        }
        double lo = z_true[i] - spec.default_halfwidth;
        double hi = z_true[i] + spec.default_halfwidth;
        if (auto it = spec.range_overrides.find(i); it != spec.range_overrides.end()) {
            lo = it->second.first;
            hi = it->second.second;
        }
        lo = std::max(lo, prob.residue_center[i] - spec.epsilon);
        hi = std::min(hi, prob.residue_center[i] + spec.epsilon);
        if (!(lo <= hi)) {
            empty_boxes.push_back(i + 1);
            continue;
        }
        prob.box.lower[i] = lo;
        prob.box.upper[i] = hi;
    }
    if (!empty_boxes.empty()) {
        std::string msg = "empty feasibility interval (meter value cannot reach the residue "
                          "band; epsilon too small for the locked set or meter range) at meter";
        msg += empty_boxes.size() > 1 ? "s" : "";
        for (std::size_t j = 0; j < empty_boxes.size(); ++j)
            msg += (j == 0 ? " " : ", ") + std::to_string(empty_boxes[j]);
        throw infeasible_error(msg, empty_boxes);
    }

    // Normal-equations mismatch objective: A z_a = b makes the estimator
    // report exactly the target state.
    const Vec weights = sigma.array().square().inverse();
    const Vec scaled = weights / weights.maxCoeff();
    prob.box.A = model.H_true.transpose() * scaled.asDiagonal();
    prob.box.b = prob.box.A * (model.H_true * prob.target);
    return prob;
}

struct AttackResult {
    Vec z_attacked;      ///< measurement vector the attacker submits
    Vec attack_vector;   ///< z_attacked - z_true; exactly zero at locked meters
    double objective = 0.0;
    double pg_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline AttackResult solve_attack(const AttackProblem& prob, const BoxLSOptions& opt = {}) {
    const BoxLSResult sol = solve_box_ls(prob.box, opt);
    AttackResult out;
    out.z_attacked = sol.z;
    out.attack_vector = sol.z - prob.z_true;
    for (int i : prob.locked) out.attack_vector[i] = 0.0;  // pinned exactly; kill any -0.0
    out.objective = sol.objective;
    out.pg_norm = sol.pg_norm;
    out.iterations = sol.iterations;
    out.converged = sol.converged;
    return out;
}

struct AttackVerification {
    Vec post_state;            ///< what the estimator reports under attack
    Vec post_residue;          ///< its residue
    Vec state_gap_deg;         ///< per-bus |post - target| in degrees
    double max_state_gap_deg = 0.0;
    double signature_gap = 0.0;      ///< || post_residue - signature ||_inf
    double locked_max_abs = 0.0;     ///< largest attack magnitude on a locked meter
    NormalizedResidues normalized;   ///< of the post-attack estimate
    std::vector<int> ranking;        ///< meters by descending normalized residue (0-based)
    std::vector<int> incident;       ///< the 4 meters touching the errored branch (0-based)
    bool top4_incident = false;      ///< ranking starts with exactly those meters
};

/// Re-run the estimator on the attacked measurements and measure how well the
/// attack lands: state steered to the target, residue matching the planted
/// signature, locked meters untouched, and suspicion concentrated on the
/// meters around the errored branch.
inline AttackVerification verify_attack(const GridCase& grid, const TopologyErrorModel& model,
                                        const AttackProblem& prob, const AttackResult& attack,
                                        const Vec& sigma) {
    const EstimationResult post = estimate(model.H_true, sigma, attack.z_attacked);
    AttackVerification v;
    v.post_state = post.state;
    v.post_residue = post.residue;
    v.state_gap_deg = (post.state - prob.target).cwiseAbs() * kRadToDeg;
    v.max_state_gap_deg = v.state_gap_deg.maxCoeff();
    v.signature_gap = (post.residue - prob.signature).lpNorm<Eigen::Infinity>();
    v.locked_max_abs = 0.0;
    for (int i : prob.locked)
        v.locked_max_abs = std::max(v.locked_max_abs, std::abs(attack.attack_vector[i]));

    v.normalized = normalized_residues(post);
    v.ranking.resize(v.normalized.values.size());
    std::iota(v.ranking.begin(), v.ranking.end(), 0);
    std::stable_sort(v.ranking.begin(), v.ranking.end(), [&](int a, int b) {
        return v.normalized.values[a] > v.normalized.values[b];
    });

    const MeasurementLayout layout(grid);
    const auto& br = grid.branches[model.error.branch];
    v.incident = {layout.injection(grid.bus_position(br.from)),
                  layout.injection(grid.bus_position(br.to)),
                  layout.from_flow(model.error.branch), layout.to_flow(model.error.branch)};
    const std::set<int> incident_set(v.incident.begin(), v.incident.end());
    v.top4_incident = v.ranking.size() >= 4 &&
                      std::all_of(v.ranking.begin(), v.ranking.begin() + 4,
                                  [&](int i) { return incident_set.count(i) > 0; });
    return v;
}

}  // namespace gridattack
