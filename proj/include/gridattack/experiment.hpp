#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridattack/network_model.hpp"
#include "gridattack/types.hpp"

/// Experiment plumbing: reproducible seeding, Monte Carlo residue studies,
/// and deterministic report/CSV serialization. Reports avoid timestamps and
/// unordered containers so identical configurations produce identical bytes.
namespace gridattack {

/// FNV-1a over the canonical configuration string; stamped into reports so a
/// result can be traced back to the exact inputs that produced it.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Trial t draws from the SplitMix64 stream seeded by the master seed, so
/// trials are independent but fully determined by (master, index).
inline std::uint64_t derive_trial_seed(std::uint64_t master, int trial_index) {
    return detail::splitmix64(master +
                              0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(trial_index));
}

/// Shortest exact decimal form of a double, for CSV cells.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << row[c];
        out << "\n";
    }
}

struct MonteCarloSummary {
    Vec mean_residue;   ///< sample mean of the estimator residue
    Vec expected;       ///< theoretical mean: (I - M) H_truth x
    Vec bound;          ///< 4 sqrt(Omega_ii / trials) per meter
    int trials = 0;
    bool within_bounds = false;  ///< every meter's mean inside its bound
    int worst_meter = -1;        ///< 0-based meter with the largest relative excursion
};

/// Repeatedly measure the system at state x under topology H_truth with
/// Gaussian meter noise, push each sample through the estimator's residue
/// projector I - M, and compare the empirical mean against its expectation.
/// When estimator and truth share a topology the expectation is zero; when
/// they disagree it is the topology-error residue signature.
inline MonteCarloSummary residue_monte_carlo(const Mat& H_truth, const Mat& hat_estimator,
                                             const Mat& omega_estimator, const Vec& sigma,
                                             const Vec& x, int trials,
                                             std::uint64_t master_seed) {
    if (trials < 1) throw validation_error("trial count must be positive");
    const int m = static_cast<int>(H_truth.rows());
    if (sigma.size() != m) throw dimension_error("noise model must cover every measurement");
    const Vec z_clean = H_truth * x;
    Vec sum = Vec::Zero(m);
    Vec z(m);
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(derive_trial_seed(master_seed, t));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int i = 0; i < m; ++i) z[i] = z_clean[i] + sigma[i] * gauss(rng);
        sum += z - hat_estimator * z;
    }
    MonteCarloSummary s;
    s.trials = trials;
    s.mean_residue = sum / trials;
    s.expected = z_clean - hat_estimator * z_clean;
    s.bound = Vec(m);
    for (int i = 0; i < m; ++i)
        s.bound[i] = 4.0 * std::sqrt(std::max(omega_estimator(i, i), 0.0) / trials);
    s.within_bounds = true;
    double worst = -1.0;
    for (int i = 0; i < m; ++i) {
        const double excursion = std::abs(s.mean_residue[i] - s.expected[i]);
        if (excursion > s.bound[i]) s.within_bounds = false;
        const double rel = s.bound[i] > 0.0 ? excursion / s.bound[i] : excursion;
        if (rel > worst) {
            worst = rel;
            s.worst_meter = i;
        }
    }
    return s;
}

/// Vec -> JSON array (values kept as exact doubles).
inline nlohmann::ordered_json json_vector(const Vec& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& doc) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace gridattack
