#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "gridattack/types.hpp"

/// Box-constrained linear least squares: minimize ||A z - b||_2 subject to
/// lower <= z <= upper. Solved by projected gradient descent with exact line
/// search, accelerated by conjugate-gradient sweeps on the free variables
/// (truncated at the first bound crossing). Deterministic and monotone in the
/// objective; equal bounds pin a coordinate exactly.
namespace gridattack {

struct BoxLSProblem {
    Mat A;
    Vec b;
    Vec lower;
    Vec upper;

    void validate() const {
        const int n = static_cast<int>(A.cols());
        if (b.size() != A.rows()) throw dimension_error("right-hand side length mismatch");
        if (lower.size() != n || upper.size() != n)
            throw dimension_error("bounds must cover every variable");
        for (int i = 0; i < n; ++i)
            if (!(lower[i] <= upper[i]))
                throw validation_error("empty box: lower bound exceeds upper bound at variable " +
                                       std::to_string(i + 1));
    }
};

struct BoxLSOptions {
    double tol = 1e-8;             ///< projected-gradient 2-norm stopping threshold
    int max_iterations = 10000;    ///< outer iteration cap
    bool require_convergence = true;  ///< throw convergence_error on cap instead of returning
    bool record_trace = false;     ///< keep per-iteration objective values
    std::optional<Vec> start;      ///< initial iterate; default is the projection of 0
};

struct BoxLSResult {
    Vec z;
    double objective = 0.0;  ///< ||A z - b||_2 at the returned iterate
    double pg_norm = 0.0;    ///< projected-gradient norm at the returned iterate
    int iterations = 0;      ///< outer iterations spent
    bool converged = false;
    std::vector<double> trace;  ///< objective per outer iteration when requested
};

/// Largest first-order optimality violation at z: |g_i| on free coordinates,
/// inward gradient magnitude on active ones, 0 on pinned ones.
inline double kkt_violation(const BoxLSProblem& p, const Vec& z) {
    const Vec g = p.A.transpose() * (p.A * z - p.b);
    double worst = 0.0;
    for (int i = 0; i < z.size(); ++i) {
        if (p.lower[i] == p.upper[i]) continue;
        double v = 0.0;
        if (z[i] <= p.lower[i]) v = std::max(0.0, -g[i]);
        else if (z[i] >= p.upper[i]) v = std::max(0.0, g[i]);
        else v = std::abs(g[i]);
        worst = std::max(worst, v);
    }
    return worst;
}

inline BoxLSResult solve_box_ls(const BoxLSProblem& p, const BoxLSOptions& opt = {}) {
    p.validate();
    const int n = static_cast<int>(p.A.cols());

    auto project = [&](Vec v) {
        for (int i = 0; i < n; ++i) v[i] = std::clamp(v[i], p.lower[i], p.upper[i]);
        return v;
    };
    Vec z = project(opt.start ? *opt.start : Vec::Zero(n));

    // Projected gradient: zero where a move along -g would leave the box.
    auto projected_gradient = [&](const Vec& g) {
        Vec pg(n);
        for (int i = 0; i < n; ++i) {
            if (p.lower[i] == p.upper[i]) pg[i] = 0.0;
            else if (z[i] <= p.lower[i]) pg[i] = std::min(g[i], 0.0);
            else if (z[i] >= p.upper[i]) pg[i] = std::max(g[i], 0.0);
            else pg[i] = g[i];
        }
        return pg;
    };

    BoxLSResult out;
    for (int outer = 0; outer < opt.max_iterations; ++outer) {
        const Vec residual = p.A * z - p.b;
        if (opt.record_trace) out.trace.push_back(residual.norm());
        Vec g = p.A.transpose() * residual;
        const Vec pg = projected_gradient(g);
        out.pg_norm = pg.norm();
        if (out.pg_norm <= opt.tol) {
            out.converged = true;
            break;
        }
        ++out.iterations;

        // Steepest-descent step with exact line search, projected back.
        const Vec Apg = p.A * pg;
        const double curvature = Apg.squaredNorm();
        if (curvature > 0.0) {
            const double alpha = pg.squaredNorm() / curvature;
            Vec candidate = project(z - alpha * pg);
            // The projection can bend the step off the search ray; if the bent
            // step fails to decrease the objective, retreat to the longest
            // in-box prefix of the ray, which exact line search guarantees is
            // downhill.
            if ((p.A * candidate - p.b).squaredNorm() > residual.squaredNorm()) {
                double alpha_max = alpha;
                for (int i = 0; i < n; ++i) {
                    if (pg[i] > 0.0)
                        alpha_max = std::min(alpha_max, (z[i] - p.lower[i]) / pg[i]);
                    else if (pg[i] < 0.0)
                        alpha_max = std::min(alpha_max, (z[i] - p.upper[i]) / pg[i]);
                }
                candidate = project(z - alpha_max * pg);
            }
            z = candidate;
        }

        // Conjugate-gradient sweep on the coordinates strictly inside the box,
        // stopped early if a step would cross a bound.
        std::vector<int> free;
        for (int i = 0; i < n; ++i)
            if (p.lower[i] < z[i] && z[i] < p.upper[i]) free.push_back(i);
        if (free.empty()) continue;

        // Reduced negative gradient: zero outside the free set, so every CG
        // direction built from it stays inside the free subspace.
        const Vec g_after = p.A.transpose() * (p.A * z - p.b);
        Vec rg_free = Vec::Zero(n);
        for (int i : free) rg_free[i] = -g_after[i];
        double rho = rg_free.squaredNorm();
        const double inner_tol = std::max(0.1 * opt.tol, 1e-14);
        Vec d = rg_free;
        for (std::size_t inner = 0; inner < free.size(); ++inner) {
            if (std::sqrt(rho) <= inner_tol) break;
            const Vec q = p.A * d;
            const double qq = q.squaredNorm();
            if (!(qq > 0.0)) break;
            const double alpha = rho / qq;

            // Furthest the sweep can go before some coordinate hits a bound.
            double alpha_max = std::numeric_limits<double>::infinity();
            for (int i : free) {
                if (d[i] > 0.0) alpha_max = std::min(alpha_max, (p.upper[i] - z[i]) / d[i]);
                else if (d[i] < 0.0) alpha_max = std::min(alpha_max, (p.lower[i] - z[i]) / d[i]);
            }
            if (alpha >= alpha_max) {
                for (int i : free) {
                    z[i] += alpha_max * d[i];
                    // land exactly on the bound that stopped the sweep
                    if (z[i] >= p.upper[i]) z[i] = p.upper[i];
                    if (z[i] <= p.lower[i]) z[i] = p.lower[i];
                }
                break;
            }
            for (int i : free) z[i] += alpha * d[i];
            const Vec Atq = p.A.transpose() * q;
            for (int i : free) rg_free[i] -= alpha * Atq[i];
            const double rho_next = rg_free.squaredNorm();
            d = rg_free + (rho_next / rho) * d;
            rho = rho_next;
        }
    }

    out.z = z;
    out.objective = (p.A * z - p.b).norm();
    if (!out.converged)  // report optimality at the iterate actually returned
        out.pg_norm = projected_gradient(p.A.transpose() * (p.A * z - p.b)).norm();
    if (!out.converged && opt.require_convergence) {
        std::ostringstream msg;
        msg << "box least squares did not converge in " << opt.max_iterations
            << " iterations; best objective " << out.objective
            << ", projected-gradient norm " << out.pg_norm;
        throw convergence_error(msg.str());
    }
    return out;
}

}  // namespace gridattack
