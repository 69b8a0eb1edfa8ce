#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "gridattack/types.hpp"

/// Weighted least-squares DC state estimation plus the residue-based bad-data
/// machinery built on top of it: hat matrix, residue covariance, normalized
/// residues, and the chi-square consistency test.
namespace gridattack {

struct EstimationResult {
    Vec state;               ///< estimated angles (radians), slack excluded
    Vec residue;             ///< z - H x_hat
    Mat hat_matrix;          ///< M = H (H' R^-1 H)^-1 H' R^-1
    Mat residue_covariance;  ///< Omega = R - H G^-1 H'
    double objective = 0.0;  ///< r' R^-1 r
    double condition = 0.0;  ///< estimated condition number of G = H' R^-1 H
    bool ill_conditioned = false;  ///< condition > 1e12; results may be unreliable
};

/// WLS estimate of the state from z = H x + e, e ~ N(0, R), R = diag(sigma^2).
inline EstimationResult estimate(const Mat& H, const Vec& sigma, const Vec& z) {
    const int m = static_cast<int>(H.rows());
    const int n = static_cast<int>(H.cols());
    if (sigma.size() != m) throw dimension_error("sigma must cover every measurement");
    if (z.size() != m) throw dimension_error("measurement vector length mismatch");
    if (m < n) throw dimension_error("underdetermined estimator: fewer measurements than states");
    for (int i = 0; i < m; ++i)
        if (!(sigma[i] > 0.0)) throw validation_error("measurement deviations must be positive");

    Eigen::ColPivHouseholderQR<Mat> qr(H);
    if (qr.rank() < n)
        throw numerical_error("measurement Jacobian is rank deficient (rank " +
                              std::to_string(qr.rank()) + " of " + std::to_string(n) +
                              "): the state is unobservable");

    const Vec w = sigma.array().square().inverse();  // R^-1 diagonal
    const Mat G = H.transpose() * w.asDiagonal() * H;
    Eigen::LDLT<Mat> ldlt(G);
    if (ldlt.info() != Eigen::Success)
        throw numerical_error("gain matrix factorization failed");

    EstimationResult res;
    res.state = ldlt.solve(H.transpose() * (w.asDiagonal() * z));
    res.residue = z - H * res.state;
    const Mat Ginv_Ht = ldlt.solve(H.transpose());  // G^-1 H'
    res.hat_matrix = H * Ginv_Ht * w.asDiagonal();
    // Omega = R - H G^-1 H' kept in this explicit form so it is symmetric in
    // floating point even when the weights are not uniform.
    res.residue_covariance = -(H * Ginv_Ht);
    for (int i = 0; i < m; ++i) res.residue_covariance(i, i) += sigma[i] * sigma[i];
    res.objective = res.residue.dot(w.asDiagonal() * res.residue);

    const Vec eig = G.selfadjointView<Eigen::Lower>().eigenvalues();
    const double lmin = eig.minCoeff();
    const double lmax = eig.maxCoeff();
    res.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    res.ill_conditioned = !(res.condition < 1e12);
    return res;
}

inline EstimationResult estimate(const Mat& H, const WeightModel& weights, const Vec& z) {
    return estimate(H, weights.sigma, z);
}

struct NormalizedResidues {
    Vec values;                   ///< |r_i| / sqrt(Omega_ii); 0 where not computable
    std::vector<bool> computable; ///< false where Omega_ii below the variance floor
};

/// Per-measurement normalized residues. Diagonal entries of Omega below the
/// floor (critical measurements) are flagged instead of divided by.
inline NormalizedResidues normalized_residues(const EstimationResult& res,
                                              double variance_floor = 1e-10) {
    const int m = static_cast<int>(res.residue.size());
    NormalizedResidues out;
    out.values = Vec::Zero(m);
    out.computable.assign(m, false);
    for (int i = 0; i < m; ++i) {
        const double v = res.residue_covariance(i, i);
        if (v > variance_floor) {
            out.values[i] = std::abs(res.residue[i]) / std::sqrt(v);
            out.computable[i] = true;
        }
    }
    return out;
}

struct ChiSquareTest {
    double statistic = 0.0;  ///< sum of squared weighted residues
    double threshold = 0.0;  ///< chi-square quantile at the given significance
    int dof = 0;             ///< m - n degrees of freedom
    bool passed = false;     ///< statistic <= threshold
};

/// Chi-square test of estimator consistency at the given significance level
/// (probability of rejecting a healthy measurement set).
inline ChiSquareTest chi_square_test(const EstimationResult& res, const Vec& sigma,
                                     double significance = 0.05) {
    if (!(significance > 0.0 && significance < 1.0))
        throw validation_error("significance must lie strictly between 0 and 1");
    const int m = static_cast<int>(res.residue.size());
    const int n = static_cast<int>(res.state.size());
    ChiSquareTest t;
    t.dof = m - n;
    if (t.dof <= 0) throw dimension_error("chi-square test needs redundancy (m > n)");
    t.statistic = (res.residue.array() / sigma.array()).square().sum();
    boost::math::chi_squared dist(static_cast<double>(t.dof));
    t.threshold = boost::math::quantile(dist, 1.0 - significance);
    t.passed = t.statistic <= t.threshold;
    return t;
}

}  // namespace gridattack
