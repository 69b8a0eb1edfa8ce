#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written from first principles (hand-rolled
// Gaussian elimination, exhaustive search) rather than calling back into the
// code under test or into Eigen's solvers.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gridattack/types.hpp"

namespace oracles {

using gridattack::Mat;
using gridattack::Vec;

/// Solve A x = b by Gaussian elimination with partial pivoting.
inline Vec solve_dense(Mat A, Vec b) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || b.size() != n) throw std::invalid_argument("square system required");
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A(r, col)) > std::abs(A(pivot, col))) pivot = r;
        if (std::abs(A(pivot, col)) < 1e-13) throw std::runtime_error("singular system");
        if (pivot != col) {
            A.row(pivot).swap(A.row(col));
            std::swap(b[pivot], b[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double factor = A(r, col) / A(col, col);
            for (int c = col; c < n; ++c) A(r, c) -= factor * A(col, c);
            b[r] -= factor * b[col];
        }
    }
    Vec x(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= A(r, c) * x[c];
        x[r] = acc / A(r, r);
    }
    return x;
}

/// Numerical rank by row-reduction with partial pivoting.
inline int rank(Mat A, double tol = 1e-9) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    int r = 0;
    for (int col = 0; col < n && r < m; ++col) {
        int pivot = r;
        for (int row = r + 1; row < m; ++row)
            if (std::abs(A(row, col)) > std::abs(A(pivot, col))) pivot = row;
        if (std::abs(A(pivot, col)) < tol) continue;
        if (pivot != r) A.row(pivot).swap(A.row(r));
        for (int row = r + 1; row < m; ++row) {
            const double factor = A(row, col) / A(r, col);
            for (int c = col; c < n; ++c) A(row, c) -= factor * A(r, c);
        }
        ++r;
    }
    return r;
}

/// Weighted least squares via explicitly assembled normal equations.
inline Vec wls(const Mat& H, const Vec& sigma, const Vec& z) {
    const int m = static_cast<int>(H.rows());
    const int n = static_cast<int>(H.cols());
    Mat G = Mat::Zero(n, n);
    Vec rhs = Vec::Zero(n);
    for (int i = 0; i < m; ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        for (int a = 0; a < n; ++a) {
            rhs[a] += w * H(i, a) * z[i];
            for (int b = 0; b < n; ++b) G(a, b) += w * H(i, a) * H(i, b);
        }
    }
    return solve_dense(G, rhs);
}

/// Dense Toeplitz solve of the order-p Yule-Walker system
/// T(rho) phi = rho[1..p], where T_ij = rho_{|i-j|} and rho_0 = 1.
inline Vec yule_walker_dense(const Vec& rho, int p) {
    Mat T(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            const int lag = std::abs(i - j);
            T(i, j) = lag == 0 ? 1.0 : rho[lag - 1];
        }
    Vec rhs(p);
    for (int i = 0; i < p; ++i) rhs[i] = rho[i];
    return solve_dense(T, rhs);
}

/// Exhaustive grid search for min ||A z - b||_2 over an axis-aligned box,
/// stepping each coordinate from its lower to upper bound. Intended for
/// 3-variable problems whose box widths are integer multiples of the step.
inline double grid_search_box_ls(const Mat& A, const Vec& b, const Vec& lo, const Vec& hi,
                                 double step) {
    const int n = static_cast<int>(A.cols());
    if (n != 3) throw std::invalid_argument("grid oracle is written for 3 variables");
    std::vector<int> counts(n);
    for (int i = 0; i < n; ++i)
        counts[i] = static_cast<int>(std::lround((hi[i] - lo[i]) / step)) + 1;
    double best = std::numeric_limits<double>::infinity();
    Vec z(3);
    for (int i0 = 0; i0 < counts[0]; ++i0) {
        z[0] = lo[0] + i0 * step;
        for (int i1 = 0; i1 < counts[1]; ++i1) {
            z[1] = lo[1] + i1 * step;
            for (int i2 = 0; i2 < counts[2]; ++i2) {
                z[2] = lo[2] + i2 * step;
                const double obj = (A * z - b).norm();
                if (obj < best) best = obj;
            }
        }
    }
    return best;
}

}  // namespace oracles
