#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "qiproj/errors.hpp"

namespace qiproj {

/// Solve M x = b by LU factorization with partial pivoting.
inline Eigen::VectorXd dense_solve(Eigen::MatrixXd M, Eigen::VectorXd b) {
    const Eigen::Index n = M.rows();
    if (M.cols() != n) throw ParameterError("dense_solve needs a square matrix");
    if (b.size() != n) throw ParameterError("dense_solve: right-hand side has wrong length");
    const double scale = n == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
    const double floor = 1e-300 * scale;

    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index pivot = k;
        M.col(k).tail(n - k).cwiseAbs().maxCoeff(&pivot);
        pivot += k;
        if (!(std::abs(M(pivot, k)) > floor))
            throw SingularMatrixError("matrix is numerically singular at column " + std::to_string(k));
        if (pivot != k) {
            M.row(k).swap(M.row(pivot));
            std::swap(b(k), b(pivot));
        }
        const double inv = 1.0 / M(k, k);
        for (Eigen::Index r = k + 1; r < n; ++r) {
            const double factor = M(r, k) * inv;
            if (factor == 0.0) continue;
            M.row(r).tail(n - k - 1).noalias() -= factor * M.row(k).tail(n - k - 1);
            b(r) -= factor * b(k);
        }
    }
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        const double tail = M.row(k).tail(n - k - 1).dot(b.tail(n - k - 1));
        b(k) = (b(k) - tail) / M(k, k);
    }
    return b;
}

}  // namespace qiproj
