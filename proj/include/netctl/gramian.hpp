#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "linalg.hpp"

namespace netctl {

// Finite-horizon controllability Gramian W[0,t] = int_0^t e^{As} BB^T e^{A^T s} ds
// through the augmented exponential (exact up to expm accuracy).
inline MatrixXd gramian(const MatrixXd& A, const MatrixXd& B, double t) {
    return expm_integral(A, MatrixXd(B * B.transpose()), t);
}

// Square-root factor M with W = M M^T: columns sqrt(w_i) e^{A s_i} B over a
// composite Gauss-Legendre rule (panels of length <= panel_len, `order` nodes
// each). Solving in factor space costs eps*sqrt(cond W) instead of eps*cond W.
struct gramian_factor {
    MatrixXd M;          // n x (order * panels * m)
    MatrixXd Q;          // thin SVD: M = Q diag(S) V^T
    VectorXd S;
    double sigma_ratio;  // S(0)/S(end) = sqrt(cond W)

    gramian_factor(const MatrixXd& A, const MatrixXd& B, double t,
                   double panel_len = 2.0, int order = 12) {
        const auto n = A.rows();
        const int panels = std::max(1, static_cast<int>(std::ceil(t / panel_len)));
        const quadrature base = gauss_legendre(order);
        M.resize(n, static_cast<Eigen::Index>(order) * panels * B.cols());
        const double h = t / panels;
        Eigen::Index col = 0;
        for (int p = 0; p < panels; ++p) {
            for (int i = 0; i < order; ++i) {
                const double s = h * (p + 0.5 * (base.x[i] + 1.0));
                const double w = 0.5 * h * base.w[i];
                M.middleCols(col, B.cols()) = std::sqrt(w) * (expm(A * s) * B);
                col += B.cols();
            }
        }
        Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU);
        Q = svd.matrixU();
        S = svd.singularValues();
        const double smin = S[S.size() - 1];
        sigma_ratio = smin > 0.0 ? S[0] / smin : std::numeric_limits<double>::infinity();
    }
};

// Lowest energy over all unit-norm targets reachable in time t from the
// origin: min_{|d|=1} d^T W^{-1} d = 1 / lambda_max(W).
inline double min_unit_energy(const MatrixXd& A, const MatrixXd& B, double t) {
    return 1.0 / spectral_radius_sym(gramian(A, B, t));
}

}  // namespace netctl
