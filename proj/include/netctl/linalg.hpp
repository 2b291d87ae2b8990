#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace netctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// e^{M}; scaling-and-squaring with Pade approximants (order picked by norm,
// up to 13), as provided by Eigen's matrix-functions module.
inline MatrixXd expm(const MatrixXd& M) { return M.exp(); }

// integral_0^t e^{A s} Q e^{A^T s} ds  via the augmented-block exponential
//   H = [[A, Q], [0, -A^T]],  e^{H t} = [[F11, F12], [0, F22]],
// where F11 = e^{A t} and F12 F11^T is the integral.
inline MatrixXd expm_integral(const MatrixXd& A, const MatrixXd& Q, double t) {
    const auto n = A.rows();
    MatrixXd H = MatrixXd::Zero(2 * n, 2 * n);
    H.topLeftCorner(n, n) = A;
    H.topRightCorner(n, n) = Q;
    H.bottomRightCorner(n, n) = -A.transpose();
    const MatrixXd F = expm(MatrixXd(H * t));
    return F.topRightCorner(n, n) * F.topLeftCorner(n, n).transpose();
}

// Symmetric positive-definite solve with a condition guard: refuses
// (near_singular_error) when the eigenvalue ratio exceeds cond_cap.
inline VectorXd solve_spd(const MatrixXd& W, const VectorXd& b,
                          double cond_cap = 1e12) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(W);
    const VectorXd& ev = es.eigenvalues();
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    if (!(lo > 0.0) || hi / lo > cond_cap)
        throw near_singular_error(lo > 0 ? hi / lo : std::numeric_limits<double>::infinity(),
                                  "spd solve: condition number beyond cap");
    return es.eigenvectors() *
           (es.eigenvectors().transpose() * b).cwiseQuotient(ev);
}

// largest real part over the spectrum
inline double spectral_abscissa(const MatrixXd& A) {
    Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

inline double spectral_radius_sym(const MatrixXd& W) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(W);
    return es.eigenvalues().maxCoeff();
}

// Gauss-Legendre nodes/weights on [-1, 1] by Golub-Welsch (symmetric
// tridiagonal Jacobi matrix; deterministic).
struct quadrature {
    VectorXd x, w;
};

inline quadrature gauss_legendre(int n) {
    MatrixXd J = MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
    quadrature q;
    q.x = es.eigenvalues();
    q.w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    return q;
}

// maps [-1,1] nodes onto [a,b]
inline quadrature gauss_legendre_on(int n, double a, double b) {
    quadrature q = gauss_legendre(n);
    q.x = (0.5 * (b - a) * q.x.array() + 0.5 * (a + b)).matrix();
    q.w *= 0.5 * (b - a);
    return q;
}

// ---- fitting ----

struct fit_result {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

// least squares y = slope * x + intercept, with coefficient of determination
inline fit_result fit_affine(const VectorXd& x, const VectorXd& y) {
    const double n = static_cast<double>(x.size());
    const double mx = x.mean(), my = y.mean();
    const double sxx = (x.array() - mx).square().sum();
    const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
    fit_result f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    const double ss_res =
        (y.array() - (f.slope * x.array() + f.intercept)).square().sum();
    const double ss_tot = (y.array() - my).square().sum();
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    (void)n;
    return f;
}

// power-law fit y = C x^p via least squares in log10-log10
inline fit_result fit_power(const VectorXd& x, const VectorXd& y) {
    return fit_affine(x.array().log10().matrix(), y.array().log10().matrix());
}

// ---- empirical distribution ----

// sup-distance between the empirical CDF of vals and a model CDF
template <typename Cdf>
inline double ks_distance(std::vector<double> vals, Cdf&& cdf) {
    std::sort(vals.begin(), vals.end());
    const double n = static_cast<double>(vals.size());
    double d = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double F = cdf(vals[i]);
        d = std::max(d, std::abs((i + 1) / n - F));
        d = std::max(d, std::abs(i / n - F));
    }
    return d;
}

// arcsine law on [0, 2r]: CDF(x) = (2/pi) asin(x / 2r)
inline double ks_arcsine(const std::vector<double>& vals, double r) {
    return ks_distance(vals, [r](double x) {
        const double z = std::clamp(x / (2.0 * r), 0.0, 1.0);
        return 2.0 / M_PI * std::asin(z);
    });
}

// uniform on [lo, hi]
inline double ks_uniform(const std::vector<double>& vals, double lo, double hi) {
    return ks_distance(vals, [lo, hi](double x) {
        return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    });
}

}  // namespace netctl
