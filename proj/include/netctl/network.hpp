#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace netctl {

// Directed Erdos-Renyi adjacency with independent edge probability
// avg_degree/(N-1) and U(0,1) weights; no self-loops. Row-major edge scan so
// the draw sequence is part of the reproducibility contract.
inline MatrixXd erdos_renyi(int n, double avg_degree, std::uint64_t master) {
    rng g(master, {stream::system});
    const double p = avg_degree / (n - 1);
    MatrixXd A = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (g.u01() < p) A(i, j) = g.u01();
        }
    return A;
}

// Shift the spectrum so the largest real part equals lambda1_target.
inline MatrixXd shift_spectrum(const MatrixXd& A, double lambda1_target) {
    const double shift = spectral_abscissa(A) - lambda1_target;
    return A - shift * MatrixXd::Identity(A.rows(), A.cols());
}

// B matrix whose columns are indicator vectors of the driver nodes.
inline MatrixXd driver_matrix(int n, const std::vector<int>& drivers) {
    MatrixXd B = MatrixXd::Zero(n, static_cast<Eigen::Index>(drivers.size()));
    for (std::size_t k = 0; k < drivers.size(); ++k) B(drivers[k], k) = 1.0;
    return B;
}

// Kalman rank test by SVD of [B AB ... A^{n-1}B]; rank threshold relative to
// the largest singular value.
inline bool controllable(const MatrixXd& A, const MatrixXd& B,
                         double rel_tol = 1e-10) {
    const auto n = A.rows();
    MatrixXd K(n, n * B.cols());
    MatrixXd block = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        K.middleCols(k * B.cols(), B.cols()) = block;
        block = A * block;
    }
    Eigen::JacobiSVD<MatrixXd> svd(K);
    const VectorXd& s = svd.singularValues();
    return s[s.size() - 1] > rel_tol * s[0];
}

// Uniform random driver subsets until one is controllable (<= max_attempts,
// then not_controllable_error). Subset draw: partial Fisher-Yates, sorted.
inline std::vector<int> pick_drivers(const MatrixXd& A, int count,
                                     std::uint64_t master,
                                     int max_attempts = 100) {
    const int n = static_cast<int>(A.rows());
    rng g(master, {stream::drivers});
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<int> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (int k = 0; k < count; ++k) {
            const int j = k + static_cast<int>(g.below(n - k));
            std::swap(pool[k], pool[j]);
        }
        std::vector<int> sel(pool.begin(), pool.begin() + count);
        std::sort(sel.begin(), sel.end());
        if (controllable(A, driver_matrix(n, sel))) return sel;
    }
    throw not_controllable_error("no controllable driver set found");
}

// Convenience bundle: a generated system pinned to a stability class.
struct network_system {
    MatrixXd A;
    MatrixXd B;
    std::vector<int> drivers;
    double lambda1;

    static network_system make(int n, double avg_degree, double lambda1,
                               int n_drivers, std::uint64_t master) {
        network_system s;
        s.A = shift_spectrum(erdos_renyi(n, avg_degree, master), lambda1);
        s.drivers = pick_drivers(s.A, n_drivers, master);
        s.B = driver_matrix(n, s.drivers);
        s.lambda1 = lambda1;
        return s;
    }
};

}  // namespace netctl
