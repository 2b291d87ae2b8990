#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "linalg.hpp"

namespace netctl {

// Zero-order-hold discretization: (A_d, B_d) from one augmented exponential
//   exp([[A dt, B dt], [0, 0]]) = [[A_d, B_d], [0, I]].
struct zoh_system {
    MatrixXd Ad, Bd;
    double dt;
};

inline zoh_system zoh_discretize(const MatrixXd& A, const MatrixXd& B,
                                 double dt) {
    const auto n = A.rows(), m = B.cols();
    MatrixXd H = MatrixXd::Zero(n + m, n + m);
    H.topLeftCorner(n, n) = A * dt;
    H.topRightCorner(n, m) = B * dt;
    const MatrixXd F = expm(H);
    return {F.topLeftCorner(n, n), F.topRightCorner(n, m), dt};
}

// Least-norm piecewise-constant transfer over `steps` exact ZOH steps, with
// the full state path. The only modeling error versus the continuous optimum
// is the input-shape restriction, so energy converges to d^T W^{-1} d from
// above as steps grow. Intended as an independent brute-force validator for
// small instances (dense reachability map is n x (m * steps)).
struct discrete_plan {
    MatrixXd inputs;      // m x steps (piecewise-constant)
    MatrixXd states;      // n x (steps + 1), states(.,0) = x0
    double dt = 0;
    double energy = 0;    // dt * sum_k |u_k|^2
    double L = 0;         // polyline length of the state path
    double R = 0;         // max_k |x_k - x0|
    double endpoint_rel = 0;
};

inline discrete_plan oracle_min_energy(const MatrixXd& A, const MatrixXd& B,
                                       double tf, int steps,
                                       const VectorXd& x0, const VectorXd& xf) {
    const zoh_system d = zoh_discretize(A, B, tf / steps);
    const auto n = A.rows(), m = B.cols();
    MatrixXd Rm(n, m * steps);
    MatrixXd block = d.Bd;  // rightmost block is B_d, leftmost A_d^{m-1} B_d
    for (int k = steps - 1; k >= 0; --k) {
        Rm.middleCols(static_cast<Eigen::Index>(k) * m, m) = block;
        block = d.Ad * block;
    }
    VectorXd reach = xf;
    VectorXd power = x0;
    for (int k = 0; k < steps; ++k) power = d.Ad * power;
    reach -= power;
    // normal equations of the stacked reachability map; iterate the solve so
    // the endpoint residual reaches the floor the conditioning allows (the
    // correction stays in the row space, preserving least-norm)
    const MatrixXd N = Rm * Rm.transpose();
    VectorXd u = Rm.transpose() * solve_spd(N, reach);

    discrete_plan plan;
    plan.dt = d.dt;
    plan.states.resize(n, steps + 1);
    double best_ep = std::numeric_limits<double>::infinity();
    MatrixXd best_states;
    VectorXd best_u = u;
    for (int pass = 0; pass < 3; ++pass) {
        plan.inputs = Eigen::Map<const MatrixXd>(u.data(), m, steps);
        plan.states.col(0) = x0;
        VectorXd x = x0;
        for (int k = 0; k < steps; ++k) {
            x = d.Ad * x + d.Bd * plan.inputs.col(k);
            plan.states.col(k + 1) = x;
        }
        const double ep = (x - xf).norm() / std::max(1.0, xf.norm());
        if (ep < best_ep) {
            best_ep = ep;
            best_states = plan.states;
            best_u = u;
        }
        if (ep <= 1e-13 || pass == 2) break;
        u += Rm.transpose() * solve_spd(N, VectorXd(xf - x));
    }
    plan.states = best_states;
    plan.inputs = Eigen::Map<const MatrixXd>(best_u.data(), m, steps);
    plan.energy = d.dt * best_u.squaredNorm();
    plan.endpoint_rel = best_ep;
    for (int k = 0; k < steps; ++k) {
        plan.L += (plan.states.col(k + 1) - plan.states.col(k)).norm();
        plan.R = std::max(plan.R, (plan.states.col(k + 1) - x0).norm());
    }
    return plan;
}

inline double zoh_min_energy(const MatrixXd& A, const MatrixXd& B, double tf,
                             int steps, const VectorXd& x0, const VectorXd& xf) {
    return oracle_min_energy(A, B, tf, steps, x0, xf).energy;
}

// Continuous minimum energy d^T W^{-1} d through the explicit Gramian
// (literal formula; the trajectory kernel's factor-space E is the
// better-conditioned equivalent).
inline double gramian_min_energy(const MatrixXd& A, const MatrixXd& B,
                                 double tf, const VectorXd& x0,
                                 const VectorXd& xf) {
    const VectorXd dvec = xf - expm(A * tf) * x0;
    return dvec.dot(solve_spd(gramian(A, B, tf), dvec));
}

}  // namespace netctl
