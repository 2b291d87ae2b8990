#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "gramian.hpp"
#include "network.hpp"
#include "rng.hpp"
#include "trajectory.hpp"

namespace netctl {

// ---- reproducible direction streams ----
//
// sweep-delta: the j-th direction at grid point g comes from
// (master, direction, g, j) — identical across curve families sharing the
// master seed, so curve gaps are smooth in the parameter rather than
// Monte-Carlo noise (paired comparison).
//
// sweep-time: directions come from (master, direction, 0, j) — shared across
// the whole horizon grid, so flatness statistics measure horizon dependence,
// not re-sampling noise.

inline VectorXd direction_sample(std::uint64_t master, std::uint64_t grid_i,
                                 std::uint64_t sample_j, int n) {
    rng g(master, {stream::direction, grid_i, sample_j});
    return g.sphere(n);
}

inline MatrixXd direction_block(std::uint64_t master, std::uint64_t grid_i,
                                int count, int n) {
    MatrixXd V(n, count);
    for (int j = 0; j < count; ++j)
        V.col(j) = direction_sample(master, grid_i, static_cast<std::uint64_t>(j), n);
    return V;
}

// inclusive log grid with a fixed number of points per decade
inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
    const double llo = std::log10(lo), lhi = std::log10(hi);
    const int count = static_cast<int>(std::lround((lhi - llo) * per_decade)) + 1;
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g[static_cast<std::size_t>(i)] = std::pow(10.0, llo + static_cast<double>(i) / per_decade);
    return g;
}

struct sweep_point {
    double param = 0.0;
    double mean_L = 0.0, mean_R = 0.0, mean_E = 0.0;
    int n_valid = 0, n_total = 0;
    bool computed = false;   // false => kernel refused (near-singular horizon)
};

struct sweep_options {
    int ensemble = 100;
    kernel_options kopt;
    int workers = 1;
};

namespace detail {
inline void parallel_for(int count, int workers, const std::function<void(int)>& body) {
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int nw = std::min(workers, count);
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

inline void accumulate(sweep_point& pt, const std::vector<trajectory_stats>& st) {
    double sl = 0, sr = 0, se = 0;
    int nv = 0;
    for (const auto& s : st) {
        ++pt.n_total;
        if (!s.valid) continue;
        ++nv;
        sl += s.L;
        sr += s.R;
        se += s.E;
    }
    pt.n_valid = nv;
    if (nv > 0) {
        pt.mean_L = sl / nv;
        pt.mean_R = sr / nv;
        pt.mean_E = se / nv;
    }
}
}  // namespace detail

// Mean L, R, E over `ensemble` sphere directions at each control distance.
// One kernel serves the whole grid (fixed horizon).
inline std::vector<sweep_point> sweep_delta(const network_system& sys, double tf,
                                            const VectorXd& x0,
                                            const std::vector<double>& deltas,
                                            std::uint64_t master,
                                            const sweep_options& opt = {}) {
    const int n = static_cast<int>(sys.A.rows());
    std::vector<sweep_point> out(deltas.size());
    control_kernel ker(sys.A, sys.B, tf, opt.kopt);
    detail::parallel_for(static_cast<int>(deltas.size()), opt.workers, [&](int gi) {
        sweep_point& pt = out[static_cast<std::size_t>(gi)];
        pt.param = deltas[static_cast<std::size_t>(gi)];
        pt.computed = true;
        const MatrixXd V =
            direction_block(master, static_cast<std::uint64_t>(gi), opt.ensemble, n);
        const MatrixXd XF = (pt.param * V).colwise() + x0;
        detail::accumulate(pt, ker.evaluate(x0, XF));
    });
    return out;
}

// Mean L, R, E at fixed control distance across a horizon grid. Directions
// are shared across the grid (grid index 0 in the stream tag).
inline std::vector<sweep_point> sweep_time(const network_system& sys, double delta,
                                           const VectorXd& x0,
                                           const std::vector<double>& horizons,
                                           std::uint64_t master,
                                           const sweep_options& opt = {}) {
    const int n = static_cast<int>(sys.A.rows());
    const MatrixXd V = direction_block(master, 0, opt.ensemble, n);
    const MatrixXd XF = (delta * V).colwise() + x0;
    std::vector<sweep_point> out(horizons.size());
    detail::parallel_for(static_cast<int>(horizons.size()), opt.workers, [&](int gi) {
        sweep_point& pt = out[static_cast<std::size_t>(gi)];
        pt.param = horizons[static_cast<std::size_t>(gi)];
        try {
            control_kernel ker(sys.A, sys.B, pt.param, opt.kopt);
            pt.computed = true;
            detail::accumulate(pt, ker.evaluate(x0, XF));
        } catch (const near_singular_error&) {
            pt.computed = false;
        }
    });
    return out;
}

// ---- curve statistics ----

// first grid point where two mean curves merge: |log10 a - log10 b| < gap_tol
inline std::optional<std::size_t> crossover_index(const std::vector<sweep_point>& with_x0,
                                                  const std::vector<sweep_point>& origin,
                                                  double gap_tol = 1e-2) {
    for (std::size_t i = 0; i < with_x0.size(); ++i) {
        if (with_x0[i].n_valid == 0 || origin[i].n_valid == 0) continue;
        if (std::abs(std::log10(with_x0[i].mean_L) - std::log10(origin[i].mean_L)) < gap_tol)
            return i;
    }
    return std::nullopt;
}

// plateau height: mean of mean_L (or mean_R) over points with param <= limit
inline double plateau_mean(const std::vector<sweep_point>& curve, double limit,
                           bool use_R = false) {
    double s = 0;
    int c = 0;
    for (const auto& p : curve) {
        if (!p.computed || p.n_valid == 0 || p.param > limit) continue;
        s += use_R ? p.mean_R : p.mean_L;
        ++c;
    }
    return c ? s / c : std::numeric_limits<double>::quiet_NaN();
}

struct series {
    VectorXd x, y;
    static series from(const std::vector<sweep_point>& pts, bool use_R = false,
                       double lo = -std::numeric_limits<double>::infinity(),
                       double hi = std::numeric_limits<double>::infinity()) {
        std::vector<double> xs, ys;
        for (const auto& p : pts) {
            if (!p.computed || p.n_valid == 0) continue;
            if (p.param < lo || p.param > hi) continue;
            xs.push_back(p.param);
            ys.push_back(use_R ? p.mean_R : p.mean_L);
        }
        series s;
        s.x = Eigen::Map<VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        s.y = Eigen::Map<VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
        return s;
    }
};

inline double coefficient_of_variation(const VectorXd& v) {
    const double m = v.mean();
    if (m == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt((v.array() - m).square().sum() / v.size()) / std::abs(m);
}

// ---- per-direction scans (2-D structure) ----

struct branch_pair {
    // plus branch: L = a delta + b;  minus branch: L = |a delta - b|
    fit_result plus;                 // affine fit over the full grid
    fit_result minus_below, minus_above;
    double a_plus = 0, b_plus = 0, a_minus = 0, b_minus = 0;
    double breakpoint = 0;           // b/a from the minus branch
    bool swapped = false;            // the V sat in the +delta*vhat targets
    std::vector<double> grid, L_plus, L_minus;
};

inline branch_pair direction_pair_scan(const network_system& sys, double tf,
                                       const VectorXd& x0, const VectorXd& vhat,
                                       const std::vector<double>& deltas,
                                       const sweep_options& opt = {}) {
    control_kernel ker(sys.A, sys.B, tf, opt.kopt);
    branch_pair out;
    out.grid = deltas;
    const auto count = static_cast<Eigen::Index>(deltas.size());
    MatrixXd XF(sys.A.rows(), 2 * count);
    for (Eigen::Index i = 0; i < count; ++i) {
        XF.col(2 * i) = x0 + deltas[static_cast<std::size_t>(i)] * vhat;
        XF.col(2 * i + 1) = x0 - deltas[static_cast<std::size_t>(i)] * vhat;
    }
    const auto st = ker.evaluate(x0, XF);
    out.L_plus.resize(deltas.size());
    out.L_minus.resize(deltas.size());
    for (Eigen::Index i = 0; i < count; ++i) {
        out.L_plus[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(2 * i)].L;
        out.L_minus[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(2 * i + 1)].L;
    }
    // which sign carries the V is set by the geometry; normalize labels so
    // the branch with an interior minimum is the minus one
    auto interior_min = [&](const std::vector<double>& L) {
        std::size_t k = static_cast<std::size_t>(
            std::min_element(L.begin(), L.end()) - L.begin());
        return k > 0 && k + 1 < L.size();
    };
    if (interior_min(out.L_plus) && !interior_min(out.L_minus)) {
        std::swap(out.L_plus, out.L_minus);
        out.swapped = true;
    }
    const VectorXd d = Eigen::Map<const VectorXd>(deltas.data(), count);
    const VectorXd Lp = Eigen::Map<const VectorXd>(out.L_plus.data(), count);
    const VectorXd Lm = Eigen::Map<const VectorXd>(out.L_minus.data(), count);
    out.plus = fit_affine(d, Lp);
    out.a_plus = out.plus.slope;
    out.b_plus = out.plus.intercept;
    // split the V at its minimum
    Eigen::Index vmin = 0;
    Lm.minCoeff(&vmin);
    const auto lo_n = std::max<Eigen::Index>(vmin, 2);
    const auto hi_n = count - std::min(vmin + 1, count - 2);
    out.minus_below = fit_affine(d.head(lo_n), Lm.head(lo_n));
    out.minus_above = fit_affine(d.tail(hi_n), Lm.tail(hi_n));
    out.a_minus = 0.5 * (-out.minus_below.slope + out.minus_above.slope);
    out.b_minus = 0.5 * (out.minus_below.intercept - out.minus_above.intercept);
    out.breakpoint = out.a_minus != 0.0 ? out.b_minus / out.a_minus : 0.0;
    return out;
}

// per-sample L and R draws at fixed distance (distribution studies)
struct distribution_draws {
    std::vector<double> L, R;
    int n_invalid = 0;
};

inline distribution_draws distribution_at(const network_system& sys, double tf,
                                          const VectorXd& x0, double delta,
                                          int count, std::uint64_t master,
                                          const kernel_options& kopt = {}) {
    const int n = static_cast<int>(sys.A.rows());
    control_kernel ker(sys.A, sys.B, tf, kopt);
    const MatrixXd V = direction_block(master, 0, count, n);
    const MatrixXd XF = (delta * V).colwise() + x0;
    const auto st = ker.evaluate(x0, XF);
    distribution_draws out;
    for (const auto& s : st) {
        if (!s.valid) {
            ++out.n_invalid;
            continue;
        }
        out.L.push_back(s.L);
        out.R.push_back(s.R);
    }
    return out;
}

// log E_min vs horizon slope: E_min(t) = 1/lambda_max W[0,t] decays like
// e^{-2 lambda1 t} for unstable systems (the best-case direction rides the
// leading mode).
inline fit_result min_energy_decay(const network_system& sys,
                                   const std::vector<double>& horizons) {
    VectorXd x(static_cast<Eigen::Index>(horizons.size()));
    VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x[i] = horizons[static_cast<std::size_t>(i)];
        y[i] = std::log(min_unit_energy(sys.A, sys.B, x[i]));
    }
    return fit_affine(x, y);
}

}  // namespace netctl
