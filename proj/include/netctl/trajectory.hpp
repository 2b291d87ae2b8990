#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "gramian.hpp"
#include "linalg.hpp"

namespace netctl {

struct kernel_options {
    int n_panels = 40;         // trajectory panels (states, arc length)
    int order = 8;             // Gauss-Legendre order per panel
    double factor_panel = 2.0; // Gramian factor: panel length
    int factor_order = 12;     //                 nodes per panel
    double sigma_cap = 1e12;   // refuse kernels with sigma_max/sigma_min above this
    int max_passes = 4;        // endpoint refinement passes
    double endpoint_tol = 1e-6;
    double drift_tol = 1e-3;   // L/R stability between final passes
};

// sigma-ratio bound under which the 1e-6 endpoint tolerance is certified
// (measured on random-system batteries with ~300x margin; see tests).
constexpr double kEndpointCertifiedRatio = 1e8;

struct trajectory_stats {
    double L = 0, R = 0, E = 0;
    double delta = 0;          // |x_f - x_0|
    double endpoint_rel = 0;   // |x(t_f) - x_f| / max(1, |x_f|)
    double dL = 0, dR = 0;     // relative L/R change across final refinement passes
    bool valid = false;
};

// Minimum-energy transfer evaluator for fixed (A, B, t_f).
//
// Solve side: composite-quadrature square-root factor M (W = M M^T),
// thin SVD M = Q diag(S) V^T, g = S^{-1} Q^T d, E = |g|^2 — error scales with
// sqrt(cond W) rather than cond W.
//
// Trajectory side: u(tau) = B^T K(tau) g with K(tau) = e^{A^T (t_f-tau)} Q S^{-1}
// accumulated backward from tau = t_f as one matrix (the bare exponential is
// never formed; for unstable modes this keeps intermediate scales physical),
// and states by per-panel Duhamel convolution of the sampled input. The
// quadrature endpoint map is exactly linear in g, so Newton refinement of g
// against the integrated endpoint converges to the fp floor when the factor
// conditioning allows; the best pass is kept. The final endpoint residual and
// the L/R drift between passes are honest validity signals: conditioning
// breakdown is reported, never silently returned.
class control_kernel {
  public:
    control_kernel(MatrixXd A, MatrixXd B, double tf,
                   kernel_options opt = {})
        : A_(std::move(A)), B_(std::move(B)), tf_(tf), opt_(opt),
          n_(static_cast<int>(A_.rows())), m_(static_cast<int>(B_.cols())) {
        if (!(tf > 0.0)) throw config_error("control horizon must be positive");
        gramian_factor f(A_, B_, tf_, opt_.factor_panel, opt_.factor_order);
        sigma_ratio_ = f.sigma_ratio;
        if (!std::isfinite(sigma_ratio_) || sigma_ratio_ > opt_.sigma_cap)
            throw near_singular_error(sigma_ratio_ * sigma_ratio_,
                                      "gramian factor near singular on this horizon");
        Q_ = f.Q;
        S_ = f.S;
        expAtf_ = expm(A_ * tf_);
        build_panel_pattern();
        build_input_rows();
    }

    double sigma_ratio() const { return sigma_ratio_; }
    // conservative bound: endpoint tolerance certified for any target
    bool endpoint_certified() const { return sigma_ratio_ <= kEndpointCertifiedRatio; }
    double horizon() const { return tf_; }
    const MatrixXd& drive() const { return B_; }
    const MatrixXd& dynamics() const { return A_; }

    // Columns of XF are targets; one stats record per column.
    std::vector<trajectory_stats> evaluate(const VectorXd& x0,
                                           const MatrixXd& XF) const {
        MatrixXd G;
        return solve(x0, XF, G);
    }

    // As evaluate(), and exposes the factor-space solution G (r x targets)
    // for dense resampling.
    std::vector<trajectory_stats> solve(const VectorXd& x0, const MatrixXd& XF,
                                        MatrixXd& G_out) const {
        const Eigen::Index nt = XF.cols();
        const VectorXd free_end = expAtf_ * x0;
        MatrixXd D = XF.colwise() - free_end;
        MatrixXd G = S_.cwiseInverse().asDiagonal() * (Q_.transpose() * D);

        pass_result best;
        MatrixXd G_best = G;
        VectorXd L_prev, R_prev;
        VectorXd dL = VectorXd::Constant(nt, std::numeric_limits<double>::infinity());
        VectorXd dR = dL;
        double best_ep = std::numeric_limits<double>::infinity();
        VectorXd dL_best = dL, dR_best = dR;
        int best_pass = -1;

        for (int pass = 0; pass < opt_.max_passes; ++pass) {
            pass_result cur = run_pass(x0, G);
            if (L_prev.size()) {
                dL = (cur.L - L_prev).cwiseAbs().cwiseQuotient(
                    cur.L.cwiseMax(1e-300));
                dR = (cur.R - R_prev).cwiseAbs().cwiseQuotient(
                    cur.R.cwiseMax(1e-300));
                if (best_pass == pass - 1) {
                    // drift adjacent to the kept pass certifies it too
                    dL_best = dL_best.cwiseMin(dL);
                    dR_best = dR_best.cwiseMin(dR);
                }
            }
            L_prev = cur.L;
            R_prev = cur.R;
            MatrixXd res = XF - cur.x_end;
            VectorXd ep(nt);
            for (Eigen::Index t = 0; t < nt; ++t)
                ep[t] = res.col(t).norm() / std::max(1.0, XF.col(t).norm());
            const double worst = ep.maxCoeff();
            if (worst < best_ep) {
                best_ep = worst;
                best = cur;
                best.ep = ep;
                G_best = G;
                dL_best = dL;
                dR_best = dR;
                best_pass = pass;
            } else if (worst > 4.0 * best_ep) {
                break;  // refinement diverging (conditioning floor); keep best
            }
            MatrixXd dG = S_.cwiseInverse().asDiagonal() * (Q_.transpose() * res);
            if (pass + 1 >= opt_.max_passes) break;
            bool material = false;
            for (Eigen::Index t = 0; t < nt && !material; ++t)
                material = dG.col(t).norm() > 1e-13 * G.col(t).norm();
            if (!material) {
                // correction is negligible: another pass would reproduce this
                // one, so the kept pass carries zero drift
                if (best_pass == pass) {
                    dL_best.setZero();
                    dR_best.setZero();
                }
                break;
            }
            G += dG;
        }

        G_out = G_best;
        std::vector<trajectory_stats> out(static_cast<std::size_t>(nt));
        for (Eigen::Index t = 0; t < nt; ++t) {
            trajectory_stats& s = out[static_cast<std::size_t>(t)];
            s.L = best.L[t];
            s.R = best.R[t];
            s.E = G_best.col(t).squaredNorm();
            s.delta = (XF.col(t) - x0).norm();
            s.endpoint_rel = best.ep[t];
            s.dL = dL_best[t];
            s.dR = dR_best[t];
            s.valid = s.endpoint_rel <= opt_.endpoint_tol &&
                      s.dL <= opt_.drift_tol && s.dR <= opt_.drift_tol;
        }
        return out;
    }

    // Minimum-energy input at the precomputed panel nodes for one solution
    // column g: u(tau) = B^T K(tau) g.
    VectorXd input_at_node(Eigen::Index flat_node, const VectorXd& g) const {
        return U_[static_cast<std::size_t>(flat_node)] * g;
    }

    // States and inputs on a uniform grid of `steps` intervals (polyline
    // oracle / CLI resampling). Returns states (n x steps+1) and inputs
    // (m x steps+1) at the grid times.
    void dense_states(const VectorXd& x0, const VectorXd& g, int steps,
                      MatrixXd& states, MatrixXd& inputs) const {
        const double h = tf_ / steps;
        const quadrature sub = gauss_legendre(4);
        // input rows at grid times and at substep quadrature nodes, by one
        // backward accumulation
        std::vector<double> times;
        times.reserve(static_cast<std::size_t>(steps) * 5 + 1);
        for (int i = 0; i <= steps; ++i) times.push_back(i * h);
        for (int i = 0; i < steps; ++i)
            for (int k = 0; k < 4; ++k)
                times.push_back(h * (i + 0.5 * (sub.x[k] + 1.0)));
        std::vector<std::size_t> order(times.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return times[a] > times[b];
        });
        std::vector<MatrixXd> rows(times.size());
        MatrixXd K = Q_ * S_.cwiseInverse().asDiagonal();
        expm_cache cache;
        double prev = tf_;
        const MatrixXd At = A_.transpose();
        for (std::size_t i : order) {
            const double gap = prev - times[i];
            if (gap > 0.0) K = cached(cache, At, gap) * K;
            rows[i] = B_.transpose() * K;
            prev = times[i];
        }
        const MatrixXd Ah = expm(A_ * h);
        std::vector<MatrixXd> Pk(4);
        for (int k = 0; k < 4; ++k) {
            const double off = h * 0.5 * (sub.x[k] + 1.0);
            Pk[static_cast<std::size_t>(k)] = expm(A_ * (h - off)) * B_;
        }
        states.resize(n_, steps + 1);
        inputs.resize(m_, steps + 1);
        VectorXd x = x0;
        states.col(0) = x;
        inputs.col(0) = rows[0] * g;
        const std::size_t sub_base = static_cast<std::size_t>(steps) + 1;
        for (int i = 0; i < steps; ++i) {
            VectorXd xn = Ah * x;
            for (int k = 0; k < 4; ++k) {
                const double w = 0.5 * h * sub.w[k];
                const VectorXd u = rows[sub_base + 4 * i + k] * g;
                xn += w * (Pk[static_cast<std::size_t>(k)] * u);
            }
            x = xn;
            states.col(i + 1) = x;
            inputs.col(i + 1) = rows[static_cast<std::size_t>(i) + 1] * g;
        }
    }

    // Independent arc-length estimate: chord sum over `steps` sampled states.
    double polyline_length(const VectorXd& x0, const VectorXd& g,
                           int steps) const {
        MatrixXd st, in;
        dense_states(x0, g, steps, st, in);
        double L = 0.0;
        for (int i = 0; i < steps; ++i) L += (st.col(i + 1) - st.col(i)).norm();
        return L;
    }

  private:
    struct pass_result {
        VectorXd L, R, ep;
        MatrixXd x_end;
    };

    using expm_cache = std::unordered_map<std::uint64_t, MatrixXd>;

    static const MatrixXd& cached(expm_cache& c, const MatrixXd& At, double gap) {
        const std::uint64_t key = std::bit_cast<std::uint64_t>(gap);
        auto it = c.find(key);
        if (it == c.end()) it = c.emplace(key, expm(At * gap)).first;
        return it->second;
    }

    void build_panel_pattern() {
        const int q = opt_.order;
        h_ = tf_ / opt_.n_panels;
        const quadrature base = gauss_legendre(q);
        out_off_.resize(q);
        out_w_.resize(q);
        in_off_.resize(q, q);
        in_w_.resize(q, q);
        for (int j = 0; j < q; ++j) {
            out_off_[j] = 0.5 * h_ * (base.x[j] + 1.0);
            out_w_[j] = 0.5 * h_ * base.w[j];
            for (int l = 0; l < q; ++l) {
                in_off_(j, l) = 0.5 * out_off_[j] * (base.x[l] + 1.0);
                in_w_(j, l) = 0.5 * out_off_[j] * base.w[l];
            }
        }
        E_h_ = expm(A_ * h_);
        P_node_.resize(static_cast<std::size_t>(q));
        P_out_.resize(static_cast<std::size_t>(q));
        P_in_.assign(static_cast<std::size_t>(q),
                     std::vector<MatrixXd>(static_cast<std::size_t>(q)));
        for (int j = 0; j < q; ++j) {
            P_node_[static_cast<std::size_t>(j)] = expm(A_ * out_off_[j]);
            P_out_[static_cast<std::size_t>(j)] = expm(A_ * (h_ - out_off_[j])) * B_;
            for (int l = 0; l < q; ++l)
                P_in_[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] =
                    expm(A_ * (out_off_[j] - in_off_(j, l))) * B_;
        }
    }

    // Backward accumulation of K(tau) = e^{A^T (t_f - tau)} Q S^{-1} through
    // every panel node, storing the input rows B^T K.
    void build_input_rows() {
        const int q = opt_.order, P = opt_.n_panels;
        const std::size_t per = static_cast<std::size_t>(q) * (q + 1);
        std::vector<double> times(per * P);
        for (int k = 0; k < P; ++k) {
            const double t0 = k * h_;
            const std::size_t base = per * static_cast<std::size_t>(k);
            for (int j = 0; j < q; ++j) {
                times[base + static_cast<std::size_t>(j)] = t0 + out_off_[j];
                for (int l = 0; l < q; ++l)
                    times[base + static_cast<std::size_t>(q + j * q + l)] =
                        t0 + in_off_(j, l);
            }
        }
        std::vector<std::size_t> order(times.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return times[a] > times[b];
        });
        U_.resize(times.size());
        MatrixXd K = Q_ * S_.cwiseInverse().asDiagonal();
        expm_cache cache;
        const MatrixXd At = A_.transpose();
        double prev = tf_;
        for (std::size_t i : order) {
            const double gap = prev - times[i];
            if (gap > 0.0) K = cached(cache, At, gap) * K;
            U_[i] = B_.transpose() * K;
            prev = times[i];
        }
    }

    pass_result run_pass(const VectorXd& x0, const MatrixXd& G) const {
        const Eigen::Index nt = G.cols();
        const int q = opt_.order, P = opt_.n_panels;
        const std::size_t per = static_cast<std::size_t>(q) * (q + 1);
        pass_result r;
        r.L = VectorXd::Zero(nt);
        r.R = VectorXd::Zero(nt);
        MatrixXd x = x0.replicate(1, nt);
        MatrixXd xs(n_, nt), xd(n_, nt), u(m_, nt), xn(n_, nt);
        for (int k = 0; k < P; ++k) {
            const std::size_t base = per * static_cast<std::size_t>(k);
            xn.noalias() = E_h_ * x;
            for (int j = 0; j < q; ++j) {
                u.noalias() = U_[base + static_cast<std::size_t>(j)] * G;
                xs.noalias() = P_node_[static_cast<std::size_t>(j)] * x;
                for (int l = 0; l < q; ++l) {
                    const MatrixXd& Pin =
                        P_in_[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
                    xs.noalias() +=
                        in_w_(j, l) *
                        (Pin * (U_[base + static_cast<std::size_t>(q + j * q + l)] * G));
                }
                xd.noalias() = A_ * xs + B_ * u;
                for (Eigen::Index t = 0; t < nt; ++t) {
                    r.L[t] += out_w_[j] * xd.col(t).norm();
                    r.R[t] = std::max(r.R[t], (xs.col(t) - x0).norm());
                }
                xn.noalias() += out_w_[j] * (P_out_[static_cast<std::size_t>(j)] * u);
            }
            x = xn;
            for (Eigen::Index t = 0; t < nt; ++t)
                r.R[t] = std::max(r.R[t], (x.col(t) - x0).norm());
        }
        r.x_end = x;
        return r;
    }

    MatrixXd A_, B_;
    double tf_;
    kernel_options opt_;
    int n_, m_;
    MatrixXd Q_;
    VectorXd S_;
    double sigma_ratio_;
    MatrixXd expAtf_;
    double h_ = 0.0;
    VectorXd out_off_, out_w_;
    MatrixXd in_off_, in_w_;
    MatrixXd E_h_;
    std::vector<MatrixXd> P_node_, P_out_;
    std::vector<std::vector<MatrixXd>> P_in_;
    std::vector<MatrixXd> U_;
};

// Closed-form speed along the optimal trajectory for identity-actuated
// systems: with BB^T = I and x_0 = 0,
//   |xdot(t)| = |(A W[0,t] + I) e^{A^T (t_f - t)} W[0,t_f]^{-1} x_f|.
// The identity requires BB^T = I; for narrower drives it is off by O(1)
// factors and is exposed only as a cross-check.
inline double closed_form_speed(const MatrixXd& A, const MatrixXd& B,
                                double tf, double t, const VectorXd& xf) {
    const MatrixXd Wt = gramian(A, B, t);
    const MatrixXd Wf = gramian(A, B, tf);
    const VectorXd w = solve_spd(Wf, xf);
    const auto n = A.rows();
    const VectorXd v = (A * Wt + MatrixXd::Identity(n, n)) *
                       (expm(A.transpose() * (tf - t)) * w);
    return v.norm();
}

}  // namespace netctl
