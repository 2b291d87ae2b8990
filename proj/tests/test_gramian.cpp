#include <catch2/catch_amalgamated.hpp>

#include <netctl/gramian.hpp>
#include <netctl/linalg.hpp>
#include <netctl/rng.hpp>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace netctl;

TEST_CASE("gramian of an integrator is t I", "[gramian]") {
    const MatrixXd A = MatrixXd::Zero(2, 2);
    const MatrixXd B = MatrixXd::Identity(2, 2);
    const MatrixXd W = gramian(A, B, 2.0);
    CHECK((W - 2.0 * MatrixXd::Identity(2, 2)).norm() < 1e-13);
}

TEST_CASE("gramian scalar closed form", "[gramian]") {
    MatrixXd A(1, 1), B(1, 1);
    A << -1.0;
    B << 1.0;
    CHECK(gramian(A, B, 1.0)(0, 0) ==
          Catch::Approx(0.43233235838169365).epsilon(1e-13));
}

namespace {
MatrixXd random_stable(int n, int m, std::uint64_t seed, MatrixXd& B) {
    rng r(seed);
    MatrixXd A(n, n);
    B.resize(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) A(i, j) = 0.6 * r.normal();
        for (int j = 0; j < m; ++j) B(i, j) = r.normal();
    }
    A -= (spectral_abscissa(A) + 0.5) * MatrixXd::Identity(n, n);
    return A;
}
}  // namespace

TEST_CASE("factor square reproduces the gramian", "[gramian]") {
    MatrixXd B;
    const MatrixXd A = random_stable(4, 2, 21, B);
    for (double t : {0.5, 3.0}) {  // one panel and several panels
        const gramian_factor f(A, B, t);
        const MatrixXd W = gramian(A, B, t);
        CHECK((f.M * f.M.transpose() - W).norm() / W.norm() < 1e-9);
    }
}

TEST_CASE("factor SVD pieces are consistent", "[gramian]") {
    MatrixXd B;
    const MatrixXd A = random_stable(4, 2, 22, B);
    const gramian_factor f(A, B, 2.0);

    // orthonormal left factor
    CHECK((f.Q.transpose() * f.Q - MatrixXd::Identity(f.Q.cols(), f.Q.cols()))
              .norm() < 1e-12);
    // singular values positive and descending
    for (Eigen::Index i = 0; i + 1 < f.S.size(); ++i) {
        CHECK(f.S(i) >= f.S(i + 1));
        CHECK(f.S(i + 1) > 0.0);
    }
    // W = Q S^2 Q^T
    const MatrixXd W = gramian(A, B, 2.0);
    const MatrixXd W2 =
        f.Q * f.S.cwiseAbs2().asDiagonal() * f.Q.transpose();
    CHECK((W2 - W).norm() / W.norm() < 1e-9);

    CHECK(f.sigma_ratio == Catch::Approx(f.S(0) / f.S(f.S.size() - 1))
                               .epsilon(1e-12));
    // sigma_ratio^2 tracks cond(W)
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(W);
    const double condW =
        es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    CHECK(f.sigma_ratio * f.sigma_ratio ==
          Catch::Approx(condW).epsilon(1e-3));
}

TEST_CASE("min_unit_energy closed form", "[gramian]") {
    const MatrixXd A = MatrixXd::Zero(2, 2);
    const MatrixXd B = MatrixXd::Identity(2, 2);
    // W = 2 I, best unit-sphere energy = 1 / lambda_max = 1/2
    CHECK(min_unit_energy(A, B, 2.0) == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("min_unit_energy decays for unstable dynamics", "[gramian]") {
    MatrixXd A(1, 1), B(1, 1);
    A << 1.0;
    B << 1.0;
    // 1 / W(t), W(t) = (e^{2t}-1)/2: strictly decreasing in t
    const double e1 = min_unit_energy(A, B, 1.0);
    const double e2 = min_unit_energy(A, B, 2.0);
    const double e4 = min_unit_energy(A, B, 4.0);
    CHECK(e1 > e2);
    CHECK(e2 > e4);
    CHECK(e1 == Catch::Approx(2.0 / (std::exp(2.0) - 1.0)).epsilon(1e-10));
}
