#include <catch2/catch_amalgamated.hpp>

#include <netctl/errors.hpp>
#include <netctl/linalg.hpp>
#include <netctl/rng.hpp>

#include <cmath>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace netctl;

TEST_CASE("expm on a nilpotent block", "[linalg]") {
    MatrixXd A(2, 2);
    A << 0, 1, 0, 0;
    MatrixXd E = expm(A);
    CHECK(E(0, 0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(E(0, 1) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(E(1, 0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(E(1, 1) == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("expm scalar", "[linalg]") {
    MatrixXd A(1, 1);
    A << 1.0;
    CHECK(expm(A)(0, 0) == Catch::Approx(2.7182818284590451).epsilon(1e-14));
}

TEST_CASE("expm_integral scalar cases", "[linalg]") {
    MatrixXd A(1, 1), Q(1, 1);
    Q << 1.0;

    A << -1.0;  // int_0^1 e^{-2s} ds = (1 - e^{-2}) / 2
    CHECK(expm_integral(A, Q, 1.0)(0, 0) ==
          Catch::Approx(0.43233235838169365).epsilon(1e-13));

    A << 1.0;   // (e^2 - 1) / 2
    CHECK(expm_integral(A, Q, 1.0)(0, 0) ==
          Catch::Approx(3.1945280494653248).epsilon(1e-13));
}

TEST_CASE("expm_integral matches brute-force quadrature", "[linalg]") {
    rng r(100);
    MatrixXd A(3, 3), B(3, 1);
    for (int i = 0; i < 3; ++i) {
        B(i, 0) = r.normal();
        for (int j = 0; j < 3; ++j) A(i, j) = r.normal() * 0.5;
    }
    A -= 1.5 * MatrixXd::Identity(3, 3);
    const MatrixXd Q = B * B.transpose();
    const double t = 2.0;

    const auto gl = gauss_legendre_on(64, 0.0, t);
    MatrixXd ref = MatrixXd::Zero(3, 3);
    for (Eigen::Index k = 0; k < gl.x.size(); ++k) {
        const MatrixXd Es = expm(A * gl.x(k));
        ref += gl.w(k) * Es * Q * Es.transpose();
    }
    const MatrixXd W = expm_integral(A, Q, t);
    CHECK((W - ref).norm() / ref.norm() < 1e-10);
    CHECK((W - W.transpose()).norm() < 1e-12 * W.norm());
}

TEST_CASE("solve_spd 2x2 closed form", "[linalg]") {
    MatrixXd W(2, 2);
    W << 4, 1, 1, 3;
    VectorXd b(2);
    b << 1, 0;
    VectorXd x = solve_spd(W, b);
    CHECK(x(0) == Catch::Approx(3.0 / 11.0).epsilon(1e-14));
    CHECK(x(1) == Catch::Approx(-1.0 / 11.0).epsilon(1e-14));
}

TEST_CASE("solve_spd refuses ill-conditioned matrices", "[linalg]") {
    MatrixXd W(2, 2);
    W << 1.0, 1.0, 1.0, 1.0 + 1e-14;
    VectorXd b = VectorXd::Ones(2);
    CHECK_THROWS_AS(solve_spd(W, b), near_singular_error);

    // indefinite is refused too
    MatrixXd N(2, 2);
    N << 1, 0, 0, -1;
    CHECK_THROWS_AS(solve_spd(N, b), near_singular_error);
}

TEST_CASE("spectral_abscissa", "[linalg]") {
    MatrixXd S(2, 2);
    S << 2, 1, 1, 2;  // eigenvalues 1, 3
    CHECK(spectral_abscissa(S) == Catch::Approx(3.0).epsilon(1e-12));

    MatrixXd N(2, 2);
    N << 0, 1, 0, 0;
    CHECK(spectral_abscissa(N) == Catch::Approx(0.0).margin(1e-12));

    MatrixXd Rot(2, 2);
    Rot << 0, 1, -1, 0;  // eigenvalues +-i
    CHECK(spectral_abscissa(Rot) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("spectral_radius_sym", "[linalg]") {
    MatrixXd D = MatrixXd::Zero(2, 2);
    D(0, 0) = 1;
    D(1, 1) = 5;
    CHECK(spectral_radius_sym(D) == Catch::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("gauss_legendre exactness and symmetry", "[linalg]") {
    const auto q = gauss_legendre(8);
    REQUIRE(q.x.size() == 8);
    double sw = 0, x14 = 0, x15 = 0;
    for (int i = 0; i < 8; ++i) {
        sw += q.w(i);
        x14 += q.w(i) * std::pow(q.x(i), 14);
        x15 += q.w(i) * std::pow(q.x(i), 15);
        CHECK(q.x(i) == Catch::Approx(-q.x(7 - i)).margin(1e-14));
        CHECK(q.w(i) == Catch::Approx(q.w(7 - i)).epsilon(1e-13));
    }
    CHECK(sw == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(x14 == Catch::Approx(2.0 / 15.0).epsilon(1e-13));  // degree 15 rule
    CHECK(x15 == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("gauss_legendre_on mapped interval", "[linalg]") {
    const auto q = gauss_legendre_on(12, 0.0, 2.0);
    double s = 0;
    for (Eigen::Index i = 0; i < q.x.size(); ++i)
        s += q.w(i) * q.x(i) * q.x(i) * q.x(i);
    CHECK(s == Catch::Approx(4.0).epsilon(1e-13));  // int_0^2 x^3 dx
}

TEST_CASE("fit_affine recovers an exact line", "[linalg]") {
    VectorXd x(5), y(5);
    for (int i = 0; i < 5; ++i) {
        x(i) = i;
        y(i) = 3.0 * i + 2.0;
    }
    auto f = fit_affine(x, y);
    CHECK(f.slope == Catch::Approx(3.0).epsilon(1e-13));
    CHECK(f.intercept == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(f.r2 == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_power recovers a pure power law", "[linalg]") {
    VectorXd x(6), y(6);
    for (int i = 0; i < 6; ++i) {
        x(i) = std::pow(10.0, -2.0 + i);
        y(i) = 5.0 * x(i) * x(i);
    }
    auto f = fit_power(x, y);
    CHECK(f.slope == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(f.intercept == Catch::Approx(0.69897000433601886).epsilon(1e-12));
    CHECK(f.r2 == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ks_distance on hand cases", "[linalg]") {
    // single value at the arcsine one-third quantile
    CHECK(ks_arcsine({1.0}, 1.0) == Catch::Approx(2.0 / 3.0).epsilon(1e-13));

    // evenly spaced midpoints against uniform: KS = 1/(2n)
    std::vector<double> mid;
    const int n = 10;
    for (int i = 0; i < n; ++i) mid.push_back((i + 0.5) / n);
    CHECK(ks_uniform(mid, 0.0, 1.0) == Catch::Approx(0.05).epsilon(1e-13));
}

TEST_CASE("ks_arcsine accepts arcsine quantiles", "[linalg]") {
    // x = 2 r sin(pi u / 2) is the inverse CDF
    const double r = 3.0;
    std::vector<double> vals;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const double u = (i + 0.5) / n;
        vals.push_back(2.0 * r * std::sin(M_PI * u / 2.0));
    }
    CHECK(ks_arcsine(vals, r) < 1.0 / n + 1e-9);
    // and rejects a point mass
    CHECK(ks_arcsine(std::vector<double>(100, 2.0 * r), r) >
          0.5);
}
