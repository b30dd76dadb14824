#include <cmath>
#include <random>

#include "ddmsi/deriv_estimation.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;

TEST_CASE("euler_derivative: constant state") {
  const Matrix d = euler_derivative(mat({{1.0, 1.0}}), 0.5);
  REQUIRE(d.cols() == 1);
  CHECK(d(0, 0) == 0.0);
}

TEST_CASE("euler_derivative: forward differences") {
  const Matrix d = euler_derivative(mat({{0.0, 1.0, 3.0}}), 1.0);
  REQUIRE(d.cols() == 2);
  CHECK(d(0, 0) == 1.0);
  CHECK(d(0, 1) == 2.0);
}

TEST_CASE("euler_derivative: rejects short data and bad steps") {
  CHECK_THROWS_AS(euler_derivative(mat({{1.0}}), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(euler_derivative(mat({{1.0, 2.0}}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(euler_derivative(mat({{1.0, 2.0}}), -0.1), std::invalid_argument);
}

TEST_CASE("euler_derivative: scalar decay stays within the error bound") {
  const double h = 0.01;
  const Matrix X = mat({{1.0, std::exp(-h)}});
  const Matrix est = euler_derivative(X, h);
  // (e^{-h} - 1) / h
  CHECK(est(0, 0) == doctest::Approx(-0.995016625083195).epsilon(1e-12));
  const double bound = derivative_error_bound(Vector::Ones(1), Vector::Zero(1),
                                              NormPrior(1.0, 0.0), h);
  CHECK(std::abs(est(0, 0) - (-1.0)) <= bound);
}

TEST_CASE("derivative_error_bound: closed form values") {
  Vector x = Vector::Zero(2);
  x(0) = 1.0;
  Vector u = Vector::Ones(1);
  CHECK(derivative_error_bound(x, u, NormPrior(1.0, 1.0), 0.0) == 0.0);
  CHECK(derivative_error_bound(x, u, NormPrior(1.0, 1.0), 0.1) ==
        doctest::Approx(0.10166666666666667).epsilon(1e-14));
  Vector x2(1);
  x2 << 2.0;
  Vector u_any(1);
  u_any << 123.0;
  CHECK(derivative_error_bound(x2, u_any, NormPrior(1.0, 0.0), 0.2) ==
        doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(derivative_error_bound(x, u, NormPrior(1.0, 1.0), -0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NormPrior(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("derivative_error_bound: monotone in every argument") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = pos(rng), b = pos(rng), h = pos(rng), nx = pos(rng), nu = pos(rng);
    auto bound = [](double a_, double b_, double h_, double nx_, double nu_) {
      Vector x = Vector::Zero(1), u = Vector::Zero(1);
      x(0) = nx_;
      u(0) = nu_;
      return derivative_error_bound(x, u, NormPrior(a_, b_), h_);
    };
    const double base = bound(a, b, h, nx, nu);
    const double d = pos(rng);
    CHECK(bound(a + d, b, h, nx, nu) >= base);
    CHECK(bound(a, b + d, h, nx, nu) >= base);
    CHECK(bound(a, b, h + d, nx, nu) >= base);
    CHECK(bound(a, b, h, nx + d, nu) >= base);
    CHECK(bound(a, b, h, nx, nu + d) >= base);
  }
}

namespace {

// Rigorous bound on the forward-difference error from the integral form
// (1/h) int_0^h (e^{As} - I)(Ax + Bu) ds and ||e^{As} - I|| <= e^{a s} - 1.
double exponential_error_bound(double a, double b, double nx, double nu, double h) {
  const double z = a * h;
  const double factor = z > 0.0 ? (std::expm1(z) - z) / z : 0.0;
  return factor * (a * nx + b * nu);
}

}  // namespace

TEST_CASE("derivative_error_bound: closed form is exceeded by an unstable scalar plant") {
  // A = a_bar > 0, B = 0: the error is x (e^{a h} - 1 - a h) / h > a^2 h x / 2.
  const double a = 1.0, h = 0.5;
  const Matrix X = mat({{1.0, std::exp(a * h)}});
  const double err = std::abs(euler_derivative(X, h)(0, 0) - a);
  const double closed = derivative_error_bound(Vector::Ones(1), Vector::Zero(1), NormPrior(a, 0.0), h);
  CHECK(err == doctest::Approx((std::expm1(a * h) - a * h) / h).epsilon(1e-12));
  CHECK(closed == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(err > closed);
  // With a stable plant of the same norm the closed form holds.
  const Matrix Xs = mat({{1.0, std::exp(-a * h)}});
  CHECK(std::abs(euler_derivative(Xs, h)(0, 0) + a) <= closed);
}

TEST_CASE("euler error stays within the exponential bound for random plants") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 3;
    const int m = 1 + trial % 2;
    const double a_bar = 0.1 + 3.0 * unit(rng);
    const double b_bar = 0.1 + 3.0 * unit(rng);
    Matrix A = Matrix::NullaryExpr(n, n, [&] { return normal(rng); });
    Matrix B = Matrix::NullaryExpr(n, m, [&] { return normal(rng); });
    A *= a_bar * unit(rng) / Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
    B *= b_bar * unit(rng) / Eigen::JacobiSVD<Matrix>(B).singularValues()(0);
    const Vector x = Vector::NullaryExpr(n, [&] { return normal(rng); });
    const Vector u = Vector::NullaryExpr(m, [&] { return normal(rng); });
    const double h = 1e-3 + 2.0 * unit(rng);
    const ZohMaps z = discretize_zoh(A, B, h);
    Matrix X(n, 2);
    X.col(0) = x;
    X.col(1) = z.state * x + z.input * u;
    const Vector err = euler_derivative(X, h).col(0) - (A * x + B * u);
    const double bound = exponential_error_bound(a_bar, b_bar, x.norm(), u.norm(), h);
    if (err.norm() > bound * (1.0 + 1e-10) + 1e-14) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("estimate_derivatives drops the last sample") {
  const Matrix X = mat({{0.0, 1.0, 3.0, 6.0}});
  const Matrix U = mat({{1.0, 1.0, 1.0, 1.0}});
  const DerivEstimate e = estimate_derivatives(X, U, NormPrior(1.0, 1.0), 1.0);
  CHECK(e.xdot_est.cols() == 3);
  CHECK(e.per_sample_bound.size() == 3);
  CHECK(e.per_sample_bound[0] ==
        doctest::Approx(derivative_error_bound(X.col(0), U.col(0), NormPrior(1.0, 1.0), 1.0)));
  CHECK_THROWS_AS(estimate_derivatives(X, mat({{1.0}}), NormPrior(1.0, 1.0), 1.0),
                  std::invalid_argument);
}

TEST_CASE("bounds_to_noise_model") {
  SUBCASE("all zero is degenerate") {
    const NoiseBound nb = bounds_to_noise_model({0.0, 0.0, 0.0}, 3, 2);
    CHECK(nb.Rd.isZero(0.0));
    CHECK(is_degenerate(nb));
  }
  SUBCASE("maximum bound aggregates") {
    const NoiseBound nb = bounds_to_noise_model({0.1, 0.2}, 2, 2);
    CHECK((nb.Rd - 0.08 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(nb.Qd == -Matrix::Identity(2, 2));
    CHECK(nb.Sd.isZero(0.0));
    CHECK(!is_degenerate(nb));
  }
  SUBCASE("example noise level") {
    const NoiseBound nb = bounds_to_noise_model({0.05}, 100, 2);
    CHECK((nb.Rd - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(bounds_to_noise_model({}, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(bounds_to_noise_model({-1.0}, 1, 1), std::invalid_argument);
  }
}
