#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;

namespace {

// Fixed-step RK4 on d/dt [Phi Gamma] = A [Phi Gamma] + [0 B], from [I 0].
ZohMaps rk4_zoh(const Matrix& A, const Matrix& B, double dt, int steps) {
  const auto n = A.rows();
  const auto m = B.cols();
  Matrix Y = Matrix::Zero(n, n + m);
  Y.leftCols(n).setIdentity();
  Matrix forcing = Matrix::Zero(n, n + m);
  forcing.rightCols(m) = B;
  auto f = [&](const Matrix& y) { return Matrix(A * y + forcing); };
  const double s = dt / steps;
  for (int i = 0; i < steps; ++i) {
    const Matrix k1 = f(Y);
    const Matrix k2 = f(Y + 0.5 * s * k1);
    const Matrix k3 = f(Y + 0.5 * s * k2);
    const Matrix k4 = f(Y + s * k3);
    Y += s / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return {Y.leftCols(n), Y.rightCols(m)};
}

double value_at(const Trajectory& tr, double t, int row = 0) {
  for (std::size_t i = 0; i < tr.grid.size(); ++i) {
    if (std::abs(tr.grid[i] - t) < 1e-9) return tr.states(row, static_cast<Eigen::Index>(i));
  }
  FAIL("grid point not found");
  return 0.0;
}

}  // namespace

TEST_CASE("discretize_zoh: zero dynamics integrate the input") {
  const ZohMaps z = discretize_zoh(mat({{0.0}}), mat({{1.0}}), 0.5);
  CHECK(z.state(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z.input(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("discretize_zoh: scalar decay") {
  const ZohMaps z = discretize_zoh(mat({{-1.0}}), mat({{0.0}}), 1.0);
  CHECK(z.state(0, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
  CHECK(z.input(0, 0) == 0.0);
}

TEST_CASE("discretize_zoh: example plant agrees with fine RK4 integration") {
  const LtiSystem sys = example_system();
  const ZohMaps z = discretize_zoh(sys, 1.0);
  const ZohMaps ref = rk4_zoh(sys.A(), sys.B(), 1.0, 2000);
  CHECK((z.state - ref.state).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((z.input - ref.input).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("discretize_zoh: semigroup property") {
  const Matrix A = mat({{-0.3, 2.0, 0.1}, {-1.0, 0.2, 0.0}, {0.5, 0.0, -1.2}});
  const Matrix B = mat({{1.0}, {0.0}, {0.5}});
  for (auto [a, b] : {std::pair{0.3, 0.7}, std::pair{1.1, 2.4}, std::pair{0.01, 5.0}}) {
    const Matrix lhs = discretize_zoh(A, B, a + b).state;
    const Matrix rhs = discretize_zoh(A, B, a).state * discretize_zoh(A, B, b).state;
    CHECK((lhs - rhs).norm() <= 1e-10 * lhs.norm());
  }
}

TEST_CASE("discretize_zoh: rejects bad input") {
  CHECK_THROWS_AS(discretize_zoh(mat({{1.0}}), mat({{1.0}}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(discretize_zoh(mat({{1.0}}), mat({{1.0}}), -1.0), std::invalid_argument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(discretize_zoh(mat({{nan}}), mat({{1.0}}), 1.0), std::invalid_argument);
}

TEST_CASE("LtiSystem invariants") {
  CHECK_THROWS_AS(LtiSystem(mat({{1.0, 0.0}}), mat({{1.0}})), std::invalid_argument);
  CHECK_THROWS_AS(LtiSystem(mat({{1.0}}), mat({{1.0}, {2.0}})), std::invalid_argument);
  // Rank-deficient disturbance channel.
  CHECK_THROWS_AS(LtiSystem(Matrix::Identity(2, 2), mat({{1.0}, {0.0}}),
                            mat({{1.0, 2.0}, {2.0, 4.0}})),
                  std::invalid_argument);
  const LtiSystem ok = example_system();
  CHECK(ok.disturbances() == 2);
  CHECK(ok.Bd().isIdentity());
}

TEST_CASE("SamplingSequence invariants") {
  CHECK_THROWS_AS(SamplingSequence({}), std::invalid_argument);
  CHECK_THROWS_AS(SamplingSequence({0.0, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(SamplingSequence({0.5, 1.0}), std::invalid_argument);
  const SamplingSequence s({0.0, 0.5, 2.0, 2.25});
  CHECK(s.max_gap() == doctest::Approx(1.5));
  CHECK(s.min_gap() == doctest::Approx(0.25));
  const SamplingSequence p = SamplingSequence::periodic(0.3, 1.0);
  CHECK(p.size() == 5);
  CHECK(p.back() >= 1.0);
}

TEST_CASE("closed loop: stable scalar with zero gain follows exp(-t)") {
  const LtiSystem sys(mat({{-1.0}}), mat({{1.0}}));
  const FeedbackGain K(mat({{0.0}}));
  const SamplingSequence s({0.0, 0.4, 1.3, 1.5, 2.7, 3.0});
  const Trajectory tr = simulate_sampled_closed_loop(sys, K, s, Vector::Ones(1), 3.0);
  for (std::size_t i = 0; i < tr.grid.size(); ++i) {
    CHECK(tr.states(0, static_cast<Eigen::Index>(i)) ==
          doctest::Approx(std::exp(-tr.grid[i])).epsilon(1e-12));
  }
}

TEST_CASE("closed loop: frozen dynamics keep the state") {
  const LtiSystem sys(Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  const FeedbackGain K(mat({{1.0, -2.0}}));
  Vector x0(2);
  x0 << 0.7, -3.0;
  const Trajectory tr =
      simulate_sampled_closed_loop(sys, K, SamplingSequence::periodic(0.5, 4.0), x0, 4.0);
  for (Eigen::Index i = 0; i < tr.states.cols(); ++i) {
    CHECK((tr.states.col(i) - x0).norm() == 0.0);
  }
}

TEST_CASE("closed loop: grid contains every sampling instant and the default density") {
  const SamplingSequence s({0.0, 0.4, 1.0, 1.2});
  const LtiSystem sys = example_system();
  const Trajectory tr = simulate_sampled_closed_loop(sys, example_gain(), s, Vector::Ones(2), 1.2);
  tr.check();
  for (double t : s.times()) CHECK_NOTHROW(value_at(tr, t));
  // 20 points per shortest gap (0.2) -> step 0.01 -> about 121 grid points.
  CHECK(tr.grid.size() >= 120);
  CHECK(tr.grid.size() <= 125);
}

TEST_CASE("closed loop: example gain at period 1 decays") {
  Vector x0(2);
  x0 << 1.0, 0.0;
  SimulationOptions opt;
  opt.output_dt = 0.5;
  const Trajectory tr = simulate_sampled_closed_loop(
      example_system(), example_gain(), SamplingSequence::periodic(1.0, 50.0), x0, 50.0, opt);
  CHECK(tr.grid.back() == doctest::Approx(50.0));
  CHECK(tr.states.col(tr.states.cols() - 1).norm() < 1e-3);
}

TEST_CASE("closed loop: first-order convergence to continuous feedback") {
  const LtiSystem sys = example_system();
  const FeedbackGain K = example_gain();
  const Matrix Acl = sys.A() + sys.B() * K.K();
  Vector x0(2);
  x0 << 1.0, 0.0;
  auto deviation = [&](double gap) {
    SimulationOptions opt;
    opt.output_dt = gap;
    const Trajectory tr = simulate_sampled_closed_loop(
        sys, K, SamplingSequence::periodic(gap, 10.0), x0, 10.0, opt);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.grid.size(); ++i) {
      const Vector exact = (Acl * tr.grid[i]).exp() * x0;
      worst = std::max(worst, (tr.states.col(static_cast<Eigen::Index>(i)) - exact).norm());
    }
    return worst;
  };
  const double e1 = deviation(0.1);
  const double e2 = deviation(0.05);
  const double e3 = deviation(0.025);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.15));
  CHECK(e2 / e3 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("closed loop: rejects bad arguments") {
  const LtiSystem sys = example_system();
  const SamplingSequence s = SamplingSequence::periodic(1.0, 5.0);
  CHECK_THROWS_AS(simulate_sampled_closed_loop(sys, example_gain(), s, Vector::Ones(2), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate_sampled_closed_loop(sys, example_gain(), s, Vector::Ones(2), 9.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate_sampled_closed_loop(sys, FeedbackGain(mat({{1.0}})), s,
                                               Vector::Ones(2), 5.0),
                  std::invalid_argument);
}

TEST_CASE("experiment data: noiseless data satisfy the data equation exactly") {
  const ExperimentData ex = example_data(0.0, 3);
  const LtiSystem sys = example_system();
  CHECK(ex.disturbances.isZero(0.0));
  const Matrix residual = ex.data.Xdot - sys.A() * ex.data.X - sys.B() * ex.data.U;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("experiment data: example protocol") {
  const ExperimentData ex = example_data(0.01, 1);
  REQUIRE(ex.data.samples() == 100);
  CHECK(ex.data.tau[1] - ex.data.tau[0] == doctest::Approx(1.5));
  CHECK(ex.data.tau[49] - ex.data.tau[48] == doctest::Approx(1.5));
  CHECK(ex.data.tau[50] - ex.data.tau[49] == doctest::Approx(3.0));
  CHECK(ex.data.tau[99] - ex.data.tau[98] == doctest::Approx(3.0));
  CHECK(ex.data.U.cwiseAbs().maxCoeff() <= 1.0);
  for (Eigen::Index k = 0; k < 100; ++k) CHECK(ex.disturbances.col(k).norm() <= 0.01);
  // Recorded derivative includes the realised disturbance.
  const LtiSystem sys = example_system();
  const Matrix residual =
      ex.data.Xdot - sys.A() * ex.data.X - sys.B() * ex.data.U - ex.disturbances;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("experiment data: realised disturbance satisfies the aggregate noise bound") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ExperimentData ex = example_data(0.05, seed);
    const NoiseBound nb = NoiseBound::from_pointwise(0.05, 100, 2);
    const Matrix F = nb.form(ex.disturbances);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (F + F.transpose()));
    CHECK(es.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("experiment data: same seed reproduces, different seed differs") {
  const ExperimentData a = example_data(0.02, 7);
  const ExperimentData b = example_data(0.02, 7);
  const ExperimentData c = example_data(0.02, 8);
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.Xdot == b.data.Xdot);
  CHECK(a.data.X != c.data.X);
}

TEST_CASE("experiment data: rejects invalid sampling") {
  const LtiSystem sys = example_system();
  CHECK_THROWS_AS(generate_experiment_data(sys, {0.0, 1.0, 0.5}, uniform_box_input(1, -1, 1),
                                           uniform_ball_disturbance(2, 0.1), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(uniform_ball_disturbance(2, -0.1), std::invalid_argument);
}
