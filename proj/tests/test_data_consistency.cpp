#include <random>

#include "ddmsi/lmi.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;

namespace {

DataSet scalar_data(const Matrix& X, const Matrix& U, const Matrix& Xdot, double bd = 1.0) {
  DataSet d;
  for (Eigen::Index k = 0; k < X.cols(); ++k) d.tau.push_back(static_cast<double>(k));
  d.X = X;
  d.U = U;
  d.Xdot = Xdot;
  d.Bd = Matrix::Constant(1, 1, bd);
  return d;
}

NoiseBound noise(const Matrix& Qd, const Matrix& Sd, const Matrix& Rd) {
  NoiseBound nb;
  nb.Qd = Qd;
  nb.Sd = Sd;
  nb.Rd = Rd;
  return nb;
}

// Value of the noise QMI at D (1 x N) for m_d = 1.
double noise_form(const NoiseBound& nb, const Matrix& D) { return nb.form(D)(0, 0); }

}  // namespace

TEST_CASE("build_consistency_set: scalar hand example") {
  const double d = 0.1;
  const ConsistencySet set =
      build_consistency_set(scalar_data(mat({{1.0}}), mat({{0.0}}), mat({{0.0}})),
                            noise(mat({{-1.0}}), mat({{0.0}}), mat({{d * d}})));
  const Matrix expected = mat({{-1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, d * d}});
  CHECK((set.Pc - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(set.n == 1);
  CHECK(set.m == 1);
  CHECK(set.pc_inertia == Inertia{1, 1, 1});
}

TEST_CASE("membership_test: scalar hand example") {
  const double d = 0.1;
  const ConsistencySet set = consistency_set_from_matrix(
      mat({{-1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, d * d}}), 1, 1, 1);
  const Membership in = membership_test(mat({{0.0}}), mat({{5.0}}), set);
  CHECK(in.member);
  CHECK(in.margin == doctest::Approx(d * d));
  const Membership out = membership_test(mat({{2 * d}}), mat({{0.0}}), set);
  CHECK(!out.member);
  CHECK(out.margin == doctest::Approx(-3 * d * d));
  CHECK_THROWS_AS(membership_test(Matrix::Zero(2, 2), mat({{0.0}}), set), std::invalid_argument);
}

TEST_CASE("membership_test: the generating system belongs to its set") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ConsistencySet set = example_set(0.02, seed);
    const LtiSystem sys = example_system();
    CHECK(membership_test(sys.A(), sys.B(), set).member);
    CHECK(primal_membership_test(sys.A(), sys.B(), set).member);
  }
}

TEST_CASE("block identity Qc = Z Qd Z' for arbitrary Sd") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const ExperimentData ex = example_data(0.03, 4);
  const int N = ex.data.samples();
  NoiseBound nb = NoiseBound::from_pointwise(0.03, N, 2);
  nb.Sd = Matrix::NullaryExpr(N, 2, [&] { return 0.01 * g(rng); });
  const ConsistencySet set = build_consistency_set(ex.data, nb);
  const Matrix Z = ex.data.Z();
  CHECK((set.Qc() - Z * nb.Qd * Z.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * set.Pc.norm());
  CHECK((set.Pc - set.Pc.transpose()).norm() == 0.0);
}

TEST_CASE("Qc is negative definite exactly when Z has full row rank") {
  const ExperimentData ex = example_data(0.01, 2);
  const NoiseBound nb = NoiseBound::from_pointwise(0.01, 100, 2);
  const ConsistencySet rich = build_consistency_set(ex.data, nb);
  CHECK(max_eigenvalue(rich.Qc()) < 0.0);

  DataSet poor = ex.data;
  poor.U.setZero();
  const ConsistencySet deficient = build_consistency_set(poor, nb);
  CHECK(inertia(deficient.Qc()).zero >= 1);
  CHECK(inertia(deficient.Qc()).positive == 0);
}

TEST_CASE("check_assumption_inertia") {
  const double d = 0.1;
  const ConsistencySet degenerate = consistency_set_from_matrix(
      mat({{-1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, d * d}}), 1, 1, 1);
  const InertiaReport r1 = check_assumption_inertia(degenerate, 1);
  CHECK(!r1.invertible);
  CHECK(!r1.pass);

  const ConsistencySet good = consistency_set_from_matrix(
      mat({{-1.0, 0.0, 0.0}, {0.0, -1.0, 0.0}, {0.0, 0.0, 4.0}}), 1, 1, 1);
  const InertiaReport r2 = check_assumption_inertia(good, 1);
  CHECK(r2.invertible);
  CHECK(r2.positive_count == 1);
  CHECK(r2.pass);

  const ExperimentData ex = example_data(0.01, 1);
  const ConsistencySet example =
      build_consistency_set(ex.data, NoiseBound::from_pointwise(0.01, 100, 2));
  CHECK(example.pc_inertia.positive == 2);
  CHECK(check_assumption_inertia(example, 2).pass);
}

TEST_CASE("check_appendix_b: conditions") {
  const ExperimentData ex = example_data(0.01, 1);
  const NoiseBound nb = NoiseBound::from_pointwise(0.01, 100, 2);
  const AppendixBReport ok = check_appendix_b(ex.data, nb, ex.disturbances);
  CHECK(ok.z_full_row_rank.pass == true);
  CHECK(ok.bd_invertible.pass == true);
  CHECK(ok.strict_noise_bound.pass == true);
  CHECK(ok.sd_zero.pass == true);
  CHECK(ok.all_pass());

  const AppendixBReport unknown = check_appendix_b(ex.data, nb);
  CHECK(!unknown.strict_noise_bound.pass.has_value());
  CHECK(!unknown.warnings.empty());
  CHECK(!unknown.all_pass());

  DataSet no_input = ex.data;
  no_input.U.setZero();
  CHECK(check_appendix_b(no_input, nb, ex.disturbances).z_full_row_rank.pass == false);
}

TEST_CASE("dualize: scalar hand example without inputs") {
  const ConsistencySet set = consistency_set_from_matrix(mat({{-1.0, 0.0}, {0.0, 4.0}}), 1, 0, 1);
  const ConsistencySet dual = dualize(set);
  REQUIRE(dual.Pc_dual);
  CHECK((*dual.Pc_dual - mat({{-0.25, 0.0}, {0.0, 1.0}})).cwiseAbs().maxCoeff() < 1e-15);
  // Both forms describe |A| <= 2.
  const Matrix B0(1, 0);
  for (double a : {-2.5, -1.9, 0.0, 1.0, 1.99, 2.01, 3.0}) {
    const bool inside = std::abs(a) <= 2.0;
    CHECK(membership_test(mat({{a}}), B0, dual).member == inside);
    CHECK(primal_membership_test(mat({{a}}), B0, dual).member == inside);
  }
}

TEST_CASE("dualize: refuses sets that fail the inertia assumption") {
  const ConsistencySet degenerate = consistency_set_from_matrix(
      mat({{-1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.01}}), 1, 1, 1);
  CHECK_THROWS_AS(dualize(degenerate), std::runtime_error);
  const ConsistencySet wrong_count = consistency_set_from_matrix(
      mat({{-1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}), 1, 1, 1);
  CHECK_THROWS_AS(dualize(wrong_count), std::runtime_error);
  const ConsistencySet ill = consistency_set_from_matrix(
      mat({{-1.0, 0.0, 0.0}, {0.0, -1e-13, 0.0}, {0.0, 0.0, 1.0}}), 1, 1, 1);
  CHECK_THROWS(dualize(ill));
  CHECK_THROWS_AS(primal_membership_test(mat({{0.0}}), mat({{0.0}}), wrong_count),
                  std::invalid_argument);
}

TEST_CASE("dualize: round trip and primal/dual agreement on the example") {
  const ConsistencySet set = example_set(0.02, 3);
  REQUIRE(set.Pc_dual);
  const Matrix back = undualize(*set.Pc_dual, 2, 1);
  CHECK((back - set.Pc).norm() <= 1e-8 * set.Pc.norm());

  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  const LtiSystem sys = example_system();
  int disagreements = 0;
  int members = 0;
  for (int i = 0; i < 500; ++i) {
    const double scale = std::pow(10.0, -4.0 + 3.0 * (i % 4) / 3.0);
    const Matrix A = sys.A() + scale * Matrix::NullaryExpr(2, 2, [&] { return g(rng); });
    const Matrix B = sys.B() + scale * Matrix::NullaryExpr(2, 1, [&] { return g(rng); });
    const Membership dual_form = membership_test(A, B, set);
    const Membership primal_form = primal_membership_test(A, B, set);
    members += dual_form.member ? 1 : 0;
    const double band = 1e-9 * set.Pc.norm();
    if (std::abs(dual_form.margin) > band && std::abs(primal_form.margin) > band &&
        dual_form.member != primal_form.member) {
      ++disagreements;
    }
  }
  CHECK(disagreements == 0);
  CHECK(members > 50);
  CHECK(members < 450);
}

TEST_CASE("Pc membership matches the disturbance-based definition on scalar data") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  int disagreements = 0;
  int members = 0;
  for (int instance = 0; instance < 20; ++instance) {
    const int N = 1 + instance % 3;
    const Matrix X = Matrix::NullaryExpr(1, N, [&] { return g(rng); });
    const Matrix U = Matrix::NullaryExpr(1, N, [&] { return g(rng); });
    const Matrix Xdot = Matrix::NullaryExpr(1, N, [&] { return g(rng); });
    const double bd = (instance % 2 ? -1.0 : 1.0) * unit(rng);
    Matrix L = Matrix::NullaryExpr(N, N, [&] { return g(rng); });
    const NoiseBound nb = noise(-(L * L.transpose() + 0.1 * Matrix::Identity(N, N)),
                                Matrix::NullaryExpr(N, 1, [&] { return 0.3 * g(rng); }),
                                Matrix::Constant(1, 1, unit(rng)));
    const ConsistencySet set = build_consistency_set(scalar_data(X, U, Xdot, bd), nb);
    for (int c = 0; c < 5; ++c) {
      const double a = 2.0 * g(rng);
      const double b = 2.0 * g(rng);
      // The disturbance that explains the data is unique because bd != 0.
      const Matrix D = (Xdot - a * X - b * U) / bd;
      const double value = noise_form(nb, D);
      const Membership m = membership_test(mat({{a}}), mat({{b}}), set);
      members += m.member ? 1 : 0;
      if (std::abs(value) > 1e-6 && m.member != (value >= 0.0)) ++disagreements;
    }
  }
  CHECK(disagreements == 0);
  CHECK(members > 0);
}

TEST_CASE("consistency_set_from_matrix validates its input") {
  CHECK_THROWS_AS(consistency_set_from_matrix(Matrix::Identity(2, 2), 1, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(consistency_set_from_matrix(mat({{0.0, 1.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}),
                                              1, 1, 1),
                  std::invalid_argument);
}
