#include "ddmsi/lmi_assembly.hpp"
#include "ddmsi/msi_search.hpp"
#include "ddmsi/sdp.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;

namespace {

const LmiConstraint& constraint(const LmiProblem& p, const std::string& name) {
  for (const auto& c : p.constraints) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no constraint " + name);
}

FeasibilityStatus solve_at(const LmiProblem& p) {
  return solve_feasibility(p, default_margin(p.h)).status;
}

// Certain scalar plant xdot = x + u observed through a few exact samples.
ConsistencySet certain_scalar_set(double d_bar) {
  DataSet d;
  d.tau = {0.0, 1.0, 2.0, 3.0};
  d.X = mat({{1.0, -0.5, 0.3, 2.0}});
  d.U = mat({{0.2, 1.0, -1.0, 0.5}});
  d.Xdot = d.X + d.U;
  d.Bd = Matrix::Identity(1, 1);
  return dualize(build_consistency_set(d, NoiseBound::from_pointwise(d_bar, 4, 1)));
}

}  // namespace

TEST_CASE("dimension contract") {
  const LtiSystem sys = example_system();
  const FeedbackGain K = example_gain();
  const LmiProblem model = assemble_model_based(sys, K, 1.0);
  CHECK(constraint(model, "delay-lmi-1").expr.rows() == 4);
  CHECK(constraint(model, "delay-lmi-2").expr.rows() == 6);

  const ConsistencySet set = example_set(0.01, 1);
  const LmiProblem analysis = assemble_analysis(set, K, 1.0);
  CHECK(constraint(analysis, "robust-delay-lmi-1").expr.rows() == 6);
  CHECK(constraint(analysis, "robust-delay-lmi-2").expr.rows() == 8);
  CHECK(analysis_factor_first(K.K(), 1.0).rows() == 15);
  CHECK(analysis_factor_first(K.K(), 1.0).cols() == 6);
  CHECK(analysis_factor_second(K.K(), 1.0).rows() == 17);
  CHECK(analysis_factor_second(K.K(), 1.0).cols() == 8);

  const LmiProblem design = assemble_design(set, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.0);
  CHECK(constraint(design, "robust-design-lmi-1").expr.rows() == 9);
  CHECK(constraint(design, "robust-design-lmi-2").expr.rows() == 9);
  CHECK(design_factor_first(K.K(), Matrix::Identity(2, 2), 1.0).rows() == 17);
  CHECK(design_factor_first(K.K(), Matrix::Identity(2, 2), 1.0).cols() == 9);
  CHECK(design_factor_second(K.K(), 1.0).cols() == 9);
  CHECK(design.variables.spec("K").rows == 1);
  CHECK(design.variables.spec("K").cols == 2);

  CHECK_THROWS(assemble_analysis(build_consistency_set(example_data(0.01, 1).data,
                                                       NoiseBound::from_pointwise(0.01, 100, 2)),
                                 K, 1.0));
  CHECK_THROWS(assemble_model_based(sys, K, -1.0));
}

TEST_CASE("assembled problems are affine and symmetric") {
  const ConsistencySet set = example_set(0.02, 2);
  CHECK(assemble_model_based(example_system(), example_gain(), 1.2).affinity_probe(1));
  CHECK(assemble_analysis(set, example_gain(), 1.2).affinity_probe(2));
  Matrix Q1(2, 2);
  Q1 << 2.0, 0.3, 0.3, 1.0;
  CHECK(assemble_design(set, Q1, 0.5 * Matrix::Identity(2, 2), 1.2).affinity_probe(3));
}

TEST_CASE("model-based conditions on the example system") {
  CHECK(solve_at(assemble_model_based(example_system(), example_gain(), 1.0)) ==
        FeasibilityStatus::Feasible);
  CHECK(solve_at(assemble_model_based(example_system(), example_gain(), 2.0)) ==
        FeasibilityStatus::Infeasible);
}

TEST_CASE("model-based conditions: scalar hand witness") {
  // A = -1, B = 0, K = 0, h = 0.1 with P1 = P2 = P3 = R = 1:
  // first block [-2 -1; -1 -1.9], second adds the row [0 0 -0.1].
  const LtiSystem sys(mat({{-1.0}}), mat({{0.0}}));
  const LmiProblem p = assemble_model_based(sys, FeedbackGain(mat({{0.0}})), 0.1);
  const Vector x = p.variables.pack(
      {{"P1", mat({{1.0}})}, {"P2", mat({{1.0}})}, {"P3", mat({{1.0}})}, {"R", mat({{1.0}})}});
  const Matrix first = constraint(p, "delay-lmi-1").expr.evaluate(x);
  CHECK((first - mat({{-2.0, -1.0}, {-1.0, -1.9}})).cwiseAbs().maxCoeff() < 1e-15);
  const Matrix second = constraint(p, "delay-lmi-2").expr.evaluate(x);
  CHECK(second(2, 2) == doctest::Approx(-0.1));
  CHECK(second(2, 0) == 0.0);
  CHECK(verify_witness(p, x, 1e-3));
  CHECK(solve_at(p) == FeasibilityStatus::Feasible);
}

TEST_CASE("robust analysis on the example dataset") {
  const ConsistencySet set = example_set(0.01, 1);
  const LmiProblem ok = assemble_analysis(set, example_gain(), 1.3);
  const FeasibilityResult r = solve_feasibility(ok, default_margin(1.3));
  REQUIRE(r.feasible());
  CHECK(solve_at(assemble_analysis(set, example_gain(), 1.6)) == FeasibilityStatus::Infeasible);

  SUBCASE("the robust conditions are homogeneous in the witness") {
    for (const char* name : {"robust-delay-lmi-1", "robust-delay-lmi-2"}) {
      const AffineMatrix& F = constraint(ok, name).expr;
      CHECK(F.constant_term().isZero(0.0));
      const Matrix a = F.evaluate(r.x);
      const Matrix b = F.evaluate(3.0 * r.x);
      CHECK((b - 3.0 * a).norm() <= 1e-12 * b.norm());
    }
  }

  SUBCASE("a robust witness certifies the generating system") {
    const LmiProblem nominal = assemble_model_based(example_system(), example_gain(), 1.3);
    std::map<std::string, Matrix> v;
    for (const char* name : {"P1", "P2", "P3", "R"}) v[name] = r.values.at(name);
    const Vector x = nominal.variables.pack(v);
    for (double ev : nominal.oriented_max_eigenvalues(x)) CHECK(ev < 0.0);
  }
}

TEST_CASE("robust design from an analysis witness enlarges the bound") {
  const ConsistencySet set = example_set(0.05, 1);
  BisectionConfig cfg;
  const auto cert = certify_analysis(set, example_gain(), 0.5, cfg);
  REQUIRE(cert);
  Matrix P1 = cert->P1, R = cert->R;
  const double s = std::max(P1.norm(), R.norm());
  P1 /= s;
  R /= s;
  const Matrix Q1 = P1.inverse();
  // One design step with (Q1, R) fixed; larger bounds need the iteration.
  const LmiProblem design = assemble_design(set, 0.5 * (Q1 + Q1.transpose()), R, 0.6);
  const FeasibilityResult r = solve_feasibility(design, default_margin(0.6));
  INFO(r.solver_diagnostics);
  REQUIRE(r.feasible());
  const Matrix K = r.values.at("K");
  CHECK(K.rows() == 1);
  CHECK(K.cols() == 2);
  // The designed gain stabilises the generating system and passes the robust
  // analysis at the same bound.
  const Matrix Acl = example_system().A() + example_system().B() * K;
  CHECK(Acl.eigenvalues().real().maxCoeff() < 0.0);
  CHECK(certify_analysis(set, FeedbackGain(K), 0.6, cfg).has_value());
  CHECK(solve_at(assemble_design(set, 0.5 * (Q1 + Q1.transpose()), R, 2.0)) ==
        FeasibilityStatus::Infeasible);
}

TEST_CASE("robust design for a certain unstable scalar plant") {
  const ConsistencySet set = certain_scalar_set(1e-3);
  const LmiProblem design = assemble_design(set, mat({{1.0}}), mat({{1.0}}), 0.1);
  const FeasibilityResult r = solve_feasibility(design, default_margin(0.1));
  REQUIRE(r.feasible());
  CHECK(1.0 + r.values.at("K")(0, 0) < 0.0);
}

TEST_CASE("scaling the dual multiplier is absorbed by the multiplier weights") {
  const ConsistencySet set = example_set(0.02, 4);
  ConsistencySet scaled = set;
  const double c = 7.5;
  *scaled.Pc_dual *= c;
  const LmiProblem a = assemble_analysis(set, example_gain(), 1.0);
  const LmiProblem b = assemble_analysis(scaled, example_gain(), 1.0);
  const FeasibilityResult r = solve_feasibility(a, default_margin(1.0));
  REQUIRE(r.feasible());
  std::map<std::string, Matrix> v = r.values;
  v["lambda1"] /= c;
  v["lambda2"] /= c;
  const Vector xb = b.variables.pack(v);
  for (const char* name : {"robust-delay-lmi-1", "robust-delay-lmi-2"}) {
    const Matrix Fa = constraint(a, name).expr.evaluate(r.x);
    const Matrix Fb = constraint(b, name).expr.evaluate(xb);
    CHECK((Fa - Fb).norm() <= 1e-10 * Fa.norm());
  }
}
