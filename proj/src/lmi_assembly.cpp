#include "ddmsi/lmi_assembly.hpp"

#include <sstream>
#include <stdexcept>

namespace ddmsi {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_positive_definite(const Matrix& M, const char* what) {
  require(M.rows() == M.cols(), what);
  require((M - M.transpose()).cwiseAbs().maxCoeff() <=
              1e-9 * std::max(1.0, M.cwiseAbs().maxCoeff()),
          what);
  require(min_eigenvalue(M) > 0.0, what);
}

std::string format_h(double h) {
  std::ostringstream os;
  os.precision(17);
  os << h;
  return os.str();
}

// [0 X^T; X 0] for a (possibly non-square) Lyapunov block X.
AffineMatrix lyapunov_multiplier(const AffineMatrix& X) {
  const auto c = X.cols();
  const auto r = X.rows();
  AffineMatrix out(c + r, c + r, X.num_vars());
  out.set_block(0, c, X.transpose());
  out.set_block(c, 0, X);
  return out;
}

// T^T M T
AffineMatrix sandwich(const AffineMatrix& T, const AffineMatrix& M) {
  return T.transpose() * (M * T);
}

void add_sign_constraints(LmiProblem& p, std::initializer_list<const char*> pd,
                          std::initializer_list<const char*> multipliers) {
  for (const char* name : pd) {
    p.add_constraint(std::string(name) + " > 0", p.variables.expr(name),
                     Sense::PositiveDefinite, true);
  }
  const int nv = p.variables.num_scalars();
  for (const char* name : multipliers) {
    p.add_constraint(std::string(name) + " > floor",
                     p.variables.expr(name) -
                         AffineMatrix::constant(Matrix::Constant(1, 1, kMultiplierFloor), nv),
                     Sense::PositiveDefinite, true);
  }
}

void declare_analysis_variables(VariableSet& v, int n) {
  v.add("P1", n, n, VariableKind::Symmetric);
  v.add("P2", n, n, VariableKind::Full);
  v.add("P3", n, n, VariableKind::Full);
  v.add("R", n, n, VariableKind::Symmetric);
}

// Outer factor of the first design condition with K^T supplied as an
// expression (either a variable or a constant).
AffineMatrix design_factor_first_expr(const AffineMatrix& Kt, const Matrix& R,
                                      double h, Eigen::Index n, Eigen::Index m) {
  const int nv = Kt.num_vars();
  BlockLayout rows{{"a", n}, {"b", n}, {"c", n},        // identity rows
                   {"m1", n}, {"m2", n}, {"m3", n},     // Lyapunov rows
                   {"pz_x", n}, {"pz_u", m},            // channel, z part
                   {"pw", n}};                          // channel, w part
  BlockLayout cols{{"a", n}, {"b", n}, {"c", n}, {"v_x", n}, {"v_u", m}};
  BlockBuilder T(rows, cols, nv);
  T.identity("a", "a").identity("b", "b").identity("c", "c");
  // [0 0 0; I -I R; 0 0 -1/(2h) I]
  T.identity("m2", "a").identity("m2", "b", -1.0).set("m2", "c", R);
  T.identity("m3", "c", -1.0 / (2.0 * h));
  // [I K^T; 0 0; 0 0]
  T.identity("m1", "v_x").set("m1", "v_u", Kt);
  // [0 I] and [0 I 0 | 0 0]
  T.identity("pz_x", "v_x").identity("pz_u", "v_u");
  T.identity("pw", "b");
  return T.matrix();
}

AffineMatrix design_factor_second_expr(const AffineMatrix& Kt, double h,
                                       Eigen::Index n, Eigen::Index m) {
  const int nv = Kt.num_vars();
  BlockLayout rows{{"a", n}, {"b", n}, {"c", n},
                   {"m1", n}, {"m2", n}, {"m3", n},
                   {"pz_x", n}, {"pz_u", m},
                   {"pw", n}};
  BlockLayout cols{{"a", n}, {"b", n}, {"c", n}, {"v_x", n}, {"v_u", m}};
  BlockBuilder T(rows, cols, nv);
  T.identity("a", "a").identity("b", "b").identity("c", "c");
  // [0 0 0; I -I 0; 0 0 -(h/2) I]
  T.identity("m2", "a").identity("m2", "b", -1.0);
  T.identity("m3", "c", -h / 2.0);
  // [I K^T; 0 0; 0 -h K^T]
  T.identity("m1", "v_x").set("m1", "v_u", Kt);
  T.set("m3", "v_u", -h * Kt);
  T.identity("pz_x", "v_x").identity("pz_u", "v_u");
  T.identity("pw", "b");
  return T.matrix();
}

}  // namespace

LmiProblem assemble_model_based(const LtiSystem& sys, const FeedbackGain& gain,
                                double h) {
  require(h > 0.0, "assemble_model_based: h must be positive");
  gain.check_against(sys);
  const Eigen::Index n = sys.states();
  const Matrix BK = sys.B() * gain.K();
  const Matrix Acl = sys.A() + BK;

  LmiProblem p;
  p.h = h;
  p.tag = "model-based";
  p.metadata["h"] = format_h(h);
  declare_analysis_variables(p.variables, static_cast<int>(n));
  const int nv = p.variables.num_scalars();
  const auto P1 = p.variables.expr("P1");
  const auto P2 = p.variables.expr("P2");
  const auto P3 = p.variables.expr("P3");
  const auto R = p.variables.expr("R");

  const AffineMatrix top_left = P2.transpose() * Acl + Acl.transpose() * P2;
  const AffineMatrix mid_left = P1 - P2 + P3.transpose() * Acl;
  const AffineMatrix mid_mid = -1.0 * (P3 + P3.transpose());

  BlockBuilder first({{"x", n}, {"xdot", n}}, {{"x", n}, {"xdot", n}}, nv);
  first.set("x", "x", top_left);
  first.set("xdot", "x", mid_left).set("x", "xdot", mid_left.transpose());
  first.set("xdot", "xdot", mid_mid + h * R);
  p.add_constraint("delay-lmi-1", first.matrix(), Sense::NegativeDefinite);

  const AffineMatrix bottom_x = -h * (BK.transpose() * P2);
  const AffineMatrix bottom_xdot = -h * (BK.transpose() * P3);
  BlockBuilder second({{"x", n}, {"xdot", n}, {"r", n}},
                      {{"x", n}, {"xdot", n}, {"r", n}}, nv);
  second.set("x", "x", top_left);
  second.set("xdot", "x", mid_left).set("x", "xdot", mid_left.transpose());
  second.set("xdot", "xdot", mid_mid);
  second.set("r", "x", bottom_x).set("x", "r", bottom_x.transpose());
  second.set("r", "xdot", bottom_xdot).set("xdot", "r", bottom_xdot.transpose());
  second.set("r", "r", -h * R);
  p.add_constraint("delay-lmi-2", second.matrix(), Sense::NegativeDefinite);

  add_sign_constraints(p, {"P1", "R"}, {});
  return p;
}

Matrix analysis_factor_first(const Matrix& K, double h) {
  const Eigen::Index m = K.rows();
  const Eigen::Index n = K.cols();
  BlockLayout rows{{"x", n}, {"xdot", n},                     // [I 0]
                   {"m_x", n}, {"m_xdot", n}, {"m_r", n},     // Lyapunov rows
                   {"w", n}, {"z_x", n}, {"z_u", m}};         // channel
  BlockLayout cols{{"x", n}, {"xdot", n}, {"w", n}};
  BlockBuilder T(rows, cols, 0);
  T.identity("x", "x").identity("xdot", "xdot");
  // [0 I; 0 -I; 0 (h/2) I] with channel column [0; I; 0]
  T.identity("m_x", "xdot").identity("m_xdot", "xdot", -1.0);
  T.identity("m_r", "xdot", h / 2.0);
  T.identity("m_xdot", "w");
  // [0 I] and [I 0; K 0 | 0; 0]
  T.identity("w", "w");
  T.identity("z_x", "x").set("z_u", "x", K);
  return T.matrix().constant_term();
}

Matrix analysis_factor_second(const Matrix& K, double h) {
  const Eigen::Index m = K.rows();
  const Eigen::Index n = K.cols();
  BlockLayout rows{{"x", n}, {"xdot", n}, {"r", n},
                   {"m_x", n}, {"m_xdot", n}, {"m_r", n},
                   {"w", n}, {"z_x", n}, {"z_u", m}};
  BlockLayout cols{{"x", n}, {"xdot", n}, {"r", n}, {"w", n}};
  BlockBuilder T(rows, cols, 0);
  T.identity("x", "x").identity("xdot", "xdot").identity("r", "r");
  // [0 I 0; 0 -I 0; 0 0 -(h/2) I] with channel column [0; I; 0]
  T.identity("m_x", "xdot").identity("m_xdot", "xdot", -1.0);
  T.identity("m_r", "r", -h / 2.0);
  T.identity("m_xdot", "w");
  // [0 I] and [I 0 0; K 0 -hK | 0; 0]
  T.identity("w", "w");
  T.identity("z_x", "x").set("z_u", "x", K).set("z_u", "r", Matrix(-h * K));
  return T.matrix().constant_term();
}

LmiProblem assemble_analysis(const ConsistencySet& set, const FeedbackGain& gain,
                             double h) {
  require(h > 0.0, "assemble_analysis: h must be positive");
  if (!set.Pc_dual) {
    throw std::invalid_argument(
        "assemble_analysis: dual multiplier missing (inertia assumption unverified)");
  }
  const Eigen::Index n = set.n;
  const Eigen::Index m = set.m;
  require(gain.K().rows() == m && gain.K().cols() == n,
          "assemble_analysis: K must be m x n");
  const Matrix& dual = *set.Pc_dual;

  LmiProblem p;
  p.h = h;
  p.tag = "data-driven-analysis";
  p.metadata["h"] = format_h(h);
  declare_analysis_variables(p.variables, static_cast<int>(n));
  p.variables.add_scalar("lambda1");
  p.variables.add_scalar("lambda2");
  const int nv = p.variables.num_scalars();
  const VariableSet& v = p.variables;

  {
    // P_R2 = [P1 0; P2 P3; 0 R]
    BlockBuilder PR2({{"m_x", n}, {"m_xdot", n}, {"m_r", n}}, {{"x", n}, {"xdot", n}}, nv);
    PR2.set("m_x", "x", v.expr("P1"));
    PR2.set("m_xdot", "x", v.expr("P2")).set("m_xdot", "xdot", v.expr("P3"));
    PR2.set("m_r", "xdot", v.expr("R"));
    const AffineMatrix M = block_diagonal(
        {lyapunov_multiplier(PR2.matrix()), scale(v.expr("lambda1"), dual)});
    const AffineMatrix T =
        AffineMatrix::constant(analysis_factor_first(gain.K(), h), nv);
    p.add_constraint("robust-delay-lmi-1", sandwich(T, M), Sense::NegativeDefinite);
  }
  {
    // P_R = diag([P1 0; P2 P3], R)
    BlockBuilder PR({{"m_x", n}, {"m_xdot", n}, {"m_r", n}},
                    {{"x", n}, {"xdot", n}, {"r", n}}, nv);
    PR.set("m_x", "x", v.expr("P1"));
    PR.set("m_xdot", "x", v.expr("P2")).set("m_xdot", "xdot", v.expr("P3"));
    PR.set("m_r", "r", v.expr("R"));
    const AffineMatrix M = block_diagonal(
        {lyapunov_multiplier(PR.matrix()), scale(v.expr("lambda2"), dual)});
    const AffineMatrix T =
        AffineMatrix::constant(analysis_factor_second(gain.K(), h), nv);
    p.add_constraint("robust-delay-lmi-2", sandwich(T, M), Sense::NegativeDefinite);
  }
  add_sign_constraints(p, {"P1", "R"}, {"lambda1", "lambda2"});
  return p;
}

Matrix design_factor_first(const Matrix& K, const Matrix& R_fixed, double h) {
  return design_factor_first_expr(AffineMatrix::constant(K.transpose(), 0), R_fixed,
                                  h, K.cols(), K.rows())
      .constant_term();
}

Matrix design_factor_second(const Matrix& K, double h) {
  return design_factor_second_expr(AffineMatrix::constant(K.transpose(), 0), h,
                                   K.cols(), K.rows())
      .constant_term();
}

LmiProblem assemble_design(const ConsistencySet& set, const Matrix& Q1_fixed,
                           const Matrix& R_fixed, double h) {
  require(h > 0.0, "assemble_design: h must be positive");
  const Eigen::Index n = set.n;
  const Eigen::Index m = set.m;
  require(Q1_fixed.rows() == n && R_fixed.rows() == n,
          "assemble_design: Q1 and R must be n x n");
  require_positive_definite(Q1_fixed, "assemble_design: Q1 must be positive definite");
  require_positive_definite(R_fixed, "assemble_design: R must be positive definite");

  LmiProblem p;
  p.h = h;
  p.tag = "data-driven-design";
  p.metadata["h"] = format_h(h);
  p.variables.add("K", static_cast<int>(m), static_cast<int>(n), VariableKind::Full);
  p.variables.add("Q2", static_cast<int>(n), static_cast<int>(n), VariableKind::Full);
  p.variables.add("Q3", static_cast<int>(n), static_cast<int>(n), VariableKind::Full);
  p.variables.add_scalar("lambda1");
  p.variables.add_scalar("lambda2");
  const int nv = p.variables.num_scalars();
  const VariableSet& v = p.variables;
  const AffineMatrix Kt = v.expr("K").transpose();
  const AffineMatrix Q1 = AffineMatrix::constant(Q1_fixed, nv);

  auto lyapunov_rows = [&](const Matrix& last) {
    // diag([Q1 0; Q2 Q3], last)
    BlockBuilder QR({{"m1", n}, {"m2", n}, {"m3", n}}, {{"a", n}, {"b", n}, {"c", n}}, nv);
    QR.set("m1", "a", Q1);
    QR.set("m2", "a", v.expr("Q2")).set("m2", "b", v.expr("Q3"));
    QR.set("m3", "c", last);
    return QR.matrix();
  };

  {
    const AffineMatrix M = block_diagonal(
        {lyapunov_multiplier(lyapunov_rows(R_fixed)), scale(v.expr("lambda1"), set.Pc)});
    const AffineMatrix T = design_factor_first_expr(Kt, R_fixed, h, n, m);
    p.add_constraint("robust-design-lmi-1", sandwich(T, M), Sense::NegativeDefinite);
  }
  {
    const Matrix R_inv = R_fixed.inverse();
    const AffineMatrix M =
        block_diagonal({lyapunov_multiplier(lyapunov_rows(0.5 * (R_inv + R_inv.transpose()))),
                        scale(v.expr("lambda2"), set.Pc)});
    const AffineMatrix T = design_factor_second_expr(Kt, h, n, m);
    p.add_constraint("robust-design-lmi-2", sandwich(T, M), Sense::NegativeDefinite);
  }
  {
    const AffineMatrix Q3 = v.expr("Q3");
    p.add_constraint("Q3 + Q3' > 0", Q3 + Q3.transpose(), Sense::PositiveDefinite, true);
  }
  add_sign_constraints(p, {}, {"lambda1", "lambda2"});
  return p;
}

}  // namespace ddmsi
