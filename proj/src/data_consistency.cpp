#include "ddmsi/data_consistency.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ddmsi {

namespace {

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

double min_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(S), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// [[A B]^T; I]
Matrix dual_factor(const Matrix& A, const Matrix& B) {
  const auto n = A.rows();
  const auto m = B.cols();
  Matrix F(2 * n + m, n);
  F << A.transpose(), B.transpose(), Matrix::Identity(n, n);
  return F;
}

void check_candidate(const Matrix& A, const Matrix& B, const ConsistencySet& set) {
  if (A.rows() != set.n || A.cols() != set.n || B.rows() != set.n ||
      B.cols() != set.m) {
    throw std::invalid_argument("membership: candidate dimensions do not match");
  }
}

}  // namespace

Inertia inertia(const Matrix& symmetric, double tol_rel) {
  Inertia out;
  if (symmetric.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(symmetric),
                                            Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double threshold = tol_rel * ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) <= threshold) {
      ++out.zero;
    } else if (ev(i) > 0.0) {
      ++out.positive;
    } else {
      ++out.negative;
    }
  }
  return out;
}

ConsistencySet build_consistency_set(const DataSet& data, const NoiseBound& noise) {
  data.check();
  noise.check();
  const int n = data.states();
  const int m = data.inputs();
  const int md = data.disturbances();
  const int N = data.samples();
  if (noise.samples() != N || noise.disturbances() != md) {
    throw std::invalid_argument(
        "build_consistency_set: noise bound does not match the data dimensions");
  }

  // [-Z 0; Xdot Bd]
  Matrix outer = Matrix::Zero(2 * n + m, N + md);
  outer.topLeftCorner(n + m, N) = -data.Z();
  outer.bottomLeftCorner(n, N) = data.Xdot;
  outer.bottomRightCorner(n, md) = data.Bd;

  Matrix Pd(N + md, N + md);
  Pd << noise.Qd, noise.Sd, noise.Sd.transpose(), noise.Rd;

  return consistency_set_from_matrix(outer * Pd * outer.transpose(), n, m, md);
}

ConsistencySet consistency_set_from_matrix(Matrix Pc, int n, int m, int m_d) {
  if (Pc.rows() != 2 * n + m || Pc.cols() != 2 * n + m) {
    throw std::invalid_argument("ConsistencySet: Pc must be (2n+m) x (2n+m)");
  }
  const double scale = std::max(1.0, Pc.cwiseAbs().maxCoeff());
  if ((Pc - Pc.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("ConsistencySet: Pc is not symmetric");
  }
  ConsistencySet set;
  set.n = n;
  set.m = m;
  set.m_d = m_d;
  set.Pc = symmetrize(Pc);
  set.pc_inertia = inertia(set.Pc);
  return set;
}

Membership membership_test(const Matrix& A, const Matrix& B,
                           const ConsistencySet& set, double tol) {
  check_candidate(A, B, set);
  const Matrix F = dual_factor(A, B);
  const double margin = min_eigenvalue(F.transpose() * set.Pc * F);
  return {margin >= -tol, margin};
}

Membership primal_membership_test(const Matrix& A, const Matrix& B,
                                  const ConsistencySet& set, double tol) {
  check_candidate(A, B, set);
  if (!set.Pc_dual) {
    throw std::invalid_argument("primal_membership_test: set is not dualized");
  }
  const int n = set.n;
  const int m = set.m;
  Matrix F(2 * n + m, n + m);
  F << A, B, Matrix::Identity(n + m, n + m);
  const double margin = min_eigenvalue(F.transpose() * (*set.Pc_dual) * F);
  return {margin >= -tol, margin};
}

InertiaReport check_assumption_inertia(const ConsistencySet& set, int m_d,
                                       double tol_eig) {
  const Inertia in = inertia(set.Pc, tol_eig);
  InertiaReport report;
  report.invertible = in.zero == 0;
  report.positive_count = in.positive;
  report.pass = report.invertible && in.positive == m_d;
  return report;
}

bool AppendixBReport::all_pass() const {
  for (const auto* c : {&z_full_row_rank, &bd_invertible, &strict_noise_bound, &sd_zero}) {
    if (!c->pass || !*c->pass) return false;
  }
  return true;
}

AppendixBReport check_appendix_b(const DataSet& data, const NoiseBound& noise,
                                 const std::optional<Matrix>& realized) {
  AppendixBReport report;
  const int n = data.states();
  const int m = data.inputs();

  {
    const Matrix Z = data.Z();
    Eigen::JacobiSVD<Matrix> svd(Z);
    const auto& sv = svd.singularValues();
    const double tol = kTolEig * (sv.size() ? sv(0) : 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
    report.z_full_row_rank.pass = rank == n + m && sv.size() > 0 && sv(0) > 0.0;
    std::ostringstream os;
    os << "rank(Z) = " << rank << ", rows = " << n + m;
    report.z_full_row_rank.detail = os.str();
  }
  {
    const Matrix& Bd = data.Bd;
    bool ok = Bd.rows() == Bd.cols();
    if (ok) {
      Eigen::JacobiSVD<Matrix> svd(Bd);
      const auto& sv = svd.singularValues();
      ok = sv.size() > 0 && sv(sv.size() - 1) > kTolEig * sv(0);
    }
    report.bd_invertible.pass = ok;
    report.bd_invertible.detail =
        Bd.rows() == Bd.cols() ? "square Bd" : "Bd is not square (m_d != n)";
  }
  {
    const bool zero = noise.Sd.size() == 0 || noise.Sd.cwiseAbs().maxCoeff() == 0.0;
    report.sd_zero.pass = zero;
    report.sd_zero.detail = zero ? "Sd = 0" : "Sd has nonzero entries";
  }
  if (realized) {
    const Matrix strict = *realized * noise.Qd * realized->transpose() + noise.Rd;
    const double lo = min_eigenvalue(strict);
    const double scale = std::max(1e-300, strict.cwiseAbs().maxCoeff());
    report.strict_noise_bound.pass = lo > kTolEig * scale;
    std::ostringstream os;
    os << "lambda_min(D Qd D^T + Rd) = " << lo;
    report.strict_noise_bound.detail = os.str();
  } else {
    report.strict_noise_bound.detail = "realised disturbance unavailable";
    report.warnings.push_back(
        "condition (iii) skipped: the realised disturbance is not known from data");
  }
  return report;
}

ConsistencySet dualize(const ConsistencySet& set) {
  const InertiaReport report = check_assumption_inertia(set, set.m_d);
  if (!report.pass) {
    std::ostringstream os;
    os << "dualize: inertia assumption not verified (invertible = "
       << report.invertible << ", positive eigenvalues = " << report.positive_count
       << ", required = " << set.m_d << ")";
    throw std::runtime_error(os.str());
  }
  Eigen::JacobiSVD<Matrix> svd(set.Pc);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!(cond <= kMaxDualCondition)) {
    std::ostringstream os;
    os << "dualize: Pc is numerically singular (condition number " << cond << ")";
    throw std::runtime_error(os.str());
  }
  const int n = set.n;
  const int m = set.m;
  const Matrix inv = symmetrize(set.Pc.inverse());
  const Matrix Qt = inv.topLeftCorner(n + m, n + m);
  const Matrix St = inv.topRightCorner(n + m, n);
  const Matrix Rt = inv.bottomRightCorner(n, n);

  Matrix dual(2 * n + m, 2 * n + m);
  dual << -Rt, St.transpose(), St, -Qt;

  ConsistencySet out = set;
  out.Pc_dual = symmetrize(dual);
  out.condition = cond;
  return out;
}

Matrix undualize(const Matrix& Pc_dual, int n, int m) {
  if (Pc_dual.rows() != 2 * n + m || Pc_dual.cols() != 2 * n + m) {
    throw std::invalid_argument("undualize: dimension mismatch");
  }
  const Matrix Rt = -Pc_dual.topLeftCorner(n, n);
  const Matrix St = Pc_dual.bottomLeftCorner(n + m, n);
  const Matrix Qt = -Pc_dual.bottomRightCorner(n + m, n + m);
  Matrix inv(2 * n + m, 2 * n + m);
  inv << Qt, St, St.transpose(), Rt;
  return symmetrize(inv.inverse());
}

}  // namespace ddmsi
