#include "ddmsi/data.hpp"

#include <stdexcept>

namespace ddmsi {

void NoiseBound::check(double tol_eig) const {
  const auto N = Qd.rows();
  const auto md = Rd.rows();
  if (Qd.cols() != N || Rd.cols() != md || Sd.rows() != N || Sd.cols() != md) {
    throw std::invalid_argument("NoiseBound: inconsistent block dimensions");
  }
  if (!Qd.allFinite() || !Sd.allFinite() || !Rd.allFinite()) {
    throw std::invalid_argument("NoiseBound: non-finite entries");
  }
  const double scale = std::max(1.0, Qd.cwiseAbs().maxCoeff());
  if (!Qd.isApprox(Qd.transpose(), 1e-12) ||
      (md > 0 && (Rd - Rd.transpose()).cwiseAbs().maxCoeff() >
                     1e-12 * std::max(1.0, Rd.cwiseAbs().maxCoeff()))) {
    throw std::invalid_argument("NoiseBound: Qd and Rd must be symmetric");
  }
  if (N == 0) throw std::invalid_argument("NoiseBound: no samples");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Qd, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().maxCoeff() >= -tol_eig * scale) {
    throw std::invalid_argument("NoiseBound: Qd must be negative definite");
  }
}

NoiseBound NoiseBound::from_pointwise(double bound, int samples,
                                      int disturbances) {
  if (bound < 0.0) throw std::invalid_argument("NoiseBound: negative bound");
  if (samples <= 0) throw std::invalid_argument("NoiseBound: no samples");
  NoiseBound nb;
  nb.Qd = -Matrix::Identity(samples, samples);
  nb.Sd = Matrix::Zero(samples, disturbances);
  nb.Rd = bound * bound * samples * Matrix::Identity(disturbances, disturbances);
  nb.pointwise_bound = bound;
  return nb;
}

Matrix NoiseBound::form(const Matrix& D) const {
  // [D^T; I]^T [Qd Sd; Sd^T Rd] [D^T; I]
  return D * Qd * D.transpose() + D * Sd + Sd.transpose() * D.transpose() + Rd;
}

Matrix DataSet::Z() const {
  Matrix Z(X.rows() + U.rows(), X.cols());
  Z << X, U;
  return Z;
}

void DataSet::check() const {
  const auto N = X.cols();
  if (U.cols() != N || Xdot.cols() != N) {
    throw std::invalid_argument("DataSet: X, U and Xdot column counts differ");
  }
  if (static_cast<Eigen::Index>(tau.size()) != N) {
    throw std::invalid_argument("DataSet: tau length differs from N");
  }
  if (Xdot.rows() != X.rows() || Bd.rows() != X.rows()) {
    throw std::invalid_argument("DataSet: row dimensions differ");
  }
  if (!X.allFinite() || !U.allFinite() || !Xdot.allFinite() || !Bd.allFinite()) {
    throw std::invalid_argument("DataSet: non-finite entries");
  }
}

}  // namespace ddmsi
