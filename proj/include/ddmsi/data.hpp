#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace ddmsi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Noise-bound description  [D^T; I]^T [Qd Sd; Sd^T Rd] [D^T; I] >= 0.
struct NoiseBound {
  Matrix Qd;  // N x N
  Matrix Sd;  // N x m_d
  Matrix Rd;  // m_d x m_d
  /// Pointwise bound the noise model was derived from, when known.
  std::optional<double> pointwise_bound;

  int samples() const { return static_cast<int>(Qd.rows()); }
  int disturbances() const { return static_cast<int>(Rd.rows()); }

  /// Throws std::invalid_argument unless dimensions agree, blocks are
  /// symmetric and Qd is negative definite.
  void check(double tol_eig = 1e-9) const;

  /// Qd = -I, Sd = 0, Rd = bound^2 N I.
  static NoiseBound from_pointwise(double bound, int samples,
                                   int disturbances);

  /// Evaluates the quadratic form for a disturbance matrix D (m_d x N).
  Matrix form(const Matrix& D) const;
};

struct DataSet {
  std::vector<double> tau;
  Matrix X;     // n x N
  Matrix U;     // m x N
  Matrix Xdot;  // n x N
  Matrix Bd;    // n x m_d

  int states() const { return static_cast<int>(X.rows()); }
  int inputs() const { return static_cast<int>(U.rows()); }
  int disturbances() const { return static_cast<int>(Bd.cols()); }
  int samples() const { return static_cast<int>(X.cols()); }

  /// Z = [X; U].
  Matrix Z() const;

  void check() const;
};

}  // namespace ddmsi
