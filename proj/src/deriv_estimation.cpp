#include "ddmsi/deriv_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddmsi {

NormPrior::NormPrior(double a, double b) : a_bar(a), b_bar(b) {
  if (!(a >= 0.0) || !(b >= 0.0)) {
    throw std::invalid_argument("NormPrior: bounds must be nonnegative");
  }
}

Matrix euler_derivative(const Matrix& X, double h) {
  if (X.cols() < 2) throw std::invalid_argument("euler_derivative: need N >= 2");
  if (!(h > 0.0)) throw std::invalid_argument("euler_derivative: h must be > 0");
  const auto N = X.cols();
  return (X.rightCols(N - 1) - X.leftCols(N - 1)) / h;
}

double derivative_error_bound(const Vector& x, const Vector& u,
                              const NormPrior& prior, double h) {
  if (h < 0.0) throw std::invalid_argument("derivative_error_bound: h < 0");
  const double a = prior.a_bar;
  const double b = prior.b_bar;
  return 0.5 * a * h * (a * x.norm() + (1.0 + a * h / 3.0) * b * u.norm());
}

DerivEstimate estimate_derivatives(const Matrix& X, const Matrix& U,
                                   const NormPrior& prior, double h) {
  if (U.cols() != X.cols()) {
    throw std::invalid_argument("estimate_derivatives: X and U column counts");
  }
  DerivEstimate out;
  out.xdot_est = euler_derivative(X, h);
  out.per_sample_bound.reserve(static_cast<std::size_t>(X.cols() - 1));
  for (Eigen::Index k = 0; k + 1 < X.cols(); ++k) {
    out.per_sample_bound.push_back(
        derivative_error_bound(X.col(k), U.col(k), prior, h));
  }
  return out;
}

NoiseBound bounds_to_noise_model(const std::vector<double>& per_sample_bounds,
                                 int samples, int states) {
  if (per_sample_bounds.empty()) {
    throw std::invalid_argument("bounds_to_noise_model: empty bound list");
  }
  for (double b : per_sample_bounds) {
    if (!std::isfinite(b) || b < 0.0) {
      throw std::invalid_argument("bounds_to_noise_model: invalid bound");
    }
  }
  const double d_bar =
      *std::max_element(per_sample_bounds.begin(), per_sample_bounds.end());
  return NoiseBound::from_pointwise(d_bar, samples, states);
}

bool is_degenerate(const NoiseBound& noise) {
  return noise.Rd.size() == 0 || noise.Rd.cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace ddmsi
