#pragma once

#include <vector>

#include "ddmsi/data.hpp"

namespace ddmsi {

/// Norm bounds ||A||_2 <= a_bar, ||B||_2 <= b_bar on the unknown plant.
struct NormPrior {
  double a_bar = 0.0;
  double b_bar = 0.0;

  NormPrior(double a, double b);
};

struct DerivEstimate {
  Matrix xdot_est;                      // n x (N-1)
  std::vector<double> per_sample_bound;  // N-1 entries
};

/// Forward differences (x_{k+1} - x_k) / h for equidistant samples.
Matrix euler_derivative(const Matrix& X, double h);

/// Worst-case 2-norm error of the forward difference at one sample, valid for
/// noiseless data of any plant satisfying the norm prior:
///   (a h / 2) (a ||x|| + (1 + a h / 3) b ||u||).
double derivative_error_bound(const Vector& x, const Vector& u,
                              const NormPrior& prior, double h);

/// Estimates and per-sample bounds for the first N-1 samples.
DerivEstimate estimate_derivatives(const Matrix& X, const Matrix& U,
                                   const NormPrior& prior, double h);

/// Aggregates per-sample bounds into Qd = -I, Sd = 0, Rd = max_k(b_k)^2 N I.
/// `states` sets the size of Rd (the disturbance channel is Bd = I).
NoiseBound bounds_to_noise_model(const std::vector<double>& per_sample_bounds,
                                 int samples, int states);

/// True when every bound is zero; the resulting Rd is degenerate.
bool is_degenerate(const NoiseBound& noise);

}  // namespace ddmsi
