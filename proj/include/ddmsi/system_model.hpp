#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ddmsi/data.hpp"

namespace ddmsi {

/// Continuous-time plant  x' = A x + B u + Bd d.
class LtiSystem {
 public:
  /// Throws std::invalid_argument on inconsistent dimensions, non-finite
  /// entries, or a column-rank-deficient Bd.
  LtiSystem(Matrix A, Matrix B, Matrix Bd);

  /// Plant without an explicit disturbance channel (Bd = I).
  LtiSystem(Matrix A, Matrix B);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& Bd() const { return Bd_; }

  int states() const { return static_cast<int>(A_.rows()); }
  int inputs() const { return static_cast<int>(B_.cols()); }
  int disturbances() const { return static_cast<int>(Bd_.cols()); }

 private:
  Matrix A_;
  Matrix B_;
  Matrix Bd_;
};

/// Sampling instants t_0 = 0 < t_1 < ... .
class SamplingSequence {
 public:
  explicit SamplingSequence(std::vector<double> times);

  /// Instants 0, gap, 2 gap, ... up to and including the first one >= horizon.
  static SamplingSequence periodic(double gap, double horizon);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double back() const { return times_.back(); }
  double max_gap() const;
  double min_gap() const;

 private:
  std::vector<double> times_;
};

struct Trajectory {
  std::vector<double> grid;
  Matrix states;   // n x grid.size()
  Matrix inputs;   // m x grid.size()
  std::optional<Matrix> derivatives;

  void check() const;
};

/// State feedback u = K x.
class FeedbackGain {
 public:
  explicit FeedbackGain(Matrix K);

  const Matrix& K() const { return K_; }

  /// Throws std::invalid_argument if the gain is not m x n for `sys`.
  void check_against(const LtiSystem& sys) const;

 private:
  Matrix K_;
};

struct ZohMaps {
  Matrix state;  // exp(A dt)
  Matrix input;  // int_0^dt exp(A s) ds B
};

/// Exact zero-order-hold discretisation over one hold interval of length dt.
ZohMaps discretize_zoh(const Matrix& A, const Matrix& B, double dt);
ZohMaps discretize_zoh(const LtiSystem& sys, double dt);

struct SimulationOptions {
  /// Output grid step. Defaults to (shortest sampling gap) / 20.
  std::optional<double> output_dt;
  /// Record derivative columns A x + B u alongside the states.
  bool record_derivatives = false;
};

/// Sampled-data loop u(t) = K x(t_k) on [t_k, t_{k+1}), propagated exactly.
Trajectory simulate_sampled_closed_loop(const LtiSystem& sys,
                                        const FeedbackGain& gain,
                                        const SamplingSequence& sampling,
                                        const Vector& x0, double horizon,
                                        const SimulationOptions& options = {});

/// Per-sample input source, called with the sample index.
using InputLaw = std::function<Vector(std::size_t, std::mt19937_64&)>;

/// Per-sample disturbance source together with its pointwise 2-norm bound.
struct DisturbanceLaw {
  std::function<Vector(std::size_t, std::mt19937_64&)> draw;
  double bound = 0.0;
  std::string description;
};

InputLaw uniform_box_input(int inputs, double low, double high);

/// Uniform over the Euclidean ball of radius `bound` in R^dim.
DisturbanceLaw uniform_ball_disturbance(int dim, double bound);

struct ExperimentData {
  DataSet data;
  Matrix disturbances;  // realised D-hat, m_d x N
  double disturbance_bound = 0.0;
  std::string generator;
};

/// Runs one open-loop experiment. Input and disturbance are held constant
/// between consecutive sampling instants; the state starts at x0 at tau[0].
ExperimentData generate_experiment_data(const LtiSystem& sys,
                                        const std::vector<double>& tau,
                                        const InputLaw& input_law,
                                        const DisturbanceLaw& disturbance_law,
                                        std::uint64_t seed,
                                        const std::optional<Vector>& x0 = {});

}  // namespace ddmsi
