#pragma once

#include <cstdint>
#include <vector>

#include "ddmsi/data_consistency.hpp"
#include "ddmsi/system_model.hpp"

namespace ddmsi::testing {

inline LtiSystem example_system() {
  Matrix A(2, 2);
  A << 0.0, 1.0, 0.0, -0.1;
  Matrix B(2, 1);
  B << 0.0, 0.1;
  return LtiSystem(A, B);
}

inline FeedbackGain example_gain() {
  Matrix K(1, 2);
  K << -3.75, -11.5;
  return FeedbackGain(K);
}

// 100 instants: 49 gaps of 1.5, then 50 gaps of 3.
inline std::vector<double> example_tau() {
  std::vector<double> tau;
  double t = 0.0;
  for (int k = 0; k < 100; ++k) {
    tau.push_back(t);
    t += k < 49 ? 1.5 : 3.0;
  }
  return tau;
}

inline ExperimentData example_data(double d_bar, std::uint64_t seed) {
  const LtiSystem sys = example_system();
  return generate_experiment_data(sys, example_tau(), uniform_box_input(1, -1.0, 1.0),
                                  uniform_ball_disturbance(2, d_bar), seed);
}

inline ConsistencySet example_set(double d_bar, std::uint64_t seed) {
  const ExperimentData ex = example_data(d_bar, seed);
  return dualize(build_consistency_set(ex.data, NoiseBound::from_pointwise(d_bar, 100, 2)));
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return M;
}

}  // namespace ddmsi::testing
