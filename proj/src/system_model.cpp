#include "ddmsi/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace ddmsi {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace

LtiSystem::LtiSystem(Matrix A, Matrix B, Matrix Bd)
    : A_(std::move(A)), B_(std::move(B)), Bd_(std::move(Bd)) {
  require(A_.rows() == A_.cols(), "LtiSystem: A must be square");
  require(B_.rows() == A_.rows(), "LtiSystem: B must have as many rows as A");
  require(Bd_.rows() == A_.rows(), "LtiSystem: Bd must have as many rows as A");
  require(all_finite(A_) && all_finite(B_) && all_finite(Bd_),
          "LtiSystem: non-finite entries");
  if (Bd_.cols() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(Bd_);
    require(qr.rank() == Bd_.cols(), "LtiSystem: Bd must have full column rank");
  }
}

LtiSystem::LtiSystem(Matrix A, Matrix B)
    : LtiSystem(A, std::move(B), Matrix::Identity(A.rows(), A.rows())) {}

SamplingSequence::SamplingSequence(std::vector<double> times)
    : times_(std::move(times)) {
  require(!times_.empty(), "SamplingSequence: empty sequence");
  require(times_.front() == 0.0, "SamplingSequence: t_0 must be 0");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    require(std::isfinite(times_[k]) && times_[k] > times_[k - 1],
            "SamplingSequence: times must be strictly increasing");
  }
}

SamplingSequence SamplingSequence::periodic(double gap, double horizon) {
  require(gap > 0.0 && horizon > 0.0, "SamplingSequence: gap and horizon > 0");
  std::vector<double> times{0.0};
  for (std::size_t k = 1; times.back() < horizon; ++k) {
    times.push_back(static_cast<double>(k) * gap);
  }
  return SamplingSequence(std::move(times));
}

double SamplingSequence::max_gap() const {
  double gap = 0.0;
  for (std::size_t k = 1; k < times_.size(); ++k) {
    gap = std::max(gap, times_[k] - times_[k - 1]);
  }
  return gap;
}

double SamplingSequence::min_gap() const {
  if (times_.size() < 2) return 0.0;
  double gap = times_[1] - times_[0];
  for (std::size_t k = 2; k < times_.size(); ++k) {
    gap = std::min(gap, times_[k] - times_[k - 1]);
  }
  return gap;
}

void Trajectory::check() const {
  const auto cols = static_cast<Eigen::Index>(grid.size());
  require(states.cols() == cols && inputs.cols() == cols,
          "Trajectory: column count mismatch");
  if (derivatives) {
    require(derivatives->cols() == cols && derivatives->rows() == states.rows(),
            "Trajectory: derivative shape mismatch");
  }
}

FeedbackGain::FeedbackGain(Matrix K) : K_(std::move(K)) {
  require(all_finite(K_), "FeedbackGain: non-finite entries");
}

void FeedbackGain::check_against(const LtiSystem& sys) const {
  require(K_.rows() == sys.inputs() && K_.cols() == sys.states(),
          "FeedbackGain: K must be m x n");
}

ZohMaps discretize_zoh(const Matrix& A, const Matrix& B, double dt) {
  require(dt > 0.0 && std::isfinite(dt), "discretize_zoh: dt must be positive");
  require(A.rows() == A.cols() && B.rows() == A.rows(),
          "discretize_zoh: dimension mismatch");
  require(all_finite(A) && all_finite(B), "discretize_zoh: non-finite entries");
  const auto n = A.rows();
  const auto m = B.cols();
  // exp([A B; 0 0] dt) = [Ad Bd; 0 I]
  Matrix M = Matrix::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = A * dt;
  M.topRightCorner(n, m) = B * dt;
  const Matrix phi = M.exp();
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m)};
}

ZohMaps discretize_zoh(const LtiSystem& sys, double dt) {
  return discretize_zoh(sys.A(), sys.B(), dt);
}

Trajectory simulate_sampled_closed_loop(const LtiSystem& sys,
                                        const FeedbackGain& gain,
                                        const SamplingSequence& sampling,
                                        const Vector& x0, double horizon,
                                        const SimulationOptions& options) {
  gain.check_against(sys);
  require(horizon > 0.0, "simulate: horizon must be positive");
  require(sampling.size() >= 2, "simulate: need at least two sampling instants");
  require(horizon <= sampling.back(),
          "simulate: horizon exceeds the last sampling instant");
  require(x0.size() == sys.states() && x0.allFinite(),
          "simulate: x0 must be a finite n-vector");

  const double dt_out = options.output_dt.value_or(sampling.min_gap() / 20.0);
  require(dt_out > 0.0, "simulate: output step must be positive");

  const auto& t = sampling.times();
  const Matrix& K = gain.K();
  const ZohMaps grid_step = discretize_zoh(sys, dt_out);

  std::vector<double> grid;
  std::vector<Vector> xs;
  std::vector<Vector> us;

  Vector xk = x0;
  for (std::size_t k = 0; k + 1 < t.size() && t[k] < horizon; ++k) {
    const Vector uk = K * xk;
    const double end = std::min(t[k + 1], horizon);
    grid.push_back(t[k]);
    xs.push_back(xk);
    us.push_back(uk);

    // Uniform grid points strictly inside (t_k, end).
    auto j = static_cast<long long>(std::floor(t[k] / dt_out)) + 1;
    double prev = t[k];
    Vector x = xk;
    for (double g = static_cast<double>(j) * dt_out; g < end;
         g = static_cast<double>(++j) * dt_out) {
      if (g - prev < 1e-12 * dt_out) continue;
      if (prev == t[k] || std::abs((g - prev) - dt_out) > 1e-9 * dt_out) {
        const ZohMaps step = discretize_zoh(sys, g - prev);
        x = step.state * x + step.input * uk;
      } else {
        x = grid_step.state * x + grid_step.input * uk;
      }
      grid.push_back(g);
      xs.push_back(x);
      us.push_back(uk);
      prev = g;
    }
    // Exact jump from the sample instant keeps the sample states free of
    // accumulated grid rounding.
    const ZohMaps hold = discretize_zoh(sys, end - t[k]);
    xk = hold.state * xk + hold.input * uk;
    if (end == horizon) {
      grid.push_back(horizon);
      xs.push_back(xk);
      us.push_back(end < t[k + 1] ? uk : Vector(K * xk));
      break;
    }
  }

  Trajectory out;
  out.grid = std::move(grid);
  const auto cols = static_cast<Eigen::Index>(out.grid.size());
  out.states.resize(sys.states(), cols);
  out.inputs.resize(sys.inputs(), cols);
  for (Eigen::Index i = 0; i < cols; ++i) {
    out.states.col(i) = xs[static_cast<std::size_t>(i)];
    out.inputs.col(i) = us[static_cast<std::size_t>(i)];
  }
  if (options.record_derivatives) {
    out.derivatives = sys.A() * out.states + sys.B() * out.inputs;
  }
  return out;
}

InputLaw uniform_box_input(int inputs, double low, double high) {
  require(inputs >= 0 && low <= high, "uniform_box_input: invalid range");
  return [inputs, low, high](std::size_t, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(low, high);
    Vector u(inputs);
    for (int i = 0; i < inputs; ++i) u(i) = dist(rng);
    return u;
  };
}

DisturbanceLaw uniform_ball_disturbance(int dim, double bound) {
  require(dim >= 0, "uniform_ball_disturbance: negative dimension");
  require(bound >= 0.0 && std::isfinite(bound),
          "uniform_ball_disturbance: bound must be nonnegative");
  DisturbanceLaw law;
  law.bound = bound;
  law.description = "uniform-ball";
  law.draw = [dim, bound](std::size_t, std::mt19937_64& rng) {
    Vector d = Vector::Zero(dim);
    if (bound == 0.0 || dim == 0) return d;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double norm = 0.0;
    while (norm < 1e-12) {
      for (int i = 0; i < dim; ++i) d(i) = normal(rng);
      norm = d.norm();
    }
    const double radius = bound * std::pow(unit(rng), 1.0 / dim);
    return Vector(d * (radius / norm));
  };
  return law;
}

ExperimentData generate_experiment_data(const LtiSystem& sys,
                                        const std::vector<double>& tau,
                                        const InputLaw& input_law,
                                        const DisturbanceLaw& disturbance_law,
                                        std::uint64_t seed,
                                        const std::optional<Vector>& x0) {
  require(disturbance_law.bound >= 0.0,
          "generate_experiment_data: disturbance bound must be nonnegative");
  require(!tau.empty(), "generate_experiment_data: no sampling instants");
  for (std::size_t k = 1; k < tau.size(); ++k) {
    require(tau[k] > tau[k - 1],
            "generate_experiment_data: tau must be strictly increasing");
  }
  const int n = sys.states();
  const int m = sys.inputs();
  const int md = sys.disturbances();
  const auto N = static_cast<Eigen::Index>(tau.size());

  Vector x = x0.value_or(Vector::Zero(n));
  require(x.size() == n, "generate_experiment_data: x0 dimension mismatch");

  Matrix Bud(n, m + md);
  Bud << sys.B(), sys.Bd();

  std::mt19937_64 rng(seed);
  ExperimentData out;
  out.data.tau = tau;
  out.data.X.resize(n, N);
  out.data.U.resize(m, N);
  out.data.Xdot.resize(n, N);
  out.data.Bd = sys.Bd();
  out.disturbances.resize(md, N);
  out.disturbance_bound = disturbance_law.bound;
  out.generator = "zoh-input, held-disturbance, " + disturbance_law.description;

  for (Eigen::Index k = 0; k < N; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const Vector u = input_law(idx, rng);
    const Vector d = disturbance_law.draw(idx, rng);
    require(u.size() == m, "generate_experiment_data: input law dimension");
    require(d.size() == md, "generate_experiment_data: disturbance law dimension");
    require(d.norm() <= disturbance_law.bound * (1.0 + 1e-12),
            "generate_experiment_data: disturbance law exceeds its bound");

    out.data.X.col(k) = x;
    out.data.U.col(k) = u;
    out.disturbances.col(k) = d;
    out.data.Xdot.col(k) = sys.A() * x + sys.B() * u + sys.Bd() * d;

    if (k + 1 < N) {
      const ZohMaps step = discretize_zoh(sys.A(), Bud, tau[idx + 1] - tau[idx]);
      Vector ud(m + md);
      ud << u, d;
      x = step.state * x + step.input * ud;
    }
  }
  return out;
}

}  // namespace ddmsi
