#pragma once

// Quadratic full-order models dx/dt = A x + H:xx + B u, y = C x, their
// simulation, and the snapshot protocols used for training and testing.

#include <cstdint>
#include <vector>

#include "gasrom/rom.hpp"
#include "gasrom/training.hpp"

namespace gasrom {

struct QuadraticFOM {
  Matrix A;   // n x n
  Tensor3 H;  // n x n x n
  Matrix B;   // n x m
  Matrix C;   // p x n
  Matrix energy_metric;  // P with x^T P (H:xx) = 0, when known; else empty

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }
  /// Throws DimensionError / Error for inconsistent or non-finite data.
  void validate() const;
};

/// Evaluates f(x, u) touching only the non-zero lateral slices of H.
class FomOperator {
 public:
  explicit FomOperator(const QuadraticFOM& f);
  Vector rhs(const Vector& x, const Vector& u) const;
  Matrix jacobian(const Vector& x) const;
  const QuadraticFOM& model() const { return f_; }

 private:
  const QuadraticFOM& f_;
  std::vector<Index> active_;  // j with H(:, j, :) != 0
};

/// x1' = -x1 + nu x1 x3 + u, x2' = -2 x2 + nu x2 x3 + u, x3' = -5 x3 + u,
/// y = x1 + x2 + x3, with quadratic coefficients split evenly over the two
/// index orders.
QuadraticFOM toy_model(double nu);

/// Fixed point of the toy model under a constant input gamma.
Vector toy_steady_state(double nu, double gamma);

struct FomTrajectory {
  Vector times;
  Matrix X;     // n x N
  Matrix Y;     // p x N
  Matrix U;     // m x N
  Matrix Xdot;  // n x N, f(x(t_i), u(t_i))
  bool blew_up = false;
  double blowup_time = 0.0;
};

/// RK4 with the same step rule as the latent integrator.
FomTrajectory simulate_fom(const QuadraticFOM& f, const Vector& x0, const InputSignal& u, const Vector& times,
                           const SimOptions& opts = {});

/// Newton iteration for f(x, u) = 0 from x_start. Throws ConvergenceError.
Vector fom_equilibrium(const QuadraticFOM& f, const Vector& u, const Vector& x_start, int max_iter = 100);

enum class Protocol {
  kStep,     // x0 = 0, u = amplitude (every input channel)
  kImpulse,  // x0 = amplitude * B 1, u = 0
};

enum class WeightConvention {
  kUnit,         // alpha = 1
  kSteadyState,  // alpha = N_traj N || C xbar ||^2
  kEnergy,       // alpha = (1/N) sum_i || y(t_i) ||^2
};

const char* to_string(WeightConvention w);
WeightConvention weight_convention_from_string(const std::string& s);

struct TrainingSetSpec {
  Protocol protocol = Protocol::kStep;
  std::vector<double> amplitudes;
  Index num_samples = 100;
  double t_end = 10.0;  // uniform grid on [0, t_end], both ends included
  WeightConvention weights = WeightConvention::kSteadyState;
  SimOptions sim;
  int threads = 1;
};

Vector uniform_grid(double t_end, Index num_samples);

/// Throws ConfigError for an empty amplitude list and BlowUpError when a
/// trajectory diverges.
SnapshotDataset make_training_set(const QuadraticFOM& f, const TrainingSetSpec& spec);

/// Dataset with one trajectory per (x0, input) pair; weights per convention.
SnapshotDataset make_dataset(const QuadraticFOM& f, const std::vector<Vector>& x0s,
                             const std::vector<InputSignal>& inputs, const Vector& times, WeightConvention weights,
                             const SimOptions& sim = {}, int threads = 1);

/// Weights below this norm fall back to 1.
inline constexpr double kDegenerateWeight = 1e-14;

/// Stable non-normal linear part with large transient growth and a quadratic
/// term that conserves x^T P x, where A^T P + P A = -I; y = x and B is a unit
/// vector exciting the growth. Deterministic per seed.
QuadraticFOM synthetic_nonnormal_fom(Index n, std::uint64_t seed);

/// max over a uniform grid on [0, t_max] of ||exp(A t)||_2.
double transient_peak(const Matrix& A, double t_max, int samples = 400);

}  // namespace gasrom
