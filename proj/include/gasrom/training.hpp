#pragma once

// Trajectory-fitting objective for reduced-order models, its adjoint
// gradient, and the training driver (progressive horizon, coordinate descent,
// optional matrix-exponential stability penalty for unconstrained tensors).
//
//   J = sum_j (1 / alpha_j) sum_i || y_j(t_i) - C D z_j(t_i) ||^2

#include <optional>
#include <string>
#include <vector>

#include "gasrom/optim.hpp"
#include "gasrom/rom.hpp"

namespace gasrom {

struct SnapshotTrajectory {
  Matrix X;            // n x N states (may be empty for output-only data)
  Matrix U;            // m x N inputs at the sample times
  Matrix Y;            // p x N outputs
  Vector x0;           // initial full state
  double weight = 1.0; // alpha_j; the loss divides by it
  InputSignal input;   // u(t) between samples
  Matrix Xdot;         // n x N exact state derivatives, empty when unknown
};

class SnapshotDataset {
 public:
  Vector times;  // shared strictly increasing sample grid
  std::vector<SnapshotTrajectory> trajectories;
  std::optional<Matrix> output_map;  // p x n; nullopt means y = x
  std::string weight_convention = "unit";

  Index n() const;
  Index m() const;
  Index p() const;
  Index num_samples() const { return times.size(); }
  Index size() const { return static_cast<Index>(trajectories.size()); }

  /// Throws SchemaError describing the first violated invariant.
  void validate() const;
  /// Samples with t <= t_final (at least two).
  SnapshotDataset truncated(double t_final) const;
};

/// Fills SnapshotTrajectory::input from U by linear interpolation where missing.
void ensure_inputs(SnapshotDataset& d);

struct AmbientGradient {
  Matrix G_phi;        // horizontal Euclidean gradient times (Phi^T Phi)
  Matrix G_phi_euclid; // dJ/dPhi
  Matrix G_psi;        // dJ/dPsi (ambient)
  Matrix G_A;
  Tensor3 G_H;
  Matrix G_B;
  std::optional<ParamGradients> params;  // K, R, Q, S for stable dynamics
};

enum class AdjointScheme {
  kDiscrete,    // exact gradient of the RK4-discretized loss
  kContinuous,  // backward RK4 of the adjoint ODE + trapezoidal accumulation
};

struct GradientOptions {
  SimOptions sim;
  AdjointScheme scheme = AdjointScheme::kDiscrete;
  /// One backward sweep per sample instead of one jump-injected sweep.
  bool separate_adjoints = false;
  int threads = 1;
};

/// Returns +infinity when any trajectory blows up.
double loss(const RomModel& m, const SnapshotDataset& d, const SimOptions& sim = {}, int threads = 1);

struct LossAndGradient {
  double loss = 0.0;
  AmbientGradient grad;
};

/// Throws BlowUpError if a trajectory blows up.
LossAndGradient gradient(const RomModel& m, const SnapshotDataset& d, const GradientOptions& opts = {});

struct PenaltyValue {
  double value = 0.0;
  Matrix G_A;
};

/// weight * || exp(A t_f) ||_F^2 and its gradient with respect to A.
PenaltyValue stability_penalty(const Matrix& A, double t_f, double weight);

/// Layout of the optimization point: Grassmann Phi, Stiefel Psi, then
/// stable: K, R, Q, mat(S), B; raw: A, mat(H), B.
ProductPoint model_point(const RomModel& m);
RomModel model_from_point(const RomModel& like, const ProductPoint& p);
/// Euclidean ambient gradient in the layout of model_point.
TangentVector gradient_tangent(const RomModel& m, const AmbientGradient& g);

enum class BlockKind { kProjection, kTensors, kJoint };

struct TrainBlock {
  BlockKind kind = BlockKind::kJoint;
  int iterations = 50;
};

struct TrainConfig {
  std::vector<double> horizons;  // increasing final times; empty = full data
  std::vector<TrainBlock> blocks = default_blocks();
  OptimizerOptions optimizer;    // max_iterations is taken from each block
  GradientOptions gradient;
  double penalty_weight = 0.0;   // unconstrained tensors only
  double penalty_tf = 100.0;

  /// Throws ConfigError.
  void validate() const;
  /// (projection 50, tensors 50) twice, then joint 50.
  static std::vector<TrainBlock> default_blocks();
};

struct TrainRecord {
  int horizon = 0;
  double t_final = 0.0;
  int block = 0;
  BlockKind kind = BlockKind::kJoint;
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  RomModel model;
  std::vector<TrainRecord> history;
  double initial_loss = 0.0;  // full dataset, before training
  double final_loss = 0.0;    // full dataset, after training
  int penalty_reruns = 0;
};

/// Model-fitting objective (plus penalty) over model_point coordinates.
Objective training_objective(const RomModel& like, const SnapshotDataset& d, const TrainConfig& cfg);

TrainResult optimize(const RomModel& m, const SnapshotDataset& d, const TrainConfig& cfg);

/// For unconstrained tensors: after a first pass, while A has an eigenvalue
/// with non-negative real part, rerun on the full horizon with the penalty
/// enabled (weight multiplied by 10 after each unsuccessful rerun).
TrainResult optimize_with_stability_trigger(const RomModel& m, const SnapshotDataset& d, TrainConfig cfg,
                                            double penalty_weight, int max_reruns = 4);

}  // namespace gasrom
