#pragma once

// Orthogonal-subspace baselines: POD, POD-Galerkin, Operator Inference and
// its stable reparameterized variant fitted by gradient descent.

#include <optional>
#include <vector>

#include "gasrom/fom.hpp"
#include "gasrom/optim.hpp"
#include "gasrom/stability.hpp"

namespace gasrom {

struct PodBasis {
  Matrix modes;            // n x r, orthonormal
  Vector singular_values;  // r, non-increasing
  double variance_captured = 0.0;
};

/// Leading r left singular vectors of the column-stacked snapshots.
/// Throws RankDeficientError when r exceeds the numerical rank.
PodBasis pod(const Matrix& snapshots, Index r);
/// Snapshots of trajectory j are scaled by sqrt(weights[j]) (all 1 when empty).
PodBasis pod(const SnapshotDataset& d, Index r, const std::vector<double>& weights = {});

/// Intrusive Galerkin projection onto the modes; Phi = Psi = modes.
RomModel pod_galerkin(const QuadraticFOM& f, const PodBasis& basis);
RawTensors galerkin_tensors(const QuadraticFOM& f, const Matrix& modes);

/// Regression data; S denotes the snapshot count.
struct OpInfData {
  Matrix Z;     // r x S
  Matrix Zdot;  // r x S
  Matrix U;     // m x S
  void validate() const;
};

/// Symmetric non-redundant quadratic features z_p z_q, p <= q, column-major
/// over the snapshots: ((r (r + 1) / 2) x S).
Matrix quadratic_features(const Matrix& Z);
/// z z^T flattened (r^2 x S), matching the H unfolding.
Matrix kron_features(const Matrix& Z);

/// min ||Zdot - A Z - H:ZZ - B U||_F^2 + lambda ||mat(H)||_F^2 with H having
/// symmetric slices. When U vanishes identically B is returned as zero.
/// Throws RankDeficientError for a rank-deficient regressor with lambda = 0.
RawTensors opinf_lstsq(const OpInfData& data, double lambda);

/// Residual objective of the stable parameterization; writes the Euclidean
/// gradients when the pointers are non-null.
double gasopinf_objective(const OpInfData& data, const StableLatentParams& p, double lambda,
                          ParamGradients* grad = nullptr, Matrix* grad_B = nullptr);

/// Same objective in terms of the assembled tensors with dL/dA, dL/dH, dL/dB.
double opinf_residual(const OpInfData& data, const Matrix& A, const Tensor3& H, const Matrix& B, double lambda,
                      Matrix* G_A = nullptr, Tensor3* G_H = nullptr, Matrix* G_B = nullptr);

struct GasOpInfResult {
  StableLatentParams params;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::vector<IterationRecord> history;
};

GasOpInfResult gasopinf_train(const OpInfData& data, const StableLatentParams& init, double lambda,
                              const OptimizerOptions& opt = {});

/// Galerkin tensors made stable with Q = I.
StableLatentParams gasopinf_initial(const RawTensors& galerkin);

/// Latent snapshots Z = basis^T X with derivatives basis^T f(x(t_i), u(t_i))
/// when a FOM is given, basis^T Xdot when the dataset carries exact
/// derivatives and allow_stored is set, otherwise fourth-order finite
/// differences on the (uniform) sample grid.
OpInfData latent_derivatives(const SnapshotDataset& d, const Matrix& basis, const QuadraticFOM* fom = nullptr,
                             bool allow_stored = true);

/// Fourth-order differences of the columns of Z on a uniform grid of step h
/// (one-sided at both ends). Throws ConfigError for fewer than five samples.
Matrix finite_difference_derivative(const Matrix& Z, double h);

}  // namespace gasrom
