#pragma once

// Lyapunov-based parameterization of quadratic latent dynamics
//
//   f(z, u) = A z + H : z z^T + B u
//
// with A = (K - K^T - R R^T) Qt and Qt = Q^{-1} Q^{-T}, which makes A Hurwitz
// whenever R has full rank, and with the quadratic tensor assembled slice by
// slice along its middle index,
//
//   H(:, j, :) = (S(:, j, :) - S(:, j, :)^T) Qt,
//
// i.e. H(i,j,k) = sum_l (S(i,j,l) - S(l,j,i)) Qt(l,k). Every slice is a skew
// matrix times Qt, so z^T Qt (H : z z^T) = 0 for all z and V(z) = z^T Qt z is
// a global Lyapunov function of the unforced dynamics.

#include "gasrom/numerics.hpp"

namespace gasrom {

struct StableLatentParams {
  Matrix K;   // r x r
  Matrix R;   // r x r
  Matrix Q;   // r x r, invertible
  Tensor3 S;  // r x r x r
  Matrix B;   // r x m

  Index r() const { return K.rows(); }
  Index m() const { return B.cols(); }
  /// Throws DimensionError unless every block has the shapes implied by r and m.
  void validate() const;

  static StableLatentParams Zero(Index r, Index m);
};

struct AssembledTensors {
  Matrix A;
  Tensor3 H;
  Matrix Qtilde;
  Matrix Qinv;  // Q^{-1}, cached for the gradient pullback
};

/// Throws SingularMatrixError (carrying cond(Q)) if Q is numerically singular.
AssembledTensors assemble(const StableLatentParams& p);

/// C = z^T Qt f(z) + f(z)^T Qt z with u = 0.
double lyapunov_rate(const AssembledTensors& t, const Vector& z);

/// Gradients with respect to the unconstrained parameters. G_B passes through
/// unchanged and is therefore not part of this result.
struct ParamGradients {
  Matrix K, R, Q;
  Tensor3 S;
};

/// Chain rule from (dL/dA, dL/dH) through assemble().
ParamGradients pullback_gradients(const StableLatentParams& p, const AssembledTensors& t,
                                  const Matrix& G_A, const Tensor3& G_H);
ParamGradients pullback_gradients(const StableLatentParams& p, const Matrix& G_A,
                                  const Tensor3& G_H);

/// Solves A^T P + P A = -C (C symmetric) by complex Schur reduction.
/// Throws ConvergenceError when A has eigenvalues with lambda_i + conj(lambda_j) = 0.
Matrix solve_lyapunov(const Matrix& A, const Matrix& C);

/// Reflects eigenvalues with non-negative real part to -|Re| (or -margin when
/// the real part is zero) and rebuilds a real matrix.
Matrix project_to_stable(const Matrix& A, double margin = 1e-6);

/// Skew-sliced S reproducing the energy-preserving part of H0 for a given Qt:
/// the lateral slices of H0 Qt^{-1} are replaced by their skew parts.
Tensor3 energy_preserving_factor(const Tensor3& H0, const Matrix& Qtilde);

/// Warm start with Q = I: K from the skew part of A0, R from the symmetric
/// part projected onto the negative-definite cone (eigenvalues clipped to at
/// most -margin * max(1, |A0|)).
StableLatentParams stable_params_identity_q(const Matrix& A0, const Tensor3& H0, const Matrix& B,
                                            double margin = 1e-6);

/// Warm start reproducing a stable A0 exactly: P solves A0^T P + P A0 = -I,
/// Qt = P, Q = L^{-1} with P = L L^T, R = P^{-1} / sqrt(2), K = skew(A0 P^{-1}) / 2.
/// A0 is passed through project_to_stable first.
StableLatentParams stable_params_lyapunov(const Matrix& A0, const Tensor3& H0, const Matrix& B);

struct StabilityDiagnostics {
  Vector eigenvalues_real;  // of A, descending
  double spectral_abscissa = 0;
  double r_min_singular_value = 0;
  double qtilde_condition = 0;
};

StabilityDiagnostics diagnose(const StableLatentParams& p);

}  // namespace gasrom
