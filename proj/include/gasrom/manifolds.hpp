#pragma once

// Riemannian geometry of Grassmann x Stiefel x Euclidean product spaces.
//
// The Grassmann factor is handled as a quotient of the full-rank n x r
// matrices: a point is any frame Phi spanning the subspace, tangent vectors
// are horizontal lifts (Phi^T xi = 0) and the metric is
// Tr((Phi^T Phi)^{-1} xi^T eta), which makes everything invariant under
// Phi -> Phi W. The Stiefel factor is the embedded submanifold Psi^T Psi = I
// with the Euclidean metric. Euclidean factors are flat.

#include <cmath>
#include <optional>
#include <vector>

#include "gasrom/numerics.hpp"

namespace gasrom {

/// A full-column-rank frame representing span(frame).
class GrassmannPoint {
 public:
  GrassmannPoint() = default;
  explicit GrassmannPoint(Matrix frame);
  const Matrix& frame() const { return frame_; }
  Index n() const { return frame_.rows(); }
  Index r() const { return frame_.cols(); }

 private:
  Matrix frame_;
};

/// An orthonormal n x r frame.
class StiefelPoint {
 public:
  StiefelPoint() = default;
  explicit StiefelPoint(Matrix frame);
  const Matrix& frame() const { return frame_; }

 private:
  Matrix frame_;
};

/// Any factor may be absent; Euclidean factors are stored as matrices
/// (rank-3 tensors use their d1 x (d2 d3) unfolding).
struct ProductPoint {
  std::optional<GrassmannPoint> grassmann;
  std::optional<StiefelPoint> stiefel;
  std::vector<Matrix> euclid;
};

/// One component per factor of a ProductPoint; absent factors are 0x0.
struct TangentVector {
  Matrix grassmann;
  Matrix stiefel;
  std::vector<Matrix> euclid;

  static TangentVector zeros_like(const ProductPoint& p);

  TangentVector& operator+=(const TangentVector& o);
  TangentVector& operator-=(const TangentVector& o);
  TangentVector& operator*=(double s);
  /// this += s * o
  TangentVector& axpy(double s, const TangentVector& o);
  friend TangentVector operator+(TangentVector a, const TangentVector& b) { return a += b; }
  friend TangentVector operator-(TangentVector a, const TangentVector& b) { return a -= b; }
  friend TangentVector operator*(double s, TangentVector a) { return a *= s; }

  bool all_finite() const;
  /// Plain Frobenius inner product of all components (not the manifold metric).
  double ambient_dot(const TangentVector& o) const;
};

double metric(const ProductPoint& p, const TangentVector& xi, const TangentVector& eta);
inline double metric_norm(const ProductPoint& p, const TangentVector& xi) {
  return std::sqrt(metric(p, xi, xi));
}

/// Orthogonal projection of an ambient value onto the tangent space at p.
/// Grassmann: (I - Phi (Phi^T Phi)^{-1} Phi^T) G. Stiefel: G - Psi sym(Psi^T G).
TangentVector project_tangent(const ProductPoint& p, const TangentVector& ambient);

/// Riemannian gradient from the Euclidean gradient of the ambient cost.
/// Grassmann: horizontal part times (Phi^T Phi). Stiefel: tangent projection.
TangentVector riemannian_gradient(const ProductPoint& p, const TangentVector& euclidean);

/// Grassmann representatives whose condition number exceeds this are
/// re-orthonormalized by retract.
inline constexpr double kGrassmannReconditionLimit = 1e6;

/// First-order retraction. Grassmann: span(Phi + t xi), re-orthonormalized
/// when badly conditioned. Stiefel: Q factor of Psi + t xi. Euclidean: X + t xi.
/// step == 0 returns p unchanged.
ProductPoint retract(const ProductPoint& p, const TangentVector& xi, double step);

/// Vector transport by projection. For the Grassmann factor the lift is also
/// re-expressed in the representative of p_to through
/// W = (Phi_from^T Phi_from)^{-1} Phi_from^T Phi_to.
TangentVector transport(const ProductPoint& p_from, const ProductPoint& p_to,
                        const TangentVector& xi);

/// Geodesic distance sqrt(sum theta_i^2) between two subspaces.
double grassmann_distance(const Matrix& A, const Matrix& B);

}  // namespace gasrom
