#pragma once

// Dense linear-algebra and rank-3 tensor primitives shared by every module.
//
// Storage order. Matrices are Eigen column-major. A Tensor3 of dims
// (d1, d2, d3) stores entry (i, j, k) at flat offset i + d1 * (j + d2 * k),
// so frontal slice k (the d1 x d2 matrix H(:, :, k)) is contiguous and the
// matricization mat(H) is the d1 x (d2 * d3) column-major view of the same
// buffer: row i, column j + d2 * k.

#include <Eigen/Dense>

#include <complex>
#include <optional>

#include "gasrom/errors.hpp"

namespace gasrom {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index d1, Index d2, Index d3);

  static Tensor3 Zero(Index d1, Index d2, Index d3) { return Tensor3(d1, d2, d3); }
  static Tensor3 Zero(Index r) { return Tensor3(r, r, r); }
  /// Entries uniform in [-1, 1] drawn from Eigen's global generator.
  static Tensor3 Random(Index d1, Index d2, Index d3);
  static Tensor3 Random(Index r) { return Random(r, r, r); }
  /// Builds a tensor of the given dims from a d1 x (d2*d3) matricization.
  static Tensor3 FromMatricized(const Matrix& m, Index d2, Index d3);

  Index dim1() const { return d1_; }
  Index dim2() const { return d2_; }
  Index dim3() const { return d3_; }
  Index size() const { return data_.size(); }
  bool is_cubic() const { return d1_ == d2_ && d2_ == d3_; }

  double& operator()(Index i, Index j, Index k) { return data_[i + d1_ * (j + d2_ * k)]; }
  double operator()(Index i, Index j, Index k) const { return data_[i + d1_ * (j + d2_ * k)]; }

  /// Frontal slice H(:, :, k) as a d1 x d2 view.
  Eigen::Map<Matrix> slice(Index k) { return {data_.data() + d1_ * d2_ * k, d1_, d2_}; }
  Eigen::Map<const Matrix> slice(Index k) const {
    return {data_.data() + d1_ * d2_ * k, d1_, d2_};
  }

  /// Lateral slice H(:, j, :) as a d1 x d3 view (strided).
  using StridedMap = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
  using ConstStridedMap = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;
  StridedMap lateral(Index j) {
    return {data_.data() + d1_ * j, d1_, d3_, Eigen::OuterStride<>(d1_ * d2_)};
  }
  ConstStridedMap lateral(Index j) const {
    return {data_.data() + d1_ * j, d1_, d3_, Eigen::OuterStride<>(d1_ * d2_)};
  }

  /// d1 x (d2*d3) view of the storage; see the header comment for the order.
  Eigen::Map<Matrix> unfolded() { return {data_.data(), d1_, d2_ * d3_}; }
  Eigen::Map<const Matrix> unfolded() const { return {data_.data(), d1_, d2_ * d3_}; }

  Vector& flat() { return data_; }
  const Vector& flat() const { return data_; }

  double norm() const { return data_.norm(); }
  double dot(const Tensor3& other) const;
  void setZero() { data_.setZero(); }
  bool all_finite() const { return data_.allFinite(); }

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(double s);
  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

  bool operator==(const Tensor3& other) const;

 private:
  Index d1_ = 0, d2_ = 0, d3_ = 0;
  Vector data_;
};

/// Quadratic contraction (H : z z^T)_i = sum_{p,q} H(i,p,q) z_p z_q.
Vector contract_quadratic(const Tensor3& H, const Vector& z);

/// Jacobian of contract_quadratic with respect to z:
/// J(i,j) = sum_q H(i,j,q) z_q + sum_p H(i,p,j) z_p.
Matrix contract_jacobian(const Tensor3& H, const Vector& z);

/// Row i of the result holds H(i, :, :) in the storage order of the header.
Matrix matricize(const Tensor3& H);

struct SvdResult {
  Matrix U;      // n x k
  Vector sigma;  // k, non-increasing
  Matrix V;      // m x k
};

/// Thin SVD with k = min(n, m).
SvdResult thin_svd(const Matrix& M);

/// Matrices whose estimated condition number exceeds this are treated as
/// singular by LuSolver and solve_linear.
inline constexpr double kSingularConditionLimit = 1e12;

/// Partial-pivoting LU factorization, computed once and reused for many
/// right-hand sides. Construction throws SingularMatrixError when the
/// reciprocal condition estimate falls below 1 / kSingularConditionLimit.
class LuSolver {
 public:
  explicit LuSolver(const Matrix& M, const char* what = "matrix");

  Matrix solve(const Matrix& B) const;
  /// Solves X M = B, i.e. X = B M^{-1}.
  Matrix solve_right(const Matrix& B) const;
  /// Solves M^T X = B.
  Matrix solve_transposed(const Matrix& B) const;
  Matrix inverse() const { return lu_.inverse(); }
  double condition_estimate() const { return 1.0 / rcond_; }
  Index dim() const { return lu_.rows(); }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
  Eigen::PartialPivLU<Matrix> lu_t_;  // of M^T
  double rcond_ = 0.0;
};

/// Returns X with M X = B. No explicit inverse is formed.
Matrix solve_linear(const Matrix& M, const Matrix& B);

/// Eigenvalues of a square matrix (validation and diagnostics only).
Eigen::VectorXcd eigenvalues(const Matrix& M);
/// Real parts of the eigenvalues, sorted descending.
Vector eigenvalues_real(const Matrix& M);
/// max Re(lambda).
double spectral_abscissa(const Matrix& M);

/// 2-norm condition number sigma_max / sigma_min (infinity when singular).
double condition_number(const Matrix& M);

/// (M + M^T) / 2 and (M - M^T) / 2.
inline Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }
inline Matrix skew(const Matrix& M) { return 0.5 * (M - M.transpose()); }

/// Orthonormal Q factor of a thin QR with the sign of each column fixed so
/// that diag(R) >= 0. Throws ConvergenceError if the columns are dependent.
Matrix orthonormalize(const Matrix& M, Matrix* r_factor = nullptr);

/// Principal angles between span(A) and span(B), ascending.
Vector principal_angles(const Matrix& A, const Matrix& B);

void require(bool condition, const char* message);

}  // namespace gasrom
