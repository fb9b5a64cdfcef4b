#include "gasrom/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gasrom {

void require(bool condition, const char* message) {
  if (!condition) throw DimensionError(message);
}

Tensor3::Tensor3(Index d1, Index d2, Index d3)
    : d1_(d1), d2_(d2), d3_(d3), data_(Vector::Zero(d1 * d2 * d3)) {
  require(d1 >= 0 && d2 >= 0 && d3 >= 0, "Tensor3: negative dimension");
}

Tensor3 Tensor3::Random(Index d1, Index d2, Index d3) {
  Tensor3 t(d1, d2, d3);
  t.data_ = Vector::Random(d1 * d2 * d3);
  return t;
}

Tensor3 Tensor3::FromMatricized(const Matrix& m, Index d2, Index d3) {
  require(m.cols() == d2 * d3, "Tensor3::FromMatricized: column count must equal d2*d3");
  Tensor3 t(m.rows(), d2, d3);
  t.unfolded() = m;
  return t;
}

double Tensor3::dot(const Tensor3& other) const {
  require(d1_ == other.d1_ && d2_ == other.d2_ && d3_ == other.d3_, "Tensor3::dot: shape mismatch");
  return data_.dot(other.data_);
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  require(d1_ == other.d1_ && d2_ == other.d2_ && d3_ == other.d3_, "Tensor3: shape mismatch");
  data_ += other.data_;
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  require(d1_ == other.d1_ && d2_ == other.d2_ && d3_ == other.d3_, "Tensor3: shape mismatch");
  data_ -= other.data_;
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  data_ *= s;
  return *this;
}

bool Tensor3::operator==(const Tensor3& other) const {
  return d1_ == other.d1_ && d2_ == other.d2_ && d3_ == other.d3_ && data_ == other.data_;
}

Vector contract_quadratic(const Tensor3& H, const Vector& z) {
  const Index r = z.size();
  require(H.dim2() == r && H.dim3() == r, "contract_quadratic: H dims must match z");
  // (H : z z^T)_i = sum_k (H_k z)_i z_k
  Vector out = Vector::Zero(H.dim1());
  for (Index k = 0; k < r; ++k) {
    if (z[k] != 0.0) out.noalias() += z[k] * (H.slice(k) * z);
  }
  return out;
}

Matrix contract_jacobian(const Tensor3& H, const Vector& z) {
  const Index r = z.size();
  require(H.dim2() == r && H.dim3() == r, "contract_jacobian: H dims must match z");
  Matrix J = Matrix::Zero(H.dim1(), r);
  for (Index k = 0; k < r; ++k) {
    if (z[k] != 0.0) J += z[k] * H.slice(k);
    J.col(k).noalias() += H.slice(k) * z;
  }
  return J;
}

Matrix matricize(const Tensor3& H) { return H.unfolded(); }

SvdResult thin_svd(const Matrix& M) {
  if (!M.allFinite()) throw ConvergenceError("thin_svd: matrix has non-finite entries");
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw ConvergenceError("thin_svd: SVD did not converge");
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

LuSolver::LuSolver(const Matrix& M, const char* what) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw DimensionError(std::string("LuSolver: ") + what + " must be square and non-empty");
  }
  if (!M.allFinite()) {
    throw SingularMatrixError(std::string(what) + " has non-finite entries",
                              std::numeric_limits<double>::infinity());
  }
  lu_.compute(M);
  lu_t_.compute(M.transpose());
  rcond_ = lu_.rcond();
  if (!(rcond_ >= 1.0 / kSingularConditionLimit)) {
    throw SingularMatrixError(std::string(what) + " is singular or numerically rank deficient",
                              rcond_ > 0 ? 1.0 / rcond_ : std::numeric_limits<double>::infinity());
  }
}

Matrix LuSolver::solve(const Matrix& B) const {
  require(B.rows() == lu_.rows(), "LuSolver::solve: row mismatch");
  return lu_.solve(B);
}

Matrix LuSolver::solve_right(const Matrix& B) const {
  require(B.cols() == lu_.rows(), "LuSolver::solve_right: column mismatch");
  // X M = B  <=>  M^T X^T = B^T
  return lu_t_.solve(B.transpose()).transpose();
}

Matrix LuSolver::solve_transposed(const Matrix& B) const {
  require(B.rows() == lu_.rows(), "LuSolver::solve_transposed: row mismatch");
  return lu_t_.solve(B);
}

Matrix solve_linear(const Matrix& M, const Matrix& B) {
  require(M.rows() == M.cols(), "solve_linear: M must be square");
  require(B.rows() == M.rows(), "solve_linear: B rows must match M");
  return LuSolver(M, "solve_linear operand").solve(B);
}

Eigen::VectorXcd eigenvalues(const Matrix& M) {
  require(M.rows() == M.cols(), "eigenvalues: matrix must be square");
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigenvalues: QR iteration did not converge");
  return es.eigenvalues();
}

Vector eigenvalues_real(const Matrix& M) {
  Vector re = eigenvalues(M).real();
  std::sort(re.begin(), re.end(), std::greater<>());
  return re;
}

double spectral_abscissa(const Matrix& M) { return eigenvalues_real(M)[0]; }

double condition_number(const Matrix& M) {
  const Vector s = Eigen::JacobiSVD<Matrix>(M).singularValues();
  if (s.size() == 0) return 0.0;
  const double smin = s[s.size() - 1];
  return smin > 0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

Matrix orthonormalize(const Matrix& M, Matrix* r_factor) {
  Eigen::HouseholderQR<Matrix> qr(M);
  Matrix Q = qr.householderQ() * Matrix::Identity(M.rows(), M.cols());
  Matrix R = qr.matrixQR().topRows(M.cols()).triangularView<Eigen::Upper>();
  const double scale = std::max(R.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  for (Index j = 0; j < M.cols(); ++j) {
    if (std::abs(R(j, j)) <= 1e-13 * scale) {
      throw ConvergenceError("orthonormalize: columns are linearly dependent");
    }
    if (R(j, j) < 0) {
      Q.col(j) *= -1.0;
      R.row(j) *= -1.0;
    }
  }
  if (r_factor) *r_factor = std::move(R);
  return Q;
}

Vector principal_angles(const Matrix& A, const Matrix& B) {
  require(A.rows() == B.rows(), "principal_angles: row mismatch");
  const Matrix Qa = orthonormalize(A);
  const Matrix Qb = orthonormalize(B);
  Vector c = Eigen::JacobiSVD<Matrix>(Qa.transpose() * Qb).singularValues();
  // Small angles via the sine route for accuracy: sin(theta) are the singular
  // values of (I - Qa Qa^T) Qb.
  Vector s = Eigen::JacobiSVD<Matrix>(Qb - Qa * (Qa.transpose() * Qb)).singularValues();
  const Index k = std::min(c.size(), s.size());
  Vector theta(k);
  for (Index i = 0; i < k; ++i) {
    // c is descending (smallest angle first); s is descending (largest first).
    theta[i] = std::atan2(s[k - 1 - i], c[i]);
  }
  return theta;
}

}  // namespace gasrom
