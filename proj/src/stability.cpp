#include "gasrom/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace gasrom {

void StableLatentParams::validate() const {
  const Index n = r();
  require(n >= 1, "StableLatentParams: r must be positive");
  require(K.cols() == n && R.rows() == n && R.cols() == n && Q.rows() == n && Q.cols() == n,
          "StableLatentParams: K, R, Q must be r x r");
  require(S.dim1() == n && S.is_cubic(), "StableLatentParams: S must be r x r x r");
  require(B.rows() == n, "StableLatentParams: B must have r rows");
}

StableLatentParams StableLatentParams::Zero(Index r, Index m) {
  return {Matrix::Zero(r, r), Matrix::Zero(r, r), Matrix::Identity(r, r), Tensor3::Zero(r),
          Matrix::Zero(r, m)};
}

AssembledTensors assemble(const StableLatentParams& p) {
  p.validate();
  const Index r = p.r();
  const LuSolver lu(p.Q, "Q");
  AssembledTensors t;
  t.Qinv = lu.solve(Matrix::Identity(r, r));
  t.Qtilde = t.Qinv * t.Qinv.transpose();
  t.Qtilde = sym(t.Qtilde);
  t.A = (p.K - p.K.transpose() - p.R * p.R.transpose()) * t.Qtilde;
  t.H = Tensor3::Zero(r);
  for (Index j = 0; j < r; ++j) {
    const auto s = p.S.lateral(j);
    t.H.lateral(j) = (s - s.transpose()) * t.Qtilde;
  }
  return t;
}

double lyapunov_rate(const AssembledTensors& t, const Vector& z) {
  require(z.size() == t.A.rows(), "lyapunov_rate: z has the wrong length");
  const Vector f = t.A * z + contract_quadratic(t.H, z);
  return 2.0 * z.dot(t.Qtilde * f);
}

ParamGradients pullback_gradients(const StableLatentParams& p, const AssembledTensors& t,
                                  const Matrix& G_A, const Tensor3& G_H) {
  const Index r = p.r();
  require(G_A.rows() == r && G_A.cols() == r, "pullback_gradients: G_A must be r x r");
  require(G_H.dim1() == r && G_H.is_cubic(), "pullback_gradients: G_H must be r x r x r");
  const Matrix& Qt = t.Qtilde;

  ParamGradients g;
  g.K = G_A * Qt - Qt * G_A.transpose();
  g.R = -(G_A * Qt + Qt * G_A.transpose()) * p.R;

  // dL/dQt collects the A route and one term per skew slice.
  Matrix G_Qt = (p.K - p.K.transpose() - p.R * p.R.transpose()).transpose() * G_A;
  g.S = Tensor3::Zero(r);
  for (Index j = 0; j < r; ++j) {
    const auto s = p.S.lateral(j);
    const auto gh = G_H.lateral(j);
    G_Qt.noalias() += (s.transpose() - s) * gh;
    g.S.lateral(j) = gh * Qt - Qt * gh.transpose();
  }
  // Qt = Q^{-1} Q^{-T}  =>  dL/dQ = -Q^{-T} (G + G^T) Qt
  g.Q = -t.Qinv.transpose() * (G_Qt + G_Qt.transpose()) * Qt;
  return g;
}

ParamGradients pullback_gradients(const StableLatentParams& p, const Matrix& G_A, const Tensor3& G_H) {
  return pullback_gradients(p, assemble(p), G_A, G_H);
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& C) {
  require(A.rows() == A.cols() && C.rows() == A.rows() && C.cols() == A.cols(),
          "solve_lyapunov: A and C must be square and of equal size");
  const Index n = A.rows();
  using CMatrix = Eigen::MatrixXcd;
  Eigen::ComplexSchur<CMatrix> schur(A.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) throw ConvergenceError("solve_lyapunov: Schur reduction failed");
  const CMatrix& U = schur.matrixU();
  const CMatrix& T = schur.matrixT();
  // T^* X + X T = F with X = U^* P U and F = -U^* C U.
  const CMatrix F = -(U.adjoint() * C.cast<std::complex<double>>() * U);
  const CMatrix Tstar = T.adjoint();
  CMatrix X = CMatrix::Zero(n, n);
  const double scale = std::max(1.0, T.cwiseAbs().maxCoeff());
  for (Index j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = F.col(j);
    for (Index k = 0; k < j; ++k) rhs -= X.col(k) * T(k, j);
    CMatrix M = Tstar;
    M.diagonal().array() += T(j, j);
    for (Index i = 0; i < n; ++i) {
      if (std::abs(M(i, i)) <= 1e-13 * scale) {
        throw ConvergenceError("solve_lyapunov: solution is not unique (eigenvalues sum to zero)");
      }
    }
    X.col(j) = M.triangularView<Eigen::Lower>().solve(rhs);
  }
  const Matrix P = (U * X * U.adjoint()).real();
  return sym(P);
}

Matrix project_to_stable(const Matrix& A, double margin) {
  require(A.rows() == A.cols(), "project_to_stable: A must be square");
  Eigen::EigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success) throw ConvergenceError("project_to_stable: eigensolver failed");
  Eigen::VectorXcd lambda = es.eigenvalues();
  bool changed = false;
  const double floor = margin * std::max(1.0, A.norm());
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i].real() >= -floor) {
      const double re = std::max(std::abs(lambda[i].real()), floor);
      lambda[i] = {-re, lambda[i].imag()};
      changed = true;
    }
  }
  if (!changed) return A;
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::MatrixXcd rebuilt = V * lambda.asDiagonal() * V.inverse();
  return rebuilt.real();
}

Tensor3 energy_preserving_factor(const Tensor3& H0, const Matrix& Qtilde) {
  const Index r = Qtilde.rows();
  require(H0.dim1() == r && H0.is_cubic(), "energy_preserving_factor: H0 must be r x r x r");
  const LuSolver lu(Qtilde, "Qtilde");
  Tensor3 S = Tensor3::Zero(r);
  for (Index j = 0; j < r; ++j) {
    const Matrix m = lu.solve_right(Matrix(H0.lateral(j)));
    S.lateral(j) = 0.5 * skew(m);
  }
  return S;
}

StableLatentParams stable_params_identity_q(const Matrix& A0, const Tensor3& H0, const Matrix& B,
                                            double margin) {
  const Index r = A0.rows();
  require(A0.cols() == r && B.rows() == r, "stable_params_identity_q: shape mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A0));
  const double floor = margin * std::max(1.0, A0.norm());
  const Vector decay = (-es.eigenvalues().array()).max(floor).sqrt();
  StableLatentParams p;
  p.K = 0.5 * skew(A0);
  p.R = es.eigenvectors() * decay.asDiagonal() * es.eigenvectors().transpose();
  p.Q = Matrix::Identity(r, r);
  p.S = energy_preserving_factor(H0, p.Q);
  p.B = B;
  return p;
}

StableLatentParams stable_params_lyapunov(const Matrix& A0, const Tensor3& H0, const Matrix& B) {
  const Index r = A0.rows();
  require(A0.cols() == r && B.rows() == r, "stable_params_lyapunov: shape mismatch");
  const Matrix As = project_to_stable(A0);
  const Matrix P = solve_lyapunov(As, Matrix::Identity(r, r));
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) throw ConvergenceError("stable_params_lyapunov: P is not positive definite");
  const Matrix L = llt.matrixL();
  const Matrix Pinv = llt.solve(Matrix::Identity(r, r));
  StableLatentParams p;
  p.Q = L.triangularView<Eigen::Lower>().solve(Matrix::Identity(r, r));
  p.R = Pinv / std::sqrt(2.0);
  p.K = 0.5 * skew(As * Pinv);
  p.S = energy_preserving_factor(H0, P);
  p.B = B;
  return p;
}

StabilityDiagnostics diagnose(const StableLatentParams& p) {
  const AssembledTensors t = assemble(p);
  StabilityDiagnostics d;
  d.eigenvalues_real = eigenvalues_real(t.A);
  d.spectral_abscissa = d.eigenvalues_real[0];
  const Vector s = Eigen::JacobiSVD<Matrix>(p.R).singularValues();
  d.r_min_singular_value = s[s.size() - 1];
  d.qtilde_condition = condition_number(t.Qtilde);
  return d;
}

}  // namespace gasrom
