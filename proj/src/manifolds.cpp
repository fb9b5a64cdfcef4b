#include "gasrom/manifolds.hpp"

#include <cmath>

namespace gasrom {

namespace {

bool has(const Matrix& m) { return m.size() > 0; }

// (Phi^T Phi)^{-1} via Cholesky; Phi has full column rank by invariant.
Matrix gram_inverse(const Matrix& phi) {
  const Matrix gram = phi.transpose() * phi;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw ConvergenceError("Grassmann frame lost column rank");
  return llt.solve(Matrix::Identity(gram.rows(), gram.cols()));
}

Matrix horizontal(const Matrix& phi, const Matrix& G) {
  return G - phi * (gram_inverse(phi) * (phi.transpose() * G));
}

Matrix stiefel_project(const Matrix& psi, const Matrix& G) {
  return G - psi * sym(psi.transpose() * G);
}

}  // namespace

GrassmannPoint::GrassmannPoint(Matrix frame) : frame_(std::move(frame)) {
  require(frame_.rows() >= frame_.cols() && frame_.cols() >= 1, "GrassmannPoint: frame must be tall");
  const Vector s = Eigen::JacobiSVD<Matrix>(frame_).singularValues();
  if (!(s[s.size() - 1] > 1e-10 * s[0])) {
    throw ConvergenceError("GrassmannPoint: frame does not have full column rank");
  }
}

StiefelPoint::StiefelPoint(Matrix frame) : frame_(std::move(frame)) {
  require(frame_.rows() >= frame_.cols() && frame_.cols() >= 1, "StiefelPoint: frame must be tall");
  const Matrix gram = frame_.transpose() * frame_;
  if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
    throw ConvergenceError("StiefelPoint: frame is not orthonormal");
  }
}

TangentVector TangentVector::zeros_like(const ProductPoint& p) {
  TangentVector t;
  if (p.grassmann) t.grassmann = Matrix::Zero(p.grassmann->n(), p.grassmann->r());
  if (p.stiefel) t.stiefel = Matrix::Zero(p.stiefel->frame().rows(), p.stiefel->frame().cols());
  for (const auto& e : p.euclid) t.euclid.push_back(Matrix::Zero(e.rows(), e.cols()));
  return t;
}

TangentVector& TangentVector::axpy(double s, const TangentVector& o) {
  require(euclid.size() == o.euclid.size(), "TangentVector: factor count mismatch");
  if (has(o.grassmann)) grassmann += s * o.grassmann;
  if (has(o.stiefel)) stiefel += s * o.stiefel;
  for (std::size_t i = 0; i < euclid.size(); ++i) euclid[i] += s * o.euclid[i];
  return *this;
}

TangentVector& TangentVector::operator+=(const TangentVector& o) { return axpy(1.0, o); }
TangentVector& TangentVector::operator-=(const TangentVector& o) { return axpy(-1.0, o); }

TangentVector& TangentVector::operator*=(double s) {
  grassmann *= s;
  stiefel *= s;
  for (auto& e : euclid) e *= s;
  return *this;
}

bool TangentVector::all_finite() const {
  bool ok = grassmann.allFinite() && stiefel.allFinite();
  for (const auto& e : euclid) ok = ok && e.allFinite();
  return ok;
}

double TangentVector::ambient_dot(const TangentVector& o) const {
  require(euclid.size() == o.euclid.size(), "TangentVector: factor count mismatch");
  double s = 0.0;
  if (has(grassmann)) s += (grassmann.array() * o.grassmann.array()).sum();
  if (has(stiefel)) s += (stiefel.array() * o.stiefel.array()).sum();
  for (std::size_t i = 0; i < euclid.size(); ++i) s += (euclid[i].array() * o.euclid[i].array()).sum();
  return s;
}

double metric(const ProductPoint& p, const TangentVector& xi, const TangentVector& eta) {
  require(xi.euclid.size() == p.euclid.size() && eta.euclid.size() == p.euclid.size(),
          "metric: factor count mismatch");
  double g = 0.0;
  if (p.grassmann) {
    const Matrix& phi = p.grassmann->frame();
    require(xi.grassmann.rows() == phi.rows() && xi.grassmann.cols() == phi.cols() &&
                eta.grassmann.rows() == phi.rows() && eta.grassmann.cols() == phi.cols(),
            "metric: Grassmann component shape mismatch");
    g += (gram_inverse(phi) * (xi.grassmann.transpose() * eta.grassmann)).trace();
  }
  if (p.stiefel) {
    const Matrix& psi = p.stiefel->frame();
    require(xi.stiefel.rows() == psi.rows() && xi.stiefel.cols() == psi.cols() &&
                eta.stiefel.rows() == psi.rows() && eta.stiefel.cols() == psi.cols(),
            "metric: Stiefel component shape mismatch");
    g += (xi.stiefel.array() * eta.stiefel.array()).sum();
  }
  for (std::size_t i = 0; i < p.euclid.size(); ++i) {
    require(xi.euclid[i].rows() == p.euclid[i].rows() && xi.euclid[i].cols() == p.euclid[i].cols() &&
                eta.euclid[i].rows() == p.euclid[i].rows() &&
                eta.euclid[i].cols() == p.euclid[i].cols(),
            "metric: Euclidean component shape mismatch");
    g += (xi.euclid[i].array() * eta.euclid[i].array()).sum();
  }
  return g;
}

TangentVector project_tangent(const ProductPoint& p, const TangentVector& ambient) {
  TangentVector t = ambient;
  if (p.grassmann) t.grassmann = horizontal(p.grassmann->frame(), ambient.grassmann);
  if (p.stiefel) t.stiefel = stiefel_project(p.stiefel->frame(), ambient.stiefel);
  return t;
}

TangentVector riemannian_gradient(const ProductPoint& p, const TangentVector& euclidean) {
  TangentVector t = project_tangent(p, euclidean);
  if (p.grassmann) {
    const Matrix& phi = p.grassmann->frame();
    t.grassmann = t.grassmann * (phi.transpose() * phi);
  }
  return t;
}

ProductPoint retract(const ProductPoint& p, const TangentVector& xi, double step) {
  if (step == 0.0) return p;
  require(xi.euclid.size() == p.euclid.size(), "retract: factor count mismatch");
  ProductPoint q;
  if (p.grassmann) {
    Matrix y = p.grassmann->frame() + step * xi.grassmann;
    if (!y.allFinite()) throw ConvergenceError("retract: non-finite Grassmann frame");
    if (condition_number(y) > kGrassmannReconditionLimit) y = orthonormalize(y);
    q.grassmann = GrassmannPoint(std::move(y));
  }
  if (p.stiefel && xi.stiefel.isZero(0.0)) {
    q.stiefel = p.stiefel;  // frozen factor stays bit-identical
  } else if (p.stiefel) {
    Matrix y = p.stiefel->frame() + step * xi.stiefel;
    if (!y.allFinite()) throw ConvergenceError("retract: non-finite Stiefel frame");
    q.stiefel = StiefelPoint(orthonormalize(y));
  }
  q.euclid.reserve(p.euclid.size());
  for (std::size_t i = 0; i < p.euclid.size(); ++i) q.euclid.push_back(p.euclid[i] + step * xi.euclid[i]);
  return q;
}

TangentVector transport(const ProductPoint& p_from, const ProductPoint& p_to, const TangentVector& xi) {
  TangentVector t = xi;
  if (p_to.grassmann) {
    const Matrix& from = p_from.grassmann->frame();
    const Matrix& to = p_to.grassmann->frame();
    const Matrix w = gram_inverse(from) * (from.transpose() * to);
    t.grassmann = horizontal(to, xi.grassmann * w);
  }
  if (p_to.stiefel) t.stiefel = stiefel_project(p_to.stiefel->frame(), xi.stiefel);
  return t;
}

double grassmann_distance(const Matrix& A, const Matrix& B) { return principal_angles(A, B).norm(); }

}  // namespace gasrom
