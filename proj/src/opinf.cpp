#include "gasrom/opinf.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gasrom {

PodBasis pod(const Matrix& snapshots, Index r) {
  require(r >= 1, "pod: r must be positive");
  if (r > std::min(snapshots.rows(), snapshots.cols())) {
    throw RankDeficientError("pod: r exceeds min(n, snapshot count)", std::min(snapshots.rows(), snapshots.cols()));
  }
  const SvdResult svd = thin_svd(snapshots);
  const double total = svd.sigma.squaredNorm();
  Index rank = 0;
  const double tol = std::max(snapshots.rows(), snapshots.cols()) * 1e-14 * (svd.sigma.size() ? svd.sigma[0] : 0.0);
  while (rank < svd.sigma.size() && svd.sigma[rank] > tol) ++rank;
  if (r > rank) throw RankDeficientError("pod: r exceeds the numerical rank of the snapshots", rank);
  PodBasis b;
  b.modes = svd.U.leftCols(r);
  b.singular_values = svd.sigma.head(r);
  b.variance_captured = b.singular_values.squaredNorm() / total;
  return b;
}

PodBasis pod(const SnapshotDataset& d, Index r, const std::vector<double>& weights) {
  d.validate();
  require(weights.empty() || weights.size() == d.trajectories.size(), "pod: one weight per trajectory");
  const Index N = d.num_samples();
  Matrix X(d.n(), N * d.size());
  for (Index j = 0; j < d.size(); ++j) {
    const auto& t = d.trajectories[j];
    if (t.X.size() == 0) throw SchemaError("pod: trajectory " + std::to_string(j) + " has no state snapshots");
    const double w = weights.empty() ? 1.0 : weights[j];
    require(w > 0, "pod: weights must be positive");
    X.middleCols(j * N, N) = std::sqrt(w) * t.X;
  }
  return pod(X, r);
}

RawTensors galerkin_tensors(const QuadraticFOM& f, const Matrix& V) {
  f.validate();
  require(V.rows() == f.n(), "galerkin: basis must have n rows");
  const Index r = V.cols();
  RawTensors t;
  t.A = V.transpose() * f.A * V;
  t.B = V.transpose() * f.B;
  t.H = Tensor3::Zero(r);
  // H_r(:, j, :) = sum_q V(q, j) V^T H_f(:, q, :) V
  for (Index q = 0; q < f.n(); ++q) {
    const auto L = f.H.lateral(q);
    if (L.isZero(0.0)) continue;
    const Matrix M = V.transpose() * L * V;
    for (Index j = 0; j < r; ++j) {
      if (V(q, j) != 0.0) t.H.lateral(j) += V(q, j) * M;
    }
  }
  return t;
}

RomModel pod_galerkin(const QuadraticFOM& f, const PodBasis& basis) {
  RawTensors t = galerkin_tensors(f, basis.modes);
  std::optional<Matrix> C;
  if (!(f.C.rows() == f.n() && f.C.isIdentity(0.0))) C = f.C;
  return RomModel(ProjectionPair(basis.modes, basis.modes), LatentDynamics::raw(std::move(t)), C);
}

void OpInfData::validate() const {
  if (Z.cols() < 1) throw SchemaError("opinf: no snapshots");
  if (Zdot.rows() != Z.rows() || Zdot.cols() != Z.cols()) throw SchemaError("opinf: Zdot must match Z");
  if (U.cols() != Z.cols()) throw SchemaError("opinf: U must have one column per snapshot");
  if (!Z.allFinite() || !Zdot.allFinite() || !U.allFinite()) throw SchemaError("opinf: non-finite data");
}

Matrix quadratic_features(const Matrix& Z) {
  const Index r = Z.rows();
  Matrix F(r * (r + 1) / 2, Z.cols());
  Index k = 0;
  for (Index q = 0; q < r; ++q) {
    for (Index p = 0; p <= q; ++p) F.row(k++) = Z.row(p).cwiseProduct(Z.row(q));
  }
  return F;
}

Matrix kron_features(const Matrix& Z) {
  const Index r = Z.rows();
  Matrix F(r * r, Z.cols());
  for (Index q = 0; q < r; ++q) {
    for (Index p = 0; p < r; ++p) F.row(p + r * q) = Z.row(p).cwiseProduct(Z.row(q));
  }
  return F;
}

RawTensors opinf_lstsq(const OpInfData& data, double lambda) {
  data.validate();
  if (!(lambda >= 0)) throw ConfigError("opinf: regularization must be non-negative");
  const Index r = data.Z.rows(), m = data.U.rows(), S = data.Z.cols();
  const Index nq = r * (r + 1) / 2;
  const bool with_u = m > 0 && !data.U.isZero(0.0);
  const Index mu = with_u ? m : 0;
  const Index d = r + nq + mu;

  // Rows = snapshots (plus Tikhonov rows), columns = features.
  const Index extra = lambda > 0 ? nq : 0;
  Matrix F = Matrix::Zero(S + extra, d);
  F.topLeftCorner(S, r) = data.Z.transpose();
  F.block(0, r, S, nq) = quadratic_features(data.Z).transpose();
  if (with_u) F.block(0, r + nq, S, m) = data.U.transpose();
  Matrix T = Matrix::Zero(S + extra, r);
  T.topRows(S) = data.Zdot.transpose();
  if (lambda > 0) {
    // ||mat(H)||^2 = sum_p hhat_pp^2 + (1/2) sum_{p<q} hhat_pq^2
    Index k = 0;
    for (Index q = 0; q < r; ++q) {
      for (Index p = 0; p <= q; ++p, ++k) F(S + k, r + k) = std::sqrt(p == q ? lambda : 0.5 * lambda);
    }
  }
  // Column equilibration before the rank-revealing QR.
  Vector scale = F.colwise().norm().transpose();
  for (Index c = 0; c < d; ++c) scale[c] = scale[c] > 0 ? scale[c] : 1.0;
  const Matrix Fs = F * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Matrix> qr(Fs);
  qr.setThreshold(1e-13);
  if (qr.rank() < d) {
    throw RankDeficientError("opinf: regressor is rank deficient (increase regularization)", qr.rank());
  }
  const Matrix O = scale.cwiseInverse().asDiagonal() * qr.solve(T);  // d x r

  RawTensors out;
  out.A = O.topRows(r).transpose();
  const Matrix Hhat = O.middleRows(r, nq).transpose();  // r x nq
  out.H = Tensor3::Zero(r);
  Index k = 0;
  for (Index q = 0; q < r; ++q) {
    for (Index p = 0; p <= q; ++p, ++k) {
      for (Index i = 0; i < r; ++i) {
        if (p == q) {
          out.H(i, p, p) = Hhat(i, k);
        } else {
          out.H(i, p, q) = out.H(i, q, p) = 0.5 * Hhat(i, k);
        }
      }
    }
  }
  out.B = with_u ? Matrix(O.bottomRows(m).transpose()) : Matrix::Zero(r, m);
  return out;
}

double opinf_residual(const OpInfData& data, const Matrix& A, const Tensor3& H, const Matrix& B, double lambda,
                      Matrix* G_A, Tensor3* G_H, Matrix* G_B) {
  const Matrix K2 = kron_features(data.Z);
  Matrix E = data.Zdot - A * data.Z - H.unfolded() * K2;
  if (B.cols() > 0) E.noalias() -= B * data.U;
  const double value = E.squaredNorm() + lambda * H.unfolded().squaredNorm();
  if (G_A) *G_A = -2.0 * E * data.Z.transpose();
  if (G_B) *G_B = B.cols() > 0 ? Matrix(-2.0 * E * data.U.transpose()) : Matrix(B.rows(), 0);
  if (G_H) {
    *G_H = Tensor3::FromMatricized(-2.0 * E * K2.transpose(), H.dim2(), H.dim3());
    G_H->unfolded() += 2.0 * lambda * H.unfolded();
  }
  return value;
}

double gasopinf_objective(const OpInfData& data, const StableLatentParams& p, double lambda, ParamGradients* grad,
                          Matrix* grad_B) {
  const AssembledTensors t = assemble(p);
  Matrix GA;
  Tensor3 GH;
  const bool want = grad != nullptr;
  const double v = opinf_residual(data, t.A, t.H, p.B, lambda, want ? &GA : nullptr, want ? &GH : nullptr, grad_B);
  if (want) *grad = pullback_gradients(p, t, GA, GH);
  return v;
}

namespace {

ProductPoint params_point(const StableLatentParams& p) {
  ProductPoint x;
  x.euclid = {p.K, p.R, p.Q, p.S.unfolded(), p.B};
  return x;
}

StableLatentParams point_params(const ProductPoint& x) {
  const Index r = x.euclid[0].rows();
  return {x.euclid[0], x.euclid[1], x.euclid[2], Tensor3::FromMatricized(x.euclid[3], r, r), x.euclid[4]};
}

}  // namespace

GasOpInfResult gasopinf_train(const OpInfData& data, const StableLatentParams& init, double lambda,
                              const OptimizerOptions& opt) {
  data.validate();
  init.validate();
  require(init.r() == data.Z.rows(), "gasopinf: latent dimension mismatch");
  require(init.m() == data.U.rows(), "gasopinf: input dimension mismatch");
  const Objective obj = [&](const ProductPoint& x, TangentVector* g) -> double {
    StableLatentParams p = point_params(x);
    try {
      if (!g) return gasopinf_objective(data, p, lambda);
      ParamGradients pg;
      Matrix GB;
      const double v = gasopinf_objective(data, p, lambda, &pg, &GB);
      g->grassmann.resize(0, 0);
      g->stiefel.resize(0, 0);
      g->euclid = {pg.K, pg.R, pg.Q, pg.S.unfolded(), GB};
      return v;
    } catch (const SingularMatrixError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const MinimizeResult res = minimize(obj, params_point(init), opt);
  GasOpInfResult out;
  out.params = point_params(res.point);
  out.initial_objective = res.history.front().loss;
  out.final_objective = res.loss;
  out.history = res.history;
  return out;
}

StableLatentParams gasopinf_initial(const RawTensors& g) {
  return stable_params_identity_q(g.A, g.H, g.B);
}

Matrix finite_difference_derivative(const Matrix& Z, double h) {
  const Index N = Z.cols();
  if (N < 5) throw ConfigError("finite differences need at least five samples");
  Matrix D(Z.rows(), N);
  const double c = 1.0 / (12.0 * h);
  D.col(0) = c * (-25.0 * Z.col(0) + 48.0 * Z.col(1) - 36.0 * Z.col(2) + 16.0 * Z.col(3) - 3.0 * Z.col(4));
  D.col(1) = c * (-3.0 * Z.col(0) - 10.0 * Z.col(1) + 18.0 * Z.col(2) - 6.0 * Z.col(3) + Z.col(4));
  for (Index i = 2; i + 2 < N; ++i) {
    D.col(i) = c * (Z.col(i - 2) - 8.0 * Z.col(i - 1) + 8.0 * Z.col(i + 1) - Z.col(i + 2));
  }
  const Index e = N - 1;
  D.col(e - 1) = -c * (-3.0 * Z.col(e) - 10.0 * Z.col(e - 1) + 18.0 * Z.col(e - 2) - 6.0 * Z.col(e - 3) + Z.col(e - 4));
  D.col(e) = -c * (-25.0 * Z.col(e) + 48.0 * Z.col(e - 1) - 36.0 * Z.col(e - 2) + 16.0 * Z.col(e - 3) - 3.0 * Z.col(e - 4));
  return D;
}

OpInfData latent_derivatives(const SnapshotDataset& d, const Matrix& basis, const QuadraticFOM* fom,
                             bool allow_stored) {
  d.validate();
  require(basis.rows() == d.n(), "latent_derivatives: basis must have n rows");
  const Index N = d.num_samples(), r = basis.cols();
  OpInfData out;
  out.Z.resize(r, N * d.size());
  out.Zdot.resize(r, N * d.size());
  out.U.resize(d.m(), N * d.size());
  std::optional<FomOperator> op;
  if (fom) op.emplace(*fom);

  double h = 0.0;
  auto grid_step = [&] {
    if (N < 5) throw ConfigError("latent_derivatives: fewer than five samples forbids finite differences");
    const double step = (d.times[N - 1] - d.times[0]) / static_cast<double>(N - 1);
    for (Index i = 1; i < N; ++i) {
      if (std::abs((d.times[i] - d.times[i - 1]) - step) > 1e-9 * std::max(1.0, std::abs(step))) {
        throw SchemaError("latent_derivatives: finite differences require a uniform sample grid");
      }
    }
    return step;
  };
  for (Index j = 0; j < d.size(); ++j) {
    const auto& t = d.trajectories[j];
    if (t.X.size() == 0) throw SchemaError("latent_derivatives: trajectory " + std::to_string(j) + " has no states");
    const Matrix Z = basis.transpose() * t.X;
    out.Z.middleCols(j * N, N) = Z;
    out.U.middleCols(j * N, N) = t.U;
    Matrix Zd;
    if (op) {
      Matrix F(d.n(), N);
      for (Index i = 0; i < N; ++i) F.col(i) = op->rhs(t.X.col(i), t.U.col(i));
      Zd = basis.transpose() * F;
    } else if (allow_stored && t.Xdot.size() > 0) {
      Zd = basis.transpose() * t.Xdot;
    } else {
      if (h == 0.0) h = grid_step();
      Zd = finite_difference_derivative(Z, h);
    }
    out.Zdot.middleCols(j * N, N) = Zd;
  }
  return out;
}

}  // namespace gasrom
