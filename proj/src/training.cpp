#include "gasrom/training.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace gasrom {

Index SnapshotDataset::n() const { return trajectories.empty() ? 0 : trajectories[0].x0.size(); }
Index SnapshotDataset::m() const { return trajectories.empty() ? 0 : trajectories[0].U.rows(); }
Index SnapshotDataset::p() const { return trajectories.empty() ? 0 : trajectories[0].Y.rows(); }

void SnapshotDataset::validate() const {
  if (trajectories.empty()) throw SchemaError("dataset: no trajectories");
  const Index N = times.size();
  if (N < 1) throw SchemaError("dataset: empty sample grid");
  for (Index i = 1; i < N; ++i) {
    if (!(times[i] > times[i - 1])) {
      throw SchemaError("dataset: sample times must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  const Index n0 = n(), m0 = m(), p0 = p();
  if (output_map && (output_map->rows() != p0 || output_map->cols() != n0)) {
    throw SchemaError("dataset: output map must be p x n");
  }
  if (!output_map && p0 != n0) throw SchemaError("dataset: full-state outputs need p == n");
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    const auto& t = trajectories[j];
    const std::string who = "dataset: trajectory " + std::to_string(j);
    if (t.x0.size() != n0) throw SchemaError(who + " has a different state dimension");
    if (t.Y.rows() != p0 || t.Y.cols() != N) throw SchemaError(who + ": outputs must be p x N");
    if (t.U.rows() != m0 || t.U.cols() != N) throw SchemaError(who + ": inputs must be m x N");
    if (t.X.size() > 0 && (t.X.rows() != n0 || t.X.cols() != N)) throw SchemaError(who + ": states must be n x N");
    if (t.Xdot.size() > 0 && (t.Xdot.rows() != n0 || t.Xdot.cols() != N)) {
      throw SchemaError(who + ": derivatives must be n x N");
    }
    if (!(t.weight > 0) || !std::isfinite(t.weight)) throw SchemaError(who + ": weight must be positive");
    if (!t.Y.allFinite() || !t.U.allFinite() || !t.X.allFinite() || !t.x0.allFinite()) {
      throw SchemaError(who + ": non-finite values");
    }
    if (t.input.dim() != m0) throw SchemaError(who + ": input signal dimension differs from m");
  }
}

SnapshotDataset SnapshotDataset::truncated(double t_final) const {
  Index N = 0;
  while (N < times.size() && times[N] <= t_final * (1 + 1e-12)) ++N;
  if (N < 2) throw ConfigError("dataset: horizon " + std::to_string(t_final) + " keeps fewer than two samples");
  SnapshotDataset out;
  out.times = times.head(N);
  out.output_map = output_map;
  out.weight_convention = weight_convention;
  for (const auto& t : trajectories) {
    SnapshotTrajectory c;
    c.X = t.X.size() > 0 ? Matrix(t.X.leftCols(N)) : Matrix();
    c.U = t.U.leftCols(N);
    c.Y = t.Y.leftCols(N);
    c.Xdot = t.Xdot.size() > 0 ? Matrix(t.Xdot.leftCols(N)) : Matrix();
    c.x0 = t.x0;
    c.weight = t.weight;
    c.input = t.input;
    out.trajectories.push_back(std::move(c));
  }
  return out;
}

void ensure_inputs(SnapshotDataset& d) {
  for (auto& t : d.trajectories) {
    if (t.input.dim() != t.U.rows()) t.input = InputSignal::sampled(d.times, t.U);
  }
}

namespace {

// Runs fn(j) for every trajectory, split into contiguous chunks over threads.
template <typename Fn>
void parallel_for(Index count, int threads, Fn fn) {
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (nt == 1) {
    for (Index j = 0; j < count; ++j) fn(j);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nt);
  for (int w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index j = w; j < count; j += nt) fn(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_shapes(const RomModel& m, const SnapshotDataset& d) {
  d.validate();
  require(d.n() == m.n(), "loss: dataset and model disagree on n");
  require(d.p() == m.p(), "loss: dataset and model disagree on p");
  require(d.m() == m.m(), "loss: dataset and model disagree on m");
}

double trajectory_loss(const RomModel& m, const SnapshotTrajectory& t, const Vector& times, const SimOptions& sim) {
  const LatentTrajectory traj = simulate(m, t.x0, t.input, times, sim);
  return (t.Y - traj.Y).squaredNorm() / t.weight;
}

struct Accum {
  double loss = 0.0;
  Matrix P;     // sum_i g_i v_i^T, n x r
  Matrix Gpsi;  // initial-condition part, n x r
  Matrix GA, GB;
  Tensor3 GH;

  void init(Index n, Index r, Index m) {
    P = Matrix::Zero(n, r);
    Gpsi = Matrix::Zero(n, r);
    GA = Matrix::Zero(r, r);
    GB = Matrix::Zero(r, m);
    GH = Tensor3::Zero(r);
  }
  void add(const Accum& o) {
    loss += o.loss;
    P += o.P;
    Gpsi += o.Gpsi;
    GA += o.GA;
    GB += o.GB;
    GH += o.GH;
  }
};

// G += w (x) s (x) s
void add_outer3(Tensor3& G, const Vector& w, const Vector& s, double scale = 1.0) {
  const Matrix ws = scale * w * s.transpose();
  for (Index q = 0; q < s.size(); ++q) {
    if (s[q] != 0.0) G.slice(q) += s[q] * ws;
  }
}

Vector jt_times(const LatentDynamics& d, const Vector& s, const Vector& w) {
  return d.jacobian(s).transpose() * w;
}

class Backward {
 public:
  Backward(const LatentDynamics& d, const InputSignal& u, const Vector& times, const std::vector<int>& k,
           const LatentTrajectory& traj, Accum& acc)
      : d_(d), u_(u), times_(times), k_(k), traj_(traj), acc_(acc), m_(d.m()) {}

  // Discrete adjoint of one RK4 step taken from grid state z at time t.
  void discrete_step(Vector& lam, const Vector& z, double t, double h) {
    const Vector u1 = u_(t), u2 = u_(t + 0.5 * h), u4 = u_(t + h);
    const Vector& s1 = z;
    const Vector k1 = d_.rhs(s1, u1);
    const Vector s2 = z + 0.5 * h * k1;
    const Vector k2 = d_.rhs(s2, u2);
    const Vector s3 = z + 0.5 * h * k2;
    const Vector k3 = d_.rhs(s3, u2);
    const Vector s4 = z + h * k3;

    const Vector g4 = (h / 6.0) * lam;
    const Vector a4 = jt_times(d_, s4, g4);
    const Vector g3 = (h / 3.0) * lam + h * a4;
    const Vector a3 = jt_times(d_, s3, g3);
    const Vector g2 = (h / 3.0) * lam + 0.5 * h * a3;
    const Vector a2 = jt_times(d_, s2, g2);
    const Vector g1 = (h / 6.0) * lam + 0.5 * h * a2;
    const Vector a1 = jt_times(d_, s1, g1);

    accumulate(g1, s1, u1);
    accumulate(g2, s2, u2);
    accumulate(g3, s3, u2);
    accumulate(g4, s4, u4);
    lam += a1 + a2 + a3 + a4;
  }

  // Backward RK4 of d(lam)/d(tau) = J^T lam on [t, t + h] with the state
  // interpolated by cubic Hermite, plus trapezoidal accumulation.
  void continuous_step(Vector& lam, const Vector& z0, const Vector& z1, double t, double h) {
    const Vector u0 = u_(t), u1 = u_(t + h);
    const Vector f0 = d_.rhs(z0, u0), f1 = d_.rhs(z1, u1);
    const Vector zm = 0.5 * (z0 + z1) + (h / 8.0) * (f0 - f1);
    const Vector lam1 = lam;
    const Vector k1 = jt_times(d_, z1, lam);
    const Vector k2 = jt_times(d_, zm, lam + 0.5 * h * k1);
    const Vector k3 = jt_times(d_, zm, lam + 0.5 * h * k2);
    const Vector k4 = jt_times(d_, z0, lam + h * k3);
    lam += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    accumulate(0.5 * h * lam1, z1, u1);
    accumulate(0.5 * h * lam, z0, u0);
  }

  // Sweeps from sample `last` down to t0 injecting jumps.col(i) at each
  // sample; returns lambda at t0.
  Vector sweep(const Matrix& jumps, Index last, AdjointScheme scheme) {
    Vector lam = jumps.col(last);
    for (Index i = last - 1; i >= 0; --i) {
      const double h = (times_[i + 1] - times_[i]) / k_[i];
      for (int s = k_[i] - 1; s >= 0; --s) {
        const Index g = traj_.offsets[i] + s;
        const double t = times_[i] + s * h;
        if (scheme == AdjointScheme::kDiscrete) {
          discrete_step(lam, traj_.grid_z.col(g), t, h);
        } else {
          continuous_step(lam, traj_.grid_z.col(g), traj_.grid_z.col(g + 1), t, h);
        }
      }
      lam += jumps.col(i);
    }
    return lam;
  }

 private:
  void accumulate(const Vector& w, const Vector& s, const Vector& u) {
    acc_.GA.noalias() += w * s.transpose();
    add_outer3(acc_.GH, w, s);
    if (m_ > 0) acc_.GB.noalias() += w * u.transpose();
  }

  const LatentDynamics& d_;
  const InputSignal& u_;
  const Vector& times_;
  const std::vector<int>& k_;
  const LatentTrajectory& traj_;
  Accum& acc_;
  Index m_;
};

Accum trajectory_gradient(const RomModel& m, const SnapshotTrajectory& t, const Vector& times,
                          const GradientOptions& opts) {
  SimOptions sim = opts.sim;
  sim.keep_grid = true;
  sim.throw_on_blowup = true;
  const LatentTrajectory traj = simulate(m, t.x0, t.input, times, sim);
  const std::vector<int> k = substeps(times, sim);
  const Index N = times.size();
  const double w = 1.0 / t.weight;

  Accum acc;
  acc.init(m.n(), m.r(), m.m());
  const Matrix E = t.Y - traj.Y;  // p x N
  acc.loss = w * E.squaredNorm();
  // dJ/dz_i = (C D)^T (-2 w e_i);  dJ/dD = sum_i g_i z_i^T with g_i = -2 w C^T e_i
  const Matrix jumps = m.output_decoder().transpose() * (-2.0 * w * E);
  const Matrix Gn = m.output_map() ? Matrix(m.output_map()->transpose() * (-2.0 * w * E)) : Matrix(-2.0 * w * E);
  const Matrix V = m.projection().gram_lu().solve(traj.Z);  // (Psi^T Phi)^{-1} z_i
  acc.P.noalias() = Gn * V.transpose();

  Backward bw(m.dynamics(), t.input, times, k, traj, acc);
  Vector lam0 = Vector::Zero(m.r());
  if (opts.separate_adjoints) {
    for (Index i = 0; i < N; ++i) {
      Matrix single = Matrix::Zero(m.r(), N);
      single.col(i) = jumps.col(i);
      lam0 += bw.sweep(single, i, opts.scheme);
    }
  } else {
    lam0 = bw.sweep(jumps, N - 1, opts.scheme);
  }
  acc.Gpsi.noalias() = t.x0 * lam0.transpose();
  return acc;
}

}  // namespace

double loss(const RomModel& m, const SnapshotDataset& d, const SimOptions& sim, int threads) {
  check_shapes(m, d);
  std::vector<double> parts(d.trajectories.size(), 0.0);
  try {
    parallel_for(d.size(), threads, [&](Index j) {
      parts[j] = trajectory_loss(m, d.trajectories[j], d.times, sim);
    });
  } catch (const BlowUpError&) {
    return std::numeric_limits<double>::infinity();
  }
  double total = 0.0;
  for (double v : parts) total += v;
  return total;
}

LossAndGradient gradient(const RomModel& m, const SnapshotDataset& d, const GradientOptions& opts) {
  check_shapes(m, d);
  std::vector<Accum> parts(d.trajectories.size());
  parallel_for(d.size(), opts.threads, [&](Index j) {
    parts[j] = trajectory_gradient(m, d.trajectories[j], d.times, opts);
  });
  Accum acc;
  acc.init(m.n(), m.r(), m.m());
  for (const auto& a : parts) acc.add(a);  // fixed order: independent of thread count

  const ProjectionPair& pp = m.projection();
  const Matrix& Phi = pp.phi();
  const Matrix& Psi = pp.psi();
  LossAndGradient out;
  out.loss = acc.loss;
  AmbientGradient& g = out.grad;
  // dJ/dPhi = (I - Psi M^{-T} Phi^T) P,  dJ/dPsi = -Phi P^T D + x0 lam0^T terms
  g.G_phi_euclid = acc.P - Psi * pp.gram_lu().solve_transposed(Phi.transpose() * acc.P);
  g.G_phi = g.G_phi_euclid * (Phi.transpose() * Phi);
  g.G_psi = acc.Gpsi - Phi * (acc.P.transpose() * pp.decoder());
  g.G_A = std::move(acc.GA);
  g.G_H = std::move(acc.GH);
  g.G_B = std::move(acc.GB);
  if (m.dynamics().is_stable()) {
    g.params = pullback_gradients(m.dynamics().params(), m.dynamics().assembled(), g.G_A, g.G_H);
  }
  return out;
}

PenaltyValue stability_penalty(const Matrix& A, double t_f, double weight) {
  require(A.rows() == A.cols(), "stability_penalty: A must be square");
  if (!(t_f > 0)) throw ConfigError("stability_penalty: t_f must be positive");
  const Index r = A.rows();
  const Matrix F = (t_f * A).exp();
  if (!F.allFinite()) {
    throw ConvergenceError("stability_penalty: exp(A t_f) overflows (spectral abscissa " +
                           std::to_string(spectral_abscissa(A)) + ")");
  }
  PenaltyValue out;
  out.value = weight * F.squaredNorm();
  // Frechet derivative of exp at t A^T applied to F, from the block exponential.
  Matrix block = Matrix::Zero(2 * r, 2 * r);
  block.topLeftCorner(r, r) = t_f * A.transpose();
  block.bottomRightCorner(r, r) = t_f * A.transpose();
  block.topRightCorner(r, r) = F;
  const Matrix eb = block.exp();
  out.G_A = (2.0 * weight * t_f) * eb.topRightCorner(r, r);
  return out;
}

ProductPoint model_point(const RomModel& m) {
  ProductPoint p;
  p.grassmann = GrassmannPoint(m.projection().phi());
  p.stiefel = StiefelPoint(m.projection().psi());
  const LatentDynamics& d = m.dynamics();
  if (d.is_stable()) {
    const StableLatentParams& s = d.params();
    p.euclid = {s.K, s.R, s.Q, s.S.unfolded(), s.B};
  } else {
    p.euclid = {d.A(), d.H().unfolded(), d.B()};
  }
  return p;
}

RomModel model_from_point(const RomModel& like, const ProductPoint& p) {
  const Index r = like.r();
  ProjectionPair pp(p.grassmann->frame(), p.stiefel->frame());
  LatentDynamics dyn;
  if (like.dynamics().is_stable()) {
    require(p.euclid.size() == 5, "model_from_point: stable layout needs five factors");
    StableLatentParams s{p.euclid[0], p.euclid[1], p.euclid[2], Tensor3::FromMatricized(p.euclid[3], r, r),
                         p.euclid[4]};
    dyn = LatentDynamics::stable(std::move(s));
  } else {
    require(p.euclid.size() == 3, "model_from_point: raw layout needs three factors");
    dyn = LatentDynamics::raw(p.euclid[0], Tensor3::FromMatricized(p.euclid[1], r, r), p.euclid[2]);
  }
  return RomModel(std::move(pp), std::move(dyn), like.output_map());
}

TangentVector gradient_tangent(const RomModel& m, const AmbientGradient& g) {
  TangentVector t;
  t.grassmann = g.G_phi_euclid;
  t.stiefel = g.G_psi;
  if (m.dynamics().is_stable()) {
    const ParamGradients& pg = *g.params;
    t.euclid = {pg.K, pg.R, pg.Q, pg.S.unfolded(), g.G_B};
  } else {
    t.euclid = {g.G_A, g.G_H.unfolded(), g.G_B};
  }
  return t;
}

std::vector<TrainBlock> TrainConfig::default_blocks() {
  return {{BlockKind::kProjection, 50},
          {BlockKind::kTensors, 50},
          {BlockKind::kProjection, 50},
          {BlockKind::kTensors, 50},
          {BlockKind::kJoint, 50}};
}

void TrainConfig::validate() const {
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (!(horizons[i] > 0)) throw ConfigError("train: horizons must be positive");
    if (i > 0 && !(horizons[i] > horizons[i - 1])) throw ConfigError("train: horizons must be strictly increasing");
  }
  if (blocks.empty()) throw ConfigError("train: at least one block is required");
  for (const auto& b : blocks) {
    if (b.iterations <= 0) throw ConfigError("train: block iteration counts must be positive");
  }
  if (penalty_weight < 0) throw ConfigError("train: penalty weight must be non-negative");
  if (penalty_weight > 0 && !(penalty_tf > 0)) throw ConfigError("train: penalty t_f must be positive");
  if (gradient.sim.steps_per_interval < 1 && gradient.sim.max_step <= 0) {
    throw ConfigError("train: integrator needs a positive step count");
  }
  if (optimizer.lbfgs.memory < 1) throw ConfigError("train: L-BFGS memory must be positive");
}

Objective training_objective(const RomModel& like, const SnapshotDataset& d, const TrainConfig& cfg) {
  return [like, &d, cfg](const ProductPoint& p, TangentVector* grad) -> double {
    const double inf = std::numeric_limits<double>::infinity();
    RomModel m;
    try {
      m = model_from_point(like, p);
    } catch (const SingularMatrixError&) {
      return inf;
    }
    const bool penalize = cfg.penalty_weight > 0 && !m.dynamics().is_stable();
    double value = 0.0;
    PenaltyValue pen;
    if (penalize) {
      try {
        pen = stability_penalty(m.dynamics().A(), cfg.penalty_tf, cfg.penalty_weight);
      } catch (const ConvergenceError&) {
        return inf;
      }
      value += pen.value;
    }
    if (!grad) {
      const double j = loss(m, d, cfg.gradient.sim, cfg.gradient.threads);
      return value + j;
    }
    LossAndGradient lg;
    try {
      lg = gradient(m, d, cfg.gradient);
    } catch (const BlowUpError&) {
      return inf;
    }
    if (penalize) lg.grad.G_A += pen.G_A;
    *grad = gradient_tangent(m, lg.grad);
    return value + lg.loss;
  };
}

namespace {

FactorMask mask_for(BlockKind kind) {
  switch (kind) {
    case BlockKind::kProjection:
      return FactorMask::projection_only();
    case BlockKind::kTensors:
      return FactorMask::tensors_only();
    case BlockKind::kJoint:
      break;
  }
  return {};
}

}  // namespace

TrainResult optimize(const RomModel& m, const SnapshotDataset& d, const TrainConfig& cfg) {
  cfg.validate();
  check_shapes(m, d);
  TrainResult out;
  out.model = m;
  out.initial_loss = loss(m, d, cfg.gradient.sim, cfg.gradient.threads);
  std::vector<double> horizons = cfg.horizons;
  if (horizons.empty()) horizons.push_back(d.times[d.times.size() - 1]);
  for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
    const SnapshotDataset dh = d.truncated(horizons[hi]);
    for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
      const TrainBlock& b = cfg.blocks[bi];
      OptimizerOptions opts = cfg.optimizer;
      opts.max_iterations = b.iterations;
      const Objective obj = training_objective(out.model, dh, cfg);
      const MinimizeResult res = minimize(obj, model_point(out.model), opts, mask_for(b.kind));
      out.model = model_from_point(out.model, res.point);
      for (const auto& rec : res.history) {
        if (rec.iteration == 0 && !(hi == 0 && bi == 0)) continue;
        out.history.push_back({static_cast<int>(hi), horizons[hi], static_cast<int>(bi), b.kind, rec.iteration,
                               rec.loss, rec.grad_norm});
      }
    }
  }
  out.final_loss = loss(out.model, d, cfg.gradient.sim, cfg.gradient.threads);
  return out;
}

TrainResult optimize_with_stability_trigger(const RomModel& m, const SnapshotDataset& d, TrainConfig cfg,
                                            double penalty_weight, int max_reruns) {
  if (m.dynamics().is_stable()) return optimize(m, d, cfg);
  cfg.penalty_weight = 0.0;
  TrainResult res = optimize(m, d, cfg);
  const double initial = res.initial_loss;
  TrainConfig rerun = cfg;
  rerun.horizons.clear();
  rerun.penalty_weight = penalty_weight;
  for (int k = 0; k < max_reruns && spectral_abscissa(res.model.dynamics().A()) >= 0.0; ++k) {
    // Keep exp(A t_f) representable at the current iterate.
    const double abscissa = spectral_abscissa(res.model.dynamics().A());
    rerun.penalty_tf = std::min(cfg.penalty_tf, 300.0 / std::max(abscissa, 1e-12));
    std::vector<TrainRecord> prior = std::move(res.history);
    res = optimize(res.model, d, rerun);
    for (auto& r : res.history) r.horizon += 1000 * (k + 1);
    prior.insert(prior.end(), res.history.begin(), res.history.end());
    res.history = std::move(prior);
    res.penalty_reruns = k + 1;
    rerun.penalty_weight *= 10.0;
  }
  res.initial_loss = initial;
  return res;
}

}  // namespace gasrom
