#include "gasrom/fom.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "gasrom/stability.hpp"

namespace gasrom {

void QuadraticFOM::validate() const {
  const Index nn = A.rows();
  if (A.cols() != nn || nn < 1) throw DimensionError("fom: A must be square and non-empty");
  if (H.dim1() != nn || H.dim2() != nn || H.dim3() != nn) throw DimensionError("fom: H must be n x n x n");
  if (B.rows() != nn) throw DimensionError("fom: B must have n rows");
  if (C.cols() != nn || C.rows() < 1) throw DimensionError("fom: C must be p x n");
  if (energy_metric.size() > 0 && (energy_metric.rows() != nn || energy_metric.cols() != nn)) {
    throw DimensionError("fom: energy metric must be n x n");
  }
  if (!A.allFinite() || !H.all_finite() || !B.allFinite() || !C.allFinite()) throw Error("fom: non-finite operator");
}

FomOperator::FomOperator(const QuadraticFOM& f) : f_(f) {
  f.validate();
  for (Index j = 0; j < f.n(); ++j) {
    if (!f.H.lateral(j).isZero(0.0)) active_.push_back(j);
  }
}

Vector FomOperator::rhs(const Vector& x, const Vector& u) const {
  Vector out = f_.A * x;
  for (Index j : active_) {
    if (x[j] != 0.0) out.noalias() += x[j] * (f_.H.lateral(j) * x);
  }
  if (f_.m() > 0) out.noalias() += f_.B * u;
  return out;
}

Matrix FomOperator::jacobian(const Vector& x) const {
  // d/dx sum_j x_j H(:, j, :) x = sum_j x_j H(:, j, :) + [H(:, j, :) x]_j columns
  Matrix J = f_.A;
  for (Index j : active_) {
    const auto L = f_.H.lateral(j);
    if (x[j] != 0.0) J += x[j] * L;
    J.col(j) += L * x;
  }
  return J;
}

QuadraticFOM toy_model(double nu) {
  QuadraticFOM f;
  f.A = Eigen::Vector3d(-1.0, -2.0, -5.0).asDiagonal();
  f.H = Tensor3::Zero(3);
  f.H(0, 0, 2) = f.H(0, 2, 0) = 0.5 * nu;
  f.H(1, 1, 2) = f.H(1, 2, 1) = 0.5 * nu;
  f.B = Matrix::Ones(3, 1);
  f.C = Matrix::Ones(1, 3);
  return f;
}

Vector toy_steady_state(double nu, double gamma) {
  const double x3 = gamma / 5.0;
  const double d1 = 1.0 - nu * x3, d2 = 2.0 - nu * x3;
  if (!(d1 > 0.0) || !(d2 > 0.0)) {
    throw ConvergenceError("toy_steady_state: no stable fixed point for gamma = " + std::to_string(gamma));
  }
  return Eigen::Vector3d(gamma / d1, gamma / d2, x3);
}

FomTrajectory simulate_fom(const QuadraticFOM& f, const Vector& x0, const InputSignal& u, const Vector& times,
                           const SimOptions& opts) {
  const FomOperator op(f);
  require(x0.size() == f.n(), "simulate_fom: x0 must have n entries");
  require(u.dim() == f.m(), "simulate_fom: input dimension must equal m");
  const Index N = times.size();
  require(N >= 1, "simulate_fom: empty time grid");
  const std::vector<int> k = substeps(times, opts);

  FomTrajectory out;
  out.X.resize(f.n(), N);
  out.U.resize(f.m(), N);
  out.Xdot.resize(f.n(), N);
  Vector x = x0;
  Index reached = N;
  auto record = [&](Index i) {
    out.X.col(i) = x;
    out.U.col(i) = u(times[i]);
    out.Xdot.col(i) = op.rhs(x, out.U.col(i));
  };
  record(0);
  for (Index i = 0; i + 1 < N && reached == N; ++i) {
    const double h = (times[i + 1] - times[i]) / k[i];
    for (int s = 0; s < k[i]; ++s) {
      const double t = times[i] + s * h;
      const Vector u1 = u(t), u2 = u(t + 0.5 * h), u4 = u(t + h);
      const Vector k1 = op.rhs(x, u1);
      const Vector k2 = op.rhs(x + 0.5 * h * k1, u2);
      const Vector k3 = op.rhs(x + 0.5 * h * k2, u2);
      const Vector k4 = op.rhs(x + h * k3, u4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite() || x.norm() > opts.blowup_norm) {
        const double tb = (s + 1 == k[i]) ? times[i + 1] : t + h;
        if (opts.throw_on_blowup) throw BlowUpError("simulate_fom: state blew up", tb);
        out.blew_up = true;
        out.blowup_time = tb;
        reached = i + 1;
        break;
      }
    }
    if (reached == N) record(i + 1);
  }
  out.times = times.head(reached);
  out.X.conservativeResize(Eigen::NoChange, reached);
  out.U.conservativeResize(Eigen::NoChange, reached);
  out.Xdot.conservativeResize(Eigen::NoChange, reached);
  out.Y = f.C * out.X;
  return out;
}

Vector fom_equilibrium(const QuadraticFOM& f, const Vector& u, const Vector& x_start, int max_iter) {
  const FomOperator op(f);
  Vector x = x_start;
  for (int it = 0; it < max_iter; ++it) {
    const Vector r = op.rhs(x, u);
    if (r.norm() <= 1e-13 * std::max(1.0, x.norm())) return x;
    x -= op.jacobian(x).partialPivLu().solve(r);
    if (!x.allFinite()) break;
  }
  throw ConvergenceError("fom_equilibrium: Newton iteration did not converge");
}

const char* to_string(WeightConvention w) {
  switch (w) {
    case WeightConvention::kUnit:
      return "unit";
    case WeightConvention::kSteadyState:
      return "steady_state";
    case WeightConvention::kEnergy:
      return "energy";
  }
  return "unit";
}

WeightConvention weight_convention_from_string(const std::string& s) {
  if (s == "unit") return WeightConvention::kUnit;
  if (s == "steady_state") return WeightConvention::kSteadyState;
  if (s == "energy") return WeightConvention::kEnergy;
  throw ConfigError("unknown weight convention '" + s + "' (expected unit, steady_state or energy)");
}

Vector uniform_grid(double t_end, Index num_samples) {
  if (num_samples < 2) throw ConfigError("grid: at least two samples are required");
  if (!(t_end > 0)) throw ConfigError("grid: t_end must be positive");
  Vector t(num_samples);
  for (Index i = 0; i < num_samples; ++i) t[i] = t_end * static_cast<double>(i) / static_cast<double>(num_samples - 1);
  return t;
}

SnapshotDataset make_dataset(const QuadraticFOM& f, const std::vector<Vector>& x0s,
                             const std::vector<InputSignal>& inputs, const Vector& times, WeightConvention weights,
                             const SimOptions& sim, int threads) {
  require(x0s.size() == inputs.size(), "make_dataset: one input per initial condition");
  if (x0s.empty()) throw ConfigError("make_dataset: no trajectories requested");
  const Index count = static_cast<Index>(x0s.size());
  std::vector<FomTrajectory> runs(count);
  SimOptions s = sim;
  s.throw_on_blowup = true;
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    auto work = [&](int w) {
      try {
        for (Index j = w; j < count; j += nt) runs[j] = simulate_fom(f, x0s[j], inputs[j], times, s);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (nt == 1) {
      work(0);
    } else {
      for (int w = 0; w < nt; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SnapshotDataset d;
  d.times = times;
  if (!(f.C.rows() == f.n() && f.C.isIdentity(0.0))) d.output_map = f.C;
  d.weight_convention = to_string(weights);
  const double N = static_cast<double>(times.size());
  for (Index j = 0; j < count; ++j) {
    SnapshotTrajectory t;
    t.X = std::move(runs[j].X);
    t.U = std::move(runs[j].U);
    t.Y = std::move(runs[j].Y);
    t.Xdot = std::move(runs[j].Xdot);
    t.x0 = x0s[j];
    t.input = inputs[j];
    double alpha = 1.0;
    if (weights == WeightConvention::kSteadyState) {
      // equilibrium under the final input value, reached from the last sample
      const Vector xbar = fom_equilibrium(f, inputs[j](times[times.size() - 1]), t.X.col(t.X.cols() - 1));
      alpha = static_cast<double>(count) * N * (f.C * xbar).squaredNorm();
    } else if (weights == WeightConvention::kEnergy) {
      alpha = t.Y.colwise().squaredNorm().sum() / N;
    }
    t.weight = alpha < kDegenerateWeight ? 1.0 : alpha;
    d.trajectories.push_back(std::move(t));
  }
  d.validate();
  return d;
}

SnapshotDataset make_training_set(const QuadraticFOM& f, const TrainingSetSpec& spec) {
  if (spec.amplitudes.empty()) throw ConfigError("training set: amplitude list is empty");
  f.validate();
  const Vector times = uniform_grid(spec.t_end, spec.num_samples);
  std::vector<Vector> x0s;
  std::vector<InputSignal> inputs;
  for (double a : spec.amplitudes) {
    if (!std::isfinite(a)) throw ConfigError("training set: amplitudes must be finite");
    if (spec.protocol == Protocol::kStep) {
      x0s.push_back(Vector::Zero(f.n()));
      inputs.push_back(InputSignal::step(Vector::Constant(f.m(), a)));
    } else {
      x0s.push_back(a * (f.B * Vector::Ones(f.m())));
      inputs.push_back(InputSignal::zero(f.m()));
    }
  }
  return make_dataset(f, x0s, inputs, times, spec.weights, spec.sim, spec.threads);
}

QuadraticFOM synthetic_nonnormal_fom(Index n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("synthetic_nonnormal_fom: n must be at least 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto gaussian = [&](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
    return m;
  };

  // Upper-triangular core: 2x2 shear blocks [-a c; 0 -b].
  Matrix T = Matrix::Zero(n, n);
  const Index pairs = n / 2;
  for (Index k = 0; k < pairs; ++k) {
    const Index i = 2 * k;
    const double a = 0.15 + 0.25 * unif(rng);
    const double b = 0.6 + 0.9 * unif(rng);
    const double c = k == 0 ? 25.0 : 2.0 + 6.0 * unif(rng);
    T(i, i) = -a;
    T(i + 1, i + 1) = -b;
    T(i, i + 1) = c;
  }
  if (n % 2 == 1) T(n - 1, n - 1) = -(0.5 + unif(rng));
  const Matrix U = orthonormalize(gaussian(n, n));

  QuadraticFOM f;
  f.A = U * T * U.transpose();
  f.energy_metric = sym(solve_lyapunov(f.A, Matrix::Identity(n, n)));

  // Input drives the second state of the first few pairs.
  Vector v = Vector::Zero(n);
  const Index driven = std::max<Index>(1, std::min<Index>(5, pairs));
  for (Index k = 0; k < driven; ++k) v[std::min(2 * k + 1, n - 1)] = k == 0 ? 1.0 : 0.3 + 0.4 * unif(rng);
  f.B = U * v.normalized();
  f.C = Matrix::Identity(n, n);

  // H(:, j, :) = (S_j - S_j^T) P on a few lateral slices: x^T P (H:xx) = 0.
  f.H = Tensor3::Zero(n);
  const Index active = std::min<Index>(8, n);
  std::vector<Index> idx(n);
  for (Index j = 0; j < n; ++j) idx[j] = j;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (Index a = 0; a < active; ++a) {
    const Matrix S = gaussian(n, n);
    Matrix W = (S - S.transpose()) * f.energy_metric;
    W *= 4.0 / Eigen::JacobiSVD<Matrix>(W).singularValues()[0];
    f.H.lateral(idx[a]) = W;
  }
  f.validate();
  return f;
}

double transient_peak(const Matrix& A, double t_max, int samples) {
  const Matrix step = ((t_max / samples) * A).exp();
  Matrix E = Matrix::Identity(A.rows(), A.cols());
  double peak = 1.0;
  for (int i = 1; i <= samples; ++i) {
    E = step * E;
    peak = std::max(peak, Eigen::BDCSVD<Matrix>(E).singularValues()[0]);
  }
  return peak;
}

}  // namespace gasrom
