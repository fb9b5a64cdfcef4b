#include "gasrom/rom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

namespace gasrom {

InputSignal InputSignal::zero(Index m) {
  InputSignal s;
  s.dim_ = m;
  s.vec_ = Vector::Zero(m);
  return s;
}

InputSignal InputSignal::step(const Vector& amplitude, double t_on) {
  InputSignal s;
  s.kind_ = Kind::kStep;
  s.dim_ = amplitude.size();
  s.vec_ = amplitude;
  s.t_on_ = t_on;
  return s;
}

InputSignal InputSignal::sinusoid(std::vector<SinusoidTerm> terms, const Vector& direction) {
  InputSignal s;
  s.kind_ = Kind::kSinusoid;
  s.dim_ = direction.size();
  s.vec_ = direction;
  s.terms_ = std::move(terms);
  return s;
}

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string InputSignal::to_text() const {
  std::string out;
  switch (kind_) {
    case Kind::kZero:
      return "zero " + std::to_string(dim_);
    case Kind::kStep:
      out = "step " + fmt17(t_on_);
      for (Index i = 0; i < vec_.size(); ++i) out += " " + fmt17(vec_[i]);
      return out;
    case Kind::kSinusoid:
      out = "sinusoid " + std::to_string(dim_);
      for (Index i = 0; i < vec_.size(); ++i) out += " " + fmt17(vec_[i]);
      for (const auto& t : terms_) {
        out += " ; " + fmt17(t.amplitude) + " " + fmt17(t.frequency) + " " + fmt17(t.phase) + (t.cosine ? " cos" : " sin");
      }
      return out;
    case Kind::kSampled:
      return "sampled";
  }
  return "sampled";
}

InputSignal InputSignal::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  auto fail = [&](const std::string& why) { return SchemaError("input signal '" + text + "': " + why); };
  if (kind == "zero") {
    long m = -1;
    if (!(in >> m) || m < 0) throw fail("expected a dimension");
    return zero(m);
  }
  if (kind == "step") {
    double t_on;
    if (!(in >> t_on)) throw fail("expected t_on");
    std::vector<double> a;
    for (double v; in >> v;) a.push_back(v);
    if (a.empty()) throw fail("expected at least one amplitude");
    return step(Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size())), t_on);
  }
  if (kind == "sinusoid") {
    long m = -1;
    if (!(in >> m) || m < 1) throw fail("expected a dimension");
    Vector dir(m);
    for (long i = 0; i < m; ++i) {
      if (!(in >> dir[i])) throw fail("expected " + std::to_string(m) + " direction entries");
    }
    std::vector<SinusoidTerm> terms;
    std::string sep;
    while (in >> sep) {
      if (sep != ";") throw fail("expected ';' between terms");
      SinusoidTerm t;
      std::string fn;
      if (!(in >> t.amplitude >> t.frequency >> t.phase >> fn) || (fn != "sin" && fn != "cos")) {
        throw fail("terms are 'amplitude frequency phase sin|cos'");
      }
      t.cosine = fn == "cos";
      terms.push_back(t);
    }
    return sinusoid(std::move(terms), dir);
  }
  throw fail("unknown kind (expected zero, step or sinusoid)");
}

InputSignal InputSignal::sampled(Vector times, Matrix values) {
  require(times.size() >= 1 && values.cols() == times.size(),
          "InputSignal::sampled: need one column of values per time");
  for (Index i = 1; i < times.size(); ++i) {
    require(times[i] > times[i - 1], "InputSignal::sampled: times must be strictly increasing");
  }
  InputSignal s;
  s.kind_ = Kind::kSampled;
  s.dim_ = values.rows();
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

Vector InputSignal::operator()(double t) const {
  switch (kind_) {
    case Kind::kZero:
      return vec_;
    case Kind::kStep:
      return t >= t_on_ ? vec_ : Vector::Zero(dim_);
    case Kind::kSinusoid: {
      double v = 0.0;
      for (const auto& term : terms_) {
        const double arg = term.frequency * t + term.phase;
        v += term.amplitude * (term.cosine ? std::cos(arg) : std::sin(arg));
      }
      return v * vec_;
    }
    case Kind::kSampled: {
      const Index T = times_.size();
      if (t <= times_[0]) return values_.col(0);
      if (t >= times_[T - 1]) return values_.col(T - 1);
      const auto it = std::upper_bound(times_.data(), times_.data() + T, t);
      const Index hi = it - times_.data();
      const double w = (t - times_[hi - 1]) / (times_[hi] - times_[hi - 1]);
      return (1.0 - w) * values_.col(hi - 1) + w * values_.col(hi);
    }
  }
  return vec_;
}

ProjectionPair::ProjectionPair(Matrix phi, Matrix psi) : phi_(std::move(phi)), psi_(std::move(psi)) {
  require(phi_.rows() == psi_.rows() && phi_.cols() == psi_.cols(),
          "ProjectionPair: Phi and Psi must both be n x r");
  require(phi_.cols() >= 1 && phi_.rows() >= phi_.cols(), "ProjectionPair: need n >= r >= 1");
  lu_ = std::make_shared<const LuSolver>(Matrix(psi_.transpose() * phi_), "Psi^T Phi");
  decoder_ = lu_->solve_right(phi_);
}

LatentDynamics LatentDynamics::stable(StableLatentParams p) {
  LatentDynamics d;
  AssembledTensors t = assemble(p);
  d.A_ = t.A;
  d.H_ = t.H;
  d.B_ = p.B;
  d.assembled_ = std::move(t);
  d.params_ = std::move(p);
  return d;
}

LatentDynamics LatentDynamics::raw(Matrix A, Tensor3 H, Matrix B) {
  const Index r = A.rows();
  require(A.cols() == r && r >= 1, "LatentDynamics: A must be square");
  require(H.dim1() == r && H.is_cubic(), "LatentDynamics: H must be r x r x r");
  require(B.rows() == r, "LatentDynamics: B must have r rows");
  LatentDynamics d;
  d.A_ = std::move(A);
  d.H_ = std::move(H);
  d.B_ = std::move(B);
  return d;
}

const StableLatentParams& LatentDynamics::params() const {
  if (!params_) throw Error("LatentDynamics: raw dynamics carry no stable parameters");
  return *params_;
}

const AssembledTensors& LatentDynamics::assembled() const {
  if (!assembled_) throw Error("LatentDynamics: raw dynamics carry no assembled tensors");
  return *assembled_;
}

Vector LatentDynamics::rhs(const Vector& z, const Vector& u) const {
  require(z.size() == r(), "latent_rhs: z has the wrong length");
  Vector f = A_ * z + contract_quadratic(H_, z);
  if (m() > 0) {
    require(u.size() == m(), "latent_rhs: u has the wrong length");
    f.noalias() += B_ * u;
  }
  return f;
}

Vector latent_rhs(const LatentDynamics& d, const Vector& z, const Vector& u) { return d.rhs(z, u); }

RomModel::RomModel(ProjectionPair projection, LatentDynamics dynamics, std::optional<Matrix> output_map)
    : projection_(std::move(projection)), dynamics_(std::move(dynamics)), output_map_(std::move(output_map)) {
  require(projection_.r() == dynamics_.r(), "RomModel: projection and dynamics disagree on r");
  if (output_map_) {
    require(output_map_->cols() == projection_.n(), "RomModel: output map must have n columns");
    output_decoder_ = *output_map_ * projection_.decoder();
  } else {
    output_decoder_ = projection_.decoder();
  }
}

RomModel RomModel::with_projection(ProjectionPair projection) const {
  return RomModel(std::move(projection), dynamics_, output_map_);
}

RomModel RomModel::with_dynamics(LatentDynamics dynamics) const {
  return RomModel(projection_, std::move(dynamics), output_map_);
}

Vector encode(const RomModel& m, const Vector& x) { return m.encode(x); }
Vector decode(const RomModel& m, const Vector& z) { return m.decode(z); }

std::vector<int> substeps(const Vector& times, const SimOptions& opts) {
  std::vector<int> k(times.size() > 0 ? times.size() - 1 : 0);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double dt = times[i + 1] - times[i];
    require(dt > 0, "simulate: sample times must be strictly increasing");
    k[i] = opts.max_step > 0 ? std::max(1, static_cast<int>(std::ceil(dt / opts.max_step - 1e-9)))
                             : std::max(1, opts.steps_per_interval);
  }
  return k;
}

namespace {

Vector rk4_step(const LatentDynamics& d, const Vector& z, double t, double h, const InputSignal& u) {
  const Vector k1 = d.rhs(z, u(t));
  const Vector k2 = d.rhs(z + 0.5 * h * k1, u(t + 0.5 * h));
  const Vector k3 = d.rhs(z + 0.5 * h * k2, u(t + 0.5 * h));
  const Vector k4 = d.rhs(z + h * k3, u(t + h));
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

LatentTrajectory simulate_latent(const LatentDynamics& d, const Vector& z0, const InputSignal& u,
                                 const Vector& times, const SimOptions& opts) {
  const Index r = d.r();
  require(z0.size() == r, "simulate: initial state has the wrong length");
  require(times.size() >= 1, "simulate: need at least one sample time");
  require(d.m() == 0 || u.dim() == d.m(), "simulate: input dimension does not match B");
  const std::vector<int> k = substeps(times, opts);
  const Index N = times.size();

  LatentTrajectory traj;
  traj.Z.resize(r, N);
  traj.Z.col(0) = z0;
  Index grid_size = 1;
  for (int ki : k) grid_size += ki;
  if (opts.keep_grid) {
    traj.grid_t.resize(grid_size);
    traj.grid_z.resize(r, grid_size);
    traj.grid_t[0] = times[0];
    traj.grid_z.col(0) = z0;
    traj.offsets.assign(N, 0);
  }

  Vector z = z0;
  Index g = 0;
  Index reached = N;
  for (Index i = 0; i + 1 < N && reached == N; ++i) {
    const double h = (times[i + 1] - times[i]) / k[i];
    for (int s = 0; s < k[i]; ++s) {
      z = rk4_step(d, z, times[i] + s * h, h, u);
      ++g;
      const double tn = s + 1 == k[i] ? times[i + 1] : times[i] + (s + 1) * h;
      if (!z.allFinite() || z.norm() > opts.blowup_norm) {
        if (opts.throw_on_blowup) {
          throw BlowUpError("simulate: latent state blew up", tn);
        }
        traj.blew_up = true;
        traj.blowup_time = tn;
        reached = i + 1;
        break;
      }
      if (opts.keep_grid) {
        traj.grid_t[g] = tn;
        traj.grid_z.col(g) = z;
      }
    }
    if (reached == N) {
      traj.Z.col(i + 1) = z;
      if (opts.keep_grid) traj.offsets[i + 1] = g;
    }
  }
  traj.times = times.head(reached);
  traj.Z.conservativeResize(r, reached);
  if (opts.keep_grid && reached < N) {
    traj.grid_t.conservativeResize(traj.offsets[reached - 1] + 1);
    traj.grid_z.conservativeResize(r, traj.offsets[reached - 1] + 1);
    traj.offsets.resize(reached);
  }
  return traj;
}

LatentTrajectory simulate(const RomModel& m, const Vector& x0, const InputSignal& u, const Vector& times,
                          const SimOptions& opts) {
  require(x0.size() == m.n(), "simulate: x0 has the wrong length");
  LatentTrajectory traj = simulate_latent(m.dynamics(), m.encode(x0), u, times, opts);
  traj.Y = m.output_decoder() * traj.Z;
  return traj;
}

}  // namespace gasrom
