#pragma once

// Reduced-order model: oblique projection, quadratic latent dynamics, RK4
// time integration and linear outputs.
//
//   z(t0) = Psi^T x0,   dz/dt = A z + H : z z^T + B u,   y = C Phi (Psi^T Phi)^{-1} z

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gasrom/stability.hpp"

namespace gasrom {

struct SinusoidTerm {
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;
  bool cosine = false;  // sin(w t + phase) when false
};

/// Time-dependent input u(t) in R^m.
class InputSignal {
 public:
  InputSignal() = default;

  static InputSignal zero(Index m);
  /// u(t) = amplitude for t >= t_on, 0 before.
  static InputSignal step(const Vector& amplitude, double t_on = 0.0);
  static InputSignal step(double amplitude) { return step(Vector::Constant(1, amplitude)); }
  /// u(t) = direction * sum of terms.
  static InputSignal sinusoid(std::vector<SinusoidTerm> terms, const Vector& direction);
  static InputSignal sinusoid(std::vector<SinusoidTerm> terms) {
    return sinusoid(std::move(terms), Vector::Ones(1));
  }
  /// Piecewise-linear interpolation of samples (m x T), held constant outside.
  static InputSignal sampled(Vector times, Matrix values);

  Index dim() const { return dim_; }
  Vector operator()(double t) const;
  bool is_zero() const { return kind_ == Kind::kZero; }
  bool is_sampled() const { return kind_ == Kind::kSampled; }

  /// One-line description: "zero m", "step t_on a_1 .. a_m",
  /// "sinusoid m d_1 .. d_m ; amp freq phase sin|cos ; ..." or "sampled".
  std::string to_text() const;
  /// Inverse of to_text for the analytic kinds. Throws SchemaError.
  static InputSignal from_text(const std::string& text);

 private:
  enum class Kind { kZero, kStep, kSinusoid, kSampled };
  Kind kind_ = Kind::kZero;
  Index dim_ = 0;
  Vector vec_;
  double t_on_ = 0.0;
  std::vector<SinusoidTerm> terms_;
  Vector times_;
  Matrix values_;
};

/// Decoder frame Phi and encoder frame Psi with (Psi^T Phi) factored once.
class ProjectionPair {
 public:
  ProjectionPair() = default;
  /// Throws SingularMatrixError when Psi^T Phi is numerically singular.
  ProjectionPair(Matrix phi, Matrix psi);

  const Matrix& phi() const { return phi_; }
  const Matrix& psi() const { return psi_; }
  Index n() const { return phi_.rows(); }
  Index r() const { return phi_.cols(); }

  /// D = Phi (Psi^T Phi)^{-1}
  const Matrix& decoder() const { return decoder_; }
  const LuSolver& gram_lu() const { return *lu_; }
  double condition() const { return lu_->condition_estimate(); }

  Vector encode(const Vector& x) const { return psi_.transpose() * x; }
  Vector decode(const Vector& z) const { return decoder_ * z; }
  Vector project(const Vector& x) const { return decode(encode(x)); }

 private:
  Matrix phi_, psi_, decoder_;
  std::shared_ptr<const LuSolver> lu_;
};

struct RawTensors {
  Matrix A;
  Tensor3 H;
  Matrix B;
};

/// Stable-parameterized or unconstrained latent dynamics. Stable variants are
/// assembled once at construction.
class LatentDynamics {
 public:
  LatentDynamics() = default;
  static LatentDynamics stable(StableLatentParams p);
  static LatentDynamics raw(Matrix A, Tensor3 H, Matrix B);
  static LatentDynamics raw(RawTensors t) { return raw(std::move(t.A), std::move(t.H), std::move(t.B)); }

  bool is_stable() const { return params_.has_value(); }
  const StableLatentParams& params() const;
  /// Only valid for stable variants.
  const AssembledTensors& assembled() const;

  const Matrix& A() const { return A_; }
  const Tensor3& H() const { return H_; }
  const Matrix& B() const { return B_; }
  Index r() const { return A_.rows(); }
  Index m() const { return B_.cols(); }

  Vector rhs(const Vector& z, const Vector& u) const;
  /// Jacobian of rhs with respect to z.
  Matrix jacobian(const Vector& z) const { return A_ + contract_jacobian(H_, z); }

 private:
  std::optional<StableLatentParams> params_;
  std::optional<AssembledTensors> assembled_;
  Matrix A_, B_;
  Tensor3 H_;
};

Vector latent_rhs(const LatentDynamics& d, const Vector& z, const Vector& u);

class RomModel {
 public:
  RomModel() = default;
  /// output_map: p x n, or nullopt for full-state output.
  RomModel(ProjectionPair projection, LatentDynamics dynamics,
           std::optional<Matrix> output_map = std::nullopt);

  const ProjectionPair& projection() const { return projection_; }
  const LatentDynamics& dynamics() const { return dynamics_; }
  const std::optional<Matrix>& output_map() const { return output_map_; }

  Index n() const { return projection_.n(); }
  Index r() const { return projection_.r(); }
  Index m() const { return dynamics_.m(); }
  Index p() const { return output_map_ ? output_map_->rows() : n(); }

  /// C D (p x r).
  const Matrix& output_decoder() const { return output_decoder_; }
  Vector encode(const Vector& x) const { return projection_.encode(x); }
  Vector decode(const Vector& z) const { return projection_.decode(z); }
  Vector output(const Vector& z) const { return output_decoder_ * z; }

  RomModel with_projection(ProjectionPair projection) const;
  RomModel with_dynamics(LatentDynamics dynamics) const;

 private:
  ProjectionPair projection_;
  LatentDynamics dynamics_;
  std::optional<Matrix> output_map_;
  Matrix output_decoder_;
};

Vector encode(const RomModel& m, const Vector& x);
Vector decode(const RomModel& m, const Vector& z);

struct SimOptions {
  /// RK4 substeps per sample interval (used when max_step <= 0).
  int steps_per_interval = 10;
  /// When positive, each interval uses ceil(dt / max_step) substeps.
  double max_step = 0.0;
  /// Keep every integrator state (needed by the adjoint).
  bool keep_grid = false;
  /// Throw BlowUpError on blow-up; otherwise truncate and flag.
  bool throw_on_blowup = true;
  /// States with norm above this are treated as blown up.
  double blowup_norm = 1e100;
};

struct LatentTrajectory {
  Vector times;  // sample times actually reached
  Matrix Z;      // r x N
  Matrix Y;      // p x N (empty for latent-only simulation)
  bool blew_up = false;
  double blowup_time = 0.0;

  // Integrator grid (keep_grid only): grid_z.col(offsets[i]) is the state at sample i.
  Vector grid_t;
  Matrix grid_z;
  std::vector<Index> offsets;
};

/// Substep counts per sample interval.
std::vector<int> substeps(const Vector& times, const SimOptions& opts);

LatentTrajectory simulate_latent(const LatentDynamics& d, const Vector& z0, const InputSignal& u,
                                 const Vector& times, const SimOptions& opts = {});

/// z0 = Psi^T x0, outputs C D z at each sample time.
LatentTrajectory simulate(const RomModel& m, const Vector& x0, const InputSignal& u,
                          const Vector& times, const SimOptions& opts = {});

}  // namespace gasrom
