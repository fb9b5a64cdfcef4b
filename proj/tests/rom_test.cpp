#include <gtest/gtest.h>

#include "gasrom/rom.hpp"
#include "test_util.hpp"

namespace gasrom {
namespace {

using testing::random_matrix;
using testing::random_orthonormal;
using testing::random_tensor;
using testing::random_vector;

StableLatentParams random_params(Index r, Index m, std::mt19937_64& rng) {
  StableLatentParams p;
  // moderate scales keep RK4 at 10 steps per sample interval well inside its stability region
  p.K = random_matrix(r, r, rng, 0.5);
  p.R = random_matrix(r, r, rng, 0.5);
  p.Q = random_matrix(r, r, rng, 0.2) + Matrix::Identity(r, r);
  p.S = 0.5 * random_tensor(r, rng);
  p.B = random_matrix(r, m, rng);
  return p;
}

RomModel random_model(Index n, Index r, std::mt19937_64& rng) {
  ProjectionPair pp(random_matrix(n, r, rng), random_orthonormal(n, r, rng));
  return RomModel(pp, LatentDynamics::stable(random_params(r, 1, rng)), random_matrix(2, n, rng));
}

TEST(InputSignal, Kinds) {
  const InputSignal step = InputSignal::step(0.2);
  EXPECT_EQ(step(-1.0)[0], 0.0);
  EXPECT_EQ(step(0.0)[0], 0.2);
  const InputSignal sine = InputSignal::sinusoid({{0.45, 1.0, 0.0, false}, {0.45, 2.0, 0.0, true}});
  EXPECT_NEAR(sine(0.7)[0], 0.45 * (std::sin(0.7) + std::cos(1.4)), 1e-15);
  Vector t(3);
  t << 0.0, 1.0, 3.0;
  Matrix v(1, 3);
  v << 0.0, 2.0, 6.0;
  const InputSignal s = InputSignal::sampled(t, v);
  EXPECT_NEAR(s(0.5)[0], 1.0, 1e-15);
  EXPECT_NEAR(s(2.0)[0], 4.0, 1e-15);
  EXPECT_EQ(s(10.0)[0], 6.0);
  Vector bad(2);
  bad << 1.0, 1.0;
  EXPECT_THROW(InputSignal::sampled(bad, Matrix::Zero(1, 2)), DimensionError);
}

TEST(Encode, ZeroAndCoordinateSelection) {
  std::mt19937_64 rng(1);
  const Matrix I = Matrix::Identity(5, 2);
  const RomModel m(ProjectionPair(I, I), LatentDynamics::raw(-Matrix::Identity(2, 2), Tensor3::Zero(2),
                                                             Matrix::Zero(2, 1)));
  EXPECT_EQ(m.encode(Vector::Zero(5)), Vector::Zero(2));
  const Vector x = random_vector(5, rng);
  EXPECT_EQ(m.encode(x), x.head(2));
}

TEST(Encode, LeftInverse) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const RomModel m = random_model(8, 3, rng);
    const Vector z = random_vector(3, rng);
    EXPECT_LE((m.encode(m.decode(z)) - z).norm(), 1e-12 * std::max(1.0, z.norm()));
  }
}

TEST(Decode, GalerkinAndIdempotence) {
  std::mt19937_64 rng(3);
  const Matrix V = random_orthonormal(6, 2, rng);
  const ProjectionPair galerkin(V, V);
  const Vector z = random_vector(2, rng);
  EXPECT_LE((galerkin.decode(z) - V * z).norm(), 1e-14);
  EXPECT_EQ(galerkin.decode(Vector::Zero(2)), Vector::Zero(6));
  const Vector x = random_vector(6, rng);
  // orthogonal projection: residual is orthogonal to the range
  EXPECT_LE((V.transpose() * (x - galerkin.project(x))).norm(), 1e-14);

  const RomModel m = random_model(9, 3, rng);
  const Vector y = random_vector(9, rng);
  const Vector Py = m.projection().project(y);
  EXPECT_LE((m.projection().project(Py) - Py).norm(), 1e-11 * Py.norm());
}

TEST(Decode, SingularPairThrows) {
  Matrix phi = Matrix::Zero(4, 2), psi = Matrix::Zero(4, 2);
  phi(0, 0) = phi(1, 1) = 1.0;
  psi(2, 0) = psi(3, 1) = 1.0;
  EXPECT_THROW(ProjectionPair(phi, psi), SingularMatrixError);
}

TEST(LatentRhs, OriginAndLinearCases) {
  std::mt19937_64 rng(4);
  const LatentDynamics stable = LatentDynamics::stable(random_params(3, 1, rng));
  EXPECT_EQ(latent_rhs(stable, Vector::Zero(3), Vector::Zero(1)).norm(), 0.0);
  const LatentDynamics lin = LatentDynamics::raw(-Matrix::Identity(3, 3), Tensor3::Zero(3), Matrix::Zero(3, 1));
  const Vector z = random_vector(3, rng);
  EXPECT_EQ(latent_rhs(lin, z, Vector::Zero(1)), -z);
}

TEST(LatentRhs, StableMatchesRawWithSameTensors) {
  std::mt19937_64 rng(5);
  const StableLatentParams p = random_params(4, 2, rng);
  const LatentDynamics stable = LatentDynamics::stable(p);
  const AssembledTensors t = assemble(p);
  const LatentDynamics raw = LatentDynamics::raw(t.A, t.H, p.B);
  for (int i = 0; i < 10; ++i) {
    const Vector z = random_vector(4, rng), u = random_vector(2, rng);
    const Vector a = latent_rhs(stable, z, u);
    EXPECT_LE((a - latent_rhs(raw, z, u)).norm(), 1e-14 * std::max(1.0, a.norm()));
  }
}

TEST(Simulate, LinearAnalyticSolution) {
  Matrix A = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
  const LatentDynamics d = LatentDynamics::raw(A, Tensor3::Zero(2), Matrix::Zero(2, 1));
  Vector times(2);
  times << 0.0, 1.0;
  SimOptions opts;
  opts.max_step = 1e-3;
  const LatentTrajectory traj = simulate_latent(d, Vector::Ones(2), InputSignal::zero(1), times, opts);
  EXPECT_NEAR(traj.Z(0, 1), std::exp(-1.0), 1e-8);
  EXPECT_NEAR(traj.Z(1, 1), std::exp(-2.0), 1e-8);
}

TEST(Simulate, ZeroInitialConditionStaysZero) {
  std::mt19937_64 rng(6);
  const RomModel m = random_model(5, 2, rng);
  const Vector times = Vector::LinSpaced(20, 0.0, 5.0);
  const LatentTrajectory traj = simulate(m, Vector::Zero(5), InputSignal::zero(1), times);
  EXPECT_EQ(traj.Z.norm(), 0.0);
  EXPECT_EQ(traj.Y.norm(), 0.0);
  EXPECT_EQ(traj.Y.rows(), 2);
}

TEST(Simulate, LyapunovFunctionNonIncreasing) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const StableLatentParams p = random_params(4, 1, rng);
    const LatentDynamics d = LatentDynamics::stable(p);
    const Matrix& Qt = d.assembled().Qtilde;
    const Vector times = Vector::LinSpaced(50, 0.0, 5.0);
    SimOptions opts;
    opts.keep_grid = true;
    opts.max_step = 0.01 / std::max(1.0, d.A().norm() + d.H().norm());
    const LatentTrajectory traj = simulate_latent(d, random_vector(4, rng), InputSignal::zero(1), times, opts);
    for (Index g = 1; g < traj.grid_z.cols(); ++g) {
      const double v0 = traj.grid_z.col(g - 1).dot(Qt * traj.grid_z.col(g - 1));
      const double v1 = traj.grid_z.col(g).dot(Qt * traj.grid_z.col(g));
      EXPECT_LE(v1, v0 * (1.0 + 1e-10));
    }
  }
}

TEST(Simulate, GridOffsetsMatchSamples) {
  std::mt19937_64 rng(8);
  const RomModel m = random_model(5, 2, rng);
  Vector times(4);
  times << 0.0, 0.1, 0.5, 0.6;
  SimOptions opts;
  opts.keep_grid = true;
  opts.max_step = 0.03;
  const LatentTrajectory traj = simulate(m, random_vector(5, rng), InputSignal::step(0.3), times, opts);
  ASSERT_EQ(traj.offsets.size(), 4u);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_EQ(traj.grid_z.col(traj.offsets[i]), traj.Z.col(i));
    EXPECT_EQ(traj.grid_t[traj.offsets[i]], times[i]);
  }
}

TEST(Simulate, GrassmannSymmetry) {
  std::mt19937_64 rng(9);
  const RomModel m = random_model(7, 3, rng);
  const Matrix W = random_matrix(3, 3, rng) + 3.0 * Matrix::Identity(3, 3);
  const RomModel mw = m.with_projection(ProjectionPair(m.projection().phi() * W, m.projection().psi()));
  const Vector x0 = random_vector(7, rng);
  const Vector z = random_vector(3, rng);
  EXPECT_LE((mw.decode(z) - m.decode(z)).norm(), 1e-10 * m.decode(z).norm());
  const Vector times = Vector::LinSpaced(30, 0.0, 3.0);
  const InputSignal u = InputSignal::step(0.1);
  const Matrix Y = simulate(m, x0, u, times).Y;
  EXPECT_LE((simulate(mw, x0, u, times).Y - Y).norm(), 1e-10 * Y.norm());
}

TEST(Simulate, FourthOrderConvergence) {
  std::mt19937_64 rng(10);
  const LatentDynamics d = LatentDynamics::stable(random_params(3, 1, rng));
  const Vector z0 = random_vector(3, rng);
  Vector times(2);
  times << 0.0, 1.0;
  const InputSignal u = InputSignal::sinusoid({{1.0, 1.0, 0.0, false}});
  auto terminal = [&](int steps) {
    SimOptions opts;
    opts.steps_per_interval = steps;
    return Vector(simulate_latent(d, z0, u, times, opts).Z.col(1));
  };
  const Vector ref = terminal(40 * 16);
  const double e1 = (terminal(40) - ref).norm();
  const double e2 = (terminal(80) - ref).norm();
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Simulate, StableTrajectoryBounded) {
  std::mt19937_64 rng(11);
  const LatentDynamics d = LatentDynamics::stable(random_params(4, 1, rng));
  const Vector z0 = random_vector(4, rng);
  SimOptions opts;
  opts.max_step = 0.01 / std::max(1.0, d.A().norm() + d.H().norm());
  const LatentTrajectory traj =
      simulate_latent(d, z0, InputSignal::zero(1), Vector::LinSpaced(100, 0.0, 20.0), opts);
  const double bound = std::sqrt(condition_number(d.assembled().Qtilde)) * z0.norm();
  for (Index i = 0; i < traj.Z.cols(); ++i) EXPECT_LE(traj.Z.col(i).norm(), bound * (1 + 1e-10));
}

TEST(Simulate, BlowUpReportsTime) {
  const LatentDynamics d = LatentDynamics::raw(Matrix::Zero(1, 1), [] {
    Tensor3 H = Tensor3::Zero(1);
    H(0, 0, 0) = 1.0;
    return H;
  }(), Matrix::Zero(1, 1));
  // dz/dt = z^2, z0 = 1 blows up at t = 1
  const Vector times = Vector::LinSpaced(21, 0.0, 2.0);
  Vector z0 = Vector::Ones(1);
  try {
    simulate_latent(d, z0, InputSignal::zero(1), times);
    FAIL() << "expected blow-up";
  } catch (const BlowUpError& e) {
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LT(e.time(), 1.3);
  }
  SimOptions opts;
  opts.throw_on_blowup = false;
  const LatentTrajectory traj = simulate_latent(d, z0, InputSignal::zero(1), times, opts);
  EXPECT_TRUE(traj.blew_up);
  EXPECT_LT(traj.times.size(), 21);
  EXPECT_TRUE(traj.Z.allFinite());
}

}  // namespace
}  // namespace gasrom
