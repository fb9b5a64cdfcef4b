#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "gasrom/fom.hpp"
#include "test_util.hpp"

namespace gasrom {
namespace {

using testing::random_matrix;
using testing::random_vector;

TEST(ToyModel, DecoupledLinearCase) {
  const QuadraticFOM f = toy_model(0.0);
  const Vector times = uniform_grid(2.0, 21);
  const FomTrajectory tr = simulate_fom(f, Vector::Ones(3), InputSignal::zero(1), times, {.steps_per_interval = 100});
  for (Index i = 0; i < times.size(); ++i) {
    const double t = times[i];
    EXPECT_NEAR(tr.X(0, i), std::exp(-t), 1e-10);
    EXPECT_NEAR(tr.X(1, i), std::exp(-2 * t), 1e-10);
    EXPECT_NEAR(tr.X(2, i), std::exp(-5 * t), 1e-10);
  }
}

TEST(ToyModel, SymmetricSlicesAndOutput) {
  const QuadraticFOM f = toy_model(20.0);
  EXPECT_DOUBLE_EQ(f.H(0, 0, 2) + f.H(0, 2, 0), 20.0);
  EXPECT_DOUBLE_EQ(f.H(1, 1, 2) + f.H(1, 2, 1), 20.0);
  EXPECT_DOUBLE_EQ(f.H(0, 0, 2), f.H(0, 2, 0));
  const Vector x(Eigen::Vector3d(0.3, -0.2, 0.7));
  const Vector fx = FomOperator(f).rhs(x, Vector::Constant(1, 0.1));
  EXPECT_NEAR(fx[0], -0.3 + 20 * 0.3 * 0.7 + 0.1, 1e-14);
  EXPECT_NEAR(fx[1], -2 * -0.2 + 20 * -0.2 * 0.7 + 0.1, 1e-14);
  EXPECT_NEAR(fx[2], -5 * 0.7 + 0.1, 1e-14);
  EXPECT_NEAR((f.C * x)(0), 0.8, 1e-15);
}

TEST(ToyModel, FixedPointFormula) {
  const Vector xbar = toy_steady_state(20.0, 0.248);
  EXPECT_NEAR(xbar[0], 31.0, 1e-12);
  EXPECT_NEAR(xbar[1], 0.248 / (2 - 4 * 0.248), 1e-15);
  EXPECT_NEAR(xbar[1], 0.246031746031746, 1e-12);
  EXPECT_NEAR(xbar[2], 0.0496, 1e-15);
  const Vector r = FomOperator(toy_model(20.0)).rhs(xbar, Vector::Constant(1, 0.248));
  EXPECT_LT(r.norm(), 1e-12);
}

TEST(ToyModel, LongHorizonSteadyState) {
  // The slowest mode decays at 1 - 4 gamma = 0.008, so t = 200 is far from
  // converged for gamma = 0.248; t = 3000 leaves about 31 e^{-24}.
  const QuadraticFOM f = toy_model(20.0);
  Vector times(2);
  times << 0.0, 3000.0;
  const FomTrajectory tr = simulate_fom(f, Vector::Zero(3), InputSignal::step(0.248), times, {.max_step = 0.01});
  const Vector xbar = toy_steady_state(20.0, 0.248);
  EXPECT_LT((tr.X.col(1) - xbar).cwiseAbs().maxCoeff(), 1e-6);

  Vector t200(2);
  t200 << 0.0, 200.0;
  const FomTrajectory short_run = simulate_fom(f, Vector::Zero(3), InputSignal::step(0.248), t200, {.max_step = 0.01});
  EXPECT_GT(std::abs(short_run.X(0, 1) - xbar[0]), 1.0);
}

TEST(ToyModel, FixedPointPropertyOverGamma) {
  const QuadraticFOM f = toy_model(20.0);
  for (double gamma : {0.01, 0.05, 0.1, 0.15, 0.2, 0.23}) {
    const double rate = 1.0 - 4.0 * gamma;
    Vector times(2);
    times << 0.0, 40.0 / rate;
    const FomTrajectory tr = simulate_fom(f, Vector::Zero(3), InputSignal::step(gamma), times, {.max_step = 0.01});
    EXPECT_LT((tr.X.col(1) - toy_steady_state(20.0, gamma)).cwiseAbs().maxCoeff(), 1e-6) << gamma;
  }
}

TEST(SimulateFom, ZeroTrajectory) {
  const FomTrajectory tr = simulate_fom(toy_model(20.0), Vector::Zero(3), InputSignal::zero(1), uniform_grid(5, 11));
  EXPECT_EQ(tr.X.norm(), 0.0);
  EXPECT_EQ(tr.Y.norm(), 0.0);
  EXPECT_EQ(tr.Xdot.norm(), 0.0);
}

TEST(SimulateFom, LinearAnalytic) {
  std::mt19937_64 rng(3);
  QuadraticFOM f;
  f.A = random_matrix(4, 4, rng) - 3.0 * Matrix::Identity(4, 4);
  f.H = Tensor3::Zero(4);
  f.B = Matrix::Zero(4, 1);
  f.C = Matrix::Identity(4, 4);
  const Vector x0 = random_vector(4, rng);
  const Vector times = uniform_grid(1.0, 11);
  const FomTrajectory tr = simulate_fom(f, x0, InputSignal::zero(1), times, {.max_step = 1e-3});
  for (Index i = 0; i < times.size(); ++i) {
    const Vector ref = (times[i] * f.A).exp() * x0;
    EXPECT_LT((tr.X.col(i) - ref).norm(), 1e-8);
  }
  EXPECT_LT((tr.Xdot - f.A * tr.X).norm(), 1e-12);
}

TEST(SimulateFom, BlowUpReportsTime) {
  QuadraticFOM f;
  f.A = Matrix::Zero(1, 1);
  f.H = Tensor3::Zero(1);
  f.H(0, 0, 0) = 1.0;
  f.B = Matrix::Zero(1, 1);
  f.C = Matrix::Identity(1, 1);
  // x' = x^2, x(0) = 1 blows up at t = 1
  try {
    simulate_fom(f, Vector::Ones(1), InputSignal::zero(1), uniform_grid(2.0, 21));
    FAIL() << "expected blow-up";
  } catch (const BlowUpError& e) {
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LT(e.time(), 1.3);
  }
  SimOptions soft;
  soft.throw_on_blowup = false;
  const FomTrajectory tr = simulate_fom(f, Vector::Ones(1), InputSignal::zero(1), uniform_grid(2.0, 21), soft);
  EXPECT_TRUE(tr.blew_up);
  EXPECT_LT(tr.times.size(), 21);
  EXPECT_TRUE(tr.X.allFinite());
}

TEST(TrainingSet, ToyProtocol) {
  TrainingSetSpec spec;
  spec.amplitudes = {0.01, 0.1, 0.2, 0.248};
  const SnapshotDataset d = make_training_set(toy_model(20.0), spec);
  ASSERT_EQ(d.size(), 4);
  EXPECT_EQ(d.num_samples(), 100);
  EXPECT_DOUBLE_EQ(d.times[0], 0.0);
  EXPECT_DOUBLE_EQ(d.times[99], 10.0);
  ASSERT_TRUE(d.output_map.has_value());
  for (Index j = 0; j < 4; ++j) {
    const double gamma = spec.amplitudes[j];
    const double ybar = toy_steady_state(20.0, gamma).sum();
    EXPECT_GT(d.trajectories[j].weight, 0.0);
    EXPECT_NEAR(d.trajectories[j].weight, 4.0 * 100.0 * ybar * ybar, 1e-9 * d.trajectories[j].weight);
    EXPECT_EQ(d.trajectories[j].x0.norm(), 0.0);
    EXPECT_DOUBLE_EQ(d.trajectories[j].U(0, 50), gamma);
  }
}

TEST(TrainingSet, ZeroAmplitudeFallsBackToUnitWeight) {
  TrainingSetSpec spec;
  spec.amplitudes = {0.0};
  const SnapshotDataset d = make_training_set(toy_model(20.0), spec);
  EXPECT_EQ(d.trajectories[0].Y.norm(), 0.0);
  EXPECT_EQ(d.trajectories[0].weight, 1.0);
  spec.weights = WeightConvention::kEnergy;
  EXPECT_EQ(make_training_set(toy_model(20.0), spec).trajectories[0].weight, 1.0);
}

TEST(TrainingSet, EmptyAmplitudesRejected) {
  TrainingSetSpec spec;
  EXPECT_THROW(make_training_set(toy_model(20.0), spec), ConfigError);
}

TEST(TrainingSet, ImpulseEnergiesDecayOnStableLinearFom) {
  std::mt19937_64 rng(11);
  QuadraticFOM f;
  const Matrix G = random_matrix(6, 6, rng);
  f.A = -(G * G.transpose() + 0.5 * Matrix::Identity(6, 6)) + 0.3 * skew(random_matrix(6, 6, rng));
  f.H = Tensor3::Zero(6);
  f.B = random_matrix(6, 1, rng);
  f.C = Matrix::Identity(6, 6);
  ASSERT_LT(spectral_abscissa(f.A), 0.0);
  TrainingSetSpec spec;
  spec.protocol = Protocol::kImpulse;
  spec.amplitudes = {-1.0, -0.25, 0.05, 1.0};
  spec.weights = WeightConvention::kEnergy;
  spec.t_end = 5.0;
  spec.num_samples = 51;
  const SnapshotDataset d = make_training_set(f, spec);
  EXPECT_FALSE(d.output_map.has_value());
  for (const auto& t : d.trajectories) {
    EXPECT_EQ(t.U.norm(), 0.0);
    const Vector energy = t.Y.colwise().squaredNorm().transpose();
    // symmetric part negative definite: ||x||^2 is strictly decreasing
    for (Index i = 1; i < energy.size(); ++i) EXPECT_LT(energy[i], energy[i - 1]);
    EXPECT_NEAR(t.weight, energy.mean(), 1e-12 * t.weight);
  }
}

TEST(Synthetic, TwoByTwoJordanLikeGrowth) {
  Matrix A(2, 2);
  A << -1.0, 10.0, 0.0, -2.0;
  EXPECT_GT(transient_peak(A, 5.0, 200), 1.0);
}

TEST(Synthetic, StableNonNormalEnergyPreserving) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const QuadraticFOM f = synthetic_nonnormal_fom(40, seed);
    EXPECT_LT(eigenvalues(f.A).real().maxCoeff(), 0.0);
    EXPECT_GE(transient_peak(f.A, 20.0, 100), 10.0);
    EXPECT_NEAR(f.B.norm(), 1.0, 1e-14);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 20; ++k) {
      const Vector z = random_vector(40, rng);
      const Vector q = contract_quadratic(f.H, z);
      EXPECT_LT(std::abs(z.dot(f.energy_metric * q)), 1e-12 * z.squaredNorm() * (f.energy_metric * q).norm());
    }
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  const QuadraticFOM a = synthetic_nonnormal_fom(30, 7), b = synthetic_nonnormal_fom(30, 7);
  EXPECT_EQ(a.A, b.A);
  EXPECT_TRUE(a.H == b.H);
  EXPECT_EQ(a.B, b.B);
  EXPECT_NE(synthetic_nonnormal_fom(30, 8).A, a.A);
}

TEST(Synthetic, FullSizeTrajectoriesBounded) {
  const QuadraticFOM f = synthetic_nonnormal_fom(200, 2024);
  EXPECT_LT(spectral_abscissa(f.A), 0.0);
  EXPECT_GE(transient_peak(f.A, 20.0, 60), 10.0);
  const double p_min = eigenvalues_real(sym(f.energy_metric)).minCoeff();
  const double p_max = eigenvalues_real(sym(f.energy_metric)).maxCoeff();
  ASSERT_GT(p_min, 0.0);
  for (double beta : {-1.0, 1.0}) {
    const FomTrajectory tr =
        simulate_fom(f, beta * f.B.col(0), InputSignal::zero(1), uniform_grid(80.0, 321), {.steps_per_interval = 10});
    // x^T P x is non-increasing along exact trajectories
    const double bound = std::sqrt(p_max / p_min) * std::abs(beta) * 1.01;
    EXPECT_LT(tr.X.colwise().norm().maxCoeff(), bound);
  }
}

}  // namespace
}  // namespace gasrom
