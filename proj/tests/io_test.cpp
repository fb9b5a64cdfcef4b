#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "gasrom/io.hpp"
#include "test_util.hpp"

namespace gasrom {
namespace {

namespace fs = std::filesystem;
using testing::random_matrix;
using testing::random_tensor;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gasrom_io_test_" + name);
  fs::remove_all(p);
  return p;
}

SnapshotDataset toy_set() {
  TrainingSetSpec spec;
  spec.amplitudes = {0.01, 0.1, 0.2, 0.248};
  return make_training_set(toy_model(20.0), spec);
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void expect_identical(const SnapshotDataset& a, const SnapshotDataset& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_TRUE(same_bits(a.times, b.times));
  EXPECT_EQ(a.weight_convention, b.weight_convention);
  ASSERT_EQ(a.output_map.has_value(), b.output_map.has_value());
  if (a.output_map) EXPECT_TRUE(same_bits(*a.output_map, *b.output_map));
  for (Index k = 0; k < a.size(); ++k) {
    const auto& s = a.trajectories[k];
    const auto& t = b.trajectories[k];
    EXPECT_TRUE(same_bits(s.X, t.X)) << k;
    EXPECT_TRUE(same_bits(s.U, t.U)) << k;
    EXPECT_TRUE(same_bits(s.Y, t.Y)) << k;
    EXPECT_TRUE(same_bits(s.x0, t.x0)) << k;
    EXPECT_TRUE(same_bits(s.Xdot, t.Xdot)) << k;
    EXPECT_EQ(s.weight, t.weight) << k;
    EXPECT_EQ(s.input.to_text(), t.input.to_text()) << k;
  }
}

std::string schema_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, (i % 40) - 20);
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
}

TEST(DatasetIo, EmptyDatasetRejected) {
  SnapshotDataset d;
  d.times = uniform_grid(1.0, 5);
  const std::string msg = schema_message([&] { write_dataset(scratch("empty"), d); });
  EXPECT_NE(msg.find("no trajectories"), std::string::npos) << msg;

  const fs::path dir = scratch("empty_meta");
  fs::create_directories(dir);
  std::ofstream(dir / "meta.txt") << "format = gasrom-dataset\nversion = 1\nn = 3\nm = 1\np = 3\n"
                                     "trajectories = 0\nsamples = 2\nweight_convention = unit\n"
                                     "output_map = identity\nderivatives = none\ntimes = 0 1\n";
  const std::string msg2 = schema_message([&] { read_dataset(dir); });
  EXPECT_NE(msg2.find("no trajectories"), std::string::npos) << msg2;
}

TEST(DatasetIo, ToyRoundTripIsBitExact) {
  const SnapshotDataset d = toy_set();
  for (DatasetFormat f : {DatasetFormat::kText, DatasetFormat::kBinary}) {
    const fs::path dir = scratch(f == DatasetFormat::kText ? "toy_text" : "toy_bin");
    write_dataset(dir, d, f);
    expect_identical(d, read_dataset(dir));
  }
  const fs::path dir = fs::temp_directory_path() / "gasrom_io_test_toy_text";
  for (int k = 0; k < 4; ++k) EXPECT_TRUE(fs::exists(dir / ("traj_" + std::to_string(k) + ".csv")));
  std::ifstream in(dir / "traj_0.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x_1,x_2,x_3,u_1,y_1");
}

TEST(DatasetIo, OutputMapAndAnalyticInputsSurvive) {
  SnapshotDataset d = toy_set();
  const Matrix C = (Matrix(1, 3) << 0.3, -1.0 / 3.0, 2.0).finished();
  d.output_map = C;
  d.trajectories.resize(2);
  for (auto& t : d.trajectories) {
    t.Y = C * t.X;
    t.input = InputSignal::sinusoid({{0.45, 1.0, 0.1, true}, {0.45, 2.0, 0.0, false}});
  }
  d.trajectories[1].input = InputSignal::sampled(d.times, d.trajectories[1].U);
  for (DatasetFormat f : {DatasetFormat::kText, DatasetFormat::kBinary}) {
    const fs::path dir = scratch("cmap");
    write_dataset(dir, d, f);
    expect_identical(d, read_dataset(dir));
  }
}

TEST(DatasetIo, MismatchedGridNamesBothTrajectories) {
  const SnapshotDataset d = toy_set();
  const fs::path dir = scratch("grid");
  write_dataset(dir, d);
  // shift one time stamp of trajectory 2
  std::ifstream in(dir / "traj_2.csv");
  std::stringstream buf;
  buf << in.rdbuf();
  in.close();
  std::string text = buf.str();
  const std::string row = "\n" + format_double(d.times[3]) + ",";
  const auto pos = text.find(row);
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, row.size(), "\n" + format_double(d.times[3] + 1e-3) + ",");
  std::ofstream(dir / "traj_2.csv") << text;
  const std::string msg = schema_message([&] { read_dataset(dir); });
  EXPECT_NE(msg.find("traj_2.csv"), std::string::npos) << msg;
  EXPECT_NE(msg.find("traj_0.csv"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
}

TEST(DatasetIo, SchemaErrorsNameFileFieldAndLine) {
  const SnapshotDataset d = toy_set();
  const fs::path dir = scratch("bad");
  write_dataset(dir, d);
  {
    std::ofstream out(dir / "traj_1.csv", std::ios::app);
    out << "1,2,oops,4,5,6\n";
  }
  std::string msg = schema_message([&] { read_dataset(dir); });
  EXPECT_NE(msg.find("traj_1.csv"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 102"), std::string::npos) << msg;
  EXPECT_NE(msg.find("x_2"), std::string::npos) << msg;

  write_dataset(dir, d);
  std::ofstream(dir / "meta.txt", std::ios::app) << "weight.0 = -1\n";
  msg = schema_message([&] { read_dataset(dir); });
  EXPECT_NE(msg.find("weight.0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("meta.txt line"), std::string::npos) << msg;
}

TEST(DatasetIo, NonUniformGridRejectedOnIngest) {
  SnapshotDataset d = toy_set();
  d.times[50] += 1e-3;
  const fs::path dir = scratch("nonuniform");
  write_dataset(dir, d, DatasetFormat::kBinary);
  const std::string msg = schema_message([&] { read_dataset(dir); });
  EXPECT_NE(msg.find("uniform"), std::string::npos) << msg;
}

TEST(DatasetIo, TruncatedBinaryReportsOffset) {
  const fs::path dir = scratch("trunc");
  write_dataset(dir, toy_set(), DatasetFormat::kBinary);
  fs::resize_file(dir / "dataset.bin", 60);
  const std::string msg = schema_message([&] { read_dataset(dir); });
  EXPECT_NE(msg.find("dataset.bin"), std::string::npos) << msg;
}

TEST(DatasetIo, PreProjectionKeepsOutputs) {
  const QuadraticFOM f = synthetic_nonnormal_fom(40, 3);
  TrainingSetSpec spec;
  spec.protocol = Protocol::kImpulse;
  spec.amplitudes = {-1.0, 0.5, 1.0};
  spec.num_samples = 41;
  spec.t_end = 4.0;
  const SnapshotDataset d = make_training_set(f, spec);
  Matrix V;
  const SnapshotDataset e = pre_project(d, 12, &V);
  EXPECT_EQ(e.n(), 12);
  EXPECT_LT((V.transpose() * V - Matrix::Identity(12, 12)).norm(), 1e-12);
  for (Index k = 0; k < d.size(); ++k) EXPECT_TRUE(same_bits(d.trajectories[k].Y, e.trajectories[k].Y));
  EXPECT_NO_THROW(e.validate());
}

TEST(ModelIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  const Index n = 7, r = 3, m = 2;
  const ProjectionPair pp(random_matrix(n, r, rng), random_matrix(n, r, rng));
  StableLatentParams p = StableLatentParams::Zero(r, m);
  p.K = random_matrix(r, r, rng);
  p.R = random_matrix(r, r, rng);
  p.Q = random_matrix(r, r, rng) + 3.0 * Matrix::Identity(r, r);
  p.S = random_tensor(r, rng);
  p.B = random_matrix(r, m, rng);
  const RomModel stable(pp, LatentDynamics::stable(p), random_matrix(2, n, rng));
  const RomModel raw(pp, LatentDynamics::raw(random_matrix(r, r, rng), random_tensor(r, rng), random_matrix(r, m, rng)));

  for (const RomModel* mod : {&stable, &raw}) {
    const fs::path path = scratch("model.bin");
    fs::remove_all(path.string() + ".csv");
    save_model(path, *mod, {{"method", "test"}});
    const ModelFile mf = load_model(path);
    EXPECT_EQ(mf.meta.at("method"), "test");
    const RomModel& q = mf.model;
    EXPECT_TRUE(same_bits(q.projection().phi(), mod->projection().phi()));
    EXPECT_TRUE(same_bits(q.projection().psi(), mod->projection().psi()));
    EXPECT_TRUE(same_bits(q.dynamics().A(), mod->dynamics().A()));
    EXPECT_TRUE(same_bits(q.dynamics().H().flat(), mod->dynamics().H().flat()));
    EXPECT_TRUE(same_bits(q.dynamics().B(), mod->dynamics().B()));
    ASSERT_EQ(q.dynamics().is_stable(), mod->dynamics().is_stable());
    ASSERT_EQ(q.output_map().has_value(), mod->output_map().has_value());
    if (q.output_map()) EXPECT_TRUE(same_bits(*q.output_map(), *mod->output_map()));
    if (q.dynamics().is_stable()) {
      EXPECT_TRUE(same_bits(q.dynamics().params().Q, p.Q));
      EXPECT_TRUE(same_bits(q.dynamics().params().S.flat(), p.S.flat()));
      EXPECT_TRUE(fs::exists(path.string() + ".csv/S_unfolded.csv"));
    }
    EXPECT_TRUE(fs::exists(path.string() + ".csv/phi.csv"));
  }
}

TEST(ModelIo, RejectsForeignFiles) {
  const fs::path path = scratch("junk.bin");
  std::ofstream(path) << "not a model";
  const std::string msg = schema_message([&] { load_model(path); });
  EXPECT_NE(msg.find("magic"), std::string::npos) << msg;
}

TEST(InputSignalText, RoundTrip) {
  const std::vector<InputSignal> cases = {
      InputSignal::zero(2),
      InputSignal::step(0.1),
      InputSignal::step((Vector(2) << 1.0 / 3.0, -2.5).finished(), 0.7),
      InputSignal::sinusoid({{0.65, 1.0, 0.0, true}, {0.65, 2.0, 0.0, false}}),
  };
  for (const auto& u : cases) {
    const InputSignal v = InputSignal::from_text(u.to_text());
    EXPECT_EQ(v.to_text(), u.to_text());
    for (double t : {0.0, 0.5, 0.7, 3.3}) EXPECT_TRUE(same_bits(u(t), v(t))) << u.to_text();
  }
  EXPECT_THROW(InputSignal::from_text("ramp 1"), SchemaError);
  EXPECT_THROW(InputSignal::from_text("step x"), SchemaError);
}

}  // namespace
}  // namespace gasrom
