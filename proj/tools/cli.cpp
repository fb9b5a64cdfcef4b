#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <utility>

#include "gasrom/io.hpp"

namespace gasrom::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Missing inputs or ground truth; maps to exit code 4.
class DataError : public Error {
  using Error::Error;
};

// ---------------------------------------------------------------- options

struct Global {
  std::string config;
  int threads = 1;
  std::string output_dir = ".";
  std::uint64_t seed = 2024;
};

struct GenerateOpts {
  std::string fom = "toy";
  double nu = 20.0;
  Index n = 200;
  std::int64_t fom_seed = -1;  // -1: use --seed
  std::string protocol;        // default per FOM
  std::string amplitudes;      // comma list, default per FOM
  bool amplitudes_given = false;
  Index samples = 100;
  double t_end = 10.0;
  std::string weights = "steady_state";
  std::string format = "text";
  std::string out = "data";
};

struct TrainOpts {
  std::string data;
  std::string method = "gasnitrom";
  Index r = 2;
  std::string fom_file;
  bool no_fom = false;
  int iterations = 0;  // 0: default schedule
  std::string horizons;
  double lambda_opinf = 1e-7;
  double lambda_gasopinf = 1e-8;
  int gasopinf_iterations = 2000;
  double penalty_weight = 1e-3;
  int penalty_reruns = 4;
  bool weighted_pod = false;
  std::string adjoint = "discrete";
  int steps_per_interval = 10;
  Index pre_project = -1;
  std::string out = "model.gasrom";
  std::string history;
};

struct TestOpts {
  std::string kind = "step-random";
  Index cases = 0;        // 0: 100 random steps or 25 random impulses
  double amplitude = std::numeric_limits<double>::quiet_NaN();
  double t_end = 0.0;     // 0: training horizon from the model file, else 10
  Index samples = 0;      // 0: keep the training sample spacing
  std::int64_t test_seed = -1;
  std::string normalization;
  std::string truth;
  std::string fom_file;
  double bound = 1e3;
};

struct EvaluateOpts {
  std::string model;
  TestOpts test;
  std::string out = "errors.csv";
};

struct CompareOpts {
  std::vector<std::string> inputs;
  TestOpts test;
  std::string out = "compare.csv";
};

struct InspectOpts {
  std::string model;
};

// ---------------------------------------------------------------- helpers

std::vector<double> parse_list(const std::string& s, const char* field) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0') throw ConfigError(std::string(field) + ": '" + tok + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(field) + ": empty list");
  return out;
}

std::string csv_value(double v) { return std::isnan(v) ? "nan" : format_double(v); }

struct FomSpec {
  std::string kind = "toy";
  double nu = 20.0;
  Index n = 200;
  std::uint64_t seed = 2024;

  json to_json() const {
    if (kind == "toy") return {{"kind", "toy"}, {"nu", nu}};
    return {{"kind", "synthetic"}, {"n", n}, {"seed", seed}};
  }
  static FomSpec from_json(const json& j, const std::string& where) {
    FomSpec s;
    try {
      s.kind = j.at("kind").get<std::string>();
      if (s.kind == "toy") {
        s.nu = j.value("nu", 20.0);
      } else if (s.kind == "synthetic") {
        s.n = j.at("n").get<Index>();
        s.seed = j.at("seed").get<std::uint64_t>();
      } else {
        throw SchemaError(where + ": field kind must be toy or synthetic");
      }
    } catch (const json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    }
    return s;
  }
  QuadraticFOM build() const {
    if (kind == "toy") return toy_model(nu);
    if (kind == "synthetic") return synthetic_nonnormal_fom(n, seed);
    throw ConfigError("fom: expected toy or synthetic, got '" + kind + "'");
  }
};

FomSpec read_fom_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError(p.string() + ": FOM specification not found");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(p.filename().string() + ": " + e.what());
  }
  return FomSpec::from_json(j, p.filename().string());
}

struct Context {
  Global g;
  std::ostream& out;
  fs::path resolve(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : fs::path(g.output_dir) / q;
  }
};

// Config values become option results for options not given as flags.
std::string json_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  throw ConfigError("config field '" + key + "': expected a scalar or a list of scalars");
}

void apply_config(const json& section, CLI::App* sub, CLI::App& app, const std::string& where, bool scoped) {
  for (auto it = section.begin(); it != section.end(); ++it) {
    if (it.value().is_object()) continue;
    const std::string key = it.key();
    CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt && !scoped) {
      // top-level keys may belong to another verb
      bool known = false;
      const std::function<bool(const CLI::App*)> all = [](const CLI::App*) { return true; };
      for (const CLI::App* other : std::as_const(app).get_subcommands(all)) known = known || other->get_option_no_throw("--" + key);
      if (known) continue;
    }
    if (!opt || key == "config") throw ConfigError("config " + where + ": unknown field '" + key + "'");
    if (opt->count() > 0) continue;
    std::string value;
    if (it.value().is_array()) {
      for (std::size_t i = 0; i < it.value().size(); ++i) value += (i ? "," : "") + json_scalar(it.value()[i], key);
    } else {
      value = json_scalar(it.value(), key);
    }
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config " + where + " field '" + key + "': " + e.what());
    }
  }
}

void load_config(const std::string& path, CLI::App& app) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path + ": top level must be an object");
  CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  if (sub && j.contains(sub->get_name())) apply_config(j[sub->get_name()], sub, app, path + " [" + sub->get_name() + "]", true);
  apply_config(j, sub, app, path, false);
}

const char* kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::kProjection:
      return "projection";
    case BlockKind::kTensors:
      return "tensors";
    case BlockKind::kJoint:
      return "joint";
  }
  return "joint";
}

void print_row(std::ostream& out, const std::vector<std::string>& cells, int width = 14) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string c = cells[i];
    if (static_cast<int>(c.size()) < width) c.insert(0, static_cast<std::size_t>(width) - c.size(), ' ');
    out << c << (i + 1 < cells.size() ? " " : "\n");
  }
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_csv(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const GenerateOpts& o, const Context& ctx) {
  FomSpec fs_;
  fs_.kind = o.fom;
  fs_.nu = o.nu;
  fs_.n = o.n;
  fs_.seed = o.fom_seed >= 0 ? static_cast<std::uint64_t>(o.fom_seed) : ctx.g.seed;
  if (o.fom != "toy" && o.fom != "synthetic") throw ConfigError("--fom: expected toy or synthetic, got '" + o.fom + "'");
  if (o.fom == "synthetic" && o.n < 2) throw ConfigError("--n: synthetic FOM needs n >= 2");
  const bool toy = o.fom == "toy";

  TrainingSetSpec spec;
  const std::string protocol = o.protocol.empty() ? (toy ? "step" : "impulse") : o.protocol;
  if (protocol == "step") {
    spec.protocol = Protocol::kStep;
  } else if (protocol == "impulse") {
    spec.protocol = Protocol::kImpulse;
  } else {
    throw ConfigError("--protocol: expected step or impulse, got '" + protocol + "'");
  }
  if (o.amplitudes_given) {
    spec.amplitudes = parse_list(o.amplitudes, "--amplitudes");
  } else if (!toy && spec.protocol == Protocol::kImpulse) {
    spec.amplitudes = {-1.0, -0.25, -0.05, 0.01, 0.05, 0.25, 1.0};
  } else {
    spec.amplitudes = {0.01, 0.1, 0.2, 0.248};
  }
  spec.num_samples = o.samples;
  spec.t_end = o.t_end;
  spec.weights = weight_convention_from_string(o.weights);
  spec.threads = ctx.g.threads;
  DatasetFormat format = DatasetFormat::kText;
  if (o.format == "binary") {
    format = DatasetFormat::kBinary;
  } else if (o.format != "text") {
    throw ConfigError("--format: expected text or binary, got '" + o.format + "'");
  }

  const QuadraticFOM f = fs_.build();
  const SnapshotDataset d = make_training_set(f, spec);
  const fs::path dir = ctx.resolve(o.out);
  write_dataset(dir, d, format);
  std::ofstream(dir / "fom.json") << fs_.to_json().dump(2) << "\n";

  // energy ||x(t)||^2 per trajectory
  std::ofstream ecsv = open_csv(dir / "energy.csv");
  ecsv << "t";
  for (Index k = 0; k < d.size(); ++k) ecsv << ",E_" << (k + 1);
  ecsv << "\n";
  const Index N = d.num_samples();
  for (Index i = 0; i < N; ++i) {
    ecsv << format_double(d.times[i]);
    for (const auto& t : d.trajectories) ecsv << "," << format_double(t.X.col(i).squaredNorm());
    ecsv << "\n";
  }

  ctx.out << "wrote " << d.size() << " trajectories x " << N << " samples (n=" << d.n() << ", m=" << d.m()
          << ", p=" << d.p() << ") to " << dir.string() << "\n";
  std::vector<std::string> head = {"t"};
  for (Index k = 0; k < d.size(); ++k) head.push_back("E_" + std::to_string(k + 1));
  print_row(ctx.out, head);
  const Index rows = std::min<Index>(11, N);
  for (Index q = 0; q < rows; ++q) {
    const Index i = rows == 1 ? 0 : q * (N - 1) / (rows - 1);
    std::vector<std::string> cells = {short_num(d.times[i])};
    for (const auto& t : d.trajectories) cells.push_back(short_num(t.X.col(i).squaredNorm()));
    print_row(ctx.out, cells);
  }
  std::vector<std::string> wrow = {"weight"};
  for (const auto& t : d.trajectories) wrow.push_back(short_num(t.weight));
  print_row(ctx.out, wrow);
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const TrainOpts& o, const Context& ctx) {
  if (o.data.empty()) throw ConfigError("--data: a dataset directory is required");
  PipelineConfig cfg;
  cfg.method = method_from_string(o.method);
  cfg.r = o.r;
  cfg.lambda_opinf = o.lambda_opinf;
  cfg.lambda_gasopinf = o.lambda_gasopinf;
  cfg.gasopinf_optimizer.max_iterations = o.gasopinf_iterations;
  cfg.penalty_weight = o.penalty_weight;
  cfg.penalty_reruns = o.penalty_reruns;
  cfg.weighted_pod = o.weighted_pod;
  if (!o.horizons.empty()) cfg.train.horizons = parse_list(o.horizons, "--horizons");
  if (o.iterations < 0) throw ConfigError("--iterations must be non-negative");
  if (o.iterations > 0) {
    for (auto& b : cfg.train.blocks) b.iterations = o.iterations;
  }
  if (o.adjoint == "continuous") {
    cfg.train.gradient.scheme = AdjointScheme::kContinuous;
  } else if (o.adjoint != "discrete") {
    throw ConfigError("--adjoint: expected discrete or continuous, got '" + o.adjoint + "'");
  }
  if (o.steps_per_interval < 1) throw ConfigError("--steps-per-interval must be at least 1");
  cfg.train.gradient.sim.steps_per_interval = o.steps_per_interval;
  cfg.train.gradient.threads = ctx.g.threads;
  cfg.validate();

  const fs::path data(o.data);
  if (!fs::is_directory(data)) throw DataError(data.string() + ": dataset directory not found");
  Matrix V;
  DatasetReadOptions ro;
  ro.pre_project = o.pre_project;
  ro.projection_basis = &V;
  const SnapshotDataset d = read_dataset(data, ro);

  std::optional<FomSpec> spec;
  if (!o.no_fom) {
    if (!o.fom_file.empty()) {
      spec = read_fom_file(o.fom_file);
    } else if (fs::exists(data / "fom.json")) {
      spec = read_fom_file(data / "fom.json");
    }
  }
  std::optional<QuadraticFOM> fom;
  if (spec) {
    fom = spec->build();
    if (V.size() == 0 && fom->n() != d.n()) {
      throw SchemaError("FOM dimension " + std::to_string(fom->n()) + " differs from dataset n=" + std::to_string(d.n()));
    }
  }
  // Intrusive projections need the full state space.
  const QuadraticFOM* fptr = fom && V.size() == 0 ? &*fom : nullptr;
  if (cfg.method == Method::kPodGalerkin && !fptr) {
    throw ConfigError("method pod-galerkin is intrusive and needs a FOM specification (--fom) without pre-projection");
  }

  PipelineResult res = build_model(d, fptr, cfg);
  RomModel model = std::move(res.model);
  if (V.size() > 0) {
    // lift frames back to the full space; outputs are unchanged
    const Matrix& Cv = *d.output_map;
    std::optional<Matrix> C;
    const Index n_full = V.rows();
    if (!(Cv.rows() == n_full && (Cv - V).norm() == 0.0)) C = Matrix(Cv * V.transpose());
    model = RomModel(ProjectionPair(V * model.projection().phi(), V * model.projection().psi()), model.dynamics(), C);
  }

  std::map<std::string, std::string> meta;
  meta["method"] = to_string(cfg.method);
  if (spec) meta["fom"] = spec->to_json().dump();
  meta["t_end"] = format_double(d.times[d.num_samples() - 1]);
  meta["dt"] = format_double(d.times[1] - d.times[0]);
  meta["samples"] = std::to_string(d.num_samples());
  meta["trajectories"] = std::to_string(d.size());
  meta["weight_convention"] = d.weight_convention;
  meta["init_loss"] = format_double(res.init_loss);
  meta["final_loss"] = format_double(res.final_loss);
  if (V.size() > 0) meta["pre_projection"] = std::to_string(V.cols());

  const fs::path mpath = ctx.resolve(o.out);
  save_model(mpath, model, meta);
  const fs::path hpath = o.history.empty() ? fs::path(mpath.string() + ".history.csv") : ctx.resolve(o.history);
  std::ofstream h = open_csv(hpath);
  h << "horizon,t_final,block,kind,iteration,loss,grad_norm\n";
  for (const auto& r : res.history) {
    h << r.horizon << "," << format_double(r.t_final) << "," << r.block << "," << kind_name(r.kind) << ","
      << r.iteration << "," << format_double(r.loss) << "," << format_double(r.grad_norm) << "\n";
  }

  print_row(ctx.out, {"stage", "loss"}, 16);
  for (const auto& s : res.stages) print_row(ctx.out, {s.stage, short_num(s.loss)}, 16);
  ctx.out << "model: " << mpath.string() << "\nhistory: " << hpath.string() << " (" << res.history.size()
          << " iterations)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- test sets

struct TestSet {
  std::vector<TestCase> cases;
  GroundTruth truth;
};

std::string meta_or(const std::map<std::string, std::string>* meta, const std::string& key) {
  if (!meta) return "";
  const auto it = meta->find(key);
  return it == meta->end() ? "" : it->second;
}

TestSet make_test_set(const TestOpts& o, const std::map<std::string, std::string>* meta, Index m,
                      const Context& ctx) {
  std::string norm_name = o.normalization;
  const bool stepish = o.kind == "step-random" || o.kind == "step";
  if (norm_name.empty()) norm_name = stepish ? "steady_state" : "energy";
  ErrorNormalization norm;
  if (norm_name == "steady_state") {
    norm = ErrorNormalization::kSteadyState;
  } else if (norm_name == "energy") {
    norm = ErrorNormalization::kEnergy;
  } else {
    throw ConfigError("--normalization: expected steady_state or energy, got '" + norm_name + "'");
  }

  TestSet ts;
  if (!o.truth.empty()) {
    DatasetReadOptions ro;
    ro.pre_project = 0;
    const SnapshotDataset d = read_dataset(o.truth, ro);
    ts.truth.times = d.times;
    for (const auto& t : d.trajectories) {
      ts.cases.push_back({t.x0, t.input});
      ts.truth.Y.push_back(t.Y);
      const double v = norm == ErrorNormalization::kEnergy ? t.Y.colwise().squaredNorm().mean()
                                                          : t.Y.col(t.Y.cols() - 1).squaredNorm();
      ts.truth.norm.push_back(v < kDegenerateWeight ? 1.0 : v);
    }
    return ts;
  }

  std::optional<FomSpec> spec;
  if (!o.fom_file.empty()) {
    spec = read_fom_file(o.fom_file);
  } else if (const std::string j = meta_or(meta, "fom"); !j.empty()) {
    try {
      spec = FomSpec::from_json(json::parse(j), "model metadata fom");
    } catch (const json::exception& e) {
      throw SchemaError(std::string("model metadata fom: ") + e.what());
    }
  }
  if (!spec) {
    throw DataError("no ground truth available: pass --truth <dataset> or --fom <fom.json>, "
                    "or evaluate a model trained with a FOM specification");
  }
  const QuadraticFOM f = spec->build();
  if (f.m() != m) throw SchemaError("FOM input dimension differs from the model's");

  const std::string mt = meta_or(meta, "t_end");
  const double t_end = o.t_end > 0 ? o.t_end : (mt.empty() ? 10.0 : std::strtod(mt.c_str(), nullptr));
  Index N = o.samples;
  if (N <= 0) {
    const std::string dt = meta_or(meta, "dt");
    N = dt.empty() ? 100 : static_cast<Index>(std::llround(t_end / std::strtod(dt.c_str(), nullptr))) + 1;
  }
  const Vector times = uniform_grid(t_end, N);

  std::mt19937_64 rng(o.test_seed >= 0 ? static_cast<std::uint64_t>(o.test_seed) : ctx.g.seed);
  const Vector zero = Vector::Zero(f.n());
  const Vector b1 = f.B * Vector::Ones(f.m());
  auto amp = [&](double dflt) { return std::isnan(o.amplitude) ? dflt : o.amplitude; };
  if (o.kind == "step-random") {
    std::uniform_real_distribution<double> u(0.0, amp(0.25));
    for (Index i = 0; i < (o.cases > 0 ? o.cases : 100); ++i) {
      ts.cases.push_back({zero, InputSignal::step(Vector::Constant(f.m(), u(rng)))});
    }
  } else if (o.kind == "step") {
    ts.cases.push_back({zero, InputSignal::step(Vector::Constant(f.m(), amp(0.1)))});
  } else if (o.kind == "sinusoid") {
    const double a = amp(0.65);
    ts.cases.push_back({zero, InputSignal::sinusoid({{a, 1.0, 0.0, false}, {a, 2.0, 0.0, true}}, Vector::Ones(f.m()))});
  } else if (o.kind == "impulse-random") {
    std::uniform_real_distribution<double> u(-amp(1.0), amp(1.0));
    for (Index i = 0; i < (o.cases > 0 ? o.cases : 25); ++i) ts.cases.push_back({u(rng) * b1, InputSignal::zero(f.m())});
  } else if (o.kind == "impulse") {
    ts.cases.push_back({amp(1.0) * b1, InputSignal::zero(f.m())});
  } else {
    throw ConfigError("--test: expected step-random, step, sinusoid, impulse-random or impulse, got '" + o.kind + "'");
  }
  ts.truth = ground_truth(f, ts.cases, times, norm);
  return ts;
}

void add_test_options(CLI::App* app, TestOpts& t) {
  app->add_option("--test", t.kind, "step-random | step | sinusoid | impulse-random | impulse");
  app->add_option("--cases", t.cases, "number of random test cases");
  app->add_option("--amplitude", t.amplitude, "step level, sinusoid amplitude or impulse bound");
  app->add_option("--t-end", t.t_end, "test horizon (default: training horizon)");
  app->add_option("--samples", t.samples, "test samples (default: training spacing)");
  app->add_option("--test-seed", t.test_seed, "seed for random test cases (default: --seed)");
  app->add_option("--normalization", t.normalization, "steady_state | energy");
  app->add_option("--truth", t.truth, "dataset directory used as ground truth");
  app->add_option("--fom", t.fom_file, "FOM specification (fom.json) used as ground truth");
  app->add_option("--bound", t.bound, "output norm treated as blow-up");
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const EvaluateOpts& o, const Context& ctx) {
  if (o.model.empty()) throw ConfigError("--model: a model file is required");
  if (!fs::exists(o.model)) throw DataError(o.model + ": model file not found");
  const ModelFile mf = load_model(o.model);
  const TestSet ts = make_test_set(o.test, &mf.meta, mf.model.m(), ctx);
  const Evaluation ev = evaluate_model(mf.model, ts.cases, ts.truth, o.test.bound);
  const Index K = static_cast<Index>(ts.cases.size());

  const fs::path path = ctx.resolve(o.out);
  std::ofstream out = open_csv(path);
  out << "t,e";
  for (Index k = 0; k < K; ++k) out << ",e_" << (k + 1);
  out << ",blowup\n";
  for (Index i = 0; i < ev.times.size(); ++i) {
    int blown = 0;
    for (Index k = 0; k < K; ++k) blown += ev.blew_up[k] && ev.blowup_time[k] <= ev.times[i];
    out << format_double(ev.times[i]) << "," << csv_value(ev.mean_error[i]);
    for (Index k = 0; k < K; ++k) out << "," << csv_value(ev.errors(k, i));
    out << "," << (blown ? 1 : 0) << "\n";
  }

  Index nblow = 0;
  double first = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < K; ++k) {
    if (ev.blew_up[k]) {
      ++nblow;
      first = std::min(first, ev.blowup_time[k]);
    }
  }
  ctx.out << "model: " << o.model << " (" << meta_or(&mf.meta, "method") << ")\n";
  ctx.out << "cases: " << K << ", samples: " << ev.times.size() << ", horizon: " << short_num(ev.times[ev.times.size() - 1])
          << "\n";
  ctx.out << "time-averaged error: " << short_num(ev.time_averaged_error()) << "\n";
  ctx.out << "blow-ups: " << nblow;
  if (nblow) ctx.out << " (first at t=" << short_num(first) << ")";
  ctx.out << "\nmax output norm: " << short_num(ev.max_output()) << "\nwrote " << path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- compare

bool is_model_file(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  return in.gcount() == 8 && std::string(magic, 7) == "GASROMM";
}

// t and e columns of an evaluate CSV.
std::pair<Vector, Vector> read_curve(const std::string& p) {
  std::ifstream in(p);
  if (!in) throw DataError(p + ": file not found");
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,e", 0) != 0) throw SchemaError(p + " line 1: expected an error-curve header starting with t,e");
  std::vector<double> t, e;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream s(line);
    std::string a, b;
    std::getline(s, a, ',');
    std::getline(s, b, ',');
    char* end1 = nullptr;
    char* end2 = nullptr;
    const double tv = std::strtod(a.c_str(), &end1);
    const double ev = std::strtod(b.c_str(), &end2);
    if (a.empty() || b.empty() || *end1 || *end2) throw SchemaError(p + " line " + std::to_string(lineno) + ": malformed row");
    t.push_back(tv);
    e.push_back(ev);
  }
  return {Eigen::Map<Vector>(t.data(), static_cast<Index>(t.size())),
          Eigen::Map<Vector>(e.data(), static_cast<Index>(e.size()))};
}

int cmd_compare(const CompareOpts& o, const Context& ctx) {
  if (o.inputs.size() < 2) throw ConfigError("compare: at least two model files or error curves are required");
  struct Column {
    std::string label;
    Vector e;
    bool blew_up = false;
    double blowup_time = std::numeric_limits<double>::quiet_NaN();
    double max_output = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Column> cols;
  std::optional<TestSet> ts;
  Vector grid;
  std::map<std::string, int> seen;
  for (const auto& p : o.inputs) {
    if (!fs::exists(p)) throw DataError(p + ": file not found");
    Column c;
    if (is_model_file(p)) {
      const ModelFile mf = load_model(p);
      if (!ts) {
        ts = make_test_set(o.test, &mf.meta, mf.model.m(), ctx);
        if (grid.size() > 0 && grid != ts->truth.times) throw DataError("compare: mismatched test grids (" + p + ")");
        grid = ts->truth.times;
      }
      const Evaluation ev = evaluate_model(mf.model, ts->cases, ts->truth, o.test.bound);
      c.label = meta_or(&mf.meta, "method");
      c.e = ev.mean_error;
      c.blew_up = ev.any_blowup();
      if (c.blew_up) {
        c.blowup_time = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ev.blew_up.size(); ++k) {
          if (ev.blew_up[k]) c.blowup_time = std::min(c.blowup_time, ev.blowup_time[k]);
        }
      }
      c.max_output = ev.max_output();
    } else {
      auto [t, e] = read_curve(p);
      if (grid.size() == 0) {
        grid = t;
      } else if (t.size() != grid.size() || t != grid) {
        throw DataError("compare: mismatched test grids: " + p + " has " + std::to_string(t.size()) +
                        " samples on a different grid than the first input");
      }
      c.label = fs::path(p).stem().string();
      c.e = e;
      for (Index i = 0; i < e.size(); ++i) {
        if (std::isnan(e[i])) {
          c.blew_up = true;
          c.blowup_time = t[i];
          break;
        }
      }
    }
    if (c.label.empty()) c.label = fs::path(p).stem().string();
    const int k = ++seen[c.label];
    if (k > 1) c.label += "_" + std::to_string(k);
    cols.push_back(std::move(c));
  }
  if (ts && grid != ts->truth.times) throw DataError("compare: mismatched test grids between curves and models");

  const fs::path path = ctx.resolve(o.out);
  std::ofstream out = open_csv(path);
  out << "t";
  for (const auto& c : cols) out << ",e_" << c.label;
  out << "\n";
  for (Index i = 0; i < grid.size(); ++i) {
    out << format_double(grid[i]);
    for (const auto& c : cols) out << "," << csv_value(c.e[i]);
    out << "\n";
  }
  fs::path spath = path;
  spath.replace_extension();
  spath += "_summary.csv";
  std::ofstream sum = open_csv(spath);
  sum << "method,time_averaged_error,blowup,blowup_time,max_output\n";
  print_row(ctx.out, {"method", "mean e(t)", "blow-up", "at t", "max |y|"});
  for (const auto& c : cols) {
    const double avg = c.blew_up ? std::numeric_limits<double>::infinity() : c.e.mean();
    sum << c.label << "," << format_double(avg) << "," << (c.blew_up ? 1 : 0) << "," << csv_value(c.blowup_time) << ","
        << csv_value(c.max_output) << "\n";
    print_row(ctx.out, {c.label, short_num(avg), c.blew_up ? "yes" : "no", c.blew_up ? short_num(c.blowup_time) : "-",
                        std::isnan(c.max_output) ? "-" : short_num(c.max_output)});
  }
  ctx.out << "wrote " << path.string() << " and " << spath.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const InspectOpts& o, const Context& ctx) {
  if (o.model.empty()) throw ConfigError("--model: a model file is required");
  if (!fs::exists(o.model)) throw DataError(o.model + ": model file not found");
  const ModelFile mf = load_model(o.model);
  const RomModel& m = mf.model;
  auto& out = ctx.out;
  for (const auto& [k, v] : mf.meta) out << k << " = " << v << "\n";
  out << "output map: " << (m.output_map() ? "C (" + std::to_string(m.p()) + " x " + std::to_string(m.n()) + ")" : "identity")
      << "\n";
  const Matrix& A = m.dynamics().A();
  Eigen::VectorXcd ev = eigenvalues(A);
  std::vector<std::complex<double>> sorted(ev.data(), ev.data() + ev.size());
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
  });
  out << "eigenvalues of A:\n";
  for (const auto& z : sorted) out << "  " << short_num(z.real()) << (z.imag() < 0 ? " - " : " + ") << short_num(std::abs(z.imag())) << "i\n";
  const double a = spectral_abscissa(A);
  out << "spectral abscissa: " << short_num(a) << (a < 0 ? " (Hurwitz)" : " (not Hurwitz)") << "\n";
  if (m.dynamics().is_stable()) {
    const auto& p = m.dynamics().params();
    const Eigen::JacobiSVD<Matrix> svd(p.R);
    out << "sigma_min(R): " << short_num(svd.singularValues()[svd.singularValues().size() - 1]) << "\n";
    out << "cond(Qtilde): " << short_num(condition_number(assemble(p).Qtilde)) << "\n";
  } else {
    out << "sigma_min(R), cond(Qtilde): n/a (unconstrained tensors)\n";
  }
  out << "||H||_F: " << short_num(m.dynamics().H().flat().norm()) << "\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- entry

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stable quadratic reduced-order models: data generation, training and evaluation", "gasrom"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config, "JSON config file; keys are long option names, optionally grouped per verb");
  app.add_option("--threads", g.threads, "worker threads (1 is fully deterministic); env GASROM_THREADS");
  app.add_option("--output-dir", g.output_dir, "base for relative output paths; env GASROM_OUTPUT_DIR");
  app.add_option("--seed", g.seed, "seed for random test cases and the synthetic FOM");

  GenerateOpts go;
  CLI::App* gen = app.add_subcommand("generate", "simulate a FOM and write a snapshot dataset");
  gen->add_option("--fom", go.fom, "toy | synthetic");
  gen->add_option("--nu", go.nu, "toy model coupling");
  gen->add_option("--n", go.n, "synthetic FOM dimension");
  gen->add_option("--fom-seed", go.fom_seed, "synthetic FOM seed (default: --seed)");
  gen->add_option("--protocol", go.protocol, "step | impulse");
  gen->add_option("--amplitudes", go.amplitudes, "comma-separated step levels or impulse amplitudes");
  gen->add_option("--samples", go.samples, "samples per trajectory");
  gen->add_option("--t-end", go.t_end, "final time");
  gen->add_option("--weights", go.weights, "unit | steady_state | energy");
  gen->add_option("--format", go.format, "text | binary");
  gen->add_option("--out", go.out, "dataset directory");

  TrainOpts to;
  CLI::App* tr = app.add_subcommand("train", "build a reduced-order model from a dataset");
  tr->add_option("--data", to.data, "dataset directory");
  tr->add_option("--method", to.method, "gasnitrom | nitrom | opinf | gasopinf | pod-galerkin");
  tr->add_option("--r", to.r, "latent dimension");
  tr->add_option("--fom", to.fom_file, "FOM specification (default: <data>/fom.json when present)");
  tr->add_flag("--no-fom", to.no_fom, "ignore any FOM specification");
  tr->add_option("--iterations", to.iterations, "iterations per training block");
  tr->add_option("--horizons", to.horizons, "comma-separated increasing training horizons");
  tr->add_option("--lambda-opinf", to.lambda_opinf, "OpInf regularization");
  tr->add_option("--lambda-gasopinf", to.lambda_gasopinf, "GasOpInf regularization");
  tr->add_option("--gasopinf-iterations", to.gasopinf_iterations, "GasOpInf optimizer iterations");
  tr->add_option("--penalty-weight", to.penalty_weight, "NiTROM stability penalty weight");
  tr->add_option("--penalty-reruns", to.penalty_reruns, "NiTROM penalty reruns");
  tr->add_flag("--weighted-pod", to.weighted_pod, "weight POD snapshots by 1/alpha");
  tr->add_option("--adjoint", to.adjoint, "discrete | continuous");
  tr->add_option("--steps-per-interval", to.steps_per_interval, "RK4 substeps per sample interval");
  tr->add_option("--pre-project", to.pre_project, "POD pre-projection on ingest (0 off, -1 auto)");
  tr->add_option("--out", to.out, "model file");
  tr->add_option("--history", to.history, "loss history CSV (default: <model>.history.csv)");

  EvaluateOpts eo;
  CLI::App* ev = app.add_subcommand("evaluate", "error curve of one model against ground truth");
  ev->add_option("--model", eo.model, "model file");
  ev->add_option("--out", eo.out, "error-curve CSV");
  add_test_options(ev, eo.test);

  CompareOpts co;
  CLI::App* cmp = app.add_subcommand("compare", "aligned error curves of several models");
  cmp->add_option("inputs", co.inputs, "model files or error-curve CSVs");
  cmp->add_option("--out", co.out, "combined CSV");
  add_test_options(cmp, co.test);

  InspectOpts io;
  CLI::App* ins = app.add_subcommand("inspect", "print metadata and stability diagnostics of a model");
  ins->add_option("--model", io.model, "model file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const bool flag_threads = app.get_option("--threads")->count() > 0;
    const bool flag_outdir = app.get_option("--output-dir")->count() > 0;
    if (!g.config.empty()) load_config(g.config, app);
    if (const char* e = std::getenv("GASROM_THREADS"); e && *e && !flag_threads) {
      char* end = nullptr;
      const long v = std::strtol(e, &end, 10);
      if (*end || v < 1) throw ConfigError(std::string("GASROM_THREADS: expected a positive integer, got '") + e + "'");
      g.threads = static_cast<int>(v);
    }
    if (const char* e = std::getenv("GASROM_OUTPUT_DIR"); e && *e && !flag_outdir) g.output_dir = e;
    if (g.threads < 1) throw ConfigError("--threads must be at least 1");

    const Context ctx{g, out};
    go.amplitudes_given = gen->get_option("--amplitudes")->count() > 0;
    if (*gen) return cmd_generate(go, ctx);
    if (*tr) return cmd_train(to, ctx);
    if (*ev) return cmd_evaluate(eo, ctx);
    if (*cmp) return cmd_compare(co, ctx);
    return cmd_inspect(io, ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace gasrom::cli
