#include "gasrom/pipeline.hpp"

#include <cmath>
#include <limits>

namespace gasrom {

const char* to_string(Method m) {
  switch (m) {
    case Method::kPodGalerkin:
      return "pod-galerkin";
    case Method::kOpInf:
      return "opinf";
    case Method::kGasOpInf:
      return "gasopinf";
    case Method::kNiTrom:
      return "nitrom";
    case Method::kGasNiTrom:
      return "gasnitrom";
  }
  return "gasnitrom";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::kPodGalerkin, Method::kOpInf, Method::kGasOpInf, Method::kNiTrom, Method::kGasNiTrom}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + s + "' (expected gasnitrom, nitrom, opinf, gasopinf or pod-galerkin)");
}

bool is_guaranteed_stable(Method m) { return m == Method::kGasOpInf || m == Method::kGasNiTrom; }

OptimizerOptions PipelineConfig::default_gasopinf_optimizer() {
  OptimizerOptions o;
  o.max_iterations = 2000;
  o.gtol = 1e-12;
  return o;
}

void PipelineConfig::validate() const {
  if (r < 1) throw ConfigError("r must be at least 1");
  if (!(lambda_opinf >= 0) || !(lambda_gasopinf >= 0)) throw ConfigError("regularization must be non-negative");
  if (penalty_weight < 0) throw ConfigError("penalty weight must be non-negative");
  if (gasopinf_optimizer.max_iterations < 0) throw ConfigError("gasopinf iterations must be non-negative");
  train.validate();
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw ConvergenceError(std::string(name) + ": " + e.what());
  }
}

}  // namespace

PipelineResult build_model(const SnapshotDataset& d, const QuadraticFOM* fom, const PipelineConfig& cfg) {
  cfg.validate();
  d.validate();
  if (cfg.method == Method::kPodGalerkin && !fom) {
    throw ConfigError("method pod-galerkin is intrusive and needs a FOM specification");
  }
  PipelineResult out;
  const SimOptions& sim = cfg.train.gradient.sim;
  auto record = [&](const char* name, const RomModel& m) { out.stages.push_back({name, loss(m, d, sim)}); };

  std::vector<double> w;
  if (cfg.weighted_pod) {
    for (const auto& t : d.trajectories) w.push_back(1.0 / t.weight);
  }
  const PodBasis basis = stage("pod", [&] { return pod(d, cfg.r, w); });
  out.pod_modes = basis.modes;
  const ProjectionPair pp(basis.modes, basis.modes);

  std::optional<RawTensors> galerkin;
  if (fom) {
    galerkin = galerkin_tensors(*fom, basis.modes);
    if (cfg.method == Method::kPodGalerkin) {
      out.model = RomModel(pp, LatentDynamics::raw(*galerkin), d.output_map);
      record("pod-galerkin", out.model);
      out.init_loss = out.final_loss = out.stages.back().loss;
      return out;
    }
  }

  const OpInfData data = stage("latent derivatives", [&] { return latent_derivatives(d, basis.modes, fom); });

  if (cfg.method == Method::kOpInf || cfg.method == Method::kNiTrom) {
    const RawTensors t = stage("opinf", [&] { return opinf_lstsq(data, cfg.lambda_opinf); });
    RomModel m(pp, LatentDynamics::raw(t), d.output_map);
    record("opinf", m);
    out.init_loss = out.stages.back().loss;
    if (cfg.method == Method::kOpInf) {
      out.model = std::move(m);
      out.final_loss = out.init_loss;
      return out;
    }
    if (!std::isfinite(out.init_loss)) {
      throw ConvergenceError("nitrom: the OpInf warm start blows up on the training data");
    }
    TrainResult tr = stage("nitrom", [&] {
      return optimize_with_stability_trigger(m, d, cfg.train, cfg.penalty_weight, cfg.penalty_reruns);
    });
    out.model = std::move(tr.model);
    out.history = std::move(tr.history);
    record("nitrom", out.model);
    out.final_loss = out.stages.back().loss;
    return out;
  }

  // Stable branch. Without a FOM the warm start comes from the OpInf tensors.
  const RawTensors seed = galerkin ? *galerkin : stage("opinf", [&] { return opinf_lstsq(data, cfg.lambda_opinf); });
  const StableLatentParams init = stage("gasopinf init", [&] { return gasopinf_initial(seed); });
  const GasOpInfResult gas =
      stage("gasopinf", [&] { return gasopinf_train(data, init, cfg.lambda_gasopinf, cfg.gasopinf_optimizer); });
  RomModel m(pp, LatentDynamics::stable(gas.params), d.output_map);
  record("gasopinf", m);
  out.init_loss = out.stages.back().loss;
  if (cfg.method == Method::kGasOpInf) {
    out.model = std::move(m);
    out.final_loss = out.init_loss;
    return out;
  }
  TrainResult tr = stage("gasnitrom", [&] { return optimize(m, d, cfg.train); });
  out.model = std::move(tr.model);
  out.history = std::move(tr.history);
  record("gasnitrom", out.model);
  out.final_loss = out.stages.back().loss;
  return out;
}

GroundTruth ground_truth(const QuadraticFOM& f, const std::vector<TestCase>& cases, const Vector& times,
                         ErrorNormalization norm, const SimOptions& sim) {
  GroundTruth g;
  g.times = times;
  SimOptions s = sim;
  s.throw_on_blowup = true;
  for (const auto& c : cases) {
    const FomTrajectory tr = simulate_fom(f, c.x0, c.input, times, s);
    double nv = 0.0;
    if (norm == ErrorNormalization::kSteadyState) {
      try {
        const Vector xbar = fom_equilibrium(f, c.input(times[times.size() - 1]), tr.X.col(tr.X.cols() - 1));
        nv = (f.C * xbar).squaredNorm();
      } catch (const ConvergenceError&) {
        nv = tr.Y.col(tr.Y.cols() - 1).squaredNorm();
      }
    } else {
      nv = tr.Y.colwise().squaredNorm().mean();
    }
    g.norm.push_back(nv < kDegenerateWeight ? 1.0 : nv);
    g.Y.push_back(tr.Y);
  }
  return g;
}

Evaluation evaluate_model(const RomModel& m, const std::vector<TestCase>& cases, const GroundTruth& truth,
                          double bound, const SimOptions& sim) {
  require(cases.size() == truth.Y.size(), "evaluate: one ground-truth trajectory per case");
  const Index N = truth.times.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Evaluation ev;
  ev.times = truth.times;
  ev.errors = Matrix::Constant(static_cast<Index>(cases.size()), N, nan);
  SimOptions s = sim;
  s.throw_on_blowup = false;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const LatentTrajectory tr = simulate(m, cases[c].x0, cases[c].input, truth.times, s);
    bool blew = tr.blew_up;
    double tb = tr.blowup_time;
    double sup = 0.0;
    for (Index i = 0; i < tr.Y.cols(); ++i) {
      const double yn = tr.Y.col(i).norm();
      if (!(yn <= bound)) {
        if (!blew || truth.times[i] < tb) tb = truth.times[i];
        blew = true;
        break;
      }
      sup = std::max(sup, yn);
      ev.errors(static_cast<Index>(c), i) = (truth.Y[c].col(i) - tr.Y.col(i)).squaredNorm() / truth.norm[c];
    }
    ev.blew_up.push_back(blew);
    ev.blowup_time.push_back(blew ? tb : nan);
    ev.sup_output.push_back(blew ? std::numeric_limits<double>::infinity() : sup);
  }
  ev.mean_error = ev.errors.colwise().mean().transpose();  // NaN propagates
  return ev;
}

double Evaluation::time_averaged_error() const {
  if (any_blowup()) return std::numeric_limits<double>::infinity();
  return mean_error.mean();
}

bool Evaluation::any_blowup() const {
  for (bool b : blew_up) {
    if (b) return true;
  }
  return false;
}

double Evaluation::max_output() const {
  double m = 0.0;
  for (double s : sup_output) m = std::max(m, s);
  return m;
}

}  // namespace gasrom
