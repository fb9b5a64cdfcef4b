#pragma once

// Initialization chain and evaluation shared by the command-line tool and
// the acceptance suite:
//   POD -> POD-Galerkin -> {OpInf | GasOpInf} -> {NiTROM | GasNiTROM}

#include <optional>
#include <string>
#include <vector>

#include "gasrom/opinf.hpp"
#include "gasrom/training.hpp"

namespace gasrom {

enum class Method { kPodGalerkin, kOpInf, kGasOpInf, kNiTrom, kGasNiTrom };

const char* to_string(Method m);
Method method_from_string(const std::string& s);
/// Stable parameterization (GasOpInf, GasNiTROM).
bool is_guaranteed_stable(Method m);

struct PipelineConfig {
  Method method = Method::kGasNiTrom;
  Index r = 2;
  double lambda_opinf = 1e-7;      // OpInf and the NiTROM warm start
  double lambda_gasopinf = 1e-8;   // GasOpInf and the GasNiTROM warm start
  OptimizerOptions gasopinf_optimizer = default_gasopinf_optimizer();
  TrainConfig train;
  double penalty_weight = 1e-3;    // NiTROM stability trigger
  int penalty_reruns = 4;
  /// Trajectory j enters POD with weight 1/alpha_j when set.
  bool weighted_pod = false;

  void validate() const;
  static OptimizerOptions default_gasopinf_optimizer();
};

struct StageRecord {
  std::string stage;
  double loss = 0.0;  // trajectory loss on the full dataset after the stage
};

struct PipelineResult {
  RomModel model;
  Matrix pod_modes;
  std::vector<StageRecord> stages;
  std::vector<TrainRecord> history;  // trajectory-fitting stage only
  double init_loss = 0.0;            // loss of the warm start handed to training
  double final_loss = 0.0;
};

/// Throws ConfigError when the method needs a FOM that is not given, and lets
/// numerical exceptions propagate with the stage named in the message.
PipelineResult build_model(const SnapshotDataset& d, const QuadraticFOM* fom, const PipelineConfig& cfg);

struct TestCase {
  Vector x0;
  InputSignal input;
};

struct GroundTruth {
  Vector times;
  std::vector<Matrix> Y;  // p x N per case
  std::vector<double> norm;  // per-case normalization of the squared error
};

enum class ErrorNormalization {
  kSteadyState,  // || C xbar ||^2 under the final input value
  kEnergy,       // (1/N) sum_i || y(t_i) ||^2
};

GroundTruth ground_truth(const QuadraticFOM& f, const std::vector<TestCase>& cases, const Vector& times,
                         ErrorNormalization norm, const SimOptions& sim = {});

struct Evaluation {
  Vector times;
  Matrix errors;       // case x N normalized squared errors (NaN after blow-up)
  Vector mean_error;   // per time over cases; NaN where any case blew up
  std::vector<bool> blew_up;
  std::vector<double> blowup_time;
  std::vector<double> sup_output;  // max || yhat || over the reached samples
  double time_averaged_error() const;  // mean of mean_error (inf if any blow-up)
  bool any_blowup() const;
  double max_output() const;
};

/// Simulates the ROM on every case; a run that blows up or whose output norm
/// exceeds bound is truncated and flagged.
Evaluation evaluate_model(const RomModel& m, const std::vector<TestCase>& cases, const GroundTruth& truth,
                          double bound = 1e3, const SimOptions& sim = {});

}  // namespace gasrom
