#pragma once

// Riemannian L-BFGS and Adam(W) over ProductPoint spaces.

#include <functional>
#include <string>
#include <vector>

#include "gasrom/manifolds.hpp"

namespace gasrom {

/// Returns the cost at p and, when grad is non-null, writes the Euclidean
/// gradient of the ambient cost (same layout as p). A non-finite cost marks
/// an infeasible point (e.g. a blown-up simulation).
using Objective = std::function<double(const ProductPoint& p, TangentVector* grad)>;

struct LbfgsOptions {
  int memory = 10;
  double c1 = 1e-4;           // sufficient-decrease constant
  double contraction = 0.5;   // backtracking factor
  double initial_step = 1.0;
  int max_backtracks = 40;
  /// After an accepted trial t, also try the minimizer of the quadratic
  /// interpolant through f(0), f'(0), f(t) and keep it when it is lower.
  bool refine_step = true;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW), Euclidean factors only
};

enum class OptimizerKind { kLbfgs, kAdam };

struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::kLbfgs;
  LbfgsOptions lbfgs;
  AdamOptions adam;
  int max_iterations = 100;
  /// Stop when the Riemannian gradient norm falls below this.
  double gtol = 1e-10;
  /// Stop when the relative decrease over one iteration falls below this.
  double ftol = 0.0;
};

/// Frozen factors have their gradient masked to zero.
struct FactorMask {
  bool grassmann = true;
  bool stiefel = true;
  bool euclid = true;

  static FactorMask projection_only() { return {true, true, false}; }
  static FactorMask tensors_only() { return {false, false, true}; }
};

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct MinimizeResult {
  ProductPoint point;
  double loss = 0.0;
  std::vector<IterationRecord> history;  // entry 0 is the starting point
  int memory_restarts = 0;
  bool steepest_descent_fallback = false;
  std::string stop_reason;
};

void apply_mask(TangentVector& g, const FactorMask& mask);

MinimizeResult minimize(const Objective& f, ProductPoint x0, const OptimizerOptions& opts,
                        const FactorMask& mask = {});

}  // namespace gasrom
