#include "gasrom/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace gasrom {

void apply_mask(TangentVector& g, const FactorMask& mask) {
  if (!mask.grassmann) g.grassmann.setZero();
  if (!mask.stiefel) g.stiefel.setZero();
  if (!mask.euclid) {
    for (auto& e : g.euclid) e.setZero();
  }
}

namespace {

struct Evaluated {
  double f = 0.0;
  TangentVector grad;  // Riemannian, masked
};

Evaluated evaluate(const Objective& f, const ProductPoint& x, const FactorMask& mask) {
  Evaluated e;
  TangentVector G = TangentVector::zeros_like(x);
  e.f = f(x, &G);
  if (std::isfinite(e.f)) {
    apply_mask(G, mask);
    e.grad = riemannian_gradient(x, G);
  }
  return e;
}

double eval_cost(const Objective& f, const ProductPoint& x) {
  try {
    return f(x, nullptr);
  } catch (const ConvergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct Pair {
  TangentVector s, y;
  double rho;
};

TangentVector two_loop(const ProductPoint& x, const TangentVector& g, const std::deque<Pair>& mem) {
  TangentVector q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * metric(x, mem[i].s, q);
    q.axpy(-alpha[i], mem[i].y);
  }
  const Pair& last = mem.back();
  const double gamma = metric(x, last.s, last.y) / metric(x, last.y, last.y);
  q *= gamma;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * metric(x, mem[i].y, q);
    q.axpy(alpha[i] - beta, mem[i].s);
  }
  q *= -1.0;
  return q;
}

bool small_decrease(double f_old, double f_new, double ftol) {
  return ftol > 0 && (f_old - f_new) <= ftol * std::max(std::abs(f_old), 1e-300);
}

MinimizeResult run_lbfgs(const Objective& f, ProductPoint x, const OptimizerOptions& opts,
                         const FactorMask& mask) {
  const LbfgsOptions& lo = opts.lbfgs;
  MinimizeResult res;
  Evaluated cur = evaluate(f, x, mask);
  if (!std::isfinite(cur.f)) throw ConvergenceError("minimize: objective is not finite at the starting point");
  res.history.push_back({0, cur.f, metric_norm(x, cur.grad), 0.0});
  std::deque<Pair> mem;
  int failures = 0;
  bool sd_only = false;
  res.stop_reason = "iteration limit";

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double gnorm = metric_norm(x, cur.grad);
    if (!(gnorm > opts.gtol)) {
      res.stop_reason = "gradient tolerance";
      break;
    }
    const bool use_memory = !mem.empty() && !sd_only;
    TangentVector d = use_memory ? two_loop(x, cur.grad, mem) : -1.0 * cur.grad;
    double slope = metric(x, cur.grad, d);
    if (!(slope < 0)) {
      d = -1.0 * cur.grad;
      slope = -gnorm * gnorm;
      mem.clear();
    }
    // Without curvature information the first trial is capped at unit length.
    double t = use_memory ? lo.initial_step : std::min(lo.initial_step, 1.0 / gnorm);
    ProductPoint trial;
    double f_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int k = 0; k <= lo.max_backtracks; ++k, t *= lo.contraction) {
      try {
        trial = retract(x, d, t);
      } catch (const ConvergenceError&) {
        continue;
      }
      f_trial = eval_cost(f, trial);
      if (std::isfinite(f_trial) && f_trial <= cur.f + lo.c1 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (accepted && lo.refine_step) {
      const double curv = f_trial - cur.f - slope * t;
      const double tq = curv > 0 ? -slope * t * t / (2.0 * curv) : 0.0;
      if (tq > 0 && std::isfinite(tq) && std::abs(tq - t) > 1e-3 * t) {
        try {
          ProductPoint alt = retract(x, d, tq);
          const double f_alt = eval_cost(f, alt);
          if (std::isfinite(f_alt) && f_alt < f_trial) {
            trial = std::move(alt);
            f_trial = f_alt;
            t = tq;
          }
        } catch (const ConvergenceError&) {
        }
      }
    }
    if (!accepted) {
      ++failures;
      if (failures == 1) {
        mem.clear();
        ++res.memory_restarts;
        continue;
      }
      if (!sd_only) {
        sd_only = true;
        res.steepest_descent_fallback = true;
        mem.clear();
        continue;
      }
      res.stop_reason = "line search failed";
      break;
    }

    Evaluated next = evaluate(f, trial, mask);
    if (!std::isfinite(next.f)) {
      res.stop_reason = "objective became non-finite";
      break;
    }
    TangentVector s = transport(x, trial, t * d);
    TangentVector y = next.grad - transport(x, trial, cur.grad);
    for (auto& p : mem) {
      p.s = transport(x, trial, p.s);
      p.y = transport(x, trial, p.y);
    }
    const double sy = metric(trial, s, y);
    if (sy > 1e-12 * metric_norm(trial, s) * metric_norm(trial, y)) {
      mem.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(mem.size()) > lo.memory) mem.pop_front();
    }
    const double f_old = cur.f;
    x = std::move(trial);
    cur = std::move(next);
    res.history.push_back({it, cur.f, metric_norm(x, cur.grad), t});
    if (small_decrease(f_old, cur.f, opts.ftol)) {
      res.stop_reason = "function tolerance";
      break;
    }
  }
  res.point = std::move(x);
  res.loss = cur.f;
  return res;
}

// Elementwise helpers over all components of a tangent vector.
template <typename Fn>
void for_each_component(TangentVector& a, const TangentVector& b, Fn fn) {
  fn(a.grassmann, b.grassmann);
  fn(a.stiefel, b.stiefel);
  for (std::size_t i = 0; i < a.euclid.size(); ++i) fn(a.euclid[i], b.euclid[i]);
}

MinimizeResult run_adam(const Objective& f, ProductPoint x, const OptimizerOptions& opts,
                        const FactorMask& mask) {
  const AdamOptions& ao = opts.adam;
  MinimizeResult res;
  Evaluated cur = evaluate(f, x, mask);
  if (!std::isfinite(cur.f)) throw ConvergenceError("minimize: objective is not finite at the starting point");
  res.history.push_back({0, cur.f, metric_norm(x, cur.grad), 0.0});
  TangentVector m = TangentVector::zeros_like(x);
  TangentVector v = TangentVector::zeros_like(x);
  res.stop_reason = "iteration limit";

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double gnorm = metric_norm(x, cur.grad);
    if (!(gnorm > opts.gtol)) {
      res.stop_reason = "gradient tolerance";
      break;
    }
    m *= ao.beta1;
    m.axpy(1.0 - ao.beta1, cur.grad);
    for_each_component(v, cur.grad, [&](Matrix& vi, const Matrix& gi) {
      vi = ao.beta2 * vi + (1.0 - ao.beta2) * gi.cwiseAbs2();
    });
    const double c1 = 1.0 - std::pow(ao.beta1, it);
    const double c2 = 1.0 - std::pow(ao.beta2, it);
    TangentVector dir = m;
    for_each_component(dir, v, [&](Matrix& di, const Matrix& vi) {
      di = (-ao.lr / c1) * di.array() / ((vi.array() / c2).sqrt() + ao.eps);
    });
    dir = project_tangent(x, dir);
    if (ao.weight_decay > 0 && mask.euclid) {
      for (std::size_t i = 0; i < dir.euclid.size(); ++i) dir.euclid[i] -= ao.lr * ao.weight_decay * x.euclid[i];
    }
    ProductPoint next_x = retract(x, dir, 1.0);
    Evaluated next = evaluate(f, next_x, mask);
    if (!std::isfinite(next.f)) {
      res.stop_reason = "objective became non-finite";
      break;
    }
    m = transport(x, next_x, m);
    const double f_old = cur.f;
    x = std::move(next_x);
    cur = std::move(next);
    res.history.push_back({it, cur.f, metric_norm(x, cur.grad), 1.0});
    if (small_decrease(f_old, cur.f, opts.ftol) && cur.f <= f_old) {
      res.stop_reason = "function tolerance";
      break;
    }
  }
  res.point = std::move(x);
  res.loss = cur.f;
  return res;
}

}  // namespace

MinimizeResult minimize(const Objective& f, ProductPoint x0, const OptimizerOptions& opts,
                        const FactorMask& mask) {
  if (opts.max_iterations < 0) throw ConfigError("minimize: max_iterations must be non-negative");
  return opts.kind == OptimizerKind::kLbfgs ? run_lbfgs(f, std::move(x0), opts, mask)
                                            : run_adam(f, std::move(x0), opts, mask);
}

}  // namespace gasrom
