#pragma once

// Inertial scheme with viscous (alpha) and Hessian-driven (beta) damping and a
// two-condition backtracking line search:
//   q          = theta + alpha s (theta - theta_prev) - beta s^2 (grad - grad_prev)
//   theta_next = q - s grad
// with s = rho^i s_ref, i the smallest integer such that
//   (C1) L(theta_next) - L(theta) - <grad, d> <= delta/(2s) |d|^2
//   (C2) |grad(theta_next) - grad|            <= delta/s |d|
// where d = theta_next - theta and s_ref is s0 (reset) or the previous step (warm).

#include "dindip/common.hpp"
#include "dindip/objective.hpp"
#include "dindip/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dindip {

enum class BacktrackMode { Reset, Warm };

inline std::string to_string(BacktrackMode mode) { return mode == BacktrackMode::Reset ? "reset" : "warm"; }

inline BacktrackMode parse_backtrack_mode(const std::string& name) {
  if (name == "reset") return BacktrackMode::Reset;
  if (name == "warm") return BacktrackMode::Warm;
  throw ConfigError("unknown backtrack mode '" + name + "'");
}

template <typename Scalar>
struct OptimizerConfig {
  Scalar alpha = 0;
  Scalar beta = 0;
  Scalar delta = 1;
  Scalar rho = Scalar(0.5);
  Scalar s0 = Scalar(0.1);
  BacktrackMode mode = BacktrackMode::Reset;
  Index max_iters = 15000;
  int max_backtracks = 60;
  Scalar stop_loss_threshold = Scalar(1e-14);
  bool early_stop_on_noise = false;
  Scalar noise_norm = 0;
  Scalar divergence_threshold = Scalar(1e12);
  Index record_every = 1;  // 0 records only the first and last iterate

  void validate() const {
    if (!(alpha >= 0)) throw ConfigError("optimizer: alpha must be >= 0");
    if (!(beta >= 0)) throw ConfigError("optimizer: beta must be >= 0");
    if (!(delta > 0 && delta < 2)) throw ConfigError("optimizer: delta must lie in (0, 2)");
    if (!(rho > 0 && rho < 1)) throw ConfigError("optimizer: rho must lie in (0, 1)");
    if (!(s0 > 0)) throw ConfigError("optimizer: s0 must be > 0");
    if (max_iters < 0) throw ConfigError("optimizer: max_iters must be >= 0");
    if (max_backtracks < 0) throw ConfigError("optimizer: max_backtracks must be >= 0");
    if (record_every < 0) throw ConfigError("optimizer: record_every must be >= 0");
    if (!(noise_norm >= 0)) throw ConfigError("optimizer: noise_norm must be >= 0");
  }

  /// s0 (alpha + beta delta) < 1 - delta/2, the regime where the discrete Lyapunov value decreases.
  bool lyapunov_regime() const { return s0 * (alpha + beta * delta) < Scalar(1) - delta / 2; }
};

template <typename Scalar>
struct OptimState {
  Index tau = 0;
  VectorX<Scalar> theta;
  VectorX<Scalar> theta_prev;
  VectorX<Scalar> grad;
  VectorX<Scalar> grad_prev;
  Scalar s = 0;  // last accepted step; s0 before the first step
  Scalar loss = 0;
  Scalar v_norm = 0;
  int backtracks = 0;
};

/// theta_{-1} = theta_0 and grad_{-1} = grad_0, so the first step is a gradient step.
template <Objective Obj>
OptimState<typename Obj::Scalar> init_optim_state(const Obj& obj, const OptimizerConfig<typename Obj::Scalar>& config,
                                                  const VectorX<typename Obj::Scalar>& theta0) {
  require_dims(theta0.size() == obj.dimension(), "optimizer: theta0 has the wrong length");
  auto ev = obj.evaluate(theta0);
  OptimState<typename Obj::Scalar> st;
  st.theta = theta0;
  st.theta_prev = theta0;
  st.grad = ev.grad;
  st.grad_prev = std::move(ev.grad);
  st.loss = ev.loss;
  st.s = config.s0;
  return st;
}

template <typename Scalar>
VectorX<Scalar> inertial_candidate(const OptimState<Scalar>& st, const OptimizerConfig<Scalar>& config, Scalar s) {
  VectorX<Scalar> next = st.theta - s * st.grad;
  if (config.alpha != 0) next += (config.alpha * s) * (st.theta - st.theta_prev);
  if (config.beta != 0) next -= (config.beta * s * s) * (st.grad - st.grad_prev);
  return next;
}

/// Outcome of one trial of the line search.
template <typename Scalar>
struct TrialCheck {
  bool c1 = false;
  bool c2 = false;
  Scalar curvature = 0;  // 2 (L+ - L - <grad, d>) / |d|^2
  Scalar ratio = 0;      // |grad+ - grad| / |d|

  bool accepted() const { return c1 && c2; }
  /// Lower bound on the gradient's Lipschitz constant along the segment.
  Scalar lipschitz() const { return std::max(curvature, ratio); }
};

template <typename Scalar>
TrialCheck<Scalar> check_trial(Scalar loss, const VectorX<Scalar>& grad, const VectorX<Scalar>& theta,
                               Scalar loss_next, const VectorX<Scalar>& grad_next, const VectorX<Scalar>& theta_next,
                               Scalar delta, Scalar s) {
  TrialCheck<Scalar> out;
  if (!std::isfinite(loss_next) || !grad_next.allFinite()) return out;
  const VectorX<Scalar> d = theta_next - theta;
  const Scalar d2 = d.squaredNorm();
  if (d2 == 0) {
    out.c1 = out.c2 = true;
    return out;
  }
  const Scalar bregman = loss_next - loss - grad.dot(d);
  const Scalar gdiff = (grad_next - grad).norm();
  const Scalar dn = std::sqrt(d2);
  out.c1 = bregman <= delta / (2 * s) * d2;
  out.c2 = gdiff <= delta / s * dn;
  out.curvature = 2 * bregman / d2;
  out.ratio = gdiff / dn;
  return out;
}

template <typename Scalar>
struct BacktrackResult {
  VectorX<Scalar> theta;
  Evaluation<Scalar> eval;
  Scalar s = 0;
  int backtracks = 0;
  Scalar lipschitz_estimate = 0;  // max over every trial of TrialCheck::lipschitz()
};

template <Objective Obj>
BacktrackResult<typename Obj::Scalar> backtrack(const Obj& obj, const OptimState<typename Obj::Scalar>& st,
                                                const OptimizerConfig<typename Obj::Scalar>& config) {
  using Scalar = typename Obj::Scalar;
  const Scalar base = config.mode == BacktrackMode::Reset ? config.s0 : st.s;
  BacktrackResult<Scalar> out;
  for (int i = 0; i <= config.max_backtracks; ++i) {
    const Scalar s = base * std::pow(config.rho, Scalar(i));
    VectorX<Scalar> candidate = inertial_candidate(st, config, s);
    Evaluation<Scalar> ev;
    bool finite = candidate.allFinite();
    if (finite) {
      try {
        ev = obj.evaluate(candidate);
      } catch (const NumericalError&) {
        finite = false;
      }
    }
    if (!finite) continue;
    const auto chk = check_trial(st.loss, st.grad, st.theta, ev.loss, ev.grad, candidate, config.delta, s);
    out.lipschitz_estimate = std::max(out.lipschitz_estimate, chk.lipschitz());
    if (chk.accepted()) {
      out.theta = std::move(candidate);
      out.eval = std::move(ev);
      out.s = s;
      out.backtracks = i;
      return out;
    }
  }
  throw NumericalError("backtracking stalled at tau=" + std::to_string(st.tau));
}

/// One iteration; returns the line-search Lipschitz estimate of the step.
template <Objective Obj>
typename Obj::Scalar step(const Obj& obj, OptimState<typename Obj::Scalar>& st,
                          const OptimizerConfig<typename Obj::Scalar>& config) {
  auto bt = backtrack(obj, st, config);
  st.v_norm = (bt.theta - st.theta).norm();
  st.theta_prev = std::move(st.theta);
  st.theta = std::move(bt.theta);
  st.grad_prev = std::move(st.grad);
  st.grad = std::move(bt.eval.grad);
  st.loss = bt.eval.loss;
  st.s = bt.s;
  st.backtracks = bt.backtracks;
  ++st.tau;
  return bt.lipschitz_estimate;
}

/// V_tau = L(y_tau) + delta2 |v_tau|^2, delta2 = (alpha + beta delta)/2,
/// delta1 = (1 - delta/2)/s0 - 2 delta2.
template <typename Scalar>
struct DiscreteLyapunov {
  Scalar value = 0;
  Scalar delta1 = 0;
  Scalar delta2 = 0;
};

template <typename Scalar>
Scalar lyapunov_delta2(const OptimizerConfig<Scalar>& c) {
  return (c.alpha + c.beta * c.delta) / 2;
}

template <typename Scalar>
Scalar lyapunov_delta1(const OptimizerConfig<Scalar>& c) {
  return (Scalar(1) - c.delta / 2) / c.s0 - 2 * lyapunov_delta2(c);
}

template <typename Scalar>
DiscreteLyapunov<Scalar> discrete_lyapunov(const OptimState<Scalar>& st, const OptimizerConfig<Scalar>& config) {
  DiscreteLyapunov<Scalar> out;
  out.delta2 = lyapunov_delta2(config);
  out.delta1 = lyapunov_delta1(config);
  out.value = st.loss + out.delta2 * st.v_norm * st.v_norm;
  return out;
}

enum class RunStatus { Converged, EarlyStopped, MaxIterations, Diverged };

inline std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Converged: return "converged";
    case RunStatus::EarlyStopped: return "early_stopped";
    case RunStatus::MaxIterations: return "max_iterations";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

template <typename Scalar>
struct RunResult {
  RunStatus status = RunStatus::MaxIterations;
  Index iterations = 0;
  std::vector<TrajectoryRow<Scalar>> rows;
  OptimState<Scalar> final_state;
  Scalar min_step = std::numeric_limits<Scalar>::infinity();
  Scalar lipschitz_estimate = 0;  // max trial Lipschitz lower bound seen by the line search
  Index total_backtracks = 0;
};

template <typename Scalar>
using StepObserver = std::function<void(const OptimState<Scalar>&)>;

/// Runs until loss <= stop_loss_threshold, the noise-level rule
/// sqrt(2 L) <= |eps| (if enabled), divergence, or max_iters.
/// The observer sees the initial state and every accepted iterate.
template <Objective Obj>
RunResult<typename Obj::Scalar> run(const Obj& obj, const OptimizerConfig<typename Obj::Scalar>& config,
                                    const VectorX<typename Obj::Scalar>& theta0,
                                    StepObserver<typename Obj::Scalar> observer = {}) {
  using Scalar = typename Obj::Scalar;
  config.validate();
  RunResult<Scalar> result;
  OptimState<Scalar> st = init_optim_state(obj, config, theta0);
  const Scalar delta2 = lyapunov_delta2(config);

  auto record = [&]() {
    TrajectoryRow<Scalar> row;
    row.time = Scalar(st.tau);
    row.step = st.tau == 0 ? Scalar(0) : st.s;
    row.backtracks = st.backtracks;
    row.loss = st.loss;
    row.grad_norm = st.grad.norm();
    row.velocity_norm = st.v_norm;
    row.lyapunov = st.loss + delta2 * st.v_norm * st.v_norm;
    row.dist_theta0 = (st.theta - theta0).norm();
    if constexpr (DiagnosedObjective<Obj>) {
      row.err_signal = obj.signal_error(st.theta);
      row.err_obs = obj.observation_error(st.theta);
    }
    result.rows.push_back(row);
  };
  auto due = [&]() { return config.record_every > 0 && st.tau % config.record_every == 0; };
  auto stop_reason = [&]() -> std::optional<RunStatus> {
    if (!std::isfinite(st.loss) || st.loss > config.divergence_threshold) return RunStatus::Diverged;
    if (st.loss <= config.stop_loss_threshold) return RunStatus::Converged;
    if (config.early_stop_on_noise && config.noise_norm > 0 && std::sqrt(2 * st.loss) <= config.noise_norm)
      return RunStatus::EarlyStopped;
    return std::nullopt;
  };

  record();
  if (observer) observer(st);
  auto reason = stop_reason();
  while (!reason && st.tau < config.max_iters) {
    const Scalar lip = step(obj, st, config);
    result.lipschitz_estimate = std::max(result.lipschitz_estimate, lip);
    result.min_step = std::min(result.min_step, st.s);
    result.total_backtracks += st.backtracks;
    if (observer) observer(st);
    reason = stop_reason();
    if (reason || st.tau == config.max_iters || due()) record();
  }
  if (result.rows.back().time != Scalar(st.tau)) record();
  result.status = reason.value_or(RunStatus::MaxIterations);
  result.iterations = st.tau;
  result.final_state = std::move(st);
  return result;
}

/// Constants of the discrete linear-rate theorem. sigma = sigma_min(J0) sigma_min(A).
template <typename Scalar>
struct DiscreteRateReport {
  Scalar delta1 = 0;
  Scalar delta2 = 0;
  Scalar sigma = 0;
  Scalar s_min = 0;
  Scalar loss0 = 0;
  Scalar r_prime = 0;
  Scalar rho = 0;          // upper bound on the rate constant
  Scalar contraction = 0;  // rho / (1 + rho)
  bool s0_at_least_one = false;
  bool delta2_window = false;  // 0 < 2 delta2 < (1 - delta/2)/s0
  Scalar delta = 0;

  bool valid() const { return s0_at_least_one && delta2_window; }
  Scalar loss_bound(Index tau) const {
    return delta * r_prime * r_prime / (2 * s_min) * std::pow(contraction, Scalar(tau));
  }
  Scalar theta_bound(Index tau) const { return r_prime * std::pow(contraction, Scalar(tau) / 2); }
};

template <typename Scalar>
DiscreteRateReport<Scalar> rate_constants_discrete(const OptimizerConfig<Scalar>& config, Scalar sigmin_j0,
                                                   Scalar sigmin_a, Scalar s_min, Scalar loss0) {
  if (!(sigmin_j0 > 0 && sigmin_a > 0 && s_min > 0))
    throw ConfigError("rate constants need positive sigma_min(J0), sigma_min(A) and step floor");
  DiscreteRateReport<Scalar> r;
  r.delta = config.delta;
  r.delta2 = lyapunov_delta2(config);
  r.delta1 = lyapunov_delta1(config);
  r.sigma = sigmin_j0 * sigmin_a;
  r.s_min = s_min;
  r.loss0 = loss0;
  r.s0_at_least_one = config.s0 >= 1;
  r.delta2_window = r.delta2 > 0 && 2 * r.delta2 < (Scalar(1) - config.delta / 2) / config.s0;
  const Scalar lead = Scalar(1) / (r.delta1 * (Scalar(1) - 2 * config.s0 * r.delta2));
  const Scalar sq = std::sqrt(r.delta2);
  r.r_prime = std::sqrt(Scalar(2)) * lead * (2 / (s_min * r.sigma) + 1 / (sq * config.s0)) * std::sqrt(loss0);
  const Scalar inner = 1 / (s_min * r.sigma) + 1 / (2 * sq * config.s0);
  r.rho = 8 * lead * inner * inner;
  r.contraction = std::isinf(r.rho) ? Scalar(1) : r.rho / (1 + r.rho);
  return r;
}

}  // namespace dindip
