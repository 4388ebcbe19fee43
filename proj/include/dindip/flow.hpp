#pragma once

// Continuous DIN dynamic  theta'' + alpha theta' + beta d/dt grad L + grad L = 0.
//
// For beta > 0 it is integrated in the gradient-free first-order form
//   theta' = -beta grad L + (1/beta - alpha) theta - q / beta
//   q'     =                (1/beta - alpha) theta - q / beta
// and for beta = 0 (heavy ball) in position-velocity phase space.

#include "dindip/common.hpp"
#include "dindip/objective.hpp"
#include "dindip/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dindip {

template <typename Scalar>
struct FlowConfig {
  Scalar alpha = 0;
  Scalar beta = 0;
  Scalar t_end = 10;
  Scalar step = Scalar(1e-2);  // base (and maximal) integrator step h
  Scalar err_tol = Scalar(1e-8);
  Index record_every = 1;  // sample every record_every base steps
  Scalar blowup = Scalar(1e12);
  bool keep_states = false;

  void validate() const {
    if (!(alpha >= 0)) throw ConfigError("flow: alpha must be >= 0");
    if (!(beta >= 0)) throw ConfigError("flow: beta must be >= 0");
    if (!(step > 0)) throw ConfigError("flow: step must be > 0");
    if (!(t_end >= 0)) throw ConfigError("flow: t_end must be >= 0");
    if (!(err_tol > 0)) throw ConfigError("flow: err_tol must be > 0");
    if (record_every < 1) throw ConfigError("flow: record_every must be >= 1");
  }

  Scalar sample_interval() const { return step * Scalar(record_every); }
};

enum class FlowForm { Reformulated, PhaseSpace };

/// aux holds q in the reformulated form and theta' in phase space.
template <typename Scalar>
struct FlowState {
  Scalar t = 0;
  VectorX<Scalar> theta;
  VectorX<Scalar> aux;
  FlowForm form = FlowForm::Reformulated;
};

/// q(0) = -beta (theta'_0 + beta grad L(theta_0)) + (1 - alpha beta) theta_0 with theta'_0 = 0.
template <Objective Obj>
FlowState<typename Obj::Scalar> init_flow(const Obj& obj, const FlowConfig<typename Obj::Scalar>& config,
                                          const VectorX<typename Obj::Scalar>& theta0) {
  using Scalar = typename Obj::Scalar;
  if (!(config.beta > 0)) throw ConfigError("reformulation requires beta>0");
  require_dims(theta0.size() == obj.dimension(), "flow: theta0 has the wrong length");
  const auto ev = obj.evaluate(theta0);
  FlowState<Scalar> s;
  s.theta = theta0;
  s.aux = -config.beta * config.beta * ev.grad + (Scalar(1) - config.alpha * config.beta) * theta0;
  s.form = FlowForm::Reformulated;
  return s;
}

/// Heavy-ball start (theta_0, theta'_0 = 0); valid for any beta.
template <Objective Obj>
FlowState<typename Obj::Scalar> init_phase_space(const Obj& obj, const VectorX<typename Obj::Scalar>& theta0) {
  using Scalar = typename Obj::Scalar;
  require_dims(theta0.size() == obj.dimension(), "flow: theta0 has the wrong length");
  FlowState<Scalar> s;
  s.theta = theta0;
  s.aux = VectorX<Scalar>::Zero(theta0.size());
  s.form = FlowForm::PhaseSpace;
  return s;
}

/// The reformulation when beta > 0, phase space otherwise.
template <Objective Obj>
FlowState<typename Obj::Scalar> start_flow(const Obj& obj, const FlowConfig<typename Obj::Scalar>& config,
                                           const VectorX<typename Obj::Scalar>& theta0) {
  config.validate();
  return config.beta > 0 ? init_flow(obj, config, theta0) : init_phase_space(obj, theta0);
}

/// theta'(t) from the state and grad L(theta(t)).
template <typename Scalar>
VectorX<Scalar> flow_velocity(const FlowState<Scalar>& s, const FlowConfig<Scalar>& config,
                              const VectorX<Scalar>& grad) {
  if (s.form == FlowForm::PhaseSpace) return s.aux;
  const Scalar c = Scalar(1) / config.beta - config.alpha;
  return -config.beta * grad + c * s.theta - s.aux / config.beta;
}

/// V = L + 1/2 |theta' + beta grad L|^2.
template <typename Scalar>
Scalar lyapunov_continuous(const FlowState<Scalar>& s, const FlowConfig<Scalar>& config,
                           const Evaluation<Scalar>& ev) {
  if (s.form == FlowForm::Reformulated) {
    const Scalar c = Scalar(1) / config.beta - config.alpha;
    return ev.loss + Scalar(0.5) * (c * s.theta - s.aux / config.beta).squaredNorm();
  }
  return ev.loss + Scalar(0.5) * (s.aux + config.beta * ev.grad).squaredNorm();
}

template <Objective Obj>
typename Obj::Scalar lyapunov_continuous(const FlowState<typename Obj::Scalar>& s, const Obj& obj,
                                         const FlowConfig<typename Obj::Scalar>& config) {
  return lyapunov_continuous(s, config, obj.evaluate(s.theta));
}

namespace detail {

template <typename Scalar>
struct FlowDerivative {
  VectorX<Scalar> theta;
  VectorX<Scalar> aux;
};

template <Objective Obj>
FlowDerivative<typename Obj::Scalar> flow_rhs(const Obj& obj, const FlowConfig<typename Obj::Scalar>& config,
                                              FlowForm form, const VectorX<typename Obj::Scalar>& theta,
                                              const VectorX<typename Obj::Scalar>& aux) {
  using Scalar = typename Obj::Scalar;
  const auto ev = obj.evaluate(theta);
  FlowDerivative<Scalar> d;
  if (form == FlowForm::Reformulated) {
    const Scalar c = Scalar(1) / config.beta - config.alpha;
    d.aux = c * theta - aux / config.beta;
    d.theta = d.aux - config.beta * ev.grad;
  } else {
    // beta > 0 in phase space would need the Hessian; only heavy ball lands here.
    d.theta = aux;
    d.aux = -config.alpha * aux - ev.grad;
  }
  return d;
}

template <Objective Obj>
void rk4_step(const Obj& obj, const FlowConfig<typename Obj::Scalar>& config, FlowForm form,
              VectorX<typename Obj::Scalar>& theta, VectorX<typename Obj::Scalar>& aux, typename Obj::Scalar h) {
  using Scalar = typename Obj::Scalar;
  const Scalar half = h / 2;
  const auto k1 = flow_rhs(obj, config, form, theta, aux);
  const auto k2 = flow_rhs(obj, config, form, VectorX<Scalar>(theta + half * k1.theta),
                           VectorX<Scalar>(aux + half * k1.aux));
  const auto k3 = flow_rhs(obj, config, form, VectorX<Scalar>(theta + half * k2.theta),
                           VectorX<Scalar>(aux + half * k2.aux));
  const auto k4 =
      flow_rhs(obj, config, form, VectorX<Scalar>(theta + h * k3.theta), VectorX<Scalar>(aux + h * k3.aux));
  theta += (h / 6) * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta);
  aux += (h / 6) * (k1.aux + 2 * k2.aux + 2 * k3.aux + k4.aux);
}

template <typename Scalar>
Scalar scaled_difference(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  return (a - b).template lpNorm<Eigen::Infinity>() / (Scalar(1) + b.template lpNorm<Eigen::Infinity>());
}

}  // namespace detail

template <typename Scalar>
struct FlowResult {
  std::vector<TrajectoryRow<Scalar>> rows;
  std::vector<FlowState<Scalar>> states;  // filled when keep_states
  FlowState<Scalar> final_state;
  Index accepted_steps = 0;
  Index rejected_steps = 0;
};

template <typename Scalar>
using FlowObserver = std::function<void(const FlowState<Scalar>&, const TrajectoryRow<Scalar>&)>;

/// Integrates to t_end, sampling every step * record_every. Each interval is
/// covered by RK4 steps of size <= step; a step is accepted when one full step
/// and two half steps agree to err_tol (relative, sup norm), else halved.
template <Objective Obj>
FlowResult<typename Obj::Scalar> integrate(const Obj& obj, const FlowConfig<typename Obj::Scalar>& config,
                                           FlowState<typename Obj::Scalar> state,
                                           FlowObserver<typename Obj::Scalar> observer = {}) {
  using Scalar = typename Obj::Scalar;
  config.validate();
  if (state.form == FlowForm::Reformulated && !(config.beta > 0))
    throw ConfigError("reformulation requires beta>0");
  if (state.form == FlowForm::PhaseSpace && config.beta != 0)
    throw ConfigError("phase-space flow supports beta=0 only");

  const VectorX<Scalar> theta0 = state.theta;
  FlowResult<Scalar> result;
  Scalar h = config.step;

  auto blowup = [&](Scalar t) {
    return NumericalError("blow-up detected at t=" + format_real(static_cast<double>(t)));
  };

  auto sample = [&]() {
    Evaluation<Scalar> ev;
    try {
      ev = obj.evaluate(state.theta);
    } catch (const NumericalError&) {
      throw blowup(state.t);
    }
    TrajectoryRow<Scalar> row;
    row.time = state.t;
    row.step = h;
    row.loss = ev.loss;
    row.grad_norm = ev.grad.norm();
    row.velocity_norm = flow_velocity(state, config, ev.grad).norm();
    row.lyapunov = lyapunov_continuous(state, config, ev);
    row.dist_theta0 = (state.theta - theta0).norm();
    if constexpr (DiagnosedObjective<Obj>) {
      row.err_signal = obj.signal_error(state.theta);
      row.err_obs = obj.observation_error(state.theta);
    }
    if (!std::isfinite(row.lyapunov) || row.lyapunov > config.blowup) throw blowup(state.t);
    result.rows.push_back(row);
    if (config.keep_states) result.states.push_back(state);
    if (observer) observer(state, row);
  };

  sample();
  const Scalar interval = config.sample_interval();
  const Scalar min_step = config.step * Scalar(1e-12);
  const Scalar t_start = state.t;
  Index j = 0;
  while (state.t < config.t_end + t_start) {
    ++j;
    const Scalar target = std::min(t_start + Scalar(j) * interval, t_start + config.t_end);
    while (state.t < target) {
      const Scalar hh = std::min(h, target - state.t);
      VectorX<Scalar> full_theta = state.theta, full_aux = state.aux;
      VectorX<Scalar> half_theta = state.theta, half_aux = state.aux;
      try {
        detail::rk4_step(obj, config, state.form, full_theta, full_aux, hh);
        detail::rk4_step(obj, config, state.form, half_theta, half_aux, hh / 2);
        detail::rk4_step(obj, config, state.form, half_theta, half_aux, hh / 2);
      } catch (const NumericalError&) {
        throw blowup(state.t);
      }
      if (!half_theta.allFinite() || !half_aux.allFinite() || half_theta.norm() > config.blowup)
        throw blowup(state.t + hh);
      const Scalar err = std::max(detail::scaled_difference(full_theta, half_theta),
                                  detail::scaled_difference(full_aux, half_aux));
      if (err <= config.err_tol) {
        state.theta = std::move(half_theta);
        state.aux = std::move(half_aux);
        state.t = (hh == target - state.t) ? target : state.t + hh;
        ++result.accepted_steps;
        // Fourth order: halving h shrinks the estimate 16-fold; grow back only with margin.
        if (err < config.err_tol / 32) h = std::min(config.step, 2 * h);
      } else {
        ++result.rejected_steps;
        h = hh / 2;
        if (h < min_step) throw NumericalError("flow: step size underflow at t=" + format_real(state.t));
      }
    }
    sample();
  }
  result.final_state = std::move(state);
  return result;
}

template <typename Scalar>
struct EarlyStopTime {
  Scalar time = std::numeric_limits<Scalar>::infinity();
  bool noiseless = true;
};

/// t* = 4/(sigma_J0 sigma_A) ln(sqrt(2 xi L0)/|eps|), clamped at 0 when the
/// noise already exceeds the initial bound.
template <typename Scalar>
EarlyStopTime<Scalar> early_stop_time(Scalar sigmin_j0, Scalar sigmin_a, Scalar xi, Scalar loss0, Scalar noise_norm) {
  EarlyStopTime<Scalar> out;
  if (!(noise_norm > 0)) return out;
  if (!(sigmin_j0 > 0 && sigmin_a > 0)) throw ConfigError("early stop needs positive singular values");
  out.noiseless = false;
  const Scalar ratio = std::sqrt(2 * xi * loss0) / noise_norm;
  out.time = ratio > 1 ? Scalar(4) / (sigmin_j0 * sigmin_a) * std::log(ratio) : Scalar(0);
  return out;
}

}  // namespace dindip
