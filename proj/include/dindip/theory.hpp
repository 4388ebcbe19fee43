#pragma once

// Certificates of the continuous convergence theorem and the initialization
// lemmas for the two-layer network.

#include "dindip/dipnet.hpp"
#include "dindip/flow.hpp"
#include "dindip/linops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace dindip {

/// Inputs of the continuous certificate that do not depend on how they were measured.
template <typename Scalar>
struct CertificateInputs {
  Scalar sigmin_j0 = 0;
  Scalar sigmax_j0 = 0;
  Scalar sigmin_a = 0;
  Scalar sigmax_a = 0;
  Scalar loss0 = 0;
  Scalar noise_norm = 0;
  Index width = 0;       // k
  Index output_dim = 0;  // n
  Scalar act_bound = 0;  // B
  Scalar v_bound = 0;    // D
};

template <typename Scalar>
struct Certificate {
  Scalar sigmin_j0 = 0;
  Scalar sigmax_j0 = 0;
  Scalar kappa_j0 = std::numeric_limits<Scalar>::infinity();
  Scalar sigmin_a = 0;
  Scalar sigmax_a = 0;
  Scalar kappa_a = 0;
  Scalar alpha_star = 0;
  Scalar beta_star = std::numeric_limits<Scalar>::infinity();
  Scalar xi = std::numeric_limits<Scalar>::infinity();
  Scalar eta = std::numeric_limits<Scalar>::infinity();
  Scalar R = 0;
  Scalar R_prime = std::numeric_limits<Scalar>::infinity();
  Scalar lipschitz_at_R = 0;
  Scalar t_star = std::numeric_limits<Scalar>::infinity();
  bool noiseless = true;
  bool init_ok = false;
  Scalar loss0 = 0;
  Scalar noise_norm = 0;
  Index width = 0;
  Index output_dim = 0;
  Scalar act_bound = 0;
  Scalar v_bound = 0;

  /// sigma_min(J0) sigma_min(A), the exponential rate scale.
  Scalar sigma_product() const { return sigmin_j0 * sigmin_a; }
};

/// eta = 4 max(s, (1 + sqrt 2)/2) / min(s^2, 3/4), s = sigma_min(J0) sigma_min(A).
template <typename Scalar>
Scalar theorem_eta(Scalar sigmin_j0, Scalar sigmin_a) {
  const Scalar s = sigmin_j0 * sigmin_a;
  return 4 * std::max(s, (1 + std::numbers::sqrt2_v<Scalar>) / 2) / std::min(s * s, Scalar(0.75));
}

/// eta = 2 max(1, beta + 1/(sqrt 2 s)) / min(alpha/2, beta (1 - beta alpha / 2)).
template <typename Scalar>
Scalar general_eta(Scalar alpha, Scalar beta, Scalar sigmin_j0, Scalar sigmin_a) {
  if (!(alpha > 0)) throw ConfigError("general eta needs alpha > 0");
  if (!(beta > 0)) throw ConfigError("general eta needs beta > 0");
  if (!(sigmin_j0 > 0 && sigmin_a > 0)) throw ConfigError("general eta needs positive singular values");
  if (!(beta < 2 / alpha)) throw ConfigError("damping condition violated");
  const Scalar s = sigmin_j0 * sigmin_a;
  const Scalar num = 2 * std::max(Scalar(1), beta + 1 / (std::numbers::sqrt2_v<Scalar> * s));
  const Scalar den = std::min(alpha / 2, beta * (1 - beta * alpha / 2));
  return num / den;
}

/// Positive root of R * 2B(1 + nD + R)/sqrt(k) = sigma_min(J0)/2.
template <typename Scalar>
Scalar ball_radius(Scalar sigmin_j0, Index width, Index output_dim, Scalar act_bound, Scalar v_bound) {
  if (!(sigmin_j0 > 0)) return Scalar(0);
  if (!(act_bound > 0)) throw ConfigError("ball radius needs B > 0");
  const Scalar c = 1 + Scalar(output_dim) * v_bound;
  const Scalar disc = c * c + sigmin_j0 * std::sqrt(Scalar(width)) / act_bound;
  // Cancellation-free form of (-c + sqrt(disc)) / 2.
  return (disc - c * c) / (2 * (c + std::sqrt(disc)));
}

template <typename Scalar>
Scalar lipschitz_bound(Index width, Index output_dim, Scalar act_bound, Scalar v_bound, Scalar radius) {
  return 2 * act_bound * (1 + Scalar(output_dim) * v_bound + radius) / std::sqrt(Scalar(width));
}

template <typename Scalar>
Certificate<Scalar> certify_from_constants(const CertificateInputs<Scalar>& in) {
  Certificate<Scalar> c;
  c.sigmin_j0 = in.sigmin_j0;
  c.sigmax_j0 = in.sigmax_j0;
  c.sigmin_a = in.sigmin_a;
  c.sigmax_a = in.sigmax_a;
  c.kappa_a = in.sigmax_a / in.sigmin_a;
  c.loss0 = in.loss0;
  c.noise_norm = in.noise_norm;
  c.width = in.width;
  c.output_dim = in.output_dim;
  c.act_bound = in.act_bound;
  c.v_bound = in.v_bound;
  if (!(in.sigmin_a > 0)) throw ConfigError("certificate needs sigma_min(A) > 0 on ran(A)");
  if (!(in.sigmin_j0 > 0)) return c;

  c.kappa_j0 = in.sigmax_j0 / in.sigmin_j0;
  c.alpha_star = in.sigmin_j0 * in.sigmin_a;
  c.beta_star = 1 / (2 * c.alpha_star);
  c.xi = 1 + c.kappa_j0 * c.kappa_j0 * c.kappa_a * c.kappa_a / 4;
  c.eta = theorem_eta(in.sigmin_j0, in.sigmin_a);
  c.R_prime = c.eta * std::sqrt(c.xi * in.loss0);
  c.R = ball_radius(in.sigmin_j0, in.width, in.output_dim, in.act_bound, in.v_bound);
  c.lipschitz_at_R = lipschitz_bound(in.width, in.output_dim, in.act_bound, in.v_bound, c.R);
  const auto stop = early_stop_time(in.sigmin_j0, in.sigmin_a, c.xi, in.loss0, in.noise_norm);
  c.t_star = stop.time;
  c.noiseless = stop.noiseless;
  c.init_ok = c.R_prime < c.R;
  return c;
}

template <typename Scalar>
Certificate<Scalar> certify_continuous(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta0,
                                       const InverseProblem<Scalar>& problem) {
  const auto spec_a = spectral_summary(problem.op);
  const auto spec_j = jacobian_spectrum(net, theta0);
  CertificateInputs<Scalar> in;
  in.sigmin_j0 = spec_j.sigma_min;
  in.sigmax_j0 = spec_j.sigma_max;
  in.sigmin_a = spec_a.sigma_min_nz;
  in.sigmax_a = spec_a.sigma_max;
  in.loss0 = loss_and_grad(net, theta0, problem).loss;
  in.noise_norm = problem.noise_norm();
  in.width = net.width;
  in.output_dim = net.output_dim;
  in.act_bound = net.act.bound;
  in.v_bound = net.v_bound;
  return certify_from_constants(in);
}

template <typename Scalar>
EarlyStopTime<Scalar> early_stop_time(const Certificate<Scalar>& cert, Scalar noise_norm) {
  return early_stop_time(cert.sigmin_j0, cert.sigmin_a, cert.xi, cert.loss0, noise_norm);
}

template <typename Scalar>
EarlyStopTime<Scalar> early_stop_time(const Certificate<Scalar>& cert, const InverseProblem<Scalar>& problem) {
  return early_stop_time(cert, problem.noise_norm());
}

/// Flow parameters alpha = sigma_min(J0) sigma_min(A), beta = 1/(2 alpha).
template <typename Scalar>
FlowConfig<Scalar> theorem_flow_config(const Certificate<Scalar>& cert, FlowConfig<Scalar> base = {}) {
  if (!(cert.alpha_star > 0)) throw ConfigError("theorem parameters need sigma_min(J0) > 0");
  base.alpha = cert.alpha_star;
  base.beta = cert.beta_star;
  return base;
}

/// Predicted envelopes of the continuous theorem.
template <typename Scalar>
struct RatePrediction {
  Scalar loss_prefactor = 0;   // xi L0
  Scalar loss_exponent = 0;    // sigma_min(J0) sigma_min(A) / 2
  Scalar theta_prefactor = 0;  // R'
  Scalar theta_exponent = 0;   // loss_exponent / 2
  Scalar noise_norm = 0;

  Scalar loss_bound(Scalar t) const { return loss_prefactor * std::exp(-loss_exponent * t); }
  Scalar theta_bound(Scalar t) const { return theta_prefactor * std::exp(-theta_exponent * t); }
  /// |y(t) - y_bar| <= sqrt(2 L(t)) + |eps| <= sqrt(2 xi L0) exp(-s t / 4) + |eps|.
  Scalar observation_bound(Scalar t) const { return std::sqrt(2 * loss_bound(t)) + noise_norm; }
  /// Optimization term of the signal bound before division by the conic singular value (not computed).
  Scalar signal_optimization_term(Scalar t) const { return std::sqrt(2 * loss_bound(t)); }
};

template <typename Scalar>
RatePrediction<Scalar> predict_rates(const Certificate<Scalar>& cert) {
  RatePrediction<Scalar> p;
  p.loss_prefactor = cert.xi * cert.loss0;
  p.loss_exponent = cert.sigma_product() / 2;
  p.theta_prefactor = cert.R_prime;
  p.theta_exponent = p.loss_exponent / 2;
  p.noise_norm = cert.noise_norm;
  return p;
}

template <typename Scalar>
struct BallSnapshotCheck {
  Scalar time = 0;
  Scalar distance = 0;   // |theta - theta0|
  Scalar sigmin_j = 0;   // sigma_min(J(theta))
  bool inside_ball = false;    // distance <= R'
  bool spectrum_ok = false;    // sigma_min(J) >= sigma_min(J0)/2
  bool passed() const { return inside_ball && spectrum_ok; }
};

template <typename Scalar>
struct BallLemmaReport {
  std::vector<BallSnapshotCheck<Scalar>> snapshots;
  Scalar max_distance = 0;
  Scalar min_sigmin = std::numeric_limits<Scalar>::infinity();
  Index violations = 0;
  bool certified = false;  // the certificate's R' < R held, so violations contradict the lemma
  bool passed() const { return violations == 0; }
};

/// Checks |theta(t) - theta0| <= R' and sigma_min(J(theta(t))) >= sigma_min(J0)/2 at
/// every snapshot. Violations are reported, never thrown.
template <typename Scalar>
BallLemmaReport<Scalar> check_ball_lemma(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta0,
                                         const std::vector<std::pair<Scalar, VectorX<Scalar>>>& snapshots,
                                         const Certificate<Scalar>& cert) {
  BallLemmaReport<Scalar> report;
  report.certified = cert.init_ok;
  for (const auto& [t, theta] : snapshots) {
    BallSnapshotCheck<Scalar> s;
    s.time = t;
    s.distance = (theta - theta0).norm();
    s.sigmin_j = sigma_min_jacobian(net, theta);
    s.inside_ball = s.distance <= cert.R_prime;
    s.spectrum_ok = s.sigmin_j >= cert.sigmin_j0 / 2;
    report.max_distance = std::max(report.max_distance, s.distance);
    report.min_sigmin = std::min(report.min_sigmin, s.sigmin_j);
    if (!s.passed()) ++report.violations;
    report.snapshots.push_back(s);
  }
  return report;
}

template <typename Scalar>
std::vector<std::pair<Scalar, VectorX<Scalar>>> flow_snapshots(const FlowResult<Scalar>& result) {
  std::vector<std::pair<Scalar, VectorX<Scalar>>> out;
  out.reserve(result.states.size());
  for (const auto& s : result.states) out.emplace_back(s.t, s.theta);
  return out;
}

template <typename Scalar>
struct Quantiles {
  Scalar min = 0, q10 = 0, median = 0, q90 = 0, max = 0;
};

/// Linear-interpolation quantiles of an unsorted sample.
template <typename Scalar>
Quantiles<Scalar> quantiles(std::vector<Scalar> values) {
  Quantiles<Scalar> q;
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  auto at = [&](Scalar p) {
    const Scalar pos = p * Scalar(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - Scalar(lo)) * (values[hi] - values[lo]);
  };
  q.min = values.front();
  q.q10 = at(Scalar(0.1));
  q.median = at(Scalar(0.5));
  q.q90 = at(Scalar(0.9));
  q.max = values.back();
  return q;
}

template <typename Scalar>
struct InitSpectrumStats {
  std::vector<Scalar> sigmin;
  std::vector<Scalar> sigmax;
  std::vector<Scalar> loss0;  // empty without a problem
  Quantiles<Scalar> sigmin_q;
  Quantiles<Scalar> sigmax_q;
  Quantiles<Scalar> loss0_q;
  Scalar sigmin_threshold = 0;   // sqrt(C_phi^2 + C_phi'^2) / 2
  Scalar sigmax_leading = 0;     // C_phi + B; the C sqrt(n/k) term has an unspecified constant
  Scalar fraction_above = 0;     // share of seeds with sigma_min(J0) >= sigmin_threshold
};

/// sigma_min(J0), |J0| and (optionally) L0 over seeds seed_base, seed_base + 1, ...
template <typename Scalar>
InitSpectrumStats<Scalar> init_spectrum_stats(Index width, Index input_dim, Index output_dim,
                                              const ActivationSpec<Scalar>& act, Index n_seeds,
                                              std::uint64_t seed_base,
                                              const InverseProblem<Scalar>* problem = nullptr) {
  if (n_seeds < 1) throw ConfigError("init spectrum stats need at least one seed");
  InitSpectrumStats<Scalar> st;
  st.sigmin_threshold = std::sqrt(act.c_phi * act.c_phi + act.c_phi_prime * act.c_phi_prime) / 2;
  st.sigmax_leading = act.c_phi + act.bound;
  Index above = 0;
  for (Index i = 0; i < n_seeds; ++i) {
    const auto net = init_network(width, input_dim, output_dim, act, seed_base + static_cast<std::uint64_t>(i));
    const auto theta0 = initial_parameters(net);
    const auto spec = jacobian_spectrum(net, theta0);
    st.sigmin.push_back(spec.sigma_min);
    st.sigmax.push_back(spec.sigma_max);
    if (spec.sigma_min >= st.sigmin_threshold) ++above;
    if (problem) st.loss0.push_back(loss_and_grad(net, theta0, *problem).loss);
  }
  st.sigmin_q = quantiles(st.sigmin);
  st.sigmax_q = quantiles(st.sigmax);
  st.loss0_q = quantiles(st.loss0);
  st.fraction_above = Scalar(above) / Scalar(n_seeds);
  return st;
}

namespace detail {

inline void write_kv(std::ostream& out, const char* key, double value) {
  out << key << " = " << format_real(value) << '\n';
}

inline void write_kv(std::ostream& out, const char* key, bool value) {
  out << key << " = " << (value ? "true" : "false") << '\n';
}

}  // namespace detail

/// key = value lines, reals with 17 significant digits.
template <typename Scalar>
void write_certificate(std::ostream& out, const Certificate<Scalar>& c) {
  using detail::write_kv;
  write_kv(out, "sigmin_j0", double(c.sigmin_j0));
  write_kv(out, "sigmax_j0", double(c.sigmax_j0));
  write_kv(out, "kappa_j0", double(c.kappa_j0));
  write_kv(out, "sigmin_a", double(c.sigmin_a));
  write_kv(out, "sigmax_a", double(c.sigmax_a));
  write_kv(out, "kappa_a", double(c.kappa_a));
  write_kv(out, "alpha_star", double(c.alpha_star));
  write_kv(out, "beta_star", double(c.beta_star));
  write_kv(out, "xi", double(c.xi));
  write_kv(out, "eta", double(c.eta));
  write_kv(out, "R", double(c.R));
  write_kv(out, "R_prime", double(c.R_prime));
  write_kv(out, "lipschitz_at_R", double(c.lipschitz_at_R));
  write_kv(out, "t_star", double(c.t_star));
  write_kv(out, "noiseless", c.noiseless);
  write_kv(out, "init_ok", c.init_ok);
  write_kv(out, "loss0", double(c.loss0));
  write_kv(out, "noise_norm", double(c.noise_norm));
  out << "width = " << c.width << '\n' << "output_dim = " << c.output_dim << '\n';
  write_kv(out, "act_bound", double(c.act_bound));
  write_kv(out, "v_bound", double(c.v_bound));
  out << "x_bound_conic_singular_value = not computed\n"
      << "x_bound_modeling_term = not computed\n";
}

}  // namespace dindip
