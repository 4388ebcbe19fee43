#include "dindip/theory.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

using namespace dindip;
using oracle::Vec;

namespace {

CertificateInputs<double> unit_inputs() {
  CertificateInputs<double> in;
  in.sigmin_j0 = in.sigmax_j0 = 1;
  in.sigmin_a = in.sigmax_a = 1;
  in.loss0 = 0.5;
  in.width = 16;
  in.output_dim = 1;
  in.act_bound = 1;
  in.v_bound = 1;
  return in;
}

/// Identity A on R^n with the target a small perturbation of g(theta0), so that
/// L0 is small enough for R' < R at moderate width.
struct Certified {
  DipNetwork<double> net;
  InverseProblem<double> problem;
  Vec theta0;
};

Certified make_certified(Index k, Index n, double offset, std::uint64_t seed) {
  auto net = init_network<double>(k, 1, n, make_activation<double>(ActivationKind::Sigmoid), seed);
  Vec theta0 = initial_parameters(net);
  SplitMix64 rng(seed + 1000);
  Vec dir = gaussian_vector<double>(n, 1.0, rng);
  Vec x = forward(net, theta0) + offset * dir / dir.norm();
  auto problem = make_noiseless_problem(LinearOperator<double>::identity(n), x);
  return {std::move(net), std::move(problem), std::move(theta0)};
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace

TEST(Certificate, UnitConstants) {
  const auto c = certify_from_constants(unit_inputs());
  EXPECT_DOUBLE_EQ(c.alpha_star, 1.0);
  EXPECT_DOUBLE_EQ(c.beta_star, 0.5);
  EXPECT_DOUBLE_EQ(c.xi, 1.25);
  const double eta = 4 * ((1 + std::numbers::sqrt2) / 2) / 0.75;
  EXPECT_NEAR(c.eta, eta, 1e-14);
  EXPECT_NEAR(c.eta, 6.43790, 1e-5);
  EXPECT_NEAR(c.R_prime, eta * std::sqrt(0.625), 1e-13);
  EXPECT_NEAR(c.R_prime, 5.08961, 1e-5);
  EXPECT_TRUE(c.noiseless);
  EXPECT_TRUE(std::isinf(c.t_star));
}

TEST(Certificate, BallRadiusQuadraticRoot) {
  // B = 1, n = 1, D = 1, sigma_min(J0) = 4, k = 16: R^2 + 2R - 4 = 0.
  const double r = ball_radius(4.0, 16, 1, 1.0, 1.0);
  EXPECT_NEAR(r, -1 + std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(r, 1.23607, 1e-5);
  EXPECT_EQ(ball_radius(0.0, 16, 1, 1.0, 1.0), 0.0);
}

TEST(Certificate, RadiusIsRootOfLipschitzEquation) {
  SplitMix64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 10);
  for (int i = 0; i < 100; ++i) {
    const double sig = u(rng), b = u(rng) / 10, d = u(rng);
    const Index k = 1 + static_cast<Index>(u(rng) * 1000), n = 1 + static_cast<Index>(u(rng));
    const double r = ball_radius(sig, k, n, b, d);
    ASSERT_GT(r, 0);
    EXPECT_NEAR(r * lipschitz_bound(k, n, b, d, r), sig / 2, 1e-12 * sig);
  }
}

TEST(Certificate, TheoremEtaMatchesGeneralEta) {
  SplitMix64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 5);
  for (int i = 0; i < 100; ++i) {
    const double sj = u(rng), sa = u(rng);
    const double a = sj * sa, b = 1 / (2 * a);
    EXPECT_NEAR(theorem_eta(sj, sa), general_eta(a, b, sj, sa), 1e-12 * theorem_eta(sj, sa));
  }
  EXPECT_THROW(general_eta(1.0, 2.0, 1.0, 1.0), ConfigError);
  try {
    general_eta(1.0, 3.0, 1.0, 1.0);
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "damping condition violated");
  }
}

TEST(Certificate, MonotoneInWidthAndSpectrum) {
  auto in = unit_inputs();
  double prev_r = 0;
  for (Index k : {16, 64, 256, 1024, 4096}) {
    in.width = k;
    const auto c = certify_from_constants(in);
    EXPECT_GT(c.R, prev_r);
    prev_r = c.R;
  }
  // R' decreases in sigma_min(J0) only while s = sigma_min(J0) sigma_min(A) < sqrt(3)/2;
  // beyond (1 + sqrt 2)/2 eta grows linearly in s.
  in = unit_inputs();
  double prev_rp = std::numeric_limits<double>::infinity();
  prev_r = 0;
  for (double s : {0.1, 0.2, 0.4, 0.8}) {
    in.sigmin_j0 = in.sigmax_j0 = s;
    const auto c = certify_from_constants(in);
    EXPECT_GT(c.R, prev_r);
    EXPECT_LT(c.R_prime, prev_rp);
    prev_r = c.R;
    prev_rp = c.R_prime;
  }
  in.sigmin_j0 = in.sigmax_j0 = 4;
  const double rp4 = certify_from_constants(in).R_prime;
  in.sigmin_j0 = in.sigmax_j0 = 8;
  EXPECT_NEAR(certify_from_constants(in).R_prime, 2 * rp4, 1e-12);
}

TEST(Certificate, DegenerateJacobianIsNotCertified) {
  auto in = unit_inputs();
  in.sigmin_j0 = 0;
  const auto c = certify_from_constants(in);
  EXPECT_FALSE(c.init_ok);
  EXPECT_EQ(c.R, 0.0);
  in = unit_inputs();
  in.sigmin_a = 0;
  EXPECT_THROW(certify_from_constants(in), ConfigError);
}

TEST(Certificate, EarlyStopAndFlowParameters) {
  auto in = unit_inputs();
  in.sigmin_j0 = 2;
  in.sigmax_j0 = 2 * std::sqrt(8.0);  // kappa_J^2 = 8, so xi = 1 + 8/4 = 3
  in.loss0 = 1;
  in.noise_norm = 0.1;
  const auto c = certify_from_constants(in);
  EXPECT_NEAR(c.xi, 3.0, 1e-14);
  EXPECT_FALSE(c.noiseless);
  EXPECT_NEAR(c.t_star, 2 * std::log(std::sqrt(6.0) / 0.1), 1e-12);
  EXPECT_NEAR(early_stop_time(c, 0.1).time, c.t_star, 0);
  const auto cfg = theorem_flow_config(c);
  EXPECT_DOUBLE_EQ(cfg.alpha, 2.0);
  EXPECT_DOUBLE_EQ(cfg.beta, 0.25);
  const auto p = predict_rates(c);
  EXPECT_NEAR(p.loss_bound(0), 3.0, 1e-14);
  EXPECT_NEAR(p.loss_bound(1), 3.0 * std::exp(-1.0), 1e-14);
  EXPECT_NEAR(p.theta_bound(2), c.R_prime * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(p.observation_bound(0), std::sqrt(6.0) + 0.1, 1e-14);
}

TEST(Certificate, DipCertificateUsesMeasuredSpectra) {
  const auto inst = make_certified(256, 4, 0.05, 3);
  const auto c = certify_continuous(inst.net, inst.theta0, inst.problem);
  const auto [smin, smax] = oracle::svd_extremes(jacobian(inst.net, inst.theta0));
  EXPECT_NEAR(c.sigmin_j0, smin, 1e-10);
  EXPECT_NEAR(c.sigmax_j0, smax, 1e-10);
  EXPECT_EQ(c.sigmin_a, 1.0);
  EXPECT_NEAR(c.loss0, 0.5 * 0.05 * 0.05, 1e-14);
  EXPECT_EQ(c.width, 256);
  EXPECT_EQ(c.act_bound, 0.25);
  EXPECT_TRUE(c.init_ok) << "R'=" << c.R_prime << " R=" << c.R;
}

TEST(BallLemma, CertifiedFlowStaysInBall) {
  const auto inst = make_certified(256, 4, 0.05, 3);
  const auto cert = certify_continuous(inst.net, inst.theta0, inst.problem);
  ASSERT_TRUE(cert.init_ok);
  const DipObjective<double> obj(inst.net, inst.problem);
  FlowConfig<double> base;
  base.t_end = 10 / cert.sigma_product();
  base.record_every = 20;
  base.keep_states = true;
  const auto cfg = theorem_flow_config(cert, base);
  const auto res = integrate(obj, cfg, init_flow(obj, cfg, inst.theta0));
  const auto report = check_ball_lemma(inst.net, inst.theta0, flow_snapshots(res), cert);
  EXPECT_TRUE(report.certified);
  EXPECT_TRUE(report.passed()) << report.violations << " violations";
  EXPECT_LE(report.max_distance, cert.R_prime);
  EXPECT_GE(report.min_sigmin, cert.sigmin_j0 / 2);
  const auto pred = predict_rates(cert);
  for (const auto& row : res.rows) EXPECT_LE(row.loss, 1.05 * pred.loss_bound(row.time)) << "t=" << row.time;
}

TEST(BallLemma, ViolationsAreCounted) {
  const auto inst = make_certified(16, 2, 0.05, 4);
  auto cert = certify_continuous(inst.net, inst.theta0, inst.problem);
  cert.R_prime = 0.5;
  std::vector<std::pair<double, Vec>> snaps;
  snaps.emplace_back(0.0, inst.theta0);
  snaps.emplace_back(1.0, Vec(inst.theta0 + Vec::Constant(inst.theta0.size(), 1.0)));
  const auto report = check_ball_lemma(inst.net, inst.theta0, snaps, cert);
  ASSERT_EQ(report.snapshots.size(), 2u);
  EXPECT_TRUE(report.snapshots[0].passed());
  EXPECT_FALSE(report.snapshots[1].inside_ball);
  EXPECT_EQ(report.violations, 1);
  EXPECT_FALSE(report.passed());
}

TEST(InitSpectrum, ScalarNetworkClosedForm) {
  const auto act = make_activation<double>(ActivationKind::Identity);
  const auto st = init_spectrum_stats<double>(1, 1, 1, act, 12, 40);
  ASSERT_EQ(st.sigmin.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto net = init_network<double>(1, 1, 1, act, 40 + i);
    const double expected = std::hypot(net.w(0, 0), net.v(0, 0));
    EXPECT_NEAR(st.sigmin[i], expected, 1e-14);
    EXPECT_NEAR(st.sigmax[i], expected, 1e-14);
  }
  EXPECT_NEAR(st.sigmin_threshold, std::sqrt(2.0) / 2, 1e-13);
  EXPECT_NEAR(st.sigmax_leading, 2.0, 1e-13);
  EXPECT_TRUE(st.loss0.empty());
}

TEST(InitSpectrum, LossesAndQuantiles) {
  const auto problem = make_gaussian_problem<double>(4, 3, 1);
  const auto st = init_spectrum_stats<double>(64, 1, 4, make_activation<double>(ActivationKind::Sigmoid), 5, 0, &problem);
  ASSERT_EQ(st.loss0.size(), 5u);
  EXPECT_LE(st.sigmin_q.min, st.sigmin_q.median);
  EXPECT_LE(st.sigmin_q.median, st.sigmin_q.max);
  EXPECT_GE(st.fraction_above, 0.0);
  EXPECT_LE(st.fraction_above, 1.0);
  const auto q = quantiles<double>({4, 1, 3, 2, 5});
  EXPECT_EQ(q.min, 1);
  EXPECT_EQ(q.median, 3);
  EXPECT_EQ(q.max, 5);
  EXPECT_NEAR(q.q10, 1.4, 1e-15);
  EXPECT_THROW(init_spectrum_stats<double>(4, 1, 1, make_activation<double>(ActivationKind::Tanh), 0, 0), ConfigError);
}

TEST(Certificate, SerializationRoundTrip) {
  auto in = unit_inputs();
  in.noise_norm = 0.25;
  const auto c = certify_from_constants(in);
  std::ostringstream out;
  write_certificate(out, c);
  const auto kv = parse_kv(out.str());
  EXPECT_EQ(std::stod(kv.at("eta")), c.eta);
  EXPECT_EQ(std::stod(kv.at("R_prime")), c.R_prime);
  EXPECT_EQ(std::stod(kv.at("t_star")), c.t_star);
  EXPECT_EQ(kv.at("init_ok"), c.init_ok ? "true" : "false");
  EXPECT_EQ(kv.at("noiseless"), "false");
  EXPECT_EQ(kv.at("x_bound_conic_singular_value"), "not computed");
  EXPECT_EQ(kv.at("width"), "16");
}
