#pragma once

#include "dindip/dipnet.hpp"
#include "dindip/flow.hpp"
#include "dindip/inertia.hpp"
#include "dindip/linops.hpp"
#include "dindip/theory.hpp"
#include "dindip/xp/config.hpp"
#include "dindip/xp/io.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dindip::xp {

/// A seeded problem together with the network that will fit it.
struct Instance {
  DipNetwork<double> net;
  InverseProblem<double> problem;
  VectorX<double> theta0;
  Index image_side = 0;  // 0 for non-image problems
};

/// Network from (width, network_seed), operator/signal/noise from problem_seed.
Instance build_instance(const RunConfig& config, std::uint64_t problem_seed, std::uint64_t network_seed, Index width);
Instance build_instance(const RunConfig& config);

struct SolveOutcome {
  RunResult<double> run;
  Certificate<double> certificate;
  DiscreteRateReport<double> a_priori;                    // s_min := s0
  std::optional<DiscreteRateReport<double>> a_posteriori;  // realized minimum step
};

SolveOutcome solve(const RunConfig& config, const Instance& instance);

struct FlowOutcome {
  FlowConfig<double> flow;
  FlowResult<double> result;
  Certificate<double> certificate;
  BallLemmaReport<double> ball;
  /// Observation error |y(t) - y_bar| at the first sample with t >= t* (noisy runs only).
  std::optional<double> err_obs_at_t_star;
};

FlowConfig<double> flow_config(const RunConfig& config, const Certificate<double>& cert);
FlowOutcome solve_flow(const RunConfig& config, const Instance& instance);

struct GridCell {
  Index width = 0;
  double alpha = 0;
  double beta = 0;
  std::vector<Index> iterations;  // per instance, capped at the iteration limit
  std::vector<RunStatus> status;
  Index converged = 0;
  Index diverged = 0;

  Index instances() const { return static_cast<Index>(iterations.size()); }
  double mean_iterations() const;
  double success_probability() const;
};

/// Mean iterations to the loss threshold over seeds seed_base + i, for every (alpha, beta).
std::vector<GridCell> exp_grid_alpha_beta(const RunConfig& config);
std::string grid_alpha_beta_csv(const std::vector<GridCell>& cells);

/// Success probability (converged within success_iters) for every (k, alpha) at beta = betas[0].
std::vector<GridCell> exp_grid_k_alpha(const RunConfig& config);
std::string grid_k_alpha_csv(const std::vector<GridCell>& cells, std::uint64_t seed_base);

struct ImagingRun {
  double alpha = 0;
  double beta = 0;
  RunResult<double> run;
  std::map<Index, GrayImage> snapshots;  // iteration -> reconstruction
  bool semiconvergence = false;
  Index best_tau = 0;
  double best_err_signal = 0;
};

struct ImagingOutcome {
  GrayImage truth;
  std::optional<GrayImage> observation;  // only when y is itself an image
  std::vector<ImagingRun> runs;
};

/// Decrease-then-increase of the signal error: the minimum is interior and the
/// final error exceeds it by more than 1%.
bool detect_semiconvergence(const std::vector<TrajectoryRow<double>>& rows, Index* best_index = nullptr);

/// Runs every imaging pair on one instance; rows respect optimizer.record_every.
ImagingOutcome exp_imaging(const RunConfig& config);
/// exp_imaging with the operator forced to the circular Gaussian blur.
ImagingOutcome exp_deconv(RunConfig config);
/// exp_imaging with the operator forced to U diag(s) V^T, s in [1, 2].
ImagingOutcome exp_wellcond(RunConfig config);
std::string imaging_curves_csv(const ImagingOutcome& outcome);
std::string imaging_summary_csv(const ImagingOutcome& outcome);

std::string discrete_report_text(const DiscreteRateReport<double>& report, const std::string& prefix);

}  // namespace dindip::xp
