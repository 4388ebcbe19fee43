#include "dindip/xp/experiments.hpp"

#include "dindip/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace dindip::xp {

namespace {

LinearOperator<double> make_operator(const ProblemSpec& p, std::uint64_t seed, Index& n, Index& side) {
  switch (p.kind) {
    case ProblemKind::Gaussian: {
      SplitMix64 rng(derive_seed(seed, Stream::Operator));
      n = p.n;
      side = 0;
      return LinearOperator<double>::dense(gaussian_matrix<double>(p.m, p.n, 1.0 / std::sqrt(double(p.n)), rng));
    }
    case ProblemKind::Identity:
      n = p.n;
      side = 0;
      return LinearOperator<double>::identity(p.n);
    case ProblemKind::Blur:
      side = p.image_side;
      n = side * side;
      return make_blur_operator<double>(side, p.kernel_std);
    case ProblemKind::WellConditioned:
      side = p.image_side;
      n = side * side;
      return make_wellcond_operator<double>(n, seed);
  }
  throw ConfigError("unknown operator kind");
}

VectorX<double> make_signal(const ProblemSpec& p, std::uint64_t seed, Index n, Index side,
                            const DipNetwork<double>& net, const VectorX<double>& theta0) {
  switch (p.signal) {
    case SignalKind::Gaussian: {
      SplitMix64 rng(derive_seed(seed, Stream::Signal));
      return gaussian_vector<double>(n, 1.0, rng);
    }
    case SignalKind::Image: {
      if (side == 0) throw ConfigError("problem.signal = image needs an image operator (blur or wellcond)");
      const GrayImage img = p.image_path.empty() ? phantom_image(side) : read_pgm(p.image_path);
      if (img.width != side || img.height != side)
        throw ConfigError("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          ", expected " + std::to_string(side) + "x" + std::to_string(side));
      return image_to_signal(img);
    }
    case SignalKind::NetworkPerturbed: {
      SplitMix64 rng(derive_seed(seed, Stream::Signal));
      VectorX<double> dir = gaussian_vector<double>(n, 1.0, rng);
      return forward(net, theta0) + (p.signal_offset / dir.norm()) * dir;
    }
  }
  throw ConfigError("unknown signal kind");
}

std::string real(double v) { return format_real(v); }

}  // namespace

Instance build_instance(const RunConfig& config, std::uint64_t problem_seed, std::uint64_t network_seed, Index width) {
  const auto& p = config.problem;
  Index n = 0, side = 0;
  LinearOperator<double> op = make_operator(p, problem_seed, n, side);
  auto net = init_network(width, config.network.input_dim, n, make_activation<double>(config.network.activation),
                          network_seed);
  VectorX<double> theta0 = initial_parameters(net);
  VectorX<double> x = make_signal(p, problem_seed, n, side, net, theta0);
  auto clean = make_noiseless_problem(std::move(op), std::move(x));
  auto problem = [&]() {
    if (p.snr) return with_snr(clean, *p.snr, problem_seed);
    if (p.noise_std > 0) {
      VectorX<double> noise = gaussian_noise<double>(clean.observation_dim(), p.noise_std, problem_seed);
      return make_problem(std::move(clean.op), std::move(clean.x_true), std::move(noise));
    }
    return std::move(clean);
  }();
  return Instance{std::move(net), std::move(problem), std::move(theta0), side};
}

Instance build_instance(const RunConfig& config) {
  return build_instance(config, config.problem.seed, config.network_seed(), config.network.width);
}

SolveOutcome solve(const RunConfig& config, const Instance& inst) {
  OptimizerConfig<double> oc = config.optimizer_config();
  oc.noise_norm = inst.problem.noise_norm();
  const DipObjective<double> obj(inst.net, inst.problem);
  SolveOutcome out;
  out.certificate = certify_continuous(inst.net, inst.theta0, inst.problem);
  const double sj = out.certificate.sigmin_j0, sa = out.certificate.sigmin_a, l0 = out.certificate.loss0;
  if (sj > 0) out.a_priori = rate_constants_discrete(oc, sj, sa, oc.s0, l0);
  out.run = run(obj, oc, inst.theta0);
  if (sj > 0 && std::isfinite(out.run.min_step)) out.a_posteriori = rate_constants_discrete(oc, sj, sa, out.run.min_step, l0);
  return out;
}

FlowConfig<double> flow_config(const RunConfig& config, const Certificate<double>& cert) {
  FlowConfig<double> fc;
  if (config.flow.theorem_parameters) {
    fc = theorem_flow_config(cert, fc);
  } else {
    fc.alpha = config.flow.alpha;
    fc.beta = config.flow.beta;
  }
  fc.step = config.flow.step;
  fc.err_tol = config.flow.err_tol;
  fc.record_every = config.flow.record_every;
  fc.blowup = config.stopping.divergence_threshold;
  if (config.flow.t_end) {
    fc.t_end = *config.flow.t_end;
  } else if (!(cert.sigma_product() > 0)) {
    throw ConfigError("flow.t_end must be set when sigma_min(J0) = 0");
  } else if (!cert.noiseless) {
    fc.t_end = 3 * cert.t_star;
    if (!(fc.t_end > 0)) fc.t_end = 10 / cert.sigma_product();
  } else {
    fc.t_end = 10 / cert.sigma_product();
  }
  return fc;
}

FlowOutcome solve_flow(const RunConfig& config, const Instance& inst) {
  FlowOutcome out;
  out.certificate = certify_continuous(inst.net, inst.theta0, inst.problem);
  out.flow = flow_config(config, out.certificate);
  out.flow.keep_states = true;
  const DipObjective<double> obj(inst.net, inst.problem);
  out.result = integrate(obj, out.flow, start_flow(obj, out.flow, inst.theta0));
  out.ball = check_ball_lemma(inst.net, inst.theta0, flow_snapshots(out.result), out.certificate);
  if (!out.certificate.noiseless)
    for (const auto& row : out.result.rows)
      if (row.time >= out.certificate.t_star) {
        out.err_obs_at_t_star = row.err_obs;
        break;
      }
  return out;
}

double GridCell::mean_iterations() const {
  if (iterations.empty()) return 0;
  return double(std::accumulate(iterations.begin(), iterations.end(), Index(0))) / double(iterations.size());
}

double GridCell::success_probability() const {
  return iterations.empty() ? 0.0 : double(converged) / double(iterations.size());
}

namespace {

/// Runs every (cell, instance) pair; each task owns its slot so results do not depend on scheduling.
void run_cells(const RunConfig& config, std::vector<GridCell>& cells, Index max_iters) {
  const Index per = config.grid.instances;
  for (auto& c : cells) {
    c.iterations.assign(static_cast<std::size_t>(per), 0);
    c.status.assign(static_cast<std::size_t>(per), RunStatus::MaxIterations);
  }
  parallel_for(static_cast<Index>(cells.size()) * per, [&](Index task) {
    auto& cell = cells[static_cast<std::size_t>(task / per)];
    const auto i = static_cast<std::size_t>(task % per);
    const std::uint64_t seed = config.grid.seed_base + i;
    const Instance inst = build_instance(config, seed, seed, cell.width);
    OptimizerConfig<double> oc = config.optimizer_config();
    oc.alpha = cell.alpha;
    oc.beta = cell.beta;
    oc.max_iters = max_iters;
    oc.record_every = 0;
    oc.noise_norm = inst.problem.noise_norm();
    const DipObjective<double> obj(inst.net, inst.problem);
    RunStatus status;
    Index iters;
    try {
      const auto r = run(obj, oc, inst.theta0);
      status = r.status;
      iters = r.iterations;
    } catch (const NumericalError&) {
      // A stalled line search on a blown-up iterate counts as divergence.
      status = RunStatus::Diverged;
      iters = max_iters;
    }
    if (status != RunStatus::Converged) iters = max_iters;
    cell.status[i] = status;
    cell.iterations[i] = iters;
  });
  for (auto& c : cells) {
    c.converged = std::count(c.status.begin(), c.status.end(), RunStatus::Converged);
    c.diverged = std::count(c.status.begin(), c.status.end(), RunStatus::Diverged);
  }
}

}  // namespace

std::vector<GridCell> exp_grid_alpha_beta(const RunConfig& config) {
  std::vector<GridCell> cells;
  for (double a : config.grid.alphas)
    for (double b : config.grid.betas) {
      GridCell c;
      c.width = config.network.width;
      c.alpha = a;
      c.beta = b;
      cells.push_back(c);
    }
  run_cells(config, cells, config.optimizer.max_iters);
  return cells;
}

std::string grid_alpha_beta_csv(const std::vector<GridCell>& cells) {
  std::ostringstream out;
  out << "# units: alpha,beta=damping coefficients, mean_iterations=iterations (non-converged runs count as "
         "max_iters), converged/diverged/instances=counts\n";
  out << "alpha,beta,instances,mean_iterations,converged,diverged\n";
  for (const auto& c : cells)
    out << real(c.alpha) << ',' << real(c.beta) << ',' << c.instances() << ',' << real(c.mean_iterations()) << ','
        << c.converged << ',' << c.diverged << '\n';
  return out.str();
}

std::vector<GridCell> exp_grid_k_alpha(const RunConfig& config) {
  std::vector<GridCell> cells;
  const double beta = config.grid.betas.front();
  for (Index k : config.grid.widths)
    for (double a : config.grid.alphas) {
      GridCell c;
      c.width = k;
      c.alpha = a;
      c.beta = beta;
      cells.push_back(c);
    }
  run_cells(config, cells, config.grid.success_iters);
  return cells;
}

std::string grid_k_alpha_csv(const std::vector<GridCell>& cells, std::uint64_t seed_base) {
  std::ostringstream out;
  out << "# units: width=hidden neurons, alpha,beta=damping coefficients, probability=successes/instances, "
         "seeds=seed_base..seed_base+instances-1\n";
  out << "width,alpha,beta,instances,successes,probability,diverged,seed_base\n";
  for (const auto& c : cells)
    out << c.width << ',' << real(c.alpha) << ',' << real(c.beta) << ',' << c.instances() << ',' << c.converged
        << ',' << real(c.success_probability()) << ',' << c.diverged << ',' << seed_base << '\n';
  return out.str();
}

bool detect_semiconvergence(const std::vector<TrajectoryRow<double>>& rows, Index* best_index) {
  Index best = -1;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].err_signal < best_err) {
      best_err = rows[i].err_signal;
      best = static_cast<Index>(i);
    }
  if (best_index) *best_index = best;
  if (best <= 0 || rows.size() < 3 || best == static_cast<Index>(rows.size()) - 1) return false;
  return rows.back().err_signal > 1.01 * best_err;
}

ImagingOutcome exp_imaging(const RunConfig& config) {
  const Instance inst = build_instance(config);
  if (inst.image_side == 0) throw ConfigError("imaging experiments need an image operator (blur or wellcond)");
  const Index side = inst.image_side;
  ImagingOutcome out;
  out.truth = signal_to_image(inst.problem.x_true, side);
  if (inst.problem.op.kind() == OperatorKind::CircularBlur) out.observation = signal_to_image(inst.problem.y, side);

  const std::set<Index> checkpoints(config.imaging.checkpoints.begin(), config.imaging.checkpoints.end());
  out.runs.resize(config.imaging.pairs.size());
  parallel_for(static_cast<Index>(out.runs.size()), [&](Index r) {
    auto& ir = out.runs[static_cast<std::size_t>(r)];
    std::tie(ir.alpha, ir.beta) = config.imaging.pairs[static_cast<std::size_t>(r)];
    OptimizerConfig<double> oc = config.optimizer_config();
    oc.alpha = ir.alpha;
    oc.beta = ir.beta;
    oc.noise_norm = inst.problem.noise_norm();
    const DipObjective<double> obj(inst.net, inst.problem);
    VectorX<double> last_theta;
    ir.run = run(obj, oc, inst.theta0, [&](const OptimState<double>& st) {
      if (checkpoints.count(st.tau)) ir.snapshots[st.tau] = signal_to_image(forward(inst.net, st.theta), side);
    });
    const auto& fs = ir.run.final_state;
    ir.snapshots.emplace(fs.tau, signal_to_image(forward(inst.net, fs.theta), side));
    Index best = 0;
    ir.semiconvergence = detect_semiconvergence(ir.run.rows, &best);
    if (best >= 0 && !ir.run.rows.empty()) {
      ir.best_tau = static_cast<Index>(ir.run.rows[static_cast<std::size_t>(best)].time);
      ir.best_err_signal = ir.run.rows[static_cast<std::size_t>(best)].err_signal;
    }
  });
  return out;
}

ImagingOutcome exp_deconv(RunConfig config) {
  config.problem.kind = ProblemKind::Blur;
  config.problem.signal = SignalKind::Image;
  return exp_imaging(config);
}

ImagingOutcome exp_wellcond(RunConfig config) {
  config.problem.kind = ProblemKind::WellConditioned;
  config.problem.signal = SignalKind::Image;
  return exp_imaging(config);
}

std::string imaging_curves_csv(const ImagingOutcome& outcome) {
  std::ostringstream out;
  out << kDiscreteUnits << ", alpha,beta=damping coefficients\n";
  out << "alpha,beta";
  for (const auto& c : discrete_columns()) out << ',' << c;
  out << '\n';
  for (const auto& r : outcome.runs)
    for (const auto& row : r.run.rows) {
      out << real(r.alpha) << ',' << real(r.beta) << ',';
      write_discrete_row(out, row);
    }
  return out.str();
}

std::string imaging_summary_csv(const ImagingOutcome& outcome) {
  std::ostringstream out;
  out << "# units: iterations=count, final_loss=squared observation units, err_signal=signal units (pixels)\n";
  out << "alpha,beta,status,iterations,final_loss,final_err_signal,best_tau,best_err_signal,semiconvergence\n";
  for (const auto& r : outcome.runs) {
    const auto& last = r.run.rows.back();
    out << real(r.alpha) << ',' << real(r.beta) << ',' << to_string(r.run.status) << ',' << r.run.iterations << ','
        << real(last.loss) << ',' << real(last.err_signal) << ',' << r.best_tau << ',' << real(r.best_err_signal)
        << ',' << (r.semiconvergence ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string discrete_report_text(const DiscreteRateReport<double>& r, const std::string& prefix) {
  std::ostringstream out;
  auto kv = [&](const char* k, double v) { out << prefix << k << " = " << real(v) << '\n'; };
  kv("delta1", r.delta1);
  kv("delta2", r.delta2);
  kv("sigma", r.sigma);
  kv("s_min", r.s_min);
  kv("R_prime", r.r_prime);
  kv("rho", r.rho);
  kv("contraction", r.contraction);
  out << prefix << "s0_at_least_one = " << (r.s0_at_least_one ? "true" : "false") << '\n';
  out << prefix << "delta2_window = " << (r.delta2_window ? "true" : "false") << '\n';
  out << prefix << "status = " << (r.valid() ? "valid" : "certificate invalid") << '\n';
  return out.str();
}

}  // namespace dindip::xp
