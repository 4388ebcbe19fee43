#include "dindip/xp/cli.hpp"

#include "dindip/parallel.hpp"
#include "dindip/xp/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#ifndef DINDIP_VERSION
#define DINDIP_VERSION "unknown"
#endif

namespace dindip::xp {

const char* version() { return DINDIP_VERSION; }

namespace {

namespace fs = std::filesystem;

struct Invocation {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

class RunDirectory {
 public:
  RunDirectory(const std::string& path, const RunConfig& config) : root_(path) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error("cannot create output directory '" + path + "': " + ec.message());
    write("config.toml", config.source_text);
  }

  void write(const std::string& name, const std::string& content) const {
    write_text_file((root_ / name).string(), content);
  }
  void image(const std::string& name, const GrayImage& img) const { write_pgm((root_ / name).string(), img); }
  std::string path(const std::string& name) const { return (root_ / name).string(); }

 private:
  fs::path root_;
};

class Metadata {
 public:
  template <typename T>
  Metadata& add(const std::string& key, const T& value) {
    std::ostringstream ss;
    if constexpr (std::is_floating_point_v<T>) ss << format_real(double(value));
    else if constexpr (std::is_same_v<T, bool>) ss << (value ? "true" : "false");
    else ss << value;
    lines_.emplace_back(key, ss.str());
    return *this;
  }
  std::string text() const {
    std::string s;
    for (const auto& [k, v] : lines_) s += k + " = " + v + "\n";
    return s;
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

Metadata base_metadata(const std::string& command, const RunConfig& c) {
  Metadata m;
  const auto oc = c.optimizer_config();
  m.add("code_version", std::string(version()))
      .add("command", command)
      .add("operator", to_string(c.problem.kind))
      .add("signal", to_string(c.problem.signal))
      .add("problem_seed", c.problem.seed)
      .add("network_seed", c.network_seed())
      .add("width", c.network.width)
      .add("input_dim", c.network.input_dim)
      .add("activation", to_string(c.network.activation))
      .add("alpha", oc.alpha)
      .add("beta", oc.beta)
      .add("delta", oc.delta)
      .add("rho", oc.rho)
      .add("s0", oc.s0)
      .add("backtrack", to_string(oc.mode))
      .add("max_iters", oc.max_iters)
      .add("max_backtracks", oc.max_backtracks)
      .add("loss_threshold", oc.stop_loss_threshold)
      .add("threads", thread_budget());
  return m;
}

std::string certificate_text(const Certificate<double>& cert) {
  std::ostringstream ss;
  write_certificate(ss, cert);
  return ss.str();
}

int cmd_solve(const RunConfig& c, const RunDirectory& dir, std::ostream& out) {
  const Instance inst = build_instance(c);
  const SolveOutcome s = solve(c, inst);
  std::ostringstream traj;
  write_discrete_csv(traj, s.run.rows);
  dir.write("trajectory.csv", traj.str());
  std::string cert = certificate_text(s.certificate);
  if (s.certificate.sigmin_j0 > 0) cert += discrete_report_text(s.a_priori, "discrete_a_priori.");
  if (s.a_posteriori) cert += discrete_report_text(*s.a_posteriori, "discrete_a_posteriori.");
  dir.write("certificate.txt", cert);
  auto meta = base_metadata("solve", c);
  meta.add("status", to_string(s.run.status))
      .add("iterations", s.run.iterations)
      .add("final_loss", s.run.final_state.loss)
      .add("min_step", s.run.min_step)
      .add("lipschitz_estimate", s.run.lipschitz_estimate)
      .add("total_backtracks", s.run.total_backtracks)
      .add("noise_norm", inst.problem.noise_norm());
  dir.write("metadata.txt", meta.text());
  out << "solve: " << to_string(s.run.status) << " after " << s.run.iterations
      << " iterations, loss = " << format_real(s.run.final_state.loss) << '\n';
  return s.run.status == RunStatus::Diverged ? kExitNumerical : kExitOk;
}

int cmd_flow(const RunConfig& c, const RunDirectory& dir, std::ostream& out) {
  const Instance inst = build_instance(c);
  const FlowOutcome f = solve_flow(c, inst);
  std::ostringstream traj;
  write_flow_csv(traj, f.result.rows);
  dir.write("trajectory.csv", traj.str());
  const auto pred = predict_rates(f.certificate);
  std::ostringstream cert;
  cert << certificate_text(f.certificate) << "loss_bound_prefactor = " << format_real(pred.loss_prefactor) << '\n'
       << "loss_bound_exponent = " << format_real(pred.loss_exponent) << '\n'
       << "theta_bound_prefactor = " << format_real(pred.theta_prefactor) << '\n'
       << "theta_bound_exponent = " << format_real(pred.theta_exponent) << '\n'
       << "ball_max_distance = " << format_real(f.ball.max_distance) << '\n'
       << "ball_min_sigmin = " << format_real(f.ball.min_sigmin) << '\n'
       << "ball_violations = " << f.ball.violations << '\n';
  dir.write("certificate.txt", cert.str());
  auto meta = base_metadata("flow", c);
  meta.add("flow_alpha", f.flow.alpha)
      .add("flow_beta", f.flow.beta)
      .add("t_end", f.flow.t_end)
      .add("h", f.flow.step)
      .add("err_tol", f.flow.err_tol)
      .add("accepted_steps", f.result.accepted_steps)
      .add("rejected_steps", f.result.rejected_steps)
      .add("final_loss", f.result.rows.back().loss);
  if (f.err_obs_at_t_star) meta.add("err_obs_at_t_star", *f.err_obs_at_t_star);
  dir.write("metadata.txt", meta.text());
  out << "flow: t_end = " << format_real(f.flow.t_end) << ", loss = " << format_real(f.result.rows.back().loss)
      << '\n';
  return kExitOk;
}

int cmd_theory(const RunConfig& c, const RunDirectory& dir, std::ostream& out) {
  const Instance inst = build_instance(c);
  const auto cert = certify_continuous(inst.net, inst.theta0, inst.problem);
  std::string text = certificate_text(cert);
  if (cert.sigmin_j0 > 0) {
    auto oc = c.optimizer_config();
    text += discrete_report_text(rate_constants_discrete(oc, cert.sigmin_j0, cert.sigmin_a, oc.s0, cert.loss0),
                                 "discrete_a_priori.");
  }
  dir.write("certificate.txt", text);
  dir.write("metadata.txt", base_metadata("theory", c).text());
  out << "theory: init_ok = " << (cert.init_ok ? "true" : "false") << ", R' = " << format_real(cert.R_prime)
      << ", R = " << format_real(cert.R) << '\n';
  return kExitOk;
}

Metadata grid_metadata(const std::string& cmd, const RunConfig& c) {
  auto m = base_metadata(cmd, c);
  m.add("instances", c.grid.instances).add("seed_base", c.grid.seed_base);
  return m;
}

int cmd_grid_ab(const RunConfig& c, const RunDirectory& dir, std::ostream& out) {
  const auto cells = exp_grid_alpha_beta(c);
  dir.write("grid_alpha_beta.csv", grid_alpha_beta_csv(cells));
  dir.write("metadata.txt", grid_metadata("grid-ab", c).text());
  out << "grid-ab: " << cells.size() << " cells\n";
  return kExitOk;
}

int cmd_grid_ka(const RunConfig& c, const RunDirectory& dir, std::ostream& out) {
  const auto cells = exp_grid_k_alpha(c);
  dir.write("grid_k_alpha.csv", grid_k_alpha_csv(cells, c.grid.seed_base));
  dir.write("metadata.txt", grid_metadata("grid-ka", c).add("success_iters", c.grid.success_iters).text());
  out << "grid-ka: " << cells.size() << " cells\n";
  return kExitOk;
}

int write_imaging(const std::string& cmd, const RunConfig& c, const ImagingOutcome& o, const RunDirectory& dir,
                  std::ostream& out) {
  dir.write("curves.csv", imaging_curves_csv(o));
  dir.write("summary.csv", imaging_summary_csv(o));
  dir.image("truth.pgm", o.truth);
  if (o.observation) dir.image("observation.pgm", *o.observation);
  for (std::size_t r = 0; r < o.runs.size(); ++r) {
    for (const auto& [tau, img] : o.runs[r].snapshots)
      dir.image("snapshot_r" + std::to_string(r) + "_tau" + std::to_string(tau) + ".pgm", img);
  }
  auto meta = base_metadata(cmd, c);
  meta.add("image_side", c.problem.image_side).add("noise_std", c.problem.noise_std);
  std::string checkpoints;
  for (Index t : c.imaging.checkpoints) checkpoints += (checkpoints.empty() ? "" : ",") + std::to_string(t);
  meta.add("checkpoints", checkpoints);
  for (std::size_t r = 0; r < o.runs.size(); ++r)
    meta.add("run" + std::to_string(r), "alpha=" + format_real(o.runs[r].alpha) + " beta=" + format_real(o.runs[r].beta) +
                                            " status=" + to_string(o.runs[r].run.status));
  dir.write("metadata.txt", meta.text());
  out << cmd << ": " << o.runs.size() << " runs\n";
  // Divergence is an experimental outcome here, recorded in summary.csv.
  return kExitOk;
}

using Command = std::function<int(const RunConfig&, const RunDirectory&, std::ostream&)>;

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inertial training of two-layer Deep Inverse Prior networks", "dindip"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"solve", {"run the discrete inertial algorithm", cmd_solve}},
      {"flow", {"integrate the continuous inertial dynamic", cmd_flow}},
      {"theory", {"compute the certificate only", cmd_theory}},
      {"grid-ab", {"mean iterations over an (alpha, beta) grid", cmd_grid_ab}},
      {"grid-ka", {"success probability over a (k, alpha) grid", cmd_grid_ka}},
      {"deconv", {"Gaussian deconvolution of an image",
                  [](const RunConfig& c, const RunDirectory& d, std::ostream& o) {
                    return write_imaging("deconv", c, exp_deconv(c), d, o);
                  }}},
      {"wellcond", {"well-conditioned operator on an image",
                    [](const RunConfig& c, const RunDirectory& d, std::ostream& o) {
                      return write_imaging("wellcond", c, exp_wellcond(c), d, o);
                    }}},
  };

  Invocation inv;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("-c,--config", inv.config_path, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", inv.out_dir, "output directory (overrides [output] dir)");
    sub->add_option("--seed", inv.seed, "problem seed override");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      RunConfig config = load_config(inv.config_path);
      if (inv.seed) config.problem.seed = *inv.seed;
      const std::string dir_path = inv.out_dir.empty() ? config.output_dir : inv.out_dir;
      const RunDirectory dir(dir_path, config);
      return commands.at(name).second(config, dir, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  err << "error: no subcommand\n";
  return kExitConfig;
}

}  // namespace dindip::xp
