#include "dindip/xp/cli.hpp"
#include "dindip/xp/config.hpp"
#include "dindip/xp/experiments.hpp"
#include "dindip/xp/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace dindip;
using namespace dindip::xp;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSmallSolve = R"(
[problem]
kind = gaussian
n = 6
m = 4
seed = 3

[network]
width = 48

[optimizer]
alpha = 0.5
beta = 0.05
s0 = 0.1
max_iters = 300
record_every = 50
)";

/// Fresh, empty scratch directory per test.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dindip_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.toml";
  write_text_file(p.string(), text);
  return p;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dindip");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<TrajectoryRow<double>> rows_with_errors(const std::vector<double>& errs) {
  std::vector<TrajectoryRow<double>> rows;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    TrajectoryRow<double> r;
    r.time = double(i);
    r.err_signal = errs[i];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config(kSmallSolve);
  EXPECT_EQ(c.problem.kind, ProblemKind::Gaussian);
  EXPECT_EQ(c.problem.n, 6);
  EXPECT_EQ(c.problem.seed, 3u);
  EXPECT_EQ(c.network.width, 48);
  EXPECT_EQ(c.network_seed(), 3u);
  EXPECT_EQ(c.optimizer.alpha, 0.5);
  EXPECT_EQ(c.optimizer.delta, 1.0);
  EXPECT_EQ(c.optimizer.rho, 0.5);
  EXPECT_EQ(c.optimizer.mode, BacktrackMode::Reset);
  EXPECT_EQ(c.optimizer_config().stop_loss_threshold, 1e-14);
  EXPECT_TRUE(c.flow.theorem_parameters);
  EXPECT_FALSE(c.flow.t_end.has_value());
  EXPECT_EQ(c.source_text, kSmallSolve);
}

TEST(Config, ShippedPresetsParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(DINDIP_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".toml") continue;
    EXPECT_NO_THROW(load_config(entry.path().string()).validate()) << entry.path();
  }
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_config("[problem]\nsize = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[mystery]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[problem]\nn = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("[problem]\nkind = fourier\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\nbacktrack = sometimes\n"), ConfigError);
  EXPECT_THROW(parse_config("[network]\nactivation = relu\n"), ConfigError);
  EXPECT_THROW(parse_config("[optimizer]\ndelta = 2.5\n").validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/dindip.toml"), ConfigError);
}

TEST(Config, FlowAndGridSyntax) {
  const auto c = parse_config(R"(
[flow]
alpha = theorem
beta = theorem
t_end = auto
[grid]
alphas = [0, 0.5, 1e-1]
betas = [0.05]
widths = [8, 64]
instances = 3
[imaging]
pairs = [0:0, 1:0.1]
checkpoints = [10, 20]
[stopping]
early_stop_on_noise = true
)");
  EXPECT_TRUE(c.flow.theorem_parameters);
  EXPECT_FALSE(c.flow.t_end.has_value());
  EXPECT_EQ(c.grid.alphas, (std::vector<double>{0, 0.5, 0.1}));
  EXPECT_EQ(c.grid.widths, (std::vector<Index>{8, 64}));
  ASSERT_EQ(c.imaging.pairs.size(), 2u);
  EXPECT_EQ(c.imaging.pairs[1], (std::pair{1.0, 0.1}));
  EXPECT_TRUE(c.optimizer_config().early_stop_on_noise);

  const auto f = parse_config("[flow]\nalpha = 0.7\nbeta = 0.2\nt_end = 4\n");
  EXPECT_FALSE(f.flow.theorem_parameters);
  EXPECT_EQ(f.flow.alpha, 0.7);
  EXPECT_EQ(*f.flow.t_end, 4.0);
  EXPECT_THROW(parse_real_list("[1, x]"), ConfigError);
  EXPECT_THROW(parse_pair_list("[1-2]"), ConfigError);
}

TEST(Pgm, RoundTripAndComments) {
  GrayImage img{3, 2, {0, 10, 20, 30, 40, 255}};
  const std::string bytes = encode_pgm(img);
  EXPECT_EQ(bytes.substr(0, 11), "P5\n3 2\n255\n");
  const auto back = decode_pgm(bytes);
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.pixels, img.pixels);

  std::string commented = "P5\n# made by hand\n3 2\n# maxval next\n255\n";
  commented.append(img.pixels.begin(), img.pixels.end());
  EXPECT_EQ(decode_pgm(commented).pixels, img.pixels);

  const auto dir = scratch("pgm");
  write_pgm((dir / "a.pgm").string(), img);
  EXPECT_EQ(read_pgm((dir / "a.pgm").string()).pixels, img.pixels);
}

TEST(Pgm, RejectsUnsupported) {
  EXPECT_THROW(decode_pgm("P2\n1 1\n255\n0"), ConfigError);
  EXPECT_THROW(decode_pgm("P5\n1 1\n65535\n\x01\x02"), ConfigError);
  EXPECT_THROW(decode_pgm("P5\n4 4\n255\nab"), ConfigError);
  EXPECT_THROW(decode_pgm("P5\n4"), ConfigError);
  EXPECT_THROW(read_pgm("/nonexistent.pgm"), ConfigError);
}

TEST(Pgm, SignalLayoutAndClamping) {
  const GrayImage img = phantom_image(8);
  const auto x = image_to_signal(img);
  // Row r, column c sits at c * side + r.
  EXPECT_EQ(x[3 * 8 + 1], img.pixels[1 * 8 + 3]);
  EXPECT_EQ(signal_to_image(x, 8).pixels, img.pixels);
  VectorX<double> wild(4);
  wild << -20.0, 300.0, 12.4, std::nan("");
  EXPECT_EQ(signal_to_image(wild, 2).pixels, (std::vector<std::uint8_t>{0, 12, 255, 0}));
  EXPECT_THROW(image_to_signal(GrayImage{2, 3, std::vector<std::uint8_t>(6)}), DimensionError);
}

TEST(Csv, TrajectoryHeadersAndUnits) {
  const auto c = parse_config(kSmallSolve);
  const auto inst = build_instance(c);
  const auto out = solve(c, inst);
  std::ostringstream ss;
  write_discrete_csv(ss, out.run.rows);
  const std::string text = ss.str();
  EXPECT_EQ(text.rfind("# units:", 0), 0u);
  const auto table = parse_csv(text);
  EXPECT_EQ(table.header, discrete_columns());
  ASSERT_EQ(table.rows.size(), out.run.rows.size());
  const auto tau = table.numeric_column("tau");
  for (std::size_t i = 1; i < tau.size(); ++i) EXPECT_GT(tau[i], tau[i - 1]);
  for (double l : table.numeric_column("loss")) EXPECT_GE(l, 0);
  EXPECT_EQ(table.numeric_column("loss").front(), out.run.rows.front().loss);  // 17 digits round-trip
  EXPECT_THROW(table.column("nope"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), ConfigError);
}

TEST(Experiments, InstancesAreDeterministic) {
  const auto c = parse_config(kSmallSolve);
  const auto a = build_instance(c);
  const auto b = build_instance(c);
  EXPECT_EQ(a.theta0, b.theta0);
  EXPECT_EQ(a.problem.y, b.problem.y);
  const auto ra = solve(c, a), rb = solve(c, b);
  std::ostringstream sa, sb;
  write_discrete_csv(sa, ra.run.rows);
  write_discrete_csv(sb, rb.run.rows);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Experiments, NoiseFromSnrOrStd) {
  auto c = parse_config(kSmallSolve);
  c.problem.snr = 4.0;
  auto inst = build_instance(c);
  EXPECT_NEAR(inst.problem.y_clean.norm() / inst.problem.noise_norm(), 4.0, 1e-12);
  c.problem.snr.reset();
  c.problem.noise_std = 0.3;
  inst = build_instance(c);
  EXPECT_GT(inst.problem.noise_norm(), 0);
  EXPECT_LE((inst.problem.y - inst.problem.y_clean - inst.problem.noise).norm(), 1e-14);
}

TEST(Experiments, NetworkPerturbedSignal) {
  auto c = parse_config(kSmallSolve);
  c.problem.kind = ProblemKind::Identity;
  c.problem.signal = SignalKind::NetworkPerturbed;
  c.problem.signal_offset = 0.02;
  const auto inst = build_instance(c);
  EXPECT_NEAR((inst.problem.x_true - forward(inst.net, inst.theta0)).norm(), 0.02, 1e-14);
}

TEST(Experiments, SingleCellGridEqualsDirectRun) {
  auto c = parse_config(kSmallSolve);
  c.grid.alphas = {0.5};
  c.grid.betas = {0.05};
  c.grid.instances = 1;
  c.grid.seed_base = 3;
  c.network.width = 48;
  const auto cells = exp_grid_alpha_beta(c);
  ASSERT_EQ(cells.size(), 1u);
  const auto direct = solve(c, build_instance(c, 3, 3, 48));
  EXPECT_EQ(cells[0].iterations.at(0), direct.run.iterations);
  EXPECT_EQ(cells[0].mean_iterations(), double(direct.run.iterations));
  const auto csv = parse_csv(grid_alpha_beta_csv(cells));
  EXPECT_EQ(csv.header, (std::vector<std::string>{"alpha", "beta", "instances", "mean_iterations", "converged",
                                                  "diverged"}));
}

TEST(Experiments, KAlphaProbabilities) {
  auto c = parse_config(kSmallSolve);
  c.grid.alphas = {0.0, 0.5};
  c.grid.betas = {0.05};
  c.grid.widths = {4, 32};
  c.grid.instances = 3;
  c.grid.success_iters = 200;
  const auto cells = exp_grid_k_alpha(c);
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& cell : cells) {
    EXPECT_EQ(cell.instances(), 3);
    EXPECT_GE(cell.success_probability(), 0.0);
    EXPECT_LE(cell.success_probability(), 1.0);
    EXPECT_EQ(cell.beta, 0.05);
    EXPECT_DOUBLE_EQ(cell.success_probability() * 3, double(cell.converged));
  }
  const auto csv = parse_csv(grid_k_alpha_csv(cells, c.grid.seed_base));
  EXPECT_EQ(csv.rows.size(), 4u);
  for (double p : csv.numeric_column("probability")) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Experiments, SemiconvergenceDetection) {
  Index best = -1;
  EXPECT_TRUE(detect_semiconvergence(rows_with_errors({5, 3, 2, 2.5, 3}), &best));
  EXPECT_EQ(best, 2);
  EXPECT_FALSE(detect_semiconvergence(rows_with_errors({5, 4, 3, 2, 1})));
  EXPECT_FALSE(detect_semiconvergence(rows_with_errors({5, 3, 2, 2.01})));  // within 1%
  EXPECT_FALSE(detect_semiconvergence(rows_with_errors({1, 2, 3})));
  EXPECT_FALSE(detect_semiconvergence({}));
}

TEST(Experiments, DeconvolutionImages) {
  auto c = parse_config(R"(
[problem]
kind = blur
image_side = 8
noise_std = 2.5
[network]
width = 64
[optimizer]
s0 = 0.1
max_iters = 40
record_every = 10
[imaging]
pairs = [0:0, 1:0.1]
checkpoints = [10, 20]
)");
  const auto o = exp_deconv(c);
  EXPECT_EQ(o.truth.width, 8);
  ASSERT_TRUE(o.observation.has_value());
  EXPECT_EQ(o.observation->width, 8);
  ASSERT_EQ(o.runs.size(), 2u);
  for (const auto& r : o.runs) {
    EXPECT_TRUE(r.snapshots.count(10) && r.snapshots.count(20));
    for (const auto& [tau, img] : r.snapshots) {
      EXPECT_EQ(img.width, 8);
      EXPECT_EQ(img.height, 8);
      EXPECT_EQ(img.pixels.size(), 64u);
    }
  }
  const auto curves = parse_csv(imaging_curves_csv(o));
  EXPECT_EQ(curves.header.front(), "alpha");
  const auto summary = parse_csv(imaging_summary_csv(o));
  EXPECT_EQ(summary.rows.size(), 2u);
}

TEST(Experiments, WellConditionedRerunIsIdentical) {
  const std::string text = R"(
[problem]
kind = wellcond
image_side = 4
noise_std = 5
seed = 9
[network]
width = 32
[optimizer]
max_iters = 30
record_every = 5
[imaging]
pairs = [0.5:0, 0:1]
checkpoints = [10]
)";
  const auto a = exp_wellcond(parse_config(text));
  const auto b = exp_wellcond(parse_config(text));
  EXPECT_EQ(imaging_curves_csv(a), imaging_curves_csv(b));
  EXPECT_EQ(imaging_summary_csv(a), imaging_summary_csv(b));
  EXPECT_FALSE(a.observation.has_value());
}

TEST(Cli, SolveWritesOutputs) {
  const auto dir = scratch("cli_solve");
  const auto cfg = write_config(dir, kSmallSolve);
  const auto out = dir / "run";
  const auto r = run_cli({"solve", "--config", cfg.string(), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"trajectory.csv", "certificate.txt", "metadata.txt", "config.toml"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(read_text_file((out / "config.toml").string()), kSmallSolve);
  const std::string meta = read_text_file((out / "metadata.txt").string());
  EXPECT_NE(meta.find("code_version"), std::string::npos);
  EXPECT_NE(meta.find(version()), std::string::npos);

  const auto again = dir / "again";
  ASSERT_EQ(run_cli({"solve", "-c", cfg.string(), "-o", again.string()}).code, kExitOk);
  EXPECT_EQ(read_text_file((out / "trajectory.csv").string()), read_text_file((again / "trajectory.csv").string()));
}

TEST(Cli, TheoryWritesCertificateOnly) {
  const auto dir = scratch("cli_theory");
  const auto cfg = write_config(dir, kSmallSolve);
  const auto out = dir / "run";
  ASSERT_EQ(run_cli({"theory", "--config", cfg.string(), "--out", out.string()}).code, kExitOk);
  EXPECT_TRUE(fs::exists(out / "certificate.txt"));
  EXPECT_FALSE(fs::exists(out / "trajectory.csv"));
}

TEST(Cli, FlowWritesFlowColumns) {
  const auto dir = scratch("cli_flow");
  const auto cfg = write_config(dir, R"(
[problem]
kind = identity
n = 3
signal = network
signal_offset = 0.02
[network]
width = 64
[flow]
t_end = 1
record_every = 10
)");
  const auto out = dir / "run";
  const auto r = run_cli({"flow", "--config", cfg.string(), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto table = read_csv((out / "trajectory.csv").string());
  EXPECT_EQ(table.header, flow_columns());
  EXPECT_EQ(table.rows.size(), 11u);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli_codes");
  const auto good = write_config(dir, kSmallSolve);
  EXPECT_EQ(run_cli({"solve", "--config", good.string(), "--bogus"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"solve"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"solve", "--config", (dir / "missing.toml").string()}).code, kExitConfig);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);

  const fs::path bad = dir / "bad.toml";
  write_text_file(bad.string(), "[problem]\nwhat = 1\n");
  const auto r = run_cli({"solve", "--config", bad.string(), "--out", (dir / "x").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("what"), std::string::npos);

  const fs::path diverge = dir / "diverge.toml";
  write_text_file(diverge.string(), std::string(kSmallSolve) + "\n[stopping]\ndivergence_threshold = 1e-30\n");
  EXPECT_EQ(run_cli({"solve", "--config", diverge.string(), "--out", (dir / "d").string()}).code, kExitNumerical);

  const fs::path stall = dir / "stall.toml";
  std::string stall_text = kSmallSolve;
  stall_text.replace(stall_text.find("s0 = 0.1"), 8, "s0 = 1e6\nmax_backtracks = 0");
  write_text_file(stall.string(), stall_text);
  EXPECT_EQ(run_cli({"solve", "--config", stall.string(), "--out", (dir / "s").string()}).code, kExitNumerical);
}
