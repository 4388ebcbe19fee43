#pragma once

#include "dindip/activation.hpp"
#include "dindip/flow.hpp"
#include "dindip/inertia.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dindip::xp {

enum class ProblemKind { Gaussian, Identity, Blur, WellConditioned };
enum class SignalKind { Gaussian, Image, NetworkPerturbed };

std::string to_string(ProblemKind kind);
std::string to_string(SignalKind kind);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Gaussian;
  Index n = 10;
  Index m = 5;
  Index image_side = 32;  // blur and wellcond: n = m = side^2
  double kernel_std = 1.0;
  double noise_std = 0.0;
  std::optional<double> snr;  // overrides noise_std when set
  std::uint64_t seed = 0;
  SignalKind signal = SignalKind::Gaussian;
  double signal_offset = 0.05;  // |x_true - g(theta0)| for the network-perturbed signal
  std::string image_path;       // PGM; a synthetic phantom is used when empty
};

struct NetworkSpec {
  Index width = 4096;
  Index input_dim = 1;
  ActivationKind activation = ActivationKind::Sigmoid;
  std::optional<std::uint64_t> seed;  // defaults to the problem seed
};

struct FlowSpec {
  bool theorem_parameters = true;  // alpha = alpha*, beta = beta* from the certificate
  double alpha = 0;
  double beta = 0;
  std::optional<double> t_end;  // default: 3 t* with noise, else 10 / (sigma_J0 sigma_A)
  double step = 1e-2;
  double err_tol = 1e-8;
  Index record_every = 10;
};

struct StoppingSpec {
  double loss_threshold = 1e-14;
  bool early_stop_on_noise = false;
  double divergence_threshold = 1e12;
};

struct GridSpec {
  std::vector<double> alphas = {0.0};
  std::vector<double> betas = {0.0};
  std::vector<Index> widths = {8, 4096};
  Index instances = 10;
  std::uint64_t seed_base = 0;
  Index success_iters = 15000;
};

struct ImagingSpec {
  std::vector<std::pair<double, double>> pairs = {{0.0, 0.0}, {1.0, 0.1}};
  std::vector<Index> checkpoints = {100, 1000};
};

struct RunConfig {
  ProblemSpec problem;
  NetworkSpec network;
  OptimizerConfig<double> optimizer;
  FlowSpec flow;
  StoppingSpec stopping;
  GridSpec grid;
  ImagingSpec imaging;
  std::string output_dir = "out";
  std::string source_text;  // config file bytes, echoed into run directories

  std::uint64_t network_seed() const { return network.seed.value_or(problem.seed); }
  /// Optimizer settings with the stopping section folded in.
  OptimizerConfig<double> optimizer_config() const;
  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Value helpers shared with the CLI; all throw ConfigError on malformed input.
std::vector<double> parse_real_list(const std::string& text);
std::vector<std::pair<double, double>> parse_pair_list(const std::string& text);

}  // namespace dindip::xp
