#include "dindip/xp/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dindip::xp {

namespace pt = boost::property_tree;

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Gaussian: return "gaussian";
    case ProblemKind::Identity: return "identity";
    case ProblemKind::Blur: return "blur";
    case ProblemKind::WellConditioned: return "wellcond";
  }
  return "unknown";
}

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::Gaussian: return "gaussian";
    case SignalKind::Image: return "image";
    case SignalKind::NetworkPerturbed: return "network";
  }
  return "unknown";
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Drops a trailing '# comment' outside quotes, then surrounding quotes.
std::string clean_value(const std::string& raw) {
  std::string v;
  bool quoted = false;
  for (char c : raw) {
    if (c == '"') quoted = !quoted;
    if (c == '#' && !quoted) break;
    v += c;
  }
  v = trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  }
}

long long parse_integer(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + text + "'");
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < 0) throw ConfigError("'" + key + "': seeds must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

std::vector<std::string> split_list(const std::string& text) {
  std::string body = trim(text);
  if (!body.empty() && body.front() == '[') {
    if (body.back() != ']') throw ConfigError("unterminated list '" + text + "'");
    body = body.substr(1, body.size() - 2);
  }
  std::vector<std::string> items;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"problem",
       {"kind", "n", "m", "image_side", "kernel_std", "noise_std", "snr", "seed", "signal", "signal_offset",
        "image"}},
      {"network", {"width", "input_dim", "activation", "seed"}},
      {"optimizer",
       {"alpha", "beta", "delta", "rho", "s0", "backtrack", "max_iters", "max_backtracks", "record_every"}},
      {"flow", {"alpha", "beta", "t_end", "step", "err_tol", "record_every"}},
      {"stopping", {"loss_threshold", "early_stop_on_noise", "divergence_threshold"}},
      {"grid", {"alphas", "betas", "widths", "instances", "seed_base", "success_iters"}},
      {"imaging", {"pairs", "checkpoints"}},
      {"output", {"dir"}},
  };
  return s;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return clean_value(*v);
  }

  void real(const std::string& s, const std::string& k, double& out) const {
    if (auto v = get(s, k)) out = parse_real(s + "." + k, *v);
  }
  template <typename Int>
  void integer(const std::string& s, const std::string& k, Int& out) const {
    if (auto v = get(s, k)) out = static_cast<Int>(parse_integer(s + "." + k, *v));
  }
  void boolean(const std::string& s, const std::string& k, bool& out) const {
    if (auto v = get(s, k)) out = parse_bool(s + "." + k, *v);
  }

 private:
  const pt::ptree& tree_;
};

void check_schema(const pt::ptree& tree) {
  const auto& s = schema();
  for (const auto& [section, body] : tree) {
    const auto it = s.find(section);
    if (it == s.end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside of a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
  }
}

}  // namespace

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_real("list", item));
  return out;
}

std::vector<std::pair<double, double>> parse_pair_list(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  for (const auto& item : split_list(text)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("expected alpha:beta, got '" + item + "'");
    out.emplace_back(parse_real("pair", trim(item.substr(0, colon))), parse_real("pair", trim(item.substr(colon + 1))));
  }
  return out;
}

OptimizerConfig<double> RunConfig::optimizer_config() const {
  OptimizerConfig<double> c = optimizer;
  c.stop_loss_threshold = stopping.loss_threshold;
  c.early_stop_on_noise = stopping.early_stop_on_noise;
  c.divergence_threshold = stopping.divergence_threshold;
  return c;
}

void RunConfig::validate() const {
  const auto& p = problem;
  if (p.kind == ProblemKind::Gaussian && (p.n < 1 || p.m < 1)) throw ConfigError("problem: n and m must be >= 1");
  if (p.kind == ProblemKind::Identity && p.n < 1) throw ConfigError("problem: n must be >= 1");
  if ((p.kind == ProblemKind::Blur || p.kind == ProblemKind::WellConditioned) && p.image_side < 2)
    throw ConfigError("problem: image_side must be >= 2");
  if (!(p.kernel_std > 0)) throw ConfigError("problem: kernel_std must be > 0");
  if (!(p.noise_std >= 0)) throw ConfigError("problem: noise_std must be >= 0");
  if (p.snr && !(*p.snr > 0)) throw ConfigError("problem: snr must be > 0");
  if (!(p.signal_offset >= 0)) throw ConfigError("problem: signal_offset must be >= 0");
  if (network.width < 1 || network.input_dim < 1) throw ConfigError("network: width and input_dim must be >= 1");
  optimizer_config().validate();
  if (!flow.theorem_parameters && !(flow.alpha >= 0 && flow.beta >= 0))
    throw ConfigError("flow: alpha and beta must be >= 0");
  if (!(flow.step > 0) || !(flow.err_tol > 0) || flow.record_every < 1)
    throw ConfigError("flow: step, err_tol must be > 0 and record_every >= 1");
  if (flow.t_end && !(*flow.t_end >= 0)) throw ConfigError("flow: t_end must be >= 0");
  if (grid.alphas.empty() || grid.betas.empty() || grid.widths.empty())
    throw ConfigError("grid: alphas, betas and widths must be non-empty");
  for (double a : grid.alphas)
    if (!(a >= 0)) throw ConfigError("grid: alphas must be >= 0");
  for (double b : grid.betas)
    if (!(b >= 0)) throw ConfigError("grid: betas must be >= 0");
  for (Index w : grid.widths)
    if (w < 1) throw ConfigError("grid: widths must be >= 1");
  if (grid.instances < 1) throw ConfigError("grid: instances must be >= 1");
  if (grid.success_iters < 1) throw ConfigError("grid: success_iters must be >= 1");
  for (const auto& [a, b] : imaging.pairs)
    if (!(a >= 0 && b >= 0)) throw ConfigError("imaging: alpha and beta must be >= 0");
  for (Index c : imaging.checkpoints)
    if (c < 0) throw ConfigError("imaging: checkpoints must be >= 0");
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  check_schema(tree);
  const Reader r(tree);
  RunConfig c;
  c.source_text = text;

  if (auto v = r.get("problem", "kind")) {
    if (*v == "gaussian") c.problem.kind = ProblemKind::Gaussian;
    else if (*v == "identity") c.problem.kind = ProblemKind::Identity;
    else if (*v == "blur") c.problem.kind = ProblemKind::Blur;
    else if (*v == "wellcond") c.problem.kind = ProblemKind::WellConditioned;
    else throw ConfigError("problem.kind: unknown operator '" + *v + "'");
  }
  r.integer("problem", "n", c.problem.n);
  r.integer("problem", "m", c.problem.m);
  r.integer("problem", "image_side", c.problem.image_side);
  r.real("problem", "kernel_std", c.problem.kernel_std);
  r.real("problem", "noise_std", c.problem.noise_std);
  if (auto v = r.get("problem", "snr")) c.problem.snr = parse_real("problem.snr", *v);
  if (auto v = r.get("problem", "seed")) c.problem.seed = parse_seed("problem.seed", *v);
  if (auto v = r.get("problem", "signal")) {
    if (*v == "gaussian") c.problem.signal = SignalKind::Gaussian;
    else if (*v == "image") c.problem.signal = SignalKind::Image;
    else if (*v == "network") c.problem.signal = SignalKind::NetworkPerturbed;
    else throw ConfigError("problem.signal: unknown signal '" + *v + "'");
  } else if (c.problem.kind == ProblemKind::Blur || c.problem.kind == ProblemKind::WellConditioned) {
    c.problem.signal = SignalKind::Image;
  }
  r.real("problem", "signal_offset", c.problem.signal_offset);
  if (auto v = r.get("problem", "image")) c.problem.image_path = *v;

  r.integer("network", "width", c.network.width);
  r.integer("network", "input_dim", c.network.input_dim);
  if (auto v = r.get("network", "activation")) c.network.activation = parse_activation(*v);
  if (auto v = r.get("network", "seed")) c.network.seed = parse_seed("network.seed", *v);

  auto& o = c.optimizer;
  r.real("optimizer", "alpha", o.alpha);
  r.real("optimizer", "beta", o.beta);
  r.real("optimizer", "delta", o.delta);
  r.real("optimizer", "rho", o.rho);
  r.real("optimizer", "s0", o.s0);
  if (auto v = r.get("optimizer", "backtrack")) o.mode = parse_backtrack_mode(*v);
  r.integer("optimizer", "max_iters", o.max_iters);
  r.integer("optimizer", "max_backtracks", o.max_backtracks);
  r.integer("optimizer", "record_every", o.record_every);

  auto flow_damping = [&](const char* key, double& out) {
    if (auto v = r.get("flow", key)) {
      if (*v == "theorem") return;
      out = parse_real(std::string("flow.") + key, *v);
      c.flow.theorem_parameters = false;
    }
  };
  flow_damping("alpha", c.flow.alpha);
  flow_damping("beta", c.flow.beta);
  if (auto v = r.get("flow", "t_end"); v && *v != "auto") c.flow.t_end = parse_real("flow.t_end", *v);
  r.real("flow", "step", c.flow.step);
  r.real("flow", "err_tol", c.flow.err_tol);
  r.integer("flow", "record_every", c.flow.record_every);

  r.real("stopping", "loss_threshold", c.stopping.loss_threshold);
  r.boolean("stopping", "early_stop_on_noise", c.stopping.early_stop_on_noise);
  r.real("stopping", "divergence_threshold", c.stopping.divergence_threshold);

  if (auto v = r.get("grid", "alphas")) c.grid.alphas = parse_real_list(*v);
  if (auto v = r.get("grid", "betas")) c.grid.betas = parse_real_list(*v);
  if (auto v = r.get("grid", "widths")) {
    c.grid.widths.clear();
    for (double w : parse_real_list(*v)) {
      if (w != std::floor(w)) throw ConfigError("grid.widths: expected integers");
      c.grid.widths.push_back(static_cast<Index>(w));
    }
  }
  r.integer("grid", "instances", c.grid.instances);
  if (auto v = r.get("grid", "seed_base")) c.grid.seed_base = parse_seed("grid.seed_base", *v);
  r.integer("grid", "success_iters", c.grid.success_iters);

  if (auto v = r.get("imaging", "pairs")) c.imaging.pairs = parse_pair_list(*v);
  if (auto v = r.get("imaging", "checkpoints")) {
    c.imaging.checkpoints.clear();
    for (double t : parse_real_list(*v)) {
      if (t != std::floor(t)) throw ConfigError("imaging.checkpoints: expected integers");
      c.imaging.checkpoints.push_back(static_cast<Index>(t));
    }
  }

  if (auto v = r.get("output", "dir")) c.output_dir = *v;
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace dindip::xp
