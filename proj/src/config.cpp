#include "bgan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "bgan/errors.hpp"

namespace bgan {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ConfigError("bad boolean '" + value + "' for " + key);
}

std::vector<int> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (value.empty() || value == "none") return out;
  std::istringstream in(value);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(parse_number<int>(key, trim(part)));
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string join_sizes(const std::vector<int>& sizes) {
  if (sizes.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) out += (i ? "," : "") + std::to_string(sizes[i]);
  return out;
}

struct Binding {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Binding number(std::string key, T ExperimentConfig::*field) {
  return {key, [key, field](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<T>(key, v); },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_number(c.*field);
            else return std::to_string(c.*field);
          }};
}

template <typename T>
Binding data_number(std::string key, T DataConfig::*field) {
  return {key, [key, field](ExperimentConfig& c, const std::string& v) { c.data.*field = parse_number<T>(key, v); },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_number(c.data.*field);
            else return std::to_string(c.data.*field);
          }};
}

template <typename T>
Binding sghmc_number(std::string key, T SGHMCConfig::*field) {
  return {key, [key, field](ExperimentConfig& c, const std::string& v) { c.sghmc.*field = parse_number<T>(key, v); },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_number(c.sghmc.*field);
            else return std::to_string(c.sghmc.*field);
          }};
}

Binding flag(std::string key, bool ExperimentConfig::*field) {
  return {key, [key, field](ExperimentConfig& c, const std::string& v) { c.*field = parse_bool(key, v); },
          [field](const ExperimentConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      {"experiment", [](ExperimentConfig& c, const std::string& v) { c.experiment = parse_experiment_kind(v); },
       [](const ExperimentConfig& c) { return to_string(c.experiment); }},
      {"model", [](ExperimentConfig& c, const std::string& v) { c.model = parse_train_mode(v); },
       [](const ExperimentConfig& c) { return to_string(c.model); }},
      number("seed", &ExperimentConfig::seed),
      {"output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
       [](const ExperimentConfig& c) { return c.output_dir.string(); }},
      number("repeats", &ExperimentConfig::repeats),

      data_number("data.D", &DataConfig::D),
      data_number("data.d", &DataConfig::d),
      data_number("data.n", &DataConfig::n),
      data_number("data.n_eval", &DataConfig::n_eval),
      data_number("data.z_var", &DataConfig::z_var),
      data_number("data.noise_var", &DataConfig::noise_var),
      data_number("data.K", &DataConfig::K),
      data_number("data.N_s", &DataConfig::N_s),
      data_number("data.n_test", &DataConfig::n_test),
      {"data.mnist_dir", [](ExperimentConfig& c, const std::string& v) { c.data.mnist_dir = v; },
       [](const ExperimentConfig& c) { return c.data.mnist_dir; }},
      data_number("data.downsample", &DataConfig::downsample),
      data_number("data.train_limit", &DataConfig::train_limit),

      number("gen.z_dim", &ExperimentConfig::z_dim),
      {"gen.hidden", [](ExperimentConfig& c, const std::string& v) { c.gen_hidden = parse_sizes("gen.hidden", v); },
       [](const ExperimentConfig& c) { return join_sizes(c.gen_hidden); }},
      {"disc.hidden", [](ExperimentConfig& c, const std::string& v) { c.disc_hidden = parse_sizes("disc.hidden", v); },
       [](const ExperimentConfig& c) { return join_sizes(c.disc_hidden); }},

      number("posterior.n_g", &ExperimentConfig::n_g),
      number("posterior.n_d", &ExperimentConfig::n_d),
      number("posterior.J_g", &ExperimentConfig::J_g),
      number("posterior.J_d", &ExperimentConfig::J_d),
      {"prior.sigma2",
       [](ExperimentConfig& c, const std::string& v) {
         c.prior_sigma2 = v == "auto" ? std::nullopt : std::optional<double>(parse_number<double>("prior.sigma2", v));
       },
       [](const ExperimentConfig& c) { return c.prior_sigma2 ? format_number(*c.prior_sigma2) : std::string("auto"); }},

      sghmc_number("sghmc.alpha", &SGHMCConfig::alpha),
      sghmc_number("sghmc.gamma", &SGHMCConfig::gamma),
      sghmc_number("sghmc.burn_in_iters", &SGHMCConfig::burn_in_iters),
      sghmc_number("sghmc.adam_lr", &SGHMCConfig::adam_lr),
      sghmc_number("sghmc.adam_beta1", &SGHMCConfig::adam_beta1),
      sghmc_number("sghmc.adam_beta2", &SGHMCConfig::adam_beta2),
      sghmc_number("sghmc.adam_eps", &SGHMCConfig::adam_eps),
      {"sghmc.noise", [](ExperimentConfig& c, const std::string& v) { c.sghmc.noise_enabled = parse_bool("sghmc.noise", v); },
       [](const ExperimentConfig& c) { return std::string(c.sghmc.noise_enabled ? "true" : "false"); }},

      number("train.M", &ExperimentConfig::M),
      number("train.total_iters", &ExperimentConfig::total_iters),
      number("train.collect_every", &ExperimentConfig::collect_every),
      {"train.init",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "he") c.init = InitKind::he;
         else if (v == "prior") c.init = InitKind::prior;
         else throw ConfigError("train.init must be he or prior, got '" + v + "'");
       },
       [](const ExperimentConfig& c) { return std::string(c.init == InitKind::he ? "he" : "prior"); }},

      number("eval.jsd_samples", &ExperimentConfig::jsd_samples),
      number("eval.kde_grid", &ExperimentConfig::kde_grid),
      flag("eval.wallclock", &ExperimentConfig::record_wallclock),
      flag("output.checkpoint", &ExperimentConfig::write_checkpoint),
      flag("output.plots", &ExperimentConfig::write_plots),
      number("baseline.iters", &ExperimentConfig::baseline_iters),
      number("baseline.lr", &ExperimentConfig::baseline_lr),
  };
  return table;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::synth_unsup: return "synth_unsup";
    case ExperimentKind::synth_semi: return "synth_semi";
    case ExperimentKind::mnist_semi: return "mnist_semi";
    case ExperimentKind::sampler_check: return "sampler_check";
    case ExperimentKind::gradient_check: return "gradient_check";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::synth_unsup, ExperimentKind::synth_semi, ExperimentKind::mnist_semi,
                 ExperimentKind::sampler_check, ExperimentKind::gradient_check}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (z_dim < 1) throw ConfigError("gen.z_dim must be >= 1");
  for (int h : gen_hidden) {
    if (h < 1) throw ConfigError("gen.hidden sizes must be >= 1");
  }
  for (int h : disc_hidden) {
    if (h < 1) throw ConfigError("disc.hidden sizes must be >= 1");
  }
  if (n_g < 1 || n_d < 1 || J_g < 1 || J_d < 1 || M < 1) throw ConfigError("n_g, n_d, J_g, J_d and M must be >= 1");
  if (prior_sigma2 && !(*prior_sigma2 > 0.0)) throw ConfigError("prior.sigma2 must be > 0");
  if (total_iters < 0 || collect_every < 1) throw ConfigError("train.total_iters >= 0 and train.collect_every >= 1 required");
  if (jsd_samples < 10) throw ConfigError("eval.jsd_samples must be >= 10");
  if (kde_grid < 2) throw ConfigError("eval.kde_grid must be >= 2");
  if (baseline_iters < 0 || !(baseline_lr > 0.0)) throw ConfigError("baseline.iters >= 0 and baseline.lr > 0 required");
  sghmc.validate();

  switch (experiment) {
    case ExperimentKind::synth_unsup:
    case ExperimentKind::synth_semi: {
      if (data.d < 1 || data.d >= data.D) throw ConfigError("data.d must be in 1..data.D-1");
      if (data.n < 1 || data.n_eval < 10) throw ConfigError("data.n >= 1 and data.n_eval >= 10 required");
      if (!(data.z_var >= 0.0) || !(data.noise_var >= 0.0)) throw ConfigError("data variances must be >= 0");
      if (data.n < n_d) throw ConfigError("data.n must be >= posterior.n_d");
      if (experiment == ExperimentKind::synth_semi) {
        if (data.K < 2) throw ConfigError("data.K must be >= 2");
        if (data.N_s < data.K) throw ConfigError("data.N_s must be >= data.K");
        if (data.n_test < 1) throw ConfigError("data.n_test must be >= 1");
        if (data.n - data.N_s < n_d) throw ConfigError("unlabeled pool smaller than posterior.n_d");
      }
      break;
    }
    case ExperimentKind::mnist_semi:
      if (data.mnist_dir.empty()) throw ConfigError("data.mnist_dir must be set for mnist_semi");
      if (!std::filesystem::is_directory(data.mnist_dir)) {
        throw ConfigError("data.mnist_dir does not exist: " + data.mnist_dir);
      }
      if (data.N_s < 10) throw ConfigError("data.N_s must be >= 10 for MNIST");
      if (data.downsample < 1) throw ConfigError("data.downsample must be >= 1");
      break;
    case ExperimentKind::sampler_check:
    case ExperimentKind::gradient_check:
      break;
  }
}

double ExperimentConfig::prior_sigma2_value() const {
  if (prior_sigma2) return *prior_sigma2;
  if (model == TrainMode::map) return kFlatPriorSigma2;
  return synthetic() ? 1.0 : 10.0;
}

TrainConfig ExperimentConfig::train_config(int data_dim, long N, long N_s, int K) const {
  TrainConfig tc;
  tc.gen_spec.layer_sizes.push_back(z_dim);
  for (int h : gen_hidden) tc.gen_spec.layer_sizes.push_back(h);
  tc.gen_spec.layer_sizes.push_back(data_dim);
  tc.gen_spec.output_head = OutputHead::linear;

  tc.disc_spec.layer_sizes.push_back(data_dim);
  for (int h : disc_hidden) tc.disc_spec.layer_sizes.push_back(h);
  if (semi_supervised()) {
    tc.disc_spec.layer_sizes.push_back(K + 1);
    tc.disc_spec.output_head = OutputHead::softmax;
    tc.posterior.mode = PosteriorMode::semi_supervised;
    tc.posterior.K = K;
  } else {
    tc.disc_spec.layer_sizes.push_back(1);
    tc.disc_spec.output_head = OutputHead::sigmoid;
    tc.posterior.mode = PosteriorMode::unsupervised;
  }
  tc.posterior.n_g = n_g;
  tc.posterior.n_d = n_d;
  tc.posterior.N = N;
  tc.posterior.N_s = N_s;
  tc.posterior.J_g = J_g;
  tc.posterior.J_d = J_d;
  const double sigma = std::sqrt(prior_sigma2_value());
  tc.prior = {sigma, sigma};
  tc.sghmc = sghmc;
  tc.sghmc.seed = seed;
  tc.M = M;
  tc.total_iters = total_iters;
  tc.collect_every = collect_every;
  tc.chain_init = init == InitKind::he ? InitSpec::he() : InitSpec::prior(sigma);
  tc.seed = seed;
  return model == TrainMode::map ? as_map(tc) : tc;
}

std::string ExperimentConfig::describe() const {
  std::string out;
  for (const Binding& b : bindings()) out += b.key + " = " + b.get(*this) + "\n";
  return out;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = bindings();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return b.key == key; });
  if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
  it->set(cfg, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Binding& b : bindings()) keys.push_back(b.key);
  return keys;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(std::string(std::istreambuf_iterator<char>(in), {}), path.string());
}

}  // namespace bgan
