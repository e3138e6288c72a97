#pragma once

// Experiment configuration: flat UTF-8 key=value text, '#' comments, dotted
// keys (sghmc.alpha=0.01). Every key has a default; describe() prints them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bgan/bayesgan.hpp"

namespace bgan {

/// Prior variance used by model=map when prior.sigma2 is auto (ML-GAN).
inline constexpr double kFlatPriorSigma2 = 1e16;

enum class ExperimentKind { synth_unsup, synth_semi, mnist_semi, sampler_check, gradient_check };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct DataConfig {
  int D = 100;              // synthetic ambient dimension
  int d = 2;                // synthetic latent dimension
  long n = 10000;           // training points (synthetic)
  long n_eval = 10000;      // held-out true points for JSD
  double z_var = 10.0;
  double noise_var = 0.01;
  int K = 4;                // classes of the synthetic semi-supervised task
  long N_s = 16;            // labeled examples
  long n_test = 2000;       // synthetic test points; MNIST test cap (0 = all)
  std::string mnist_dir;    // directory with the four IDX files
  int downsample = 2;
  long train_limit = 0;     // MNIST training cap (0 = all)
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::synth_unsup;
  TrainMode model = TrainMode::bayes;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "bgan_out";
  int repeats = 1;

  DataConfig data;
  int z_dim = 10;
  std::vector<int> gen_hidden{1000};
  std::vector<int> disc_hidden{1000};

  int n_g = 64;
  int n_d = 64;
  int J_g = 10;
  int J_d = 1;
  int M = 2;
  std::optional<double> prior_sigma2;  // unset: 1 synthetic, 10 real data, flat for map
  SGHMCConfig sghmc;
  long total_iters = 5000;
  long collect_every = 1000;
  InitKind init = InitKind::he;

  long jsd_samples = 10000;
  int kde_grid = 100;
  bool record_wallclock = false;  // wallclock_s in metrics.csv (breaks byte-identity)
  bool write_checkpoint = true;
  bool write_plots = true;
  long baseline_iters = 2000;  // supervised-only reference classifier (mnist_semi)
  double baseline_lr = 1e-3;

  /// Throws ConfigError on out-of-range values or missing referenced paths.
  void validate() const;
  double prior_sigma2_value() const;
  bool synthetic() const { return experiment != ExperimentKind::mnist_semi; }
  bool semi_supervised() const {
    return experiment == ExperimentKind::synth_semi || experiment == ExperimentKind::mnist_semi;
  }

  /// Training configuration for a dataset of width `data_dim` with N unlabeled
  /// and N_s labeled points and K classes.
  TrainConfig train_config(int data_dim, long N, long N_s, int K) const;

  /// One "key = value" line per setting, in file syntax.
  std::string describe() const;
};

/// Applies `key = value` lines to the defaults. Errors name `origin` and the line.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
/// Missing file -> ConfigError naming the path.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one dotted key; throws ConfigError for unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

}  // namespace bgan
