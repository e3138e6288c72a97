#pragma once

// Experiment runner behind `bgan train`: builds the dataset, trains, measures
// JSD or test error at every collection point, and writes metrics, timing,
// checkpoint and plots into an output directory.

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bgan/config.hpp"
#include "bgan/datagen.hpp"
#include "bgan/eval.hpp"

namespace bgan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitCheckFailed = 1;

struct PreparedData {
  TrainData train;
  int data_dim = 0;
  int K = 0;
  // Unsupervised: held-out true points, the PCA fitted on them, and their projection.
  Matrix eval_points;
  std::optional<Projection2D> pca;
  Matrix eval_projected;
  // Semi-supervised: held-out labeled test set.
  Matrix test_x;
  std::vector<int> test_y;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

/// `count` generated points pooled equally over `gens` (earlier chains take
/// the remainder), one noise row each.
Matrix generate_pooled(const std::vector<ParamVector>& gens, long count, Stream& stream);

/// Generated-vs-true JSD in the true-data PCA plane.
double jsd_against_truth(const PreparedData& data, const std::vector<ParamVector>& gens, long count, int grid,
                         Stream& stream);

/// Labeled-only reference classifier: Adam on the labeled log-likelihood plus
/// log prior, same network as the discriminator. Returns its test error.
double supervised_baseline_error(const ExperimentConfig& cfg, const PreparedData& data, const TrainConfig& tc);

struct RunSummary {
  int exit_code = kExitOk;
  std::string error;
  long failed_iteration = -1;
  std::vector<MetricRecord> metrics;
  std::vector<double> wallclock;  // seconds at each metric row, always recorded
  double final_jsd = std::numeric_limits<double>::quiet_NaN();
  double final_test_error = std::numeric_limits<double>::quiet_NaN();    // BMA over collected samples
  double final_single_error = std::numeric_limits<double>::quiet_NaN();  // last live sample of chain 0
  double baseline_error = std::numeric_limits<double>::quiet_NaN();
  std::optional<MdsEmbedding> mds;
  std::optional<ClusterResult> clusters;
  SampleSet samples;
  TrainConfig train_config;
};

/// Runs one experiment. With an empty `out_dir` nothing is written.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// metrics.csv contents; NaN cells and (unless `wallclock`) wallclock_s are left empty.
std::string metrics_csv(const std::vector<MetricRecord>& rows, bool wallclock);

struct RepeatReport {
  std::vector<RunSummary> runs;
  int exit_code = kExitOk;
  double mean_jsd = std::numeric_limits<double>::quiet_NaN();
  double two_sd_jsd = std::numeric_limits<double>::quiet_NaN();
  double mean_test_error = std::numeric_limits<double>::quiet_NaN();
  double two_sd_test_error = std::numeric_limits<double>::quiet_NaN();
};

inline std::uint64_t repeat_seed(std::uint64_t seed, int repeat) { return seed + 1000ULL * static_cast<std::uint64_t>(repeat); }

/// Worker cap from BGAN_THREADS (default: hardware concurrency).
int worker_threads();

/// cfg.repeats runs with seeds seed + 1000 r, in output_dir/repeat_<r> when
/// repeats > 1, plus summary.csv with mean and 2 sd of the final values.
RepeatReport run_repeats(const ExperimentConfig& cfg, std::ostream& log);

/// Mean and two sample standard deviations, ignoring NaNs.
std::pair<double, double> mean_two_sd(const std::vector<double>& values);

}  // namespace bgan
