#pragma once

// Bayesian GAN training: J_g*M generator chains and J_d*M discriminator
// chains advanced by SGHMC against each other's current samples.
//
// Chain (j, m) lives at index m*J + j, so the samples sharing an m index are
// contiguous. Generator chain (j, m) is driven by the discriminator chains
// (., m); discriminator chain (j, m) by the generator chains (., m).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bgan/netcore.hpp"
#include "bgan/posterior.hpp"
#include "bgan/random.hpp"
#include "bgan/sghmc.hpp"

namespace bgan {

enum class TrainMode { bayes, map };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  NetworkSpec gen_spec;
  NetworkSpec disc_spec;
  PosteriorConfig posterior;
  PriorSpec prior;
  SGHMCConfig sghmc;
  int M = 2;
  long total_iters = 6000;
  long collect_every = 1000;
  TrainMode mode = TrainMode::bayes;
  InitSpec chain_init = InitSpec::he();
  std::uint64_t seed = 0;

  void validate() const;
  int gen_chains() const { return posterior.J_g * M; }
  int disc_chains() const { return posterior.J_d * M; }
  int z_dim() const { return gen_spec.input_size(); }
  /// True once `iteration` completed iterations call for a collection.
  bool collects_at(long iteration) const;
};

/// Same configuration reduced to ML-GAN form: one chain per network, no
/// injected noise.
TrainConfig as_map(TrainConfig cfg);

struct Chain {
  ParamVector params;
  SGHMCState state;
};

struct CollectedSample {
  long iteration = 0;
  int chain = 0;
  ParamVector params;
};

struct SampleSet {
  std::vector<Chain> gen;
  std::vector<Chain> disc;
  std::vector<CollectedSample> gen_history;
  std::vector<CollectedSample> disc_history;
  long iteration = 0;  // completed iterations
  long d_seen = 0;     // distinct real datapoints consumed, capped at N
  long epoch = 0;      // minibatch position: epoch and offset into its permutation
  long cursor = 0;
};

/// Fresh chains drawn from cfg.chain_init with per-chain seeds.
SampleSet init_sample_set(const TrainConfig& cfg);

struct TrainData {
  Matrix x;              // unlabeled real data, one row per point
  LabeledBatch labeled;  // semi-supervised only
};

/// Row indices of the next real minibatch. Rows are drawn without replacement
/// through a per-epoch permutation; advances set.epoch/cursor/d_seen.
std::vector<Eigen::Index> next_minibatch(SampleSet& set, long N, int n, std::uint64_t seed);

/// Permutation of 0..N-1 used for `epoch`.
std::vector<Eigen::Index> epoch_permutation(long N, long epoch, std::uint64_t seed);

/// Noise sets for one generator (role 0) or discriminator (role 1) MC loop
/// index j of iteration t. Shared by the M chains with that j.
std::vector<Matrix> draw_noise_sets(const TrainConfig& cfg, long iteration, int role, int j, int count);

/// One sampling iteration: the generator loop, then the discriminator loop.
void run_iteration(SampleSet& set, const TrainData& data, const TrainConfig& cfg);

struct MetricRecord {
  long iteration = 0;
  double jsd_nats = std::numeric_limits<double>::quiet_NaN();
  double test_error = std::numeric_limits<double>::quiet_NaN();
  long n_gen_samples = 0;
  double wallclock_s = 0.0;
};

/// Pulled at collection points only.
using MetricCallback = std::function<MetricRecord(const SampleSet&, long iteration)>;

struct TrainResult {
  SampleSet samples;
  std::vector<MetricRecord> metrics;
  std::optional<std::string> error;  // set when training aborted
  long failed_iteration = -1;
};

/// Runs cfg.total_iters iterations (continuing from `start` when given).
/// Numeric failures stop training; the partial result carries the error.
TrainResult train(const TrainConfig& cfg, const TrainData& data, const MetricCallback& metrics = {},
                  std::optional<SampleSet> start = std::nullopt);

// Checkpoint file, little-endian throughout:
//   "BGAN" u32 version=1
//   gen spec, disc spec: u32 n_sizes, u32 sizes[n], u8 activation, u8 head
//   u32 J_g, J_d, M
//   u64 iteration, d_seen, epoch, cursor
//   u64 gen_history_len, disc_history_len
//   per chain (gen then disc): f64 params[P], v[P], adam_m[P], adam_v[P],
//                              i64 step, i64 d_seen, u8 phase, u64 noise_key
//   per history entry (gen then disc): i64 iteration, u32 chain, f64 params[P]
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointLayout {
  int J_g = 0;
  int J_d = 0;
  int M = 0;
};

void save_checkpoint(const SampleSet& set, const CheckpointLayout& layout, const std::filesystem::path& path);

struct LoadedCheckpoint {
  SampleSet samples;
  CheckpointLayout layout;
};

/// Throws FormatError (with byte offset) on bad magic, version or length, and
/// SpecMismatchError when expected specs are given and differ.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<NetworkSpec>& expected_gen = std::nullopt,
                                 const std::optional<NetworkSpec>& expected_disc = std::nullopt);

bool operator==(const SampleSet& a, const SampleSet& b);

}  // namespace bgan
