#include "bgan/bayesgan.hpp"

#include <algorithm>
#include <numeric>

#include "bgan/errors.hpp"

namespace bgan {
namespace {

// Stream ids under the training seed.
enum : std::uint64_t {
  kGenInitStream = 1,
  kDiscInitStream = 2,
  kGenSamplerStream = 3,
  kDiscSamplerStream = 4,
  kIterationStream = 5,
  kEpochStream = 6,
};

std::uint64_t chain_id(int j, int m) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(m)) << 32) | static_cast<std::uint32_t>(j);
}

Chain make_chain(const NetworkSpec& spec, const TrainConfig& cfg, std::uint64_t init_stream,
                 std::uint64_t sampler_stream, int j, int m) {
  const Stream root(cfg.seed);
  const std::uint64_t init_seed = root.split(init_stream).split(chain_id(j, m)).key();
  const std::uint64_t noise_key = root.split(sampler_stream).split(chain_id(j, m)).key();
  Chain chain{init_params(spec, cfg.chain_init, init_seed), {}};
  chain.state = SGHMCState::fresh(chain.params.size(), cfg.sghmc, noise_key);
  return chain;
}

Matrix gather_rows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

std::vector<ParamVector> params_of(const std::vector<Chain>& chains, int first, int count) {
  std::vector<ParamVector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(chains[static_cast<std::size_t>(first + i)].params);
  return out;
}

void step_chain(Chain& chain, const Vector& grad, const TrainConfig& cfg, long d_seen) {
  chain.state.d_seen = d_seen;
  advance(chain.params.values, chain.state, grad, cfg.sghmc, cfg.posterior.N);
}

std::string chain_label(const char* role, int j, int m) {
  return std::string(role) + " chain (j=" + std::to_string(j) + ", m=" + std::to_string(m) + ")";
}

}  // namespace

std::string to_string(TrainMode mode) { return mode == TrainMode::bayes ? "bayes" : "map"; }

TrainMode parse_train_mode(const std::string& name) {
  if (name == "bayes") return TrainMode::bayes;
  if (name == "map") return TrainMode::map;
  throw ConfigError("unknown model '" + name + "' (expected bayes or map)");
}

void TrainConfig::validate() const {
  gen_spec.validate();
  disc_spec.validate();
  posterior.validate();
  prior.validate();
  sghmc.validate();
  if (M < 1) throw ConfigError("M must be >= 1");
  if (collect_every < 1) throw ConfigError("collect_every must be >= 1");
  if (total_iters < 0) throw ConfigError("total_iters must be >= 0");
  if (gen_spec.output_head != OutputHead::linear) throw ConfigError("generator output head must be linear");
  if (gen_spec.output_size() != disc_spec.input_size()) {
    throw ConfigError("generator output size must equal discriminator input size");
  }
  const bool unsup = posterior.mode == PosteriorMode::unsupervised;
  if (unsup && (disc_spec.output_size() != 1 || disc_spec.output_head != OutputHead::sigmoid)) {
    throw ConfigError("unsupervised discriminator needs a single sigmoid output");
  }
  if (!unsup && (disc_spec.output_size() != posterior.K + 1 || disc_spec.output_head != OutputHead::softmax)) {
    throw ConfigError("semi-supervised discriminator needs a softmax over K+1 outputs");
  }
  if (mode == TrainMode::map &&
      (posterior.J_g != 1 || posterior.J_d != 1 || M != 1 || sghmc.noise_enabled)) {
    throw ConfigError("map mode requires J_g = J_d = M = 1 and injected noise off");
  }
}

bool TrainConfig::collects_at(long iteration) const {
  return iteration > sghmc.burn_in_iters && (iteration - sghmc.burn_in_iters) % collect_every == 0;
}

TrainConfig as_map(TrainConfig cfg) {
  cfg.mode = TrainMode::map;
  cfg.posterior.J_g = 1;
  cfg.posterior.J_d = 1;
  cfg.M = 1;
  cfg.sghmc.noise_enabled = false;
  return cfg;
}

SampleSet init_sample_set(const TrainConfig& cfg) {
  cfg.validate();
  SampleSet set;
  const int J_g = cfg.posterior.J_g;
  const int J_d = cfg.posterior.J_d;
  for (int m = 0; m < cfg.M; ++m) {
    for (int j = 0; j < J_g; ++j) set.gen.push_back(make_chain(cfg.gen_spec, cfg, kGenInitStream, kGenSamplerStream, j, m));
  }
  for (int m = 0; m < cfg.M; ++m) {
    for (int j = 0; j < J_d; ++j) set.disc.push_back(make_chain(cfg.disc_spec, cfg, kDiscInitStream, kDiscSamplerStream, j, m));
  }
  return set;
}

std::vector<Eigen::Index> epoch_permutation(long N, long epoch, std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Stream stream = Stream(seed).split(kEpochStream).split(static_cast<std::uint64_t>(epoch));
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[stream.below(i)]);
  }
  return perm;
}

std::vector<Eigen::Index> next_minibatch(SampleSet& set, long N, int n, std::uint64_t seed) {
  if (N < 1 || n < 1 || n > N) throw ConfigError("minibatch size must be in 1..N");
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(n));
  auto perm = epoch_permutation(N, set.epoch, seed);
  while (static_cast<int>(rows.size()) < n) {
    if (set.cursor >= N) {
      ++set.epoch;
      set.cursor = 0;
      perm = epoch_permutation(N, set.epoch, seed);
    }
    rows.push_back(perm[static_cast<std::size_t>(set.cursor++)]);
  }
  set.d_seen = std::min(N, set.d_seen + n);
  return rows;
}

std::vector<Matrix> draw_noise_sets(const TrainConfig& cfg, long iteration, int role, int j, int count) {
  Stream stream = Stream(cfg.seed)
                      .split(kIterationStream)
                      .split(static_cast<std::uint64_t>(iteration))
                      .split(static_cast<std::uint64_t>(role))
                      .split(static_cast<std::uint64_t>(j));
  std::vector<Matrix> sets;
  sets.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) sets.push_back(stream.normal_matrix(cfg.posterior.n_g, cfg.z_dim()));
  return sets;
}

void run_iteration(SampleSet& set, const TrainData& data, const TrainConfig& cfg) {
  const PosteriorConfig& pc = cfg.posterior;
  if (data.x.rows() < 1) throw DataError("empty training set");
  if (data.x.rows() != pc.N) throw ConfigError("posterior N does not match the training set size");
  if (data.x.cols() != cfg.disc_spec.input_size()) throw ShapeError("training data width does not match discriminator input");
  if (static_cast<int>(set.gen.size()) != cfg.gen_chains() || static_cast<int>(set.disc.size()) != cfg.disc_chains()) {
    throw ConfigError("sample set does not match J_g*M / J_d*M");
  }
  const long t = set.iteration;

  // Generator loop: every chain (j, m) sees the J_g noise sets drawn for j and
  // the current discriminator samples (., m).
  for (int j = 0; j < pc.J_g; ++j) {
    const std::vector<Matrix> noise = draw_noise_sets(cfg, t, 0, j, pc.J_g);
    for (int m = 0; m < cfg.M; ++m) {
      Chain& chain = set.gen[static_cast<std::size_t>(m * pc.J_g + j)];
      try {
        const std::vector<ParamVector> discs = params_of(set.disc, m * pc.J_d, pc.J_d);
        const ValueGrad vg = marginal_grad_gen(chain.params, noise, discs, cfg.prior, pc);
        step_chain(chain, vg.grad, cfg, set.d_seen);
      } catch (const NumericError& e) {
        throw NumericError(chain_label("generator", j, m) + ": " + e.what());
      }
    }
  }

  // Discriminator loop: fresh noise and one real minibatch per j.
  for (int j = 0; j < pc.J_d; ++j) {
    const std::vector<Matrix> noise = draw_noise_sets(cfg, t, 1, j, pc.J_d);
    const Matrix x = gather_rows(data.x, next_minibatch(set, pc.N, pc.n_d, cfg.seed));
    for (int m = 0; m < cfg.M; ++m) {
      Chain& chain = set.disc[static_cast<std::size_t>(m * pc.J_d + j)];
      try {
        const std::vector<ParamVector> gens = params_of(set.gen, m * pc.J_g, pc.J_g);
        const ValueGrad vg = marginal_grad_disc(chain.params, noise, x, data.labeled, gens, cfg.prior, pc);
        step_chain(chain, vg.grad, cfg, set.d_seen);
      } catch (const NumericError& e) {
        throw NumericError(chain_label("discriminator", j, m) + ": " + e.what());
      }
    }
  }
  ++set.iteration;
}

TrainResult train(const TrainConfig& cfg, const TrainData& data, const MetricCallback& metrics,
                  std::optional<SampleSet> start) {
  cfg.validate();
  TrainResult result;
  result.samples = start ? std::move(*start) : init_sample_set(cfg);
  SampleSet& set = result.samples;

  while (set.iteration < cfg.total_iters) {
    try {
      run_iteration(set, data, cfg);
    } catch (const NumericError& e) {
      result.error = "iteration " + std::to_string(set.iteration + 1) + ": " + e.what();
      result.failed_iteration = set.iteration + 1;
      return result;
    }
    if (!cfg.collects_at(set.iteration)) continue;
    for (std::size_t c = 0; c < set.gen.size(); ++c) {
      set.gen_history.push_back({set.iteration, static_cast<int>(c), set.gen[c].params});
    }
    for (std::size_t c = 0; c < set.disc.size(); ++c) {
      set.disc_history.push_back({set.iteration, static_cast<int>(c), set.disc[c].params});
    }
    if (metrics) result.metrics.push_back(metrics(set, set.iteration));
  }
  return result;
}

}  // namespace bgan
