#include "bgan/sghmc.hpp"

#include <algorithm>
#include <cmath>

#include "bgan/errors.hpp"

namespace bgan {
namespace {

void check_grad(const Vector& theta, const Vector& grad) {
  if (grad.size() != theta.size()) throw ShapeError("gradient and parameters differ in length");
  if (!grad.allFinite()) throw NumericError("non-finite gradient passed to sampler");
}

void finish_step(SGHMCState& state, const SGHMCConfig& cfg) {
  ++state.step;
  state.phase = state.step < cfg.burn_in_iters ? Phase::burn_in : Phase::sghmc;
}

}  // namespace

void SGHMCConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("sghmc.alpha must be in (0, 1]");
  if (!(gamma > 0.0)) throw ConfigError("sghmc.gamma must be > 0");
  if (burn_in_iters < 0) throw ConfigError("sghmc.burn_in_iters must be >= 0");
  if (!(adam_lr > 0.0)) throw ConfigError("sghmc.adam_lr must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("sghmc.adam_eps must be > 0");
}

SGHMCState SGHMCState::fresh(Eigen::Index size, const SGHMCConfig& cfg, std::uint64_t noise_key) {
  SGHMCState s;
  s.v = Vector::Zero(size);
  s.adam_m = Vector::Zero(size);
  s.adam_v = Vector::Zero(size);
  s.phase = cfg.burn_in_iters > 0 ? Phase::burn_in : Phase::sghmc;
  s.noise_key = noise_key;
  return s;
}

bool operator==(const SGHMCState& a, const SGHMCState& b) {
  return same_values(a.v, b.v) && same_values(a.adam_m, b.adam_m) && same_values(a.adam_v, b.adam_v) &&
         a.step == b.step && a.d_seen == b.d_seen && a.phase == b.phase && a.noise_key == b.noise_key;
}

double lr_schedule(double gamma, long d_seen, long N) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
  const long d = std::max(std::min(d_seen, N), 1L);
  return gamma / static_cast<double>(d);
}

Stream step_noise_stream(const SGHMCState& state) {
  return Stream(state.noise_key).split(static_cast<std::uint64_t>(state.step));
}

void sghmc_step(Vector& theta, SGHMCState& state, const Vector& grad, const SGHMCConfig& cfg, double eta) {
  if (state.phase != Phase::sghmc) throw ConfigError("sghmc_step called during burn-in");
  if (!(eta > 0.0)) throw ConfigError("step size eta must be > 0");
  check_grad(theta, grad);
  if (state.v.size() != theta.size()) throw ShapeError("momentum and parameters differ in length");

  state.v = (1.0 - cfg.alpha) * state.v + eta * grad;
  if (cfg.noise_enabled) {
    Stream noise = step_noise_stream(state);
    const double stddev = std::sqrt(2.0 * cfg.alpha * eta);
    for (Eigen::Index i = 0; i < state.v.size(); ++i) state.v[i] += stddev * noise.normal();
  }
  theta += state.v;
  if (!theta.allFinite()) throw NumericError("SGHMC step produced non-finite parameters");
  finish_step(state, cfg);
}

void adam_step(Vector& theta, SGHMCState& state, const Vector& grad, const SGHMCConfig& cfg) {
  if (state.phase != Phase::burn_in) throw ConfigError("adam_step called after burn-in");
  check_grad(theta, grad);

  const double t = static_cast<double>(state.step + 1);
  state.adam_m = cfg.adam_beta1 * state.adam_m + (1.0 - cfg.adam_beta1) * grad;
  state.adam_v = cfg.adam_beta2 * state.adam_v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  theta.array() += cfg.adam_lr * (state.adam_m.array() / c1) / ((state.adam_v.array() / c2).sqrt() + cfg.adam_eps);
  if (!theta.allFinite()) throw NumericError("Adam step produced non-finite parameters");
  finish_step(state, cfg);
}

void advance(Vector& theta, SGHMCState& state, const Vector& grad, const SGHMCConfig& cfg, long N) {
  if (state.phase == Phase::burn_in) {
    adam_step(theta, state, grad, cfg);
  } else {
    sghmc_step(theta, state, grad, cfg, lr_schedule(cfg.gamma, state.d_seen, N));
  }
}

SampleStats sample_known_posterior(const LogDensity& logdensity, const KnownPosteriorRun& run,
                                   const SGHMCConfig& cfg) {
  if (run.steps < 1 || run.burn_in_steps < 0) throw ConfigError("known-posterior run needs steps >= 1");
  if (run.start.size() < 1) throw ConfigError("known-posterior run needs a start point");
  SGHMCConfig sampler = cfg;
  sampler.burn_in_iters = 0;
  sampler.validate();

  Vector theta = run.start;
  SGHMCState state = SGHMCState::fresh(theta.size(), sampler, Stream(cfg.seed).split(0x5A).key());
  Vector grad(theta.size());

  const Eigen::Index dim = theta.size();
  SampleStats stats;
  stats.mean = Vector::Zero(dim);
  Matrix m2 = Matrix::Zero(dim, dim);
  for (long s = 0; s < run.burn_in_steps + run.steps; ++s) {
    grad.setZero();
    logdensity(theta, grad);
    sghmc_step(theta, state, grad, sampler, run.eta);
    if (theta.norm() > 1e6) throw NumericError("sampler diverged at step " + std::to_string(s));
    if (s < run.burn_in_steps) continue;
    // Welford update of mean and scatter.
    ++stats.count;
    const Vector delta = theta - stats.mean;
    stats.mean += delta / static_cast<double>(stats.count);
    m2 += delta * (theta - stats.mean).transpose();
    if (run.observer) run.observer(theta);
  }
  stats.covariance = stats.count > 1 ? Matrix(m2 / static_cast<double>(stats.count - 1)) : Matrix(m2);
  return stats;
}

}  // namespace bgan
