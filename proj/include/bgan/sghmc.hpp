#pragma once

// Stochastic gradient HMC with friction and injected noise, an Adam burn-in
// phase, and the gamma/d step-size schedule.
//
// One SGHMC step, ascending log p:
//   v     <- (1 - alpha) v + eta * grad + n,   n ~ N(0, 2 alpha eta I)
//   theta <- theta + v
// The momentum is refreshed before the position moves. With the noise off
// the same step is heavy-ball momentum ascent, and with alpha = 1 it is
// plain gradient ascent at rate eta.

#include <cstdint>
#include <functional>

#include "bgan/netcore.hpp"
#include "bgan/random.hpp"

namespace bgan {

struct SGHMCConfig {
  double alpha = 0.5;         // friction, (0, 1]
  double gamma = 1.0;         // eta = gamma / d_seen
  long burn_in_iters = 1000;  // Adam steps before switching to SGHMC
  double adam_lr = 1e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool noise_enabled = true;  // off: MAP / momentum ascent
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Phase { burn_in, sghmc };

struct SGHMCState {
  Vector v;
  Vector adam_m;
  Vector adam_v;
  long step = 0;
  long d_seen = 0;
  Phase phase = Phase::burn_in;
  std::uint64_t noise_key = 0;  // key of this chain's injected-noise stream

  static SGHMCState fresh(Eigen::Index size, const SGHMCConfig& cfg, std::uint64_t noise_key);
};

/// Exact (bitwise-value) equality of every field.
bool operator==(const SGHMCState& a, const SGHMCState& b);

/// gamma / max(min(d_seen, N), 1).
double lr_schedule(double gamma, long d_seen, long N);

/// Injected-noise stream for `state` at its current step.
Stream step_noise_stream(const SGHMCState& state);

/// One SGHMC step in place. Requires phase == sghmc.
void sghmc_step(Vector& theta, SGHMCState& state, const Vector& grad, const SGHMCConfig& cfg, double eta);

/// One bias-corrected Adam ascent step in place. Requires phase == burn_in.
void adam_step(Vector& theta, SGHMCState& state, const Vector& grad, const SGHMCConfig& cfg);

/// Adam while step < burn_in_iters, SGHMC with eta = lr_schedule(...) after.
void advance(Vector& theta, SGHMCState& state, const Vector& grad, const SGHMCConfig& cfg, long N);

/// Value and gradient of a target log density.
using LogDensity = std::function<double(const Vector& theta, Vector& grad)>;

struct SampleStats {
  Vector mean;
  Matrix covariance;
  long count = 0;
};

struct KnownPosteriorRun {
  long steps = 200000;        // recorded (post burn-in) steps
  long burn_in_steps = 1000;  // discarded SGHMC steps
  double eta = 0.01;
  Vector start;
  /// Called with every recorded sample.
  std::function<void(const Vector&)> observer;
};

/// Runs SGHMC at a fixed step size on a closed-form target and returns the
/// empirical moments of the recorded trajectory. Throws NumericError if the
/// trajectory leaves the ball of radius 1e6.
SampleStats sample_known_posterior(const LogDensity& logdensity, const KnownPosteriorRun& run,
                                   const SGHMCConfig& cfg);

}  // namespace bgan
