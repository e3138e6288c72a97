#pragma once

// Self-verification suites behind `bgan check`: central finite differences
// against every posterior gradient, and SGHMC on closed-form targets.

#include <cstdint>
#include <string>
#include <vector>

namespace bgan {

struct CheckRow {
  std::string name;
  std::string measure;  // what max_error measures
  double max_error = 0.0;
  double tolerance = 0.0;
  double pass_fraction = 1.0;  // gradient rows: share of coordinates within tolerance
  bool pass = false;
};

struct CheckReport {
  std::vector<CheckRow> rows;

  bool all_pass() const;
  std::string table() const;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientRelTolerance = 1e-4;
inline constexpr double kGradientPassFraction = 0.99;
/// |fd - analytic| / max(|fd|, |analytic|, floor): coordinates whose true
/// derivative is below the floor are compared in absolute terms.
inline constexpr double kGradientRelFloor = 1e-6;

double gradient_rel_error(double fd, double analytic);

/// >= `instances` random small-network instances of each conditional and
/// marginal gradient, unsupervised and semi-supervised.
CheckReport gradient_check(std::uint64_t seed, int instances = 10);

inline constexpr long kSamplerSteps = 200000;
inline constexpr double kSamplerMeanTolerance = 0.05;
inline constexpr double kSamplerVarianceRelTolerance = 0.10;
inline constexpr double kSamplerAlpha = 0.1;
inline constexpr double kSamplerEta = 0.01;

/// Standard and correlated 2-D Gaussians, plus the alpha = 1, noise-off
/// reduction to plain gradient ascent (bit-exact).
CheckReport sampler_check(std::uint64_t seed, long steps = kSamplerSteps);

}  // namespace bgan
