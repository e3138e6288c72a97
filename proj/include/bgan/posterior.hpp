#pragma once

// Log conditional posteriors of the Bayesian GAN and their gradients.
//
// Unsupervised (sigmoid discriminator, one logit):
//   log p(theta_g | z, theta_d)    = (N/n_g) sum_i log D(G(z_i))              + log p(theta_g)
//   log p(theta_d | z, X, theta_g) = (N/n_d) sum_i log D(x_i)
//                                  + (N/n_g) sum_i log(1 - D(G(z_i)))        + log p(theta_d)
// Semi-supervised (softmax discriminator over K+1 classes, class 0 = generated):
//   log p(theta_g | z, theta_d)    = (N/n_g) sum_i log(1 - p_0(G(z_i)))       + log p(theta_g)
//   log p(theta_d | ...)           = (N/n_d) sum_i log(1 - p_0(x_i))
//                                  + (N/n_g) sum_i log p_0(G(z_i))
//                                  + sum_{labeled} log p_{y_s}(x_s)          + log p(theta_d)
// The labeled term is not rescaled: every labeled point is used in every
// evaluation. Normalizing constants of the conditionals are dropped.

#include <span>
#include <vector>

#include "bgan/netcore.hpp"

namespace bgan {

struct PriorSpec {
  double sigma_g = 1.0;
  double sigma_d = 1.0;

  void validate() const;
};

enum class PosteriorMode { unsupervised, semi_supervised };

struct PosteriorConfig {
  PosteriorMode mode = PosteriorMode::unsupervised;
  int K = 0;          // classes, semi-supervised only
  int n_g = 64;       // generator minibatch (rows per noise set)
  int n_d = 64;       // real-data minibatch
  long N = 0;         // real (unlabeled) datapoints in the training set
  long N_s = 0;       // labeled datapoints
  int J_g = 10;       // simple Monte Carlo noise sets on the generator side
  int J_d = 1;        // ... on the discriminator side

  void validate() const;
  double gen_scale() const { return static_cast<double>(N) / n_g; }
  double real_scale() const { return static_cast<double>(N) / n_d; }
};

/// Labeled points with classes in 1..K.
struct LabeledBatch {
  Matrix x;
  std::vector<int> y;

  Eigen::Index size() const { return x.rows(); }
};

/// -||theta||^2 / (2 sigma^2) - (P/2) log(2 pi sigma^2)
double log_prior(const ParamVector& params, double sigma);
/// -theta / sigma^2
Vector log_prior_grad(const ParamVector& params, double sigma);

double log_cond_gen_unsup(const ParamVector& gen, const Matrix& z, const ParamVector& disc,
                          const PriorSpec& prior, const PosteriorConfig& cfg);
double log_cond_disc_unsup(const ParamVector& disc, const Matrix& z, const Matrix& x,
                           const ParamVector& gen, const PriorSpec& prior, const PosteriorConfig& cfg);
double log_cond_gen_semi(const ParamVector& gen, const Matrix& z, const ParamVector& disc,
                         const PriorSpec& prior, const PosteriorConfig& cfg);
double log_cond_disc_semi(const ParamVector& disc, const Matrix& z, const Matrix& x,
                          const LabeledBatch& labeled, const ParamVector& gen,
                          const PriorSpec& prior, const PosteriorConfig& cfg);

/// Mode-dispatched conditional with its gradient w.r.t. theta_g.
ValueGrad log_cond_gen_grad(const ParamVector& gen, const Matrix& z, const ParamVector& disc,
                            const PriorSpec& prior, const PosteriorConfig& cfg);
/// Mode-dispatched conditional with its gradient w.r.t. theta_d. `labeled` is
/// ignored in unsupervised mode.
ValueGrad log_cond_disc_grad(const ParamVector& disc, const Matrix& z, const Matrix& x,
                             const LabeledBatch& labeled, const ParamVector& gen,
                             const PriorSpec& prior, const PosteriorConfig& cfg);

/// Sum over noise sets i and discriminator samples k of
/// log p(theta_g | z_i, theta_d^k), with its gradient. The prior enters once
/// per (i, k) term.
ValueGrad marginal_grad_gen(const ParamVector& gen, std::span<const Matrix> noise_sets,
                            std::span<const ParamVector> disc_samples, const PriorSpec& prior,
                            const PosteriorConfig& cfg);

/// Sum over noise sets i and generator samples k of
/// log p(theta_d | z_i, X, D_s, theta_g^k), with its gradient.
ValueGrad marginal_grad_disc(const ParamVector& disc, std::span<const Matrix> noise_sets,
                             const Matrix& x, const LabeledBatch& labeled,
                             std::span<const ParamVector> gen_samples, const PriorSpec& prior,
                             const PosteriorConfig& cfg);

}  // namespace bgan
