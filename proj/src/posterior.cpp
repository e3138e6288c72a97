#include "bgan/posterior.hpp"

#include <cmath>
#include <numbers>

#include "bgan/errors.hpp"

namespace bgan {
namespace {

bool unsupervised(const PosteriorConfig& cfg) { return cfg.mode == PosteriorMode::unsupervised; }

void check_pair(const ParamVector& gen, const ParamVector& disc, const PosteriorConfig& cfg) {
  if (gen.spec.output_head != OutputHead::linear) {
    throw ConfigError("generator must have a linear output head, got " + gen.spec.describe());
  }
  if (gen.spec.output_size() != disc.spec.input_size()) {
    throw ShapeError("generator output " + std::to_string(gen.spec.output_size()) +
                     " != discriminator input " + std::to_string(disc.spec.input_size()));
  }
  const int expected = unsupervised(cfg) ? 1 : cfg.K + 1;
  if (disc.spec.output_size() != expected) {
    throw ShapeError("discriminator has " + std::to_string(disc.spec.output_size()) +
                     " outputs, posterior mode needs " + std::to_string(expected));
  }
}

void check_rows(const Matrix& m, int rows, const char* what) {
  if (m.rows() != rows) {
    throw ShapeError(std::string(what) + " has " + std::to_string(m.rows()) + " rows, expected " +
                     std::to_string(rows));
  }
}

void check_labels(const LabeledBatch& labeled, const PosteriorConfig& cfg) {
  if (static_cast<Eigen::Index>(labeled.y.size()) != labeled.x.rows()) {
    throw ShapeError("labeled set has " + std::to_string(labeled.x.rows()) + " rows but " +
                     std::to_string(labeled.y.size()) + " labels");
  }
  for (int y : labeled.y) {
    if (y < 1 || y > cfg.K) {
      throw DataError("label " + std::to_string(y) + " outside 1.." + std::to_string(cfg.K));
    }
  }
}

LossSpec gen_loss(const PosteriorConfig& cfg) {
  return LossSpec::of(unsupervised(cfg) ? LossKind::log_prob_real : LossKind::log_not_fake, cfg.gen_scale());
}

LossSpec fake_loss(const PosteriorConfig& cfg) {
  return LossSpec::of(unsupervised(cfg) ? LossKind::log_prob_fake : LossKind::log_fake, cfg.gen_scale());
}

LossSpec real_loss(const PosteriorConfig& cfg, double multiplicity) {
  return LossSpec::of(unsupervised(cfg) ? LossKind::log_prob_real : LossKind::log_not_fake,
                      cfg.real_scale() * multiplicity);
}

Matrix stack(std::span<const Matrix> sets, int rows_each, const char* what) {
  if (sets.empty()) throw ConfigError(std::string("no ") + what);
  const Eigen::Index cols = sets.front().cols();
  Matrix out(static_cast<Eigen::Index>(sets.size()) * rows_each, cols);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    check_rows(sets[i], rows_each, what);
    if (sets[i].cols() != cols) throw ShapeError(std::string(what) + " have differing widths");
    out.middleRows(static_cast<Eigen::Index>(i) * rows_each, rows_each) = sets[i];
  }
  return out;
}

// Likelihood of the generator side for stacked noise rows, summed over the
// given discriminators, plus `prior_count` copies of the prior.
ValueGrad gen_terms(const ParamVector& gen, const Matrix& z, std::span<const ParamVector> discs,
                    const PriorSpec& prior, const PosteriorConfig& cfg, double prior_count, bool want_grad) {
  if (discs.empty()) throw ConfigError("no discriminator samples");
  const ForwardTrace gen_trace = forward_trace(gen, z);
  const Matrix& fake = gen_trace.logits();
  const LossSpec loss = gen_loss(cfg);

  ValueGrad out;
  Matrix d_fake = Matrix::Zero(fake.rows(), fake.cols());
  for (const ParamVector& disc : discs) {
    check_pair(gen, disc, cfg);
    const ForwardTrace disc_trace = forward_trace(disc, fake);
    Matrix d_logits;
    out.value += evaluate_loss(loss, disc_trace.logits(), want_grad ? &d_logits : nullptr);
    if (want_grad) {
      Matrix dx;
      backward(disc, disc_trace, d_logits, nullptr, &dx);
      d_fake += dx;
    }
  }
  out.value += prior_count * log_prior(gen, prior.sigma_g);
  if (want_grad) {
    out.grad = Vector::Zero(gen.size());
    backward(gen, gen_trace, d_fake, &out.grad, nullptr);
    out.grad += prior_count * log_prior_grad(gen, prior.sigma_g);
    if (!out.grad.allFinite()) throw NumericError("non-finite generator gradient");
  }
  return out;
}

// Discriminator side: fake rows from every generator on the stacked noise,
// real and labeled terms weighted by `multiplicity` (the number of (i, k)
// terms they stand for).
ValueGrad disc_terms(const ParamVector& disc, const Matrix& z, const Matrix& x, const LabeledBatch& labeled,
                     std::span<const ParamVector> gens, const PriorSpec& prior, const PosteriorConfig& cfg,
                     double multiplicity, bool want_grad) {
  if (gens.empty()) throw ConfigError("no generator samples");
  if (x.cols() != disc.spec.input_size()) throw ShapeError("real batch width does not match discriminator input");

  Matrix fake(static_cast<Eigen::Index>(gens.size()) * z.rows(), disc.spec.input_size());
  for (std::size_t k = 0; k < gens.size(); ++k) {
    check_pair(gens[k], disc, cfg);
    fake.middleRows(static_cast<Eigen::Index>(k) * z.rows(), z.rows()) = forward(gens[k], z);
  }

  ValueGrad out;
  if (want_grad) out.grad = Vector::Zero(disc.size());
  auto add = [&](const Matrix& batch, const LossSpec& loss) {
    if (want_grad) {
      ValueGrad term = loss_grad(disc, batch, loss);
      out.value += term.value;
      out.grad += term.grad;
    } else {
      out.value += evaluate_loss(loss, forward_trace(disc, batch).logits(), nullptr);
    }
  };

  add(x, real_loss(cfg, multiplicity));
  add(fake, fake_loss(cfg));
  if (!unsupervised(cfg) && labeled.size() > 0) {
    check_labels(labeled, cfg);
    if (labeled.x.cols() != disc.spec.input_size()) throw ShapeError("labeled batch width does not match discriminator input");
    add(labeled.x, LossSpec::classes(labeled.y, multiplicity));
  }
  out.value += multiplicity * log_prior(disc, prior.sigma_d);
  if (want_grad) {
    out.grad += multiplicity * log_prior_grad(disc, prior.sigma_d);
    if (!out.grad.allFinite()) throw NumericError("non-finite discriminator gradient");
  }
  return out;
}

void require_mode(const PosteriorConfig& cfg, PosteriorMode mode) {
  cfg.validate();
  if (cfg.mode != mode) {
    throw ConfigError(mode == PosteriorMode::unsupervised ? "unsupervised conditional needs unsupervised mode"
                                                          : "semi-supervised conditional needs semi-supervised mode");
  }
}

}  // namespace

void PriorSpec::validate() const {
  if (!(sigma_g > 0.0) || !(sigma_d > 0.0)) throw ConfigError("prior standard deviations must be > 0");
}

void PosteriorConfig::validate() const {
  // K = 1 (one real class against the fake class) is the softmax form of the
  // unsupervised model and is accepted.
  if (mode == PosteriorMode::semi_supervised && K < 1) throw ConfigError("semi-supervised mode needs K >= 1 classes");
  if (n_g < 1 || n_d < 1) throw ConfigError("batch sizes must be >= 1");
  if (J_g < 1 || J_d < 1) throw ConfigError("J_g and J_d must be >= 1");
  if (N < n_d) throw ConfigError("N (" + std::to_string(N) + ") must be >= n_d (" + std::to_string(n_d) + ")");
  if (N_s < 0) throw ConfigError("N_s must be >= 0");
}

double log_prior(const ParamVector& params, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("prior sigma must be > 0");
  const double var = sigma * sigma;
  const double p = static_cast<double>(params.size());
  return -params.values.squaredNorm() / (2.0 * var) - 0.5 * p * std::log(2.0 * std::numbers::pi * var);
}

Vector log_prior_grad(const ParamVector& params, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("prior sigma must be > 0");
  return -params.values / (sigma * sigma);
}

double log_cond_gen_unsup(const ParamVector& gen, const Matrix& z, const ParamVector& disc,
                          const PriorSpec& prior, const PosteriorConfig& cfg) {
  require_mode(cfg, PosteriorMode::unsupervised);
  check_rows(z, cfg.n_g, "noise batch");
  return gen_terms(gen, z, {&disc, 1}, prior, cfg, 1.0, false).value;
}

double log_cond_disc_unsup(const ParamVector& disc, const Matrix& z, const Matrix& x, const ParamVector& gen,
                           const PriorSpec& prior, const PosteriorConfig& cfg) {
  require_mode(cfg, PosteriorMode::unsupervised);
  check_rows(z, cfg.n_g, "noise batch");
  check_rows(x, cfg.n_d, "real batch");
  return disc_terms(disc, z, x, {}, {&gen, 1}, prior, cfg, 1.0, false).value;
}

double log_cond_gen_semi(const ParamVector& gen, const Matrix& z, const ParamVector& disc,
                         const PriorSpec& prior, const PosteriorConfig& cfg) {
  require_mode(cfg, PosteriorMode::semi_supervised);
  check_rows(z, cfg.n_g, "noise batch");
  return gen_terms(gen, z, {&disc, 1}, prior, cfg, 1.0, false).value;
}

double log_cond_disc_semi(const ParamVector& disc, const Matrix& z, const Matrix& x, const LabeledBatch& labeled,
                          const ParamVector& gen, const PriorSpec& prior, const PosteriorConfig& cfg) {
  require_mode(cfg, PosteriorMode::semi_supervised);
  check_rows(z, cfg.n_g, "noise batch");
  check_rows(x, cfg.n_d, "real batch");
  return disc_terms(disc, z, x, labeled, {&gen, 1}, prior, cfg, 1.0, false).value;
}

ValueGrad log_cond_gen_grad(const ParamVector& gen, const Matrix& z, const ParamVector& disc,
                            const PriorSpec& prior, const PosteriorConfig& cfg) {
  cfg.validate();
  check_rows(z, cfg.n_g, "noise batch");
  return gen_terms(gen, z, {&disc, 1}, prior, cfg, 1.0, true);
}

ValueGrad log_cond_disc_grad(const ParamVector& disc, const Matrix& z, const Matrix& x, const LabeledBatch& labeled,
                             const ParamVector& gen, const PriorSpec& prior, const PosteriorConfig& cfg) {
  cfg.validate();
  check_rows(z, cfg.n_g, "noise batch");
  check_rows(x, cfg.n_d, "real batch");
  return disc_terms(disc, z, x, labeled, {&gen, 1}, prior, cfg, 1.0, true);
}

ValueGrad marginal_grad_gen(const ParamVector& gen, std::span<const Matrix> noise_sets,
                            std::span<const ParamVector> disc_samples, const PriorSpec& prior,
                            const PosteriorConfig& cfg) {
  cfg.validate();
  prior.validate();
  const Matrix z = stack(noise_sets, cfg.n_g, "noise sets");
  const double terms = static_cast<double>(noise_sets.size() * disc_samples.size());
  return gen_terms(gen, z, disc_samples, prior, cfg, terms, true);
}

ValueGrad marginal_grad_disc(const ParamVector& disc, std::span<const Matrix> noise_sets, const Matrix& x,
                             const LabeledBatch& labeled, std::span<const ParamVector> gen_samples,
                             const PriorSpec& prior, const PosteriorConfig& cfg) {
  cfg.validate();
  prior.validate();
  check_rows(x, cfg.n_d, "real batch");
  const Matrix z = stack(noise_sets, cfg.n_g, "noise sets");
  const double terms = static_cast<double>(noise_sets.size() * gen_samples.size());
  return disc_terms(disc, z, x, labeled, gen_samples, prior, cfg, terms, true);
}

}  // namespace bgan
