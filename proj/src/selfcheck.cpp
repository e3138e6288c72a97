#include "bgan/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <Eigen/LU>

#include "bgan/posterior.hpp"
#include "bgan/random.hpp"
#include "bgan/sghmc.hpp"

namespace bgan {
namespace {

struct Instance {
  ParamVector gen;
  ParamVector disc;
  std::vector<ParamVector> gens;   // extra samples for marginal terms
  std::vector<ParamVector> discs;
  std::vector<Matrix> noise;
  Matrix x;
  LabeledBatch labeled;
  PriorSpec prior;
  PosteriorConfig cfg;
};

int pick(Stream& s, int lo, int hi) { return lo + static_cast<int>(s.below(static_cast<std::uint64_t>(hi - lo + 1))); }

Instance make_instance(Stream s, bool semi) {
  Instance in;
  const int data_dim = pick(s, 3, 5);
  const int z_dim = pick(s, 2, 4);
  const int K = 3;
  NetworkSpec gen_spec{{z_dim, pick(s, 3, 6), data_dim}, Activation::relu, OutputHead::linear};
  NetworkSpec disc_spec{{data_dim, pick(s, 3, 6), semi ? K + 1 : 1}, Activation::relu,
                        semi ? OutputHead::softmax : OutputHead::sigmoid};

  in.cfg.mode = semi ? PosteriorMode::semi_supervised : PosteriorMode::unsupervised;
  in.cfg.K = semi ? K : 0;
  in.cfg.n_g = 4;
  in.cfg.n_d = 5;
  in.cfg.N = 40;
  in.cfg.N_s = semi ? 3 : 0;
  in.cfg.J_g = 2;
  in.cfg.J_d = 2;
  in.prior = {0.5 + 1.5 * s.uniform(), 0.5 + 1.5 * s.uniform()};

  in.gen = init_params(gen_spec, InitSpec::prior(0.7), s.next_u64());
  in.disc = init_params(disc_spec, InitSpec::prior(0.7), s.next_u64());
  for (int k = 0; k < 2; ++k) {
    in.gens.push_back(init_params(gen_spec, InitSpec::prior(0.7), s.next_u64()));
    in.discs.push_back(init_params(disc_spec, InitSpec::prior(0.7), s.next_u64()));
  }
  for (int i = 0; i < 2; ++i) in.noise.push_back(s.normal_matrix(in.cfg.n_g, z_dim));
  in.x = s.normal_matrix(in.cfg.n_d, data_dim);
  if (semi) {
    in.labeled.x = s.normal_matrix(3, data_dim);
    for (int i = 0; i < 3; ++i) in.labeled.y.push_back(1 + i % K);
  }
  return in;
}

using Objective = std::function<double(const ParamVector&)>;

struct Probe {
  double max_error = 0.0;
  long probed = 0;
  long within = 0;
};

void probe(const ParamVector& at, const Objective& f, const Vector& analytic, Probe& out) {
  ParamVector plus = at;
  ParamVector minus = at;
  for (Eigen::Index p = 0; p < at.size(); ++p) {
    plus.values[p] = at.values[p] + kFiniteDifferenceStep;
    minus.values[p] = at.values[p] - kFiniteDifferenceStep;
    const double fd = (f(plus) - f(minus)) / (2.0 * kFiniteDifferenceStep);
    plus.values[p] = at.values[p];
    minus.values[p] = at.values[p];
    const double err = gradient_rel_error(fd, analytic[p]);
    out.max_error = std::max(out.max_error, err);
    ++out.probed;
    if (err <= kGradientRelTolerance) ++out.within;
  }
}

struct GradientKind {
  const char* name;
  bool semi;
  std::function<void(const Instance&, Probe&)> run;
};

std::vector<GradientKind> gradient_kinds() {
  std::vector<GradientKind> kinds;
  for (bool semi : {false, true}) {
    kinds.push_back({semi ? "conditional generator (semi)" : "conditional generator (unsup)", semi,
                     [](const Instance& in, Probe& out) {
                       const Matrix& z = in.noise[0];
                       const Objective f = [&](const ParamVector& g) {
                         return in.cfg.mode == PosteriorMode::unsupervised
                                    ? log_cond_gen_unsup(g, z, in.disc, in.prior, in.cfg)
                                    : log_cond_gen_semi(g, z, in.disc, in.prior, in.cfg);
                       };
                       probe(in.gen, f, log_cond_gen_grad(in.gen, z, in.disc, in.prior, in.cfg).grad, out);
                     }});
    kinds.push_back({semi ? "conditional discriminator (semi)" : "conditional discriminator (unsup)", semi,
                     [](const Instance& in, Probe& out) {
                       const Matrix& z = in.noise[0];
                       const Objective f = [&](const ParamVector& d) {
                         return in.cfg.mode == PosteriorMode::unsupervised
                                    ? log_cond_disc_unsup(d, z, in.x, in.gen, in.prior, in.cfg)
                                    : log_cond_disc_semi(d, z, in.x, in.labeled, in.gen, in.prior, in.cfg);
                       };
                       probe(in.disc, f, log_cond_disc_grad(in.disc, z, in.x, in.labeled, in.gen, in.prior, in.cfg).grad,
                             out);
                     }});
    kinds.push_back({semi ? "marginal generator (semi)" : "marginal generator (unsup)", semi,
                     [](const Instance& in, Probe& out) {
                       const Objective f = [&](const ParamVector& g) {
                         return marginal_grad_gen(g, in.noise, in.discs, in.prior, in.cfg).value;
                       };
                       probe(in.gen, f, marginal_grad_gen(in.gen, in.noise, in.discs, in.prior, in.cfg).grad, out);
                     }});
    kinds.push_back({semi ? "marginal discriminator (semi)" : "marginal discriminator (unsup)", semi,
                     [](const Instance& in, Probe& out) {
                       const Objective f = [&](const ParamVector& d) {
                         return marginal_grad_disc(d, in.noise, in.x, in.labeled, in.gens, in.prior, in.cfg).value;
                       };
                       probe(in.disc, f,
                             marginal_grad_disc(in.disc, in.noise, in.x, in.labeled, in.gens, in.prior, in.cfg).grad,
                             out);
                     }});
  }
  return kinds;
}

CheckRow moment_row(const std::string& name, const std::string& measure, double err, double tol) {
  CheckRow row;
  row.name = name;
  row.measure = measure;
  row.max_error = err;
  row.tolerance = tol;
  row.pass = err <= tol;
  return row;
}

void gaussian_rows(CheckReport& report, const std::string& name, const Matrix& cov, std::uint64_t seed, long steps) {
  const Matrix precision = cov.inverse();
  const LogDensity target = [&](const Vector& theta, Vector& grad) {
    grad = -precision * theta;
    return -0.5 * theta.dot(precision * theta);
  };
  SGHMCConfig cfg;
  cfg.alpha = kSamplerAlpha;
  cfg.seed = seed;
  KnownPosteriorRun run;
  run.steps = steps;
  run.eta = kSamplerEta;
  run.start = Vector::Constant(cov.rows(), 3.0);
  const SampleStats stats = sample_known_posterior(target, run, cfg);

  double var_err = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    var_err = std::max(var_err, std::abs(stats.covariance(i, i) / cov(i, i) - 1.0));
  }
  report.rows.push_back(moment_row(name + " mean", "max |mean - 0|", stats.mean.cwiseAbs().maxCoeff(), kSamplerMeanTolerance));
  report.rows.push_back(moment_row(name + " variance", "max relative variance error", var_err, kSamplerVarianceRelTolerance));
}

}  // namespace

bool CheckReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

std::string CheckReport::table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %-30s %12s %10s %8s %s\n", "check", "measure", "max error", "tolerance",
                "within", "result");
  out += line;
  for (const CheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-36s %-30s %12.3e %10.1e %7.2f%% %s\n", r.name.c_str(), r.measure.c_str(),
                  r.max_error, r.tolerance, 100.0 * r.pass_fraction, r.pass ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

double gradient_rel_error(double fd, double analytic) {
  return std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), kGradientRelFloor});
}

CheckReport gradient_check(std::uint64_t seed, int instances) {
  CheckReport report;
  const Stream root = Stream(seed).split(0x6AD);
  const std::vector<GradientKind> kinds = gradient_kinds();
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    Probe probe_total;
    for (int i = 0; i < instances; ++i) {
      const Instance in = make_instance(root.split(k).split(static_cast<std::uint64_t>(i)), kinds[k].semi);
      kinds[k].run(in, probe_total);
    }
    CheckRow row;
    row.name = kinds[k].name;
    row.measure = "relative error (" + std::to_string(instances) + " instances)";
    row.max_error = probe_total.max_error;
    row.tolerance = kGradientRelTolerance;
    row.pass_fraction = probe_total.probed ? static_cast<double>(probe_total.within) / probe_total.probed : 0.0;
    row.pass = probe_total.probed > 0 && row.pass_fraction >= kGradientPassFraction;
    report.rows.push_back(row);
  }
  return report;
}

CheckReport sampler_check(std::uint64_t seed, long steps) {
  CheckReport report;
  gaussian_rows(report, "standard 2-D Gaussian", Matrix::Identity(2, 2), seed, steps);
  Matrix cov(2, 2);
  cov << 1.0, 0.5, 0.5, 2.0;
  gaussian_rows(report, "correlated 2-D Gaussian", cov, seed + 1, steps);

  // alpha = 1 with the noise off must be gradient ascent, bit for bit.
  Vector centre(3);
  centre << 0.3, -1.2, 2.0;
  auto grad_at = [&](const Vector& theta) -> Vector { return -(theta - centre).array().tanh().matrix(); };
  SGHMCConfig cfg;
  cfg.alpha = 1.0;
  cfg.noise_enabled = false;
  cfg.burn_in_iters = 0;
  const double eta = 0.1;
  Vector theta = Vector::Zero(3);
  Vector plain = Vector::Zero(3);
  SGHMCState state = SGHMCState::fresh(3, cfg, seed);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    sghmc_step(theta, state, grad_at(theta), cfg, eta);
    plain += eta * grad_at(plain);
    for (Eigen::Index i = 0; i < 3; ++i) {
      if (theta[i] != plain[i]) worst = std::max(worst, std::abs(theta[i] - plain[i]) + 1e-300);
    }
  }
  report.rows.push_back(moment_row("alpha=1, noise off vs ascent", "max |difference| (bitwise)", worst, 0.0));
  return report;
}

}  // namespace bgan
