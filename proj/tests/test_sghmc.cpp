#include <doctest.h>

#include <cmath>

#include "bgan/errors.hpp"
#include "bgan/sghmc.hpp"
#include "support.hpp"

using namespace bgan;
using bgan::test::Gen;

namespace {

SGHMCConfig sampler_cfg(double alpha, bool noise) {
  SGHMCConfig c;
  c.alpha = alpha;
  c.noise_enabled = noise;
  c.burn_in_iters = 0;
  return c;
}

double standard_normal_2d(const Vector& t, Vector& g) {
  g = -t;
  return -0.5 * t.squaredNorm();
}

}  // namespace

TEST_SUITE("sghmc") {

TEST_CASE("lr_schedule guard, arithmetic and cap") {
  CHECK(lr_schedule(0.5, 0, 100) == 0.5);
  CHECK(lr_schedule(2.0, 1000, 5000) == 0.002);
  CHECK(lr_schedule(3.0, 7000, 500) == 3.0 / 500);
  CHECK_THROWS_AS(lr_schedule(0.0, 1, 1), ConfigError);
}

TEST_CASE("lr_schedule is non-increasing and bounded below by gamma / N") {
  Gen g(1);
  for (int rep = 0; rep < 50; ++rep) {
    const double gamma = g.uniform(1e-4, 10);
    const long N = g.integer(1, 5000);
    double prev = lr_schedule(gamma, 0, N);
    for (long d = 1; d < 2 * N + 3; d += g.integer(1, 97)) {
      const double eta = lr_schedule(gamma, d, N);
      CHECK(eta <= prev);
      CHECK(eta >= gamma / static_cast<double>(N));
      prev = eta;
    }
  }
}

TEST_CASE("alpha = 1 without noise is gradient ascent") {
  Gen g(2);
  const SGHMCConfig c = sampler_cfg(1.0, false);
  for (int rep = 0; rep < 10; ++rep) {
    Vector theta = g.vector(7);
    SGHMCState s = SGHMCState::fresh(7, c, 5);
    s.v = g.vector(7);
    const Vector grad = g.vector(7);
    const double eta = g.uniform(1e-3, 1);
    const Vector expect = theta + eta * grad;
    sghmc_step(theta, s, grad, c, eta);
    CHECK(same_values(theta, expect));
    CHECK(same_values(s.v, Vector(eta * grad)));
  }
}

TEST_CASE("zero gradient and zero momentum without noise is a fixed point") {
  const SGHMCConfig c = sampler_cfg(0.3, false);
  Vector theta = Vector::LinSpaced(5, -1, 1);
  const Vector before = theta;
  SGHMCState s = SGHMCState::fresh(5, c, 1);
  sghmc_step(theta, s, Vector::Zero(5), c, 0.1);
  CHECK(same_values(theta, before));
}

TEST_CASE("noise-off momentum steps are heavy-ball ascent") {
  Gen g(3);
  const SGHMCConfig c = sampler_cfg(0.2, false);
  Vector theta = g.vector(4), ref = theta, v = Vector::Zero(4);
  SGHMCState s = SGHMCState::fresh(4, c, 9);
  for (int t = 0; t < 50; ++t) {
    const Vector grad = -2.0 * theta;
    sghmc_step(theta, s, grad, c, 0.05);
    v = 0.8 * v + 0.05 * (-2.0 * ref);
    ref = ref + v;
  }
  CHECK((theta - ref).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("injected noise has variance 2 alpha eta") {
  const SGHMCConfig c = sampler_cfg(0.05, true);
  const double eta = 0.02;
  const int dim = 4, draws = 100000;
  Vector sum = Vector::Zero(dim), sq = Vector::Zero(dim);
  SGHMCState s = SGHMCState::fresh(dim, c, 77);
  for (int i = 0; i < draws; ++i) {
    Vector theta = Vector::Zero(dim);
    s.v.setZero();
    sghmc_step(theta, s, Vector::Zero(dim), c, eta);
    sum += s.v;
    sq += s.v.cwiseAbs2();
  }
  for (int k = 0; k < dim; ++k) {
    const double mean = sum[k] / draws;
    const double var = sq[k] / draws - mean * mean;
    CHECK(std::abs(var / (2 * c.alpha * eta) - 1) < 0.02);
  }
}

TEST_CASE("sampler argument errors") {
  const SGHMCConfig c = sampler_cfg(0.1, true);
  Vector theta = Vector::Zero(2);
  SGHMCState s = SGHMCState::fresh(2, c, 0);
  CHECK_THROWS_AS(sghmc_step(theta, s, Vector::Zero(2), c, 0.0), ConfigError);
  Vector bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(sghmc_step(theta, s, bad, c, 0.1), NumericError);
  CHECK_THROWS_AS(sghmc_step(theta, s, Vector::Zero(3), c, 0.1), ShapeError);
}

TEST_CASE("Adam: zero gradient from a fresh state does not move") {
  SGHMCConfig c;
  c.burn_in_iters = 10;
  Vector theta = Vector::Constant(3, 0.25);
  SGHMCState s = SGHMCState::fresh(3, c, 0);
  adam_step(theta, s, Vector::Zero(3), c);
  CHECK(same_values(theta, Vector::Constant(3, 0.25)));
}

TEST_CASE("Adam: constant gradient steps approach adam_lr * sign(g)") {
  SGHMCConfig c;
  c.burn_in_iters = 100000;
  Vector g(3);
  g << 3.0, -0.02, 500.0;
  Vector theta = Vector::Zero(3);
  SGHMCState s = SGHMCState::fresh(3, c, 0);
  Vector before = theta;
  for (int t = 0; t < 5000; ++t) {
    before = theta;
    adam_step(theta, s, g, c);
  }
  const Vector step = theta - before;
  for (int k = 0; k < 3; ++k) CHECK(step[k] == doctest::Approx(c.adam_lr * (g[k] > 0 ? 1 : -1)).epsilon(1e-6));
}

TEST_CASE("Adam matches an independent reimplementation") {
  Gen gen(4);
  SGHMCConfig c;
  c.burn_in_iters = 1000;
  c.adam_lr = 0.01;
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 6;
    Vector theta = gen.vector(n);
    std::vector<double> th(theta.data(), theta.data() + n), m(n, 0.0), v(n, 0.0);
    SGHMCState s = SGHMCState::fresh(n, c, 0);
    for (int t = 1; t <= 20; ++t) {
      const Vector grad = gen.vector(n, 5.0);
      adam_step(theta, s, grad, c);
      for (int i = 0; i < n; ++i) {
        m[i] = 0.5 * m[i] + 0.5 * grad[i];
        v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
        const double mh = m[i] / (1 - std::pow(0.5, t));
        const double vh = v[i] / (1 - std::pow(0.999, t));
        th[i] += 0.01 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    for (int i = 0; i < n; ++i) CHECK(std::abs(theta[i] - th[i]) <= 1e-12);
  }
}

TEST_CASE("advance switches from Adam to SGHMC at burn_in_iters") {
  SGHMCConfig c;
  c.burn_in_iters = 3;
  Vector theta = Vector::Zero(2);
  SGHMCState s = SGHMCState::fresh(2, c, 1);
  for (int t = 0; t < 3; ++t) {
    CHECK(s.phase == Phase::burn_in);
    advance(theta, s, Vector::Ones(2), c, 100);
  }
  CHECK(s.phase == Phase::sghmc);
  CHECK_THROWS_AS(adam_step(theta, s, Vector::Ones(2), c), ConfigError);
}

TEST_CASE("identical seeds give identical trajectories") {
  const SGHMCConfig c = sampler_cfg(0.1, true);
  auto run = [&](std::uint64_t key) {
    Vector theta = Vector::Ones(3);
    SGHMCState s = SGHMCState::fresh(3, c, key);
    for (int t = 0; t < 100; ++t) sghmc_step(theta, s, Vector(-theta), c, 0.01);
    return theta;
  };
  CHECK(same_values(run(5), run(5)));
  CHECK_FALSE(same_values(run(5), run(6)));
}

TEST_CASE("standard 2-D Gaussian moments") {
  SGHMCConfig c = sampler_cfg(0.1, true);
  c.seed = 11;
  KnownPosteriorRun run;
  run.start = Vector::Zero(2);
  run.eta = 0.01;
  const SampleStats st = sample_known_posterior(standard_normal_2d, run, c);
  CHECK(st.count == 200000);
  CHECK(st.mean.cwiseAbs().maxCoeff() < 0.05);
  CHECK(std::abs(st.covariance(0, 0) - 1) < 0.1);
  CHECK(std::abs(st.covariance(1, 1) - 1) < 0.1);
}

TEST_CASE("bimodal mixture: both modes are visited") {
  SGHMCConfig c = sampler_cfg(0.1, true);
  c.seed = 3;
  KnownPosteriorRun run;
  run.start = Vector::Constant(1, 2.0);
  run.eta = 0.01;
  run.steps = 200000;
  int changes = 0;
  double last = 1.0;
  run.observer = [&](const Vector& t) {
    if (t[0] * last < 0) ++changes;
    if (t[0] != 0) last = t[0];
  };
  // 0.5 N(-2, 1) + 0.5 N(2, 1)
  auto logp = [](const Vector& t, Vector& g) {
    const double a = std::exp(-0.5 * (t[0] - 2) * (t[0] - 2)), b = std::exp(-0.5 * (t[0] + 2) * (t[0] + 2));
    g[0] = (-(t[0] - 2) * a - (t[0] + 2) * b) / (a + b);
    return std::log(a + b);
  };
  sample_known_posterior(logp, run, c);
  CHECK(changes >= 10);
}

TEST_CASE("noise off converges to the mode") {
  SGHMCConfig c = sampler_cfg(0.5, false);
  KnownPosteriorRun run;
  run.start = Vector::Constant(2, 4.0);
  run.eta = 0.05;
  run.steps = 1;
  run.burn_in_steps = 2000;
  auto logp = [](const Vector& t, Vector& g) {
    g = -(t.array() - 1.5).matrix();
    return 0.0;
  };
  const SampleStats st = sample_known_posterior(logp, run, c);
  CHECK((st.mean.array() - 1.5).abs().maxCoeff() < 1e-9);
}

TEST_CASE("divergence is a numeric error") {
  SGHMCConfig c = sampler_cfg(0.1, false);
  KnownPosteriorRun run;
  run.start = Vector::Ones(1);
  run.eta = 1.0;
  run.steps = 10000;
  auto explode = [](const Vector& t, Vector& g) {
    g = 10 * t;
    return 0.0;
  };
  CHECK_THROWS_AS(sample_known_posterior(explode, run, c), NumericError);
}

}  // TEST_SUITE
