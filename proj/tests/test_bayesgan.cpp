#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "bgan/bayesgan.hpp"
#include "bgan/errors.hpp"
#include "support.hpp"

using namespace bgan;
using bgan::test::Gen;

namespace {

TrainConfig tiny_config(PosteriorMode mode = PosteriorMode::unsupervised) {
  TrainConfig c;
  c.gen_spec = NetworkSpec{{2, 5, 3}};
  c.posterior.mode = mode;
  if (mode == PosteriorMode::unsupervised) {
    c.disc_spec = NetworkSpec{{3, 4, 1}, Activation::relu, OutputHead::sigmoid};
  } else {
    c.posterior.K = 2;
    c.disc_spec = NetworkSpec{{3, 4, 3}, Activation::relu, OutputHead::softmax};
  }
  c.posterior.n_g = 4;
  c.posterior.n_d = 4;
  c.posterior.N = 20;
  c.posterior.J_g = 2;
  c.posterior.J_d = 1;
  c.M = 2;
  c.sghmc.gamma = 0.05;
  c.sghmc.alpha = 0.1;
  c.sghmc.burn_in_iters = 2;
  c.total_iters = 6;
  c.collect_every = 2;
  c.seed = 42;
  return c;
}

TrainData tiny_data(const TrainConfig& c, std::uint64_t seed) {
  Gen g(seed);
  TrainData d;
  d.x = g.matrix(c.posterior.N, c.disc_spec.input_size());
  if (c.posterior.mode == PosteriorMode::semi_supervised) {
    d.labeled.x = g.matrix(3, c.disc_spec.input_size());
    d.labeled.y = {1, 2, 1};
  }
  return d;
}

}  // namespace

TEST_SUITE("bayesgan") {

TEST_CASE("map reduction and validation") {
  const TrainConfig m = as_map(tiny_config());
  CHECK(m.posterior.J_g == 1);
  CHECK(m.posterior.J_d == 1);
  CHECK(m.M == 1);
  CHECK_FALSE(m.sghmc.noise_enabled);
  CHECK_NOTHROW(m.validate());
  TrainConfig bad = m;
  bad.posterior.J_g = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  TrainConfig mism = tiny_config();
  mism.gen_spec = NetworkSpec{{2, 4}};
  CHECK_THROWS_AS(mism.validate(), ConfigError);
}

TEST_CASE("chain layout: J*M chains, index m*J + j") {
  const TrainConfig c = tiny_config();
  const SampleSet s = init_sample_set(c);
  CHECK(s.gen.size() == 4);
  CHECK(s.disc.size() == 2);
  for (std::size_t a = 0; a < s.gen.size(); ++a)
    for (std::size_t b = a + 1; b < s.gen.size(); ++b) CHECK_FALSE(s.gen[a].params == s.gen[b].params);
}

TEST_CASE("chain count does not change a chain's initial draw or noise stream") {
  TrainConfig a = tiny_config(), b = tiny_config();
  b.posterior.J_g = 5;
  b.M = 3;
  const SampleSet sa = init_sample_set(a), sb = init_sample_set(b);
  for (int m = 0; m < a.M; ++m)
    for (int j = 0; j < a.posterior.J_g; ++j) {
      const Chain& ca = sa.gen[static_cast<std::size_t>(m * a.posterior.J_g + j)];
      const Chain& cb = sb.gen[static_cast<std::size_t>(m * b.posterior.J_g + j)];
      CHECK(ca.params == cb.params);
      CHECK(ca.state.noise_key == cb.state.noise_key);
    }
  const auto na = draw_noise_sets(a, 3, 0, 1, 2), nb = draw_noise_sets(b, 3, 0, 1, 5);
  CHECK(same_values(na[0], nb[0]));
  CHECK(same_values(na[1], nb[1]));
}

TEST_CASE("epoch accounting: each point once per epoch") {
  SampleSet s;
  std::vector<Eigen::Index> seen;
  for (int b = 0; b < 20; ++b) {
    const auto rows = next_minibatch(s, 10, 3, 9);
    seen.insert(seen.end(), rows.begin(), rows.end());
  }
  CHECK(s.d_seen == 10);
  for (std::size_t e = 0; e + 10 <= seen.size(); e += 10) {
    std::vector<Eigen::Index> epoch(seen.begin() + static_cast<long>(e), seen.begin() + static_cast<long>(e + 10));
    std::sort(epoch.begin(), epoch.end());
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(epoch[static_cast<std::size_t>(i)] == i);
  }
  CHECK_THROWS_AS(next_minibatch(s, 3, 4, 0), ConfigError);
}

TEST_CASE("two generator chains with different noise evolve apart") {
  TrainConfig c = tiny_config();
  c.M = 1;
  c.sghmc.noise_enabled = false;
  c.sghmc.burn_in_iters = 0;
  SampleSet s = init_sample_set(c);
  s.gen[1].params = s.gen[0].params;
  run_iteration(s, tiny_data(c, 1), c);
  CHECK_FALSE(s.gen[0].params == s.gen[1].params);
}

TEST_CASE("map mode with alpha 1 is one sequential gradient ascent step") {
  TrainConfig c = as_map(tiny_config());
  c.sghmc.alpha = 1.0;
  c.sghmc.burn_in_iters = 0;
  c.sghmc.gamma = 0.01;
  const TrainData data = tiny_data(c, 2);
  SampleSet s = init_sample_set(c);
  const ParamVector g0 = s.gen[0].params, d0 = s.disc[0].params;
  run_iteration(s, data, c);

  const auto zg = draw_noise_sets(c, 0, 0, 0, 1);
  const std::vector<ParamVector> discs{d0};
  ParamVector g1 = g0;
  g1.values += 0.01 * marginal_grad_gen(g0, zg, discs, c.prior, c.posterior).grad;
  CHECK(s.gen[0].params == g1);

  const auto zd = draw_noise_sets(c, 0, 1, 0, 1);
  SampleSet cursor;
  const auto rows = next_minibatch(cursor, c.posterior.N, c.posterior.n_d, c.seed);
  Matrix x(c.posterior.n_d, data.x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
  const std::vector<ParamVector> gens{g1};
  ParamVector d1 = d0;
  d1.values += (0.01 / c.posterior.n_d) * marginal_grad_disc(d0, zd, x, {}, gens, c.prior, c.posterior).grad;
  CHECK(s.disc[0].params == d1);
}

TEST_CASE("one Bayesian iteration equals a scripted replay") {
  for (const PosteriorMode mode : {PosteriorMode::unsupervised, PosteriorMode::semi_supervised}) {
    TrainConfig c = tiny_config(mode);
    c.sghmc.burn_in_iters = 1;
    const TrainData data = tiny_data(c, 3);
    SampleSet s = init_sample_set(c);
    run_iteration(s, data, c);  // Adam step
    SampleSet replay = s;
    run_iteration(s, data, c);  // first SGHMC step

    const PosteriorConfig& pc = c.posterior;
    const long t = replay.iteration;
    const long d_gen = replay.d_seen;
    std::vector<Chain> gens = replay.gen;
    for (int j = 0; j < pc.J_g; ++j) {
      const auto z = draw_noise_sets(c, t, 0, j, pc.J_g);
      for (int m = 0; m < c.M; ++m) {
        Chain& ch = gens[static_cast<std::size_t>(m * pc.J_g + j)];
        const std::vector<ParamVector> ds{replay.disc[static_cast<std::size_t>(m)].params};
        const Vector grad = marginal_grad_gen(ch.params, z, ds, c.prior, pc).grad;
        const double eta = c.sghmc.gamma / static_cast<double>(std::max(std::min(d_gen, pc.N), 1L));
        Stream noise = Stream(ch.state.noise_key).split(static_cast<std::uint64_t>(ch.state.step));
        Vector v = (1 - c.sghmc.alpha) * ch.state.v + eta * grad;
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += std::sqrt(2 * c.sghmc.alpha * eta) * noise.normal();
        Vector theta = ch.params.values + v;
        CHECK((theta - s.gen[static_cast<std::size_t>(m * pc.J_g + j)].params.values).cwiseAbs().maxCoeff() <= 1e-12);
        ch.params.values = theta;
      }
    }
    const auto zd = draw_noise_sets(c, t, 1, 0, 1);
    SampleSet cur = replay;
    const auto rows = next_minibatch(cur, pc.N, pc.n_d, c.seed);
    Matrix x(pc.n_d, data.x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
    for (int m = 0; m < c.M; ++m) {
      const Chain& ch = replay.disc[static_cast<std::size_t>(m)];
      const std::vector<ParamVector> gs{gens[static_cast<std::size_t>(m * pc.J_g)].params,
                                        gens[static_cast<std::size_t>(m * pc.J_g + 1)].params};
      const Vector grad = marginal_grad_disc(ch.params, zd, x, data.labeled, gs, c.prior, pc).grad;
      const double eta = c.sghmc.gamma / static_cast<double>(std::max(std::min(cur.d_seen, pc.N), 1L));
      Stream noise = Stream(ch.state.noise_key).split(static_cast<std::uint64_t>(ch.state.step));
      Vector v = (1 - c.sghmc.alpha) * ch.state.v + eta * grad;
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += std::sqrt(2 * c.sghmc.alpha * eta) * noise.normal();
      const Vector theta = ch.params.values + v;
      CHECK((theta - s.disc[static_cast<std::size_t>(m)].params.values).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("collection counts and ordering") {
  TrainConfig c = tiny_config();
  c.sghmc.burn_in_iters = 5;
  c.total_iters = 4;
  CHECK(train(c, tiny_data(c, 4)).samples.gen_history.empty());

  c.posterior.J_g = 10;
  c.M = 2;
  c.collect_every = 3;
  c.total_iters = 5 + 2 * 3;
  int calls = 0;
  const TrainResult r = train(c, tiny_data(c, 4), [&](const SampleSet&, long it) {
    ++calls;
    MetricRecord m;
    m.iteration = it;
    return m;
  });
  CHECK(r.samples.gen_history.size() == 40);
  CHECK(r.samples.disc_history.size() == 4);
  CHECK(calls == 2);
  CHECK(r.metrics.size() == 2);
  for (std::size_t i = 1; i < r.samples.gen_history.size(); ++i)
    CHECK(r.samples.gen_history[i].iteration >= r.samples.gen_history[i - 1].iteration);
  CHECK(r.samples.gen_history.front().iteration == 8);
  CHECK(r.samples.gen_history.back().iteration == 11);
}

TEST_CASE("training is deterministic and resumable") {
  const TrainConfig c = tiny_config(PosteriorMode::semi_supervised);
  const TrainData d = tiny_data(c, 5);
  const TrainResult a = train(c, d), b = train(c, d);
  CHECK(a.samples == b.samples);
  TrainConfig half = c;
  half.total_iters = 3;
  const TrainResult h = train(half, d);
  const TrainResult resumed = train(c, d, {}, h.samples);
  CHECK(resumed.samples == a.samples);
}

TEST_CASE("numeric failure stops training and names the iteration") {
  TrainConfig c = tiny_config();
  c.sghmc.burn_in_iters = 0;
  c.sghmc.gamma = 1e300;
  const TrainResult r = train(c, tiny_data(c, 6));
  REQUIRE(r.error.has_value());
  CHECK(r.failed_iteration >= 1);
  CHECK(r.error->find("iteration") != std::string::npos);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = test::scratch_dir("ckpt");
  for (const PosteriorMode mode : {PosteriorMode::unsupervised, PosteriorMode::semi_supervised}) {
    const TrainConfig c = tiny_config(mode);
    const TrainResult r = train(c, tiny_data(c, 7));
    const CheckpointLayout layout{c.posterior.J_g, c.posterior.J_d, c.M};
    save_checkpoint(r.samples, layout, dir / "a.bgan");
    const LoadedCheckpoint l = load_checkpoint(dir / "a.bgan", c.gen_spec, c.disc_spec);
    CHECK(l.samples == r.samples);
    CHECK(l.layout.J_g == 2);
    CHECK(l.layout.M == 2);
    save_checkpoint(l.samples, l.layout, dir / "b.bgan");
    std::ifstream fa(dir / "a.bgan", std::ios::binary), fb(dir / "b.bgan", std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), {}), bb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(ba == bb);
  }
}

TEST_CASE("corrupt checkpoints are format errors with offsets") {
  const auto dir = test::scratch_dir("ckpt_bad");
  const TrainConfig c = tiny_config();
  const TrainResult r = train(c, tiny_data(c, 8));
  save_checkpoint(r.samples, {2, 1, 2}, dir / "ok.bgan");
  std::ifstream in(dir / "ok.bgan", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto write = [&](const std::string& name, const std::string& b) {
    std::ofstream(dir / name, std::ios::binary) << b;
    return dir / name;
  };

  std::string magic = bytes;
  magic[0] = 'X';
  try {
    load_checkpoint(write("magic.bgan", magic));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  std::string version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(load_checkpoint(write("version.bgan", version)), FormatError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    try {
      load_checkpoint(write("trunc.bgan", bytes.substr(0, cut)));
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() <= cut);
    }
  }
  CHECK_THROWS_AS(load_checkpoint(write("trail.bgan", bytes + "x")), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "ok.bgan", NetworkSpec{{2, 6, 3}}), SpecMismatchError);
  CHECK_THROWS_AS(load_checkpoint(dir / "ok.bgan", std::nullopt, NetworkSpec{{3, 4, 2}, Activation::relu, OutputHead::softmax}),
                  SpecMismatchError);
}

}  // TEST_SUITE
