#include "bgan/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "bgan/errors.hpp"
#include "bgan/plot.hpp"
#include "bgan/predict.hpp"
#include "bgan/selfcheck.hpp"

namespace bgan {
namespace {

enum : std::uint64_t {
  kTrainDataStream = 11,
  kEvalDataStream = 12,
  kJsdStream = 13,
  kSplitStream = 14,
  kBaselineStream = 15,
};

std::string cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::vector<ParamVector> live_params(const std::vector<Chain>& chains) {
  std::vector<ParamVector> out;
  out.reserve(chains.size());
  for (const Chain& c : chains) out.push_back(c.params);
  return out;
}

std::vector<ParamVector> history_params(const std::vector<CollectedSample>& history) {
  std::vector<ParamVector> out;
  out.reserve(history.size());
  for (const CollectedSample& s : history) out.push_back(s.params);
  return out;
}

Matrix every_nth_row(const Matrix& x, long cap) {
  if (x.rows() <= cap) return x;
  const long step = (x.rows() + cap - 1) / cap;
  Matrix out((x.rows() + step - 1) / step, x.cols());
  for (Eigen::Index i = 0, r = 0; i < x.rows(); i += step, ++r) out.row(r) = x.row(i);
  return out;
}

Matrix curve(const std::vector<MetricRecord>& rows, bool jsd_column) {
  Matrix pts(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = static_cast<double>(rows[i].iteration);
    pts(static_cast<Eigen::Index>(i), 1) = jsd_column ? rows[i].jsd_nats : rows[i].test_error;
  }
  return pts;
}

Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& prefix, int factor, long cap) {
  Dataset d = load_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
  if (cap > 0 && cap < d.size()) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(cap));
    for (long i = 0; i < cap; ++i) rows[static_cast<std::size_t>(i)] = i;
    d = subset(d, rows);
  }
  return factor > 1 ? downsample(d, factor) : d;
}

void write_outputs(const ExperimentConfig& cfg, const PreparedData& data, const RunSummary& run,
                   const std::filesystem::path& out_dir) {
  write_text_file(out_dir / "config.txt", cfg.describe());
  write_text_file(out_dir / "metrics.csv", metrics_csv(run.metrics, cfg.record_wallclock));
  std::string timing = "iteration,wallclock_s\n";
  for (std::size_t i = 0; i < run.metrics.size(); ++i) {
    timing += std::to_string(run.metrics[i].iteration) + "," + cell(run.wallclock[i]) + "\n";
  }
  write_text_file(out_dir / "timing.csv", timing);

  std::ostringstream summary;
  summary << "experiment = " << to_string(cfg.experiment) << "\nmodel = " << to_string(cfg.model)
          << "\nseed = " << cfg.seed << "\nexit_code = " << run.exit_code << "\n";
  if (!run.error.empty()) summary << "error = " << run.error << "\nfailed_iteration = " << run.failed_iteration << "\n";
  summary << "final_jsd_nats = " << cell(run.final_jsd) << "\nfinal_test_error = " << cell(run.final_test_error)
          << "\nfinal_single_sample_error = " << cell(run.final_single_error)
          << "\nsupervised_baseline_error = " << cell(run.baseline_error) << "\n";
  if (run.clusters) {
    summary << "mds_dims = " << run.mds->dims << "\nmds_samples = " << run.mds->coords.rows()
            << "\ncluster_k_best = " << run.clusters->k_best << "\ncluster_silhouette = " << cell(run.clusters->silhouette)
            << "\n";
  }
  write_text_file(out_dir / "summary.txt", summary.str());

  if (cfg.write_checkpoint && !run.samples.gen.empty()) {
    save_checkpoint(run.samples, {run.train_config.posterior.J_g, run.train_config.posterior.J_d, run.train_config.M},
                    out_dir / "checkpoint.bgan");
  }
  if (!cfg.write_plots || run.metrics.empty()) return;

  if (!cfg.semi_supervised()) {
    write_text_file(out_dir / "jsd.svg",
                    svg_lines({"JSD to the data distribution", "iteration", "JSD (nats)"},
                              {{to_string(cfg.model), curve(run.metrics, true)}}));
    if (data.pca && !run.samples.gen.empty()) {
      Stream stream = Stream(cfg.seed).split(kJsdStream).split(0xF1);
      const Matrix gen = generate_pooled(live_params(run.samples.gen), 2000, stream);
      write_text_file(out_dir / "pca.svg",
                      svg_scatter({"Samples in the data PCA plane", "PC 1", "PC 2"},
                                  {{"data", every_nth_row(data.eval_projected, 2000)},
                                   {to_string(cfg.model), pca_apply(*data.pca, gen)}}));
    }
    if (run.mds) {
      write_text_file(out_dir / "mds.svg",
                      svg_scatter({"Generator weight samples (classical MDS)", "MDS 1", "MDS 2"},
                                  {{"collected samples", run.mds->coords}}));
    }
  } else {
    write_text_file(out_dir / "test_error.svg",
                    svg_lines({"Test error", "iteration", "error rate"}, {{to_string(cfg.model), curve(run.metrics, false)}}));
  }
}

RunSummary run_check(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  const CheckReport report =
      cfg.experiment == ExperimentKind::gradient_check ? gradient_check(cfg.seed) : sampler_check(cfg.seed);
  log << report.table();
  RunSummary run;
  run.exit_code = report.all_pass() ? kExitOk : kExitCheckFailed;
  if (!out_dir.empty()) write_text_file(out_dir / "check.txt", report.table());
  return run;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedData out;
  const DataConfig& dc = cfg.data;
  switch (cfg.experiment) {
    case ExperimentKind::synth_unsup: {
      SyntheticSpec spec{dc.D, dc.d, dc.n, cfg.seed, dc.z_var, dc.noise_var};
      const SyntheticData train = gen_synthetic(spec);
      Stream eval_stream = Stream(cfg.seed).split(kEvalDataStream);
      const SyntheticData held_out = sample_linear_gaussian(train.A, dc.n_eval, dc.z_var, dc.noise_var, eval_stream);
      out.train.x = train.data.x;
      out.data_dim = dc.D;
      out.eval_points = held_out.data.x;
      out.pca = pca_fit(out.eval_points);
      out.eval_projected = pca_apply(*out.pca, out.eval_points);
      break;
    }
    case ExperimentKind::synth_semi: {
      SyntheticSpec spec{dc.D, dc.d, dc.n, cfg.seed, dc.z_var, dc.noise_var};
      const ClassSyntheticData pool = gen_synthetic_classes(spec, dc.K);
      Stream test_stream = Stream(cfg.seed).split(kEvalDataStream);
      const Dataset test = sample_classes(pool.A, dc.n_test, dc.z_var, dc.noise_var, test_stream);
      const LabeledSplit split = make_split(pool.data, dc.N_s, Stream(cfg.seed).split(kSplitStream).key());
      out.train.x = split.unlabeled.x;
      out.train.labeled = {split.labeled.x, split.labeled.y};
      out.data_dim = dc.D;
      out.K = dc.K;
      out.test_x = test.x;
      out.test_y = test.y;
      break;
    }
    case ExperimentKind::mnist_semi: {
      const Dataset train = load_mnist_split(dc.mnist_dir, "train", dc.downsample, dc.train_limit);
      const Dataset test = load_mnist_split(dc.mnist_dir, "t10k", dc.downsample, dc.n_test);
      const LabeledSplit split = make_split(train, dc.N_s, Stream(cfg.seed).split(kSplitStream).key());
      out.train.x = split.unlabeled.x;
      out.train.labeled = {split.labeled.x, split.labeled.y};
      out.data_dim = static_cast<int>(train.dim());
      out.K = train.num_classes;
      out.test_x = test.x;
      out.test_y = test.y;
      break;
    }
    case ExperimentKind::sampler_check:
    case ExperimentKind::gradient_check:
      throw ConfigError("self-check experiments have no dataset");
  }
  return out;
}

Matrix generate_pooled(const std::vector<ParamVector>& gens, long count, Stream& stream) {
  if (gens.empty()) throw ConfigError("no generator samples to draw from");
  const long chains = static_cast<long>(gens.size());
  const int z_dim = gens.front().spec.input_size();
  Matrix out(count, gens.front().spec.output_size());
  Eigen::Index row = 0;
  for (long c = 0; c < chains; ++c) {
    const long share = count / chains + (c < count % chains ? 1 : 0);
    if (share == 0) continue;
    out.middleRows(row, share) = forward(gens[static_cast<std::size_t>(c)], stream.normal_matrix(share, z_dim));
    row += share;
  }
  return out;
}

double jsd_against_truth(const PreparedData& data, const std::vector<ParamVector>& gens, long count, int grid,
                         Stream& stream) {
  if (!data.pca) throw ConfigError("JSD needs the true-data projection");
  const Matrix generated = generate_pooled(gens, count, stream);
  if (!generated.allFinite()) throw NumericError("generator produced non-finite samples");
  return jsd(data.eval_projected, pca_apply(*data.pca, generated), grid);
}

double supervised_baseline_error(const ExperimentConfig& cfg, const PreparedData& data, const TrainConfig& tc) {
  SGHMCConfig adam = tc.sghmc;
  adam.adam_lr = cfg.baseline_lr;
  adam.burn_in_iters = cfg.baseline_iters;
  const std::uint64_t init_seed = Stream(cfg.seed).split(kBaselineStream).key();
  ParamVector params = init_params(tc.disc_spec, tc.chain_init, init_seed);
  SGHMCState state = SGHMCState::fresh(params.size(), adam, init_seed);
  const LossSpec loss = LossSpec::classes(data.train.labeled.y);
  for (long it = 0; it < cfg.baseline_iters; ++it) {
    ValueGrad vg = loss_grad(params, data.train.labeled.x, loss);
    vg.grad += log_prior_grad(params, tc.prior.sigma_d);
    adam_step(params.values, state, vg.grad, adam);
  }
  return test_error({{params}, data.K}, data.test_x, data.test_y).rate;
}

std::string metrics_csv(const std::vector<MetricRecord>& rows, bool wallclock) {
  std::string out = "iteration,jsd_nats,test_error,n_gen_samples,wallclock_s\n";
  for (const MetricRecord& r : rows) {
    out += std::to_string(r.iteration) + "," + cell(r.jsd_nats) + "," + cell(r.test_error) + "," +
           std::to_string(r.n_gen_samples) + "," + (wallclock ? cell(r.wallclock_s) : std::string()) + "\n";
  }
  return out;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  cfg.validate();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  if (cfg.experiment == ExperimentKind::sampler_check || cfg.experiment == ExperimentKind::gradient_check) {
    return run_check(cfg, out_dir, log);
  }

  const PreparedData data = prepare_data(cfg);
  RunSummary run;
  run.train_config = cfg.train_config(data.data_dim, data.train.x.rows(),
                                      static_cast<long>(data.train.labeled.size()), data.K);
  const TrainConfig& tc = run.train_config;
  log << "training " << to_string(cfg.experiment) << " (" << to_string(cfg.model) << ", seed " << cfg.seed << "): "
      << tc.gen_chains() << " generator / " << tc.disc_chains() << " discriminator chains, generator "
      << tc.gen_spec.describe() << ", discriminator " << tc.disc_spec.describe() << ", N = " << tc.posterior.N << "\n";

  const auto start = std::chrono::steady_clock::now();
  const MetricCallback callback = [&](const SampleSet& set, long iteration) {
    MetricRecord rec;
    rec.iteration = iteration;
    rec.n_gen_samples = static_cast<long>(set.gen_history.size());
    if (cfg.semi_supervised()) {
      rec.test_error = test_error({history_params(set.disc_history), data.K}, data.test_x, data.test_y).rate;
    } else {
      Stream stream = Stream(cfg.seed).split(kJsdStream).split(static_cast<std::uint64_t>(iteration));
      rec.jsd_nats = jsd_against_truth(data, live_params(set.gen), cfg.jsd_samples, cfg.kde_grid, stream);
    }
    rec.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << "  iteration " << iteration << ": "
        << (cfg.semi_supervised() ? "test error " + cell(rec.test_error) : "JSD " + cell(rec.jsd_nats)) << " ("
        << cell(std::round(rec.wallclock_s * 10) / 10) << " s)\n";
    log.flush();
    return rec;
  };

  TrainResult result = train(tc, data.train, callback);
  run.metrics = result.metrics;
  for (const MetricRecord& r : run.metrics) run.wallclock.push_back(r.wallclock_s);
  run.samples = std::move(result.samples);
  if (result.error) {
    run.exit_code = kExitNumeric;
    run.error = *result.error;
    run.failed_iteration = result.failed_iteration;
    log << "training failed at iteration " << result.failed_iteration << ": " << *result.error << "\n";
  }

  if (!run.metrics.empty()) {
    run.final_jsd = run.metrics.back().jsd_nats;
    run.final_test_error = run.metrics.back().test_error;
  }
  if (cfg.semi_supervised() && !run.samples.disc.empty()) {
    run.final_single_error = test_error({{run.samples.disc.front().params}, data.K}, data.test_x, data.test_y).rate;
    if (cfg.experiment == ExperimentKind::mnist_semi && cfg.baseline_iters > 0) {
      run.baseline_error = supervised_baseline_error(cfg, data, tc);
      log << "supervised-only baseline test error " << cell(run.baseline_error) << "\n";
    }
  }
  if (!cfg.semi_supervised() && run.samples.gen_history.size() >= 4) {
    run.mds = mds_embed(history_params(run.samples.gen_history));
    run.clusters = cluster_count(run.mds->coords, cfg.seed);
    log << "MDS over " << run.samples.gen_history.size() << " generator samples: k_best " << run.clusters->k_best
        << ", silhouette " << cell(run.clusters->silhouette) << "\n";
  }
  if (!out_dir.empty()) write_outputs(cfg, data, run, out_dir);
  return run;
}

std::pair<double, double> mean_two_sd(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, 2.0 * sd};
}

int worker_threads() {
  int cap = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("BGAN_THREADS")) {
    int v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || v < 1) throw ConfigError("BGAN_THREADS must be a positive integer, got '" + s + "'");
    cap = v;
  }
  return cap;
}

RepeatReport run_repeats(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  RepeatReport report;
  const int R = cfg.repeats;
  report.runs.resize(static_cast<std::size_t>(R));
  std::vector<std::string> logs(static_cast<std::size_t>(R));
  std::vector<std::string> failures(static_cast<std::size_t>(R));

  auto run_one = [&](int r, std::ostream& out) {
    ExperimentConfig c = cfg;
    c.seed = repeat_seed(cfg.seed, r);
    c.repeats = 1;
    const std::filesystem::path dir = R > 1 ? cfg.output_dir / ("repeat_" + std::to_string(r)) : cfg.output_dir;
    report.runs[static_cast<std::size_t>(r)] = run_experiment(c, dir, out);
  };

  const int workers = std::min(R, worker_threads());
  if (workers <= 1) {
    for (int r = 0; r < R; ++r) run_one(r, log);
  } else {
    std::atomic<int> next{0};
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next++; r < R; r = next++) {
          std::ostringstream out;
          try {
            run_one(r, out);
          } catch (const std::exception& e) {
            std::lock_guard lock(failure_mutex);
            failures[static_cast<std::size_t>(r)] = e.what();
          }
          logs[static_cast<std::size_t>(r)] = out.str();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (int r = 0; r < R; ++r) {
      log << "[repeat " << r << "]\n" << logs[static_cast<std::size_t>(r)];
      if (!failures[static_cast<std::size_t>(r)].empty()) throw ConfigError(failures[static_cast<std::size_t>(r)]);
    }
  }

  std::vector<double> jsds, errors;
  for (const RunSummary& run : report.runs) {
    jsds.push_back(run.final_jsd);
    errors.push_back(run.final_test_error);
    report.exit_code = std::max(report.exit_code, run.exit_code);
  }
  std::tie(report.mean_jsd, report.two_sd_jsd) = mean_two_sd(jsds);
  std::tie(report.mean_test_error, report.two_sd_test_error) = mean_two_sd(errors);

  std::filesystem::create_directories(cfg.output_dir);
  std::string csv = "row,seed,final_jsd_nats,final_test_error\n";
  for (int r = 0; r < R; ++r) {
    const RunSummary& run = report.runs[static_cast<std::size_t>(r)];
    csv += "repeat_" + std::to_string(r) + "," + std::to_string(repeat_seed(cfg.seed, r)) + "," + cell(run.final_jsd) +
           "," + cell(run.final_test_error) + "\n";
  }
  csv += "mean,," + cell(report.mean_jsd) + "," + cell(report.mean_test_error) + "\n";
  csv += "two_sd,," + cell(report.two_sd_jsd) + "," + cell(report.two_sd_test_error) + "\n";
  write_text_file(cfg.output_dir / "summary.csv", csv);
  log << "summary over " << R << " repeat(s): final JSD " << cell(report.mean_jsd) << " +- " << cell(report.two_sd_jsd)
      << ", final test error " << cell(report.mean_test_error) << " +- " << cell(report.two_sd_test_error) << "\n";
  return report;
}

}  // namespace bgan
