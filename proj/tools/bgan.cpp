// bgan: train, evaluate and self-check Bayesian GANs.
//
//   bgan train --config run.cfg [--output DIR] [--seed N] [--repeats R] [--model bayes|map]
//   bgan eval  --checkpoint run/checkpoint.bgan --data test.csv [--probs probs.csv] [--single]
//   bgan check gradients|sampler [--seed N]
//   bgan export --config run.cfg --out data.csv
//   bgan defaults
//
// Exit codes: 0 success, 1 failed self-check, 2 configuration or input error,
// 3 numeric failure during training.

#include <CLI11.hpp>

#include <malloc.h>

#include <charconv>
#include <fstream>
#include <iostream>

#include "bgan/config.hpp"
#include "bgan/datagen.hpp"
#include "bgan/errors.hpp"
#include "bgan/experiment.hpp"
#include "bgan/predict.hpp"
#include "bgan/selfcheck.hpp"

namespace {

using namespace bgan;

struct TrainArgs {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::string model;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string images;
  std::string labels;
  int downsample = 1;
  std::string probs;
  bool single = false;
};

int cmd_train(const TrainArgs& args) {
  ExperimentConfig cfg = load_config(args.config);
  if (!args.output.empty()) cfg.output_dir = args.output;
  if (args.seed) cfg.seed = *args.seed;
  if (args.repeats) cfg.repeats = *args.repeats;
  if (!args.model.empty()) cfg.model = parse_train_mode(args.model);
  cfg.validate();
  std::cout << "# effective configuration\n" << cfg.describe() << std::flush;
  const RepeatReport report = run_repeats(cfg, std::cout);
  return report.exit_code;
}

Dataset load_eval_data(const EvalArgs& args) {
  if (!args.data.empty()) return read_csv(args.data);
  if (args.images.empty() || args.labels.empty()) throw ConfigError("eval needs --data or --images with --labels");
  Dataset d = load_idx(args.images, args.labels);
  return args.downsample > 1 ? downsample(d, args.downsample) : d;
}

int cmd_eval(const EvalArgs& args) {
  const LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const SampleSet& set = ckpt.samples;
  const NetworkSpec& disc_spec = set.disc.front().params.spec;
  if (disc_spec.output_head != OutputHead::softmax || disc_spec.output_size() < 3) {
    throw SpecMismatchError("checkpoint discriminator " + disc_spec.describe() + " is not a K+1 class head");
  }
  const int K = disc_spec.output_size() - 1;
  const Dataset data = load_eval_data(args);
  if (!data.labeled()) throw DataError("evaluation data needs labels");
  if (data.dim() != disc_spec.input_size()) {
    throw SpecMismatchError("data has " + std::to_string(data.dim()) + " features, checkpoint expects " +
                            std::to_string(disc_spec.input_size()));
  }

  Predictor predictor{{}, K};
  if (args.single) {
    predictor.disc_samples.push_back(set.disc.front().params);
  } else if (!set.disc_history.empty()) {
    for (const CollectedSample& s : set.disc_history) predictor.disc_samples.push_back(s.params);
  } else {
    for (const Chain& c : set.disc) predictor.disc_samples.push_back(c.params);
  }
  const Matrix probs = predict_bma(predictor, data.x);
  const ErrorStats stats = classification_error(probs, data.y);
  std::cout << "samples averaged: " << predictor.disc_samples.size() << "\n"
            << "misclassified: " << stats.misclassified << " / " << stats.total << "\n"
            << "error rate: " << stats.rate << "\n";

  if (!args.probs.empty()) {
    std::ofstream out(args.probs);
    if (!out) throw DataError("cannot open " + args.probs + " for writing");
    out << "index,label";
    for (int k = 1; k <= K; ++k) out << ",p" << k;
    out << "\n";
    char buf[64];
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      out << i << "," << data.y[static_cast<std::size_t>(i)];
      for (Eigen::Index k = 0; k < probs.cols(); ++k) {
        const auto res = std::to_chars(buf, buf + sizeof buf, probs(i, k));
        out << "," << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
      }
      out << "\n";
    }
  }
  return kExitOk;
}

int cmd_check(const std::string& kind, std::uint64_t seed) {
  CheckReport report;
  if (kind == "gradients") {
    report = gradient_check(seed);
  } else if (kind == "sampler") {
    report = sampler_check(seed);
  } else {
    throw ConfigError("check kind must be gradients or sampler, got '" + kind + "'");
  }
  std::cout << report.table();
  std::cout << (report.all_pass() ? "all checks passed\n" : "some checks FAILED\n");
  return report.all_pass() ? kExitOk : kExitCheckFailed;
}

int cmd_export(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  const PreparedData data = prepare_data(cfg);
  Dataset d;
  d.x = data.train.x;
  write_csv(d, out);
  std::cout << "wrote " << d.size() << " x " << d.dim() << " to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Large per-iteration temporaries otherwise go through mmap/munmap each step.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  CLI::App app{"Bayesian GAN sampler and experiment runner"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run an experiment from a config file");
  train->add_option("--config", train_args.config, "key=value config file")->required();
  train->add_option("--output", train_args.output, "output directory (overrides output_dir)");
  train->add_option("--seed", train_args.seed, "base seed");
  train->add_option("--repeats", train_args.repeats, "independent repeats (seeds seed + 1000 r)");
  train->add_option("--model", train_args.model, "bayes or map")->check(CLI::IsMember({"bayes", "map"}));

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "classify a labeled dataset with a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint written by train")->required();
  eval->add_option("--data", eval_args.data, "labeled CSV (label,x0,x1,...)");
  eval->add_option("--images", eval_args.images, "IDX image file");
  eval->add_option("--labels", eval_args.labels, "IDX label file");
  eval->add_option("--downsample", eval_args.downsample, "block-mean factor for IDX images");
  eval->add_option("--probs", eval_args.probs, "write per-example class probabilities here");
  eval->add_flag("--single", eval_args.single, "use the first live discriminator sample only");

  std::string check_kind;
  std::uint64_t check_seed = 0;
  auto* check = app.add_subcommand("check", "run the finite-difference or sampler self-check");
  check->add_option("kind", check_kind, "gradients or sampler")->required();
  check->add_option("--seed", check_seed, "seed");

  std::string export_config, export_out;
  auto* exporter = app.add_subcommand("export", "write the training set of a config as CSV");
  exporter->add_option("--config", export_config, "config file")->required();
  exporter->add_option("--out", export_out, "CSV path")->required();

  app.add_subcommand("defaults", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (check->parsed()) return cmd_check(check_kind, check_seed);
    if (exporter->parsed()) return cmd_export(export_config, export_out);
    std::cout << ExperimentConfig{}.describe();
    return kExitOk;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SpecMismatchError& e) {
    std::cerr << "spec mismatch: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
