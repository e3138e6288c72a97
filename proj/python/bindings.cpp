#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "bgan/config.hpp"
#include "bgan/datagen.hpp"
#include "bgan/errors.hpp"
#include "bgan/eval.hpp"
#include "bgan/experiment.hpp"
#include "bgan/predict.hpp"
#include "bgan/selfcheck.hpp"

namespace py = pybind11;
using namespace bgan;

namespace {

py::dict summary_dict(const RunSummary& r) {
  py::dict d;
  d["exit_code"] = r.exit_code;
  d["error"] = r.error;
  d["failed_iteration"] = r.failed_iteration;
  py::list rows;
  for (const MetricRecord& m : r.metrics) {
    py::dict row;
    row["iteration"] = m.iteration;
    row["jsd_nats"] = m.jsd_nats;
    row["test_error"] = m.test_error;
    row["n_gen_samples"] = m.n_gen_samples;
    rows.append(row);
  }
  d["metrics"] = rows;
  d["final_jsd"] = r.final_jsd;
  d["final_test_error"] = r.final_test_error;
  d["final_single_error"] = r.final_single_error;
  d["baseline_error"] = r.baseline_error;
  d["n_gen_samples"] = r.samples.gen_history.size();
  d["n_disc_samples"] = r.samples.disc_history.size();
  if (r.clusters) {
    d["k_best"] = r.clusters->k_best;
    d["silhouette"] = r.clusters->silhouette;
  }
  return d;
}

py::dict report_dict(const CheckReport& rep) {
  py::dict d;
  d["passed"] = rep.all_pass();
  d["table"] = rep.table();
  py::list rows;
  for (const CheckRow& r : rep.rows) {
    py::dict row;
    row["name"] = r.name;
    row["max_error"] = r.max_error;
    row["tolerance"] = r.tolerance;
    row["pass_fraction"] = r.pass_fraction;
    row["passed"] = r.pass;
    rows.append(row);
  }
  d["rows"] = rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian GAN: SGHMC over generator and discriminator weights";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SpecMismatchError>(m, "SpecMismatchError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("default_config", [] { return ExperimentConfig{}.describe(); },
        "Every config key with its default, in file syntax.");
  m.def("parse_config", [](const std::string& text) { return parse_config(text, "<python>").describe(); },
        py::arg("text"), "Validate config text and return the fully resolved configuration.");

  m.def(
      "train",
      [](const std::string& config_text, const std::filesystem::path& output_dir) {
        const ExperimentConfig cfg = parse_config(config_text, "<python>");
        cfg.validate();
        std::ostringstream log;
        RunSummary r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, output_dir, log);
        }
        py::dict d = summary_dict(r);
        d["log"] = log.str();
        return d;
      },
      py::arg("config"), py::arg("output_dir") = std::filesystem::path(),
      "Run one experiment from config text. An empty output_dir writes nothing.");

  m.def("check_gradients", [](std::uint64_t seed) { return report_dict(gradient_check(seed)); },
        py::arg("seed") = 0);
  m.def("check_sampler", [](std::uint64_t seed, long steps) { return report_dict(sampler_check(seed, steps)); },
        py::arg("seed") = 0, py::arg("steps") = kSamplerSteps);

  m.def(
      "synthetic",
      [](int D, int d, long n, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.D = D;
        spec.d = d;
        spec.n = n;
        spec.seed = seed;
        const SyntheticData s = gen_synthetic(spec);
        return py::make_tuple(s.data.x, s.A);
      },
      py::arg("D") = 100, py::arg("d") = 2, py::arg("n") = 10000, py::arg("seed") = 0,
      "Points x = A z + noise; returns (x, A).");

  m.def("jsd", [](const Matrix& p, const Matrix& q, int g) { return jsd(p, q, g); }, py::arg("p"), py::arg("q"),
        py::arg("grid") = kGridResolution, "JSD in nats between two 2-D sample sets.");
  m.def(
      "pca",
      [](const Matrix& x) {
        const Projection2D proj = pca_fit(x);
        return py::make_tuple(pca_apply(proj, x), proj.components, proj.explained_variance_ratio);
      },
      py::arg("x"), "Returns (projected, components, explained_variance_ratio).");
  m.def(
      "mds",
      [](const Matrix& sq) { return mds_from_squared_distances(sq).coords; }, py::arg("squared_distances"));
  m.def(
      "cluster_count",
      [](const Matrix& coords, std::uint64_t seed) {
        const ClusterResult c = cluster_count(coords, seed);
        return py::make_tuple(c.k_best, c.silhouette, c.labels);
      },
      py::arg("coords"), py::arg("seed") = 0, "Returns (k_best, silhouette, labels).");

  m.def(
      "predict",
      [](const std::filesystem::path& checkpoint, const Matrix& x, bool single) {
        const LoadedCheckpoint ck = load_checkpoint(checkpoint);
        const NetworkSpec& spec = ck.samples.disc.front().params.spec;
        if (spec.output_head != OutputHead::softmax || spec.output_size() < 3) {
          throw SpecMismatchError("checkpoint discriminator " + spec.describe() + " is not a K+1 class head");
        }
        if (x.cols() != spec.input_size()) {
          throw SpecMismatchError("data has " + std::to_string(x.cols()) + " features, checkpoint expects " +
                                  std::to_string(spec.input_size()));
        }
        std::vector<ParamVector> discs;
        if (single || ck.samples.disc_history.empty()) {
          discs.push_back(ck.samples.disc.front().params);
        } else {
          for (const CollectedSample& s : ck.samples.disc_history) discs.push_back(s.params);
        }
        const int K = spec.output_size() - 1;
        return predict_bma({discs, K}, x);
      },
      py::arg("checkpoint"), py::arg("x"), py::arg("single") = false,
      "Class probabilities (n x K) averaged over the collected discriminator samples.");
}
