#pragma once

// Datasets: the low-rank linear-Gaussian synthetic process, its K-class
// variant for semi-supervised runs, class-balanced labeled splits, IDX image
// files (MNIST layout) with block downsampling, and CSV export.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgan/netcore.hpp"
#include "bgan/random.hpp"

namespace bgan {

struct Dataset {
  Matrix x;               // one row per datapoint
  std::vector<int> y;     // classes 1..num_classes, empty when unlabeled
  int num_classes = 0;
  int image_rows = 0;     // set for image data, 0 otherwise
  int image_cols = 0;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
  bool labeled() const { return !y.empty(); }
};

/// Rows `rows` of `data` (labels carried along).
Dataset subset(const Dataset& data, const std::vector<Eigen::Index>& rows);

/// x = A z + eps with z ~ N(0, z_var I_d), A ~ N(0, I_{D x d}), eps ~ N(0, noise_var I_D).
struct SyntheticSpec {
  int D = 100;
  int d = 2;
  long n = 10000;
  std::uint64_t seed = 0;
  double z_var = 10.0;
  double noise_var = 0.01;

  void validate() const;
};

struct SyntheticData {
  Dataset data;
  Matrix A;        // D x d
  Matrix latents;  // n x d
};

/// Draws A once, then n points.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// n further points from the same process with a given A (also the hook for
/// forcing A and the variances in tests).
SyntheticData sample_linear_gaussian(const Matrix& A, long n, double z_var, double noise_var, Stream& stream);

/// K-class variant: one independent A_k per class; point i belongs to class
/// (i mod K) + 1 and is drawn through A_k.
struct ClassSyntheticData {
  Dataset data;
  std::vector<Matrix> A;
};

ClassSyntheticData gen_synthetic_classes(const SyntheticSpec& spec, int K);
Dataset sample_classes(const std::vector<Matrix>& A, long n, double z_var, double noise_var, Stream& stream);

struct LabeledSplit {
  Dataset labeled;    // N_s rows, classes balanced within +-1
  Dataset unlabeled;  // the rest of the pool (labels kept for diagnostics)
  Dataset test;       // held out, supplied by the caller
};

/// Class-balanced labeled subset of a labeled pool. Throws ConfigError when
/// N_s < K, N_s exceeds the pool, or a class has too few members.
LabeledSplit make_split(const Dataset& pool, long N_s, std::uint64_t seed, Dataset test = {});

/// IDX pair (unsigned-byte images, magic 0x00000803; labels, magic 0x00000801).
/// Pixels map to [-1, 1] via p/127.5 - 1; labels 0..9 become classes 1..10.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Inverse of load_idx; used to build fixtures.
void write_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

/// Block-mean pooling of image data by `factor` in both directions.
Dataset downsample(const Dataset& data, int factor);

/// Header row (label, x0, x1, ...), one datapoint per line, shortest
/// round-trip decimal text.
void write_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path);

}  // namespace bgan
