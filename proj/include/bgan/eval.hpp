#pragma once

// Evaluation of generated samples and weight samples: PCA to 2-D, Gaussian
// KDE on a grid, Jensen-Shannon divergence, classical MDS, and a k-means /
// silhouette cluster count.

#include <array>
#include <cstdint>
#include <vector>

#include "bgan/netcore.hpp"

namespace bgan {

struct Projection2D {
  Vector mean;        // D
  Matrix components;  // 2 x D, orthonormal rows
  std::array<double, 2> explained_variance_ratio{};
};

/// Top-2 principal axes of the sample covariance. The largest-magnitude
/// coordinate of each component is made positive. Throws
/// DegenerateDataError when the data has no variance.
Projection2D pca_fit(const Matrix& X);
Matrix pca_apply(const Projection2D& proj, const Matrix& X);

struct Box {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
};

struct Bandwidth {
  double hx = 0, hy = 0;
};

/// Scott's rule per axis: h = n^(-1/6) * sample stddev.
Bandwidth scott_bandwidth(const Matrix& points);

/// Bounding box of all the point sets, padded by `pad_x`/`pad_y`.
Box joint_box(const std::vector<const Matrix*>& sets, double pad_x, double pad_y);

inline constexpr int kGridResolution = 100;

struct DensityGrid {
  Box bounds;
  int g = kGridResolution;
  Matrix values;  // g x g, values(i, j) = mean density over cell (i, j)

  double cell_area() const;
  double x_center(int i) const;
  double y_center(int j) const;
  /// Sum of values * cell area.
  double mass() const;
};

/// Product-Gaussian KDE with Scott bandwidths, averaged over each cell
/// (exact kernel mass per cell divided by the cell area).
DensityGrid kde_density(const Matrix& points, const Box& bounds, int g = kGridResolution);
/// Same, on the sample's own box padded by 3h.
DensityGrid kde_density(const Matrix& points, int g = kGridResolution);

/// JSD in nats between two 2-D sample sets via KDE on a shared grid over the
/// joint box padded by 3 * max bandwidth. Result is in [0, ln 2].
double jsd(const Matrix& p, const Matrix& q, int g = kGridResolution);

/// JSD between two grids on the same box (cell masses normalized first).
double jsd_grids(const DensityGrid& p, const DensityGrid& q);

struct MdsEmbedding {
  Matrix coords;      // k x 2; unused dimensions are zero
  int dims = 0;       // number of positive eigenvalues used (0, 1 or 2)
  Vector eigenvalues;  // of the double-centred Gram matrix, descending
};

/// Classical MDS on Euclidean distances between weight vectors.
MdsEmbedding mds_embed(const std::vector<ParamVector>& samples);
/// Classical MDS from a matrix of squared distances.
MdsEmbedding mds_from_squared_distances(const Matrix& sq);

/// Silhouette of the best k = 2.. partition must exceed this to beat k = 1.
inline constexpr double kSingleClusterSilhouette = 0.5;

struct ClusterResult {
  int k_best = 1;
  double silhouette = 0.0;            // mean silhouette of k_best (0 for k = 1)
  std::vector<int> labels;            // 0..k_best-1
  std::vector<double> per_k_silhouette;  // index k-1
};

/// k-means (k-means++ seeding, 20 restarts) for k = 1..min(6, n/2); picks the
/// k with the largest mean silhouette, k = 1 scoring kSingleClusterSilhouette.
ClusterResult cluster_count(const Matrix& coords, std::uint64_t seed = 0);

/// Mean silhouette of a labelling (singleton clusters contribute 0).
double mean_silhouette(const Matrix& coords, const std::vector<int>& labels, int k);

}  // namespace bgan
