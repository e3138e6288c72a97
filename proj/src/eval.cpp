#include "bgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bgan/errors.hpp"
#include "bgan/linalg.hpp"
#include "bgan/random.hpp"

namespace bgan {
namespace {

void flip_to_positive_peak(Eigen::Ref<Vector> v) {
  Eigen::Index at = 0;
  v.cwiseAbs().maxCoeff(&at);
  if (v[at] < 0) v = -v;
}

void require_2d(const Matrix& points, const char* what) {
  if (points.cols() != 2) throw ShapeError(std::string(what) + " must have 2 columns");
  if (points.rows() < 1) throw DataError(std::string(what) + " is empty");
  if (!points.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

// Mass of Normal(mean, h^2) in [a, b]. Both tails are taken from the side
// where erfc is accurate.
double interval_mass(double a, double b, double mean, double h) {
  const double u = (a - mean) / (h * std::numbers::sqrt2);
  const double w = (b - mean) / (h * std::numbers::sqrt2);
  if (u > 0.0) return 0.5 * (std::erfc(u) - std::erfc(w));
  if (w < 0.0) return 0.5 * (std::erfc(-w) - std::erfc(-u));
  return 1.0 - 0.5 * (std::erfc(-u) + std::erfc(w));
}

// Kernel mass of every point in every grid cell along one axis, divided by
// the cell width, so the product of two axes is the cell-averaged density.
Matrix axis_kernel(const Eigen::Ref<const Vector>& coord, double lo, double step, int g, double h) {
  Matrix K(coord.size(), g);
  for (int c = 0; c < g; ++c) {
    const double a = lo + c * step;
    const double b = lo + (c + 1) * step;
    for (Eigen::Index i = 0; i < coord.size(); ++i) K(i, c) = interval_mass(a, b, coord[i], h) / step;
  }
  return K;
}

DensityGrid kde_with_bandwidth(const Matrix& points, const Box& bounds, int g, const Bandwidth& h) {
  if (g < 2) throw ConfigError("grid resolution must be >= 2");
  if (!(bounds.x1 > bounds.x0) || !(bounds.y1 > bounds.y0)) throw DegenerateDataError("empty KDE bounding box");
  DensityGrid grid;
  grid.bounds = bounds;
  grid.g = g;
  const Matrix kx = axis_kernel(points.col(0), bounds.x0, (bounds.x1 - bounds.x0) / g, g, h.hx);
  const Matrix ky = axis_kernel(points.col(1), bounds.y0, (bounds.y1 - bounds.y0) / g, g, h.hy);
  grid.values = (kx.transpose() * ky) / static_cast<double>(points.rows());
  return grid;
}

double squared_distance(const Matrix& coords, Eigen::Index a, Eigen::Index b) {
  return (coords.row(a) - coords.row(b)).squaredNorm();
}

struct KMeansFit {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansFit kmeans_once(const Matrix& X, int k, Stream& stream) {
  const Eigen::Index n = X.rows();
  Matrix centres(k, X.cols());
  // k-means++ seeding.
  centres.row(0) = X.row(static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (X.row(i) - centres.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = stream.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= d2[pick];
        if (u <= 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(n)));
    }
    centres.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (X.row(i) - centres.row(c)).squaredNorm());
  }

  KMeansFit fit;
  fit.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (X.row(i) - centres.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      inertia += best_d;
      if (fit.labels[static_cast<std::size_t>(i)] != best) {
        fit.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    fit.inertia = inertia;
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, X.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(fit.labels[static_cast<std::size_t>(i)]) += X.row(i);
      ++counts[static_cast<std::size_t>(fit.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) centres.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  }
  return fit;
}

}  // namespace

Projection2D pca_fit(const Matrix& X) {
  if (X.rows() < 3) throw DataError("PCA needs at least 3 points");
  if (X.cols() < 2) throw DataError("PCA needs at least 2 dimensions");
  if (!X.allFinite()) throw NumericError("PCA input contains non-finite values");
  Projection2D proj;
  proj.mean = X.colwise().mean().transpose();
  const Matrix centred = X.rowwise() - proj.mean.transpose();
  const Matrix cov = (centred.transpose() * centred) / static_cast<double>(X.rows() - 1);
  const double total = cov.trace();
  if (!(total > 0.0)) throw DegenerateDataError("PCA input has zero variance");

  SymmetricEigen eig = jacobi_eigen(cov);
  proj.components.resize(2, X.cols());
  for (int c = 0; c < 2; ++c) {
    Vector axis = eig.vectors.col(c);
    flip_to_positive_peak(axis);
    proj.components.row(c) = axis.transpose();
    proj.explained_variance_ratio[static_cast<std::size_t>(c)] = std::clamp(eig.values[c] / total, 0.0, 1.0);
  }
  return proj;
}

Matrix pca_apply(const Projection2D& proj, const Matrix& X) {
  if (X.cols() != proj.mean.size()) throw ShapeError("PCA input width does not match the fitted projection");
  return (X.rowwise() - proj.mean.transpose()) * proj.components.transpose();
}

Bandwidth scott_bandwidth(const Matrix& points) {
  require_2d(points, "KDE points");
  if (points.rows() < 2) throw DegenerateDataError("KDE needs at least 2 points");
  const double n = static_cast<double>(points.rows());
  const double factor = std::pow(n, -1.0 / 6.0);
  Bandwidth h;
  for (int c = 0; c < 2; ++c) {
    const double mean = points.col(c).mean();
    const double var = (points.col(c).array() - mean).square().sum() / (n - 1.0);
    if (!(var > 0.0)) throw DegenerateDataError("zero variance in KDE coordinate " + std::to_string(c));
    (c == 0 ? h.hx : h.hy) = factor * std::sqrt(var);
  }
  return h;
}

Box joint_box(const std::vector<const Matrix*>& sets, double pad_x, double pad_y) {
  Box b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Matrix* s : sets) {
    require_2d(*s, "point set");
    b.x0 = std::min(b.x0, s->col(0).minCoeff());
    b.x1 = std::max(b.x1, s->col(0).maxCoeff());
    b.y0 = std::min(b.y0, s->col(1).minCoeff());
    b.y1 = std::max(b.y1, s->col(1).maxCoeff());
  }
  b.x0 -= pad_x;
  b.x1 += pad_x;
  b.y0 -= pad_y;
  b.y1 += pad_y;
  return b;
}

double DensityGrid::cell_area() const {
  return (bounds.x1 - bounds.x0) / g * (bounds.y1 - bounds.y0) / g;
}

double DensityGrid::x_center(int i) const { return bounds.x0 + (i + 0.5) * (bounds.x1 - bounds.x0) / g; }
double DensityGrid::y_center(int j) const { return bounds.y0 + (j + 0.5) * (bounds.y1 - bounds.y0) / g; }
double DensityGrid::mass() const { return values.sum() * cell_area(); }

DensityGrid kde_density(const Matrix& points, const Box& bounds, int g) {
  if (points.rows() < 10) throw DataError("KDE needs at least 10 points");
  return kde_with_bandwidth(points, bounds, g, scott_bandwidth(points));
}

DensityGrid kde_density(const Matrix& points, int g) {
  if (points.rows() < 10) throw DataError("KDE needs at least 10 points");
  const Bandwidth h = scott_bandwidth(points);
  return kde_with_bandwidth(points, joint_box({&points}, 3.0 * h.hx, 3.0 * h.hy), g, h);
}

double jsd_grids(const DensityGrid& p, const DensityGrid& q) {
  if (p.g != q.g || p.values.rows() != q.values.rows() || p.values.cols() != q.values.cols()) {
    throw ShapeError("JSD grids differ in resolution");
  }
  const double sp = p.values.sum();
  const double sq = q.values.sum();
  if (!(sp > 0.0) || !(sq > 0.0)) throw DegenerateDataError("KDE grid carries no mass");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (Eigen::Index i = 0; i < p.values.size(); ++i) {
    const double a = p.values.data()[i] / sp;
    const double b = q.values.data()[i] / sq;
    const double m = std::max(0.5 * (a + b), 1e-12);
    if (a > 0.0) kl_p += a * std::log(a / m);
    if (b > 0.0) kl_q += b * std::log(b / m);
  }
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, std::numbers::ln2);
}

double jsd(const Matrix& p, const Matrix& q, int g) {
  require_2d(p, "first JSD sample");
  require_2d(q, "second JSD sample");
  if (p.rows() < 10 || q.rows() < 10) throw DataError("JSD needs at least 10 points per sample");
  const Bandwidth hp = scott_bandwidth(p);
  const Bandwidth hq = scott_bandwidth(q);
  const double pad_x = 3.0 * std::max(hp.hx, hq.hx);
  const double pad_y = 3.0 * std::max(hp.hy, hq.hy);
  const Box box = joint_box({&p, &q}, pad_x, pad_y);
  return jsd_grids(kde_with_bandwidth(p, box, g, hp), kde_with_bandwidth(q, box, g, hq));
}

MdsEmbedding mds_from_squared_distances(const Matrix& sq) {
  if (sq.rows() != sq.cols()) throw ShapeError("distance matrix must be square");
  const Eigen::Index k = sq.rows();
  if (k < 3) throw DataError("MDS needs at least 3 samples");
  const Matrix J = Matrix::Identity(k, k) - Matrix::Constant(k, k, 1.0 / static_cast<double>(k));
  const Matrix B = -0.5 * J * sq * J;

  MdsEmbedding out;
  out.coords = Matrix::Zero(k, 2);
  const double scale = B.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) {
    out.eigenvalues = Vector::Zero(k);
    return out;
  }
  const SymmetricEigen eig = jacobi_eigen(B);
  out.eigenvalues = eig.values;
  const double floor = 1e-10 * std::max(eig.values[0], 0.0);
  for (int c = 0; c < 2 && c < k; ++c) {
    if (!(eig.values[c] > floor)) break;
    Vector axis = eig.vectors.col(c);
    flip_to_positive_peak(axis);
    out.coords.col(c) = std::sqrt(eig.values[c]) * axis;
    out.dims = c + 1;
  }
  return out;
}

MdsEmbedding mds_embed(const std::vector<ParamVector>& samples) {
  if (samples.size() < 3) throw DataError("MDS needs at least 3 weight samples");
  const auto k = static_cast<Eigen::Index>(samples.size());
  for (const ParamVector& s : samples) {
    if (!(s.spec == samples.front().spec) || s.size() != samples.front().size()) {
      throw ShapeError("MDS weight samples must share one network spec");
    }
  }
  Matrix sq = Matrix::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const double d = (samples[static_cast<std::size_t>(a)].values - samples[static_cast<std::size_t>(b)].values).squaredNorm();
      sq(a, b) = d;
      sq(b, a) = d;
    }
  }
  return mds_from_squared_distances(sq);
}

double mean_silhouette(const Matrix& coords, const std::vector<int>& labels, int k) {
  const Eigen::Index n = coords.rows();
  if (k < 2) return 0.0;
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  double total = 0.0;
  std::vector<double> sum_to(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(own)] < 2) continue;
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) sum_to[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += std::sqrt(squared_distance(coords, i, j));
    }
    const double a = sum_to[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own && sizes[static_cast<std::size_t>(c)] > 0) b = std::min(b, sum_to[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)]);
    }
    const double denom = std::max(a, b);
    if (denom > 0.0 && std::isfinite(b)) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

ClusterResult cluster_count(const Matrix& coords, std::uint64_t seed) {
  if (coords.rows() < 4) throw DataError("cluster_count needs at least 4 points");
  if (!coords.allFinite()) throw NumericError("cluster_count input contains non-finite values");
  const int n = static_cast<int>(coords.rows());
  const int k_max = std::min(6, n / 2);

  ClusterResult out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  out.per_k_silhouette.push_back(0.0);
  double best_score = kSingleClusterSilhouette;
  for (int k = 2; k <= k_max; ++k) {
    Stream stream = Stream(seed).split(static_cast<std::uint64_t>(k));
    KMeansFit best;
    for (int restart = 0; restart < 20; ++restart) {
      KMeansFit fit = kmeans_once(coords, k, stream);
      if (fit.inertia < best.inertia) best = std::move(fit);
    }
    const double s = mean_silhouette(coords, best.labels, k);
    out.per_k_silhouette.push_back(s);
    if (s > best_score) {
      best_score = s;
      out.k_best = k;
      out.silhouette = s;
      out.labels = best.labels;
    }
  }
  return out;
}

}  // namespace bgan
