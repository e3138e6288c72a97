#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "bgan/datagen.hpp"
#include "bgan/errors.hpp"
#include "bgan/eval.hpp"
#include "bgan/linalg.hpp"
#include "support.hpp"

using namespace bgan;
using bgan::test::Gen;

namespace {

Matrix blob(Gen& g, int n, double cx, double cy, double sd) {
  Matrix m = g.matrix(n, 2, sd);
  m.col(0).array() += cx;
  m.col(1).array() += cy;
  return m;
}

Matrix stack(const std::vector<Matrix>& parts) {
  Eigen::Index rows = 0;
  for (const Matrix& p : parts) rows += p.rows();
  Matrix out(rows, parts.front().cols());
  Eigen::Index r = 0;
  for (const Matrix& p : parts) {
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

Matrix pairwise(const Matrix& pts) {
  Matrix d(pts.rows(), pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < pts.rows(); ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  return d;
}

// JSD between two isotropic 2-D Gaussians by midpoint quadrature.
double gaussian_jsd_quadrature(double mx, double var_p, double var_q, int cells) {
  const double lo = -10, hi = 11, step = (hi - lo) / cells;
  auto pdf = [](double x, double y, double cx, double var) {
    return std::exp(-((x - cx) * (x - cx) + y * y) / (2 * var)) / (2 * M_PI * var);
  };
  double kl_p = 0, kl_q = 0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j) {
      const double x = lo + (i + 0.5) * step, y = lo + (j + 0.5) * step;
      const double p = pdf(x, y, 0, var_p), q = pdf(x, y, mx, var_q), m = 0.5 * (p + q);
      if (p > 0) kl_p += p * std::log(p / m) * step * step;
      if (q > 0) kl_q += q * std::log(q / m) * step * step;
    }
  return 0.5 * (kl_p + kl_q);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("Jacobi eigendecomposition matches an independent solver") {
  Gen g(1);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = g.integer(2, 12);
    const Matrix a = g.matrix(n, n);
    const Matrix s = a + a.transpose();
    const SymmetricEigen ours = jacobi_eigen(s);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(s);
    for (int i = 0; i < n; ++i) CHECK(std::abs(ours.values[i] - ref.eigenvalues()[n - 1 - i]) < 1e-10);
    CHECK((s * ours.vectors - ours.vectors * ours.values.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ours.vectors.transpose() * ours.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("PCA of full-rank 2-D data is an isometry") {
  Gen g(2);
  Matrix x = g.matrix(40, 2);
  x.col(0) *= 3;
  const Projection2D p = pca_fit(x);
  const Matrix y = pca_apply(p, x);
  CHECK((pairwise(y) - pairwise(x)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("PCA components match an independent eigensolver") {
  Gen g(3);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix x = g.matrix(200, 6);
    x.col(0) *= 5;
    x.col(2) *= 3;
    x.col(1) += 0.5 * x.col(0);
    const Projection2D p = pca_fit(x);
    const Matrix c = x.rowwise() - x.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Matrix> ref(c.transpose() * c);
    for (int k = 0; k < 2; ++k) {
      const Vector e = ref.eigenvectors().col(5 - k);
      CHECK(std::abs(std::abs(p.components.row(k).dot(e)) - 1) < 1e-10);
      Eigen::Index at;
      p.components.row(k).cwiseAbs().maxCoeff(&at);
      CHECK(p.components(k, at) > 0);
    }
    const double total = ref.eigenvalues().sum();
    CHECK(p.explained_variance_ratio[0] == doctest::Approx(ref.eigenvalues()[5] / total).epsilon(1e-10));
  }
}

TEST_CASE("PCA aligns with the axes of an axis-aligned anisotropic cloud") {
  // Symmetric point set with an exactly diagonal covariance.
  const double scales[3] = {1.0, 4.0, 2.0};
  Matrix x(6, 3);
  x.setZero();
  for (int k = 0; k < 3; ++k) {
    x(2 * k, k) = scales[k];
    x(2 * k + 1, k) = -scales[k];
  }
  const Projection2D p = pca_fit(x);
  CHECK(std::acos(std::min(1.0, std::abs(p.components(0, 1)))) < 1e-6);
  CHECK(std::acos(std::min(1.0, std::abs(p.components(1, 2)))) < 1e-6);
}

TEST_CASE("synthetic data is explained by two components") {
  SyntheticSpec spec;
  spec.n = 5000;
  const Projection2D p = pca_fit(gen_synthetic(spec).data.x);
  CHECK(p.explained_variance_ratio[0] + p.explained_variance_ratio[1] >= 0.99);
}

TEST_CASE("projection never lengthens a centred vector") {
  Gen g(4);
  const Matrix x = g.matrix(50, 7);
  const Projection2D p = pca_fit(x);
  const Matrix q = g.matrix(30, 7, 3.0);
  const Matrix y = pca_apply(p, q);
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    CHECK(y.row(i).norm() <= (q.row(i).transpose() - p.mean).norm() + 1e-10);
}

TEST_CASE("PCA rejects rank-0 data") {
  CHECK_THROWS_AS(pca_fit(Matrix::Constant(10, 4, 2.0)), DegenerateDataError);
}

TEST_CASE("KDE: tight cluster peak, unit mass, degenerate input") {
  Gen g(5);
  const Matrix pts = blob(g, 500, 2.0, -1.0, 0.05);
  const Box box{-5, 5, -5, 5};
  const DensityGrid d = kde_density(pts, box);
  Eigen::Index i, j;
  d.values.maxCoeff(&i, &j);
  CHECK(std::abs(d.x_center(static_cast<int>(i)) - 2.0) <= 0.1);
  CHECK(std::abs(d.y_center(static_cast<int>(j)) + 1.0) <= 0.1);
  CHECK(std::abs(kde_density(g.matrix(1000, 2)).mass() - 1) < 0.02);
  CHECK(std::abs(d.mass() - 1) < 0.02);
  Matrix flat = g.matrix(20, 2);
  flat.col(1).setConstant(3.0);
  CHECK_THROWS_AS(kde_density(flat), DegenerateDataError);
}

TEST_CASE("KDE at the origin matches the smoothed normal density") {
  Gen g(6);
  const Matrix pts = g.matrix(20000, 2);
  const Bandwidth h = scott_bandwidth(pts);
  const DensityGrid d = kde_density(pts, Box{-0.5, 0.5, -0.5, 0.5}, 101);
  const double at0 = d.values(50, 50);
  const double expect = 1 / (2 * M_PI * std::sqrt((1 + h.hx * h.hx) * (1 + h.hy * h.hy)));
  CHECK(std::abs(at0 / expect - 1) < 0.1);
}

TEST_CASE("JSD: identical sets, symmetry, range") {
  Gen g(7);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix p = blob(g, 300, g.uniform(-2, 2), 0, g.uniform(0.2, 2));
    const Matrix q = blob(g, 200, g.uniform(-2, 2), 1, g.uniform(0.2, 2));
    CHECK(jsd(p, p) == 0.0);
    const double a = jsd(p, q), b = jsd(q, p);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= std::log(2.0));
  }
}

TEST_CASE("JSD of far-separated clusters is close to ln 2") {
  Gen g(8);
  const Matrix p = blob(g, 1000, 0, 0, 0.1), q = blob(g, 1000, 50, 50, 0.1);
  CHECK(std::abs(jsd(p, q) / std::log(2.0) - 1) <= 0.05);
}

TEST_CASE("JSD of two unit Gaussians matches quadrature of the smoothed pair") {
  Gen g(9);
  const int n = 10000;
  const Matrix p = g.matrix(n, 2), q = blob(g, n, 1.0, 0.0, 1.0);
  const Bandwidth hp = scott_bandwidth(p), hq = scott_bandwidth(q);
  const double h2p = 0.5 * (hp.hx * hp.hx + hp.hy * hp.hy), h2q = 0.5 * (hq.hx * hq.hx + hq.hy * hq.hy);
  const double oracle = gaussian_jsd_quadrature(1.0, 1 + h2p, 1 + h2q, 1200);
  CHECK(std::abs(jsd(p, q) / oracle - 1) < 0.1);
}

TEST_CASE("MDS recovers an embeddable right triangle") {
  Gen g(10);
  const NetworkSpec s{{9, 10}};
  const Vector base = g.vector(100), u = g.vector(100).normalized();
  Vector w = g.vector(100);
  w = (w - w.dot(u) * u).normalized();
  const std::vector<ParamVector> pts{{s, base}, {s, base + 3 * u}, {s, base + 4 * w}};
  const MdsEmbedding e = mds_embed(pts);
  CHECK(e.dims == 2);
  Matrix orig(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) orig(i, j) = (pts[static_cast<std::size_t>(i)].values - pts[static_cast<std::size_t>(j)].values).norm();
  CHECK((pairwise(e.coords) - orig).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("MDS of identical samples is all zeros") {
  const NetworkSpec s{{3, 2}};
  const ParamVector p(s, Vector::Constant(8, 0.5));
  const MdsEmbedding e = mds_embed({p, p, p, p});
  CHECK(e.dims == 0);
  CHECK(e.coords.isZero(0.0));
}

TEST_CASE("MDS of random points matches an independent eigensolver") {
  Gen g(11);
  const NetworkSpec s{{9, 10}};
  std::vector<ParamVector> pts;
  Matrix X(5, 100);
  for (int i = 0; i < 5; ++i) {
    pts.push_back({s, g.vector(100)});
    X.row(i) = pts.back().values.transpose();
  }
  Matrix sq(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) sq(i, j) = (X.row(i) - X.row(j)).squaredNorm();
  const Matrix J = Matrix::Identity(5, 5) - Matrix::Constant(5, 5, 0.2);
  const Matrix B = -0.5 * J * sq * J;
  Eigen::SelfAdjointEigenSolver<Matrix> ref(B);
  Matrix oracle(5, 2);
  for (int k = 0; k < 2; ++k) oracle.col(k) = ref.eigenvectors().col(4 - k) * std::sqrt(ref.eigenvalues()[4 - k]);
  const MdsEmbedding e = mds_embed(pts);
  CHECK((pairwise(e.coords) - pairwise(oracle)).cwiseAbs().maxCoeff() < 1e-6);

  std::vector<ParamVector> shifted = pts;
  const Vector c = g.vector(100, 10.0);
  for (ParamVector& p : shifted) p.values += c;
  CHECK((pairwise(mds_embed(shifted).coords) - pairwise(e.coords)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("cluster_count: two separated blobs") {
  Gen g(12);
  const Matrix c = stack({blob(g, 15, 0, 0, 0.3), blob(g, 15, 10, 0, 0.3)});
  const ClusterResult r = cluster_count(c, 1);
  CHECK(r.k_best == 2);
  CHECK(r.silhouette > 0.7);
}

TEST_CASE("cluster_count: one isotropic blob") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Gen g(100 + s);
    CHECK(cluster_count(g.matrix(40, 2), s).k_best == 1);
  }
}

TEST_CASE("cluster_count: three blobs at triangle vertices") {
  Gen g(13);
  const Matrix c = stack({blob(g, 10, 0, 0, 1), blob(g, 10, 10, 0, 1), blob(g, 10, 5, 8.66, 1)});
  CHECK(cluster_count(c, 2).k_best == 3);
}

TEST_CASE("cluster_count is rotation invariant") {
  Gen g(14);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix c = stack({blob(g, 8, 0, 0, 1), blob(g, 8, g.uniform(3, 8), g.uniform(-3, 3), 1),
                            blob(g, 8, -4, g.uniform(2, 6), 1)});
    const double t = g.uniform(0, 2 * M_PI);
    Matrix rot(2, 2);
    rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    const ClusterResult a = cluster_count(c, 3), b = cluster_count(c * rot.transpose(), 3);
    CHECK(a.k_best == b.k_best);
    CHECK(a.silhouette == doctest::Approx(b.silhouette).epsilon(1e-9));
  }
}

TEST_CASE("mean silhouette of a hand-checked labelling") {
  Matrix c(4, 2);
  c << 0, 0, 1, 0, 10, 0, 11, 0;
  // a = 1 for every point; b = 10.5, 9.5, 9.5, 10.5
  const double expect = (2 * (9.5 / 10.5) + 2 * (8.5 / 9.5)) / 4;
  CHECK(mean_silhouette(c, {0, 0, 1, 1}, 2) == doctest::Approx(expect).epsilon(1e-12));
}

}  // TEST_SUITE
