#pragma once

// Shared test helpers: hand-rolled random generators on std::mt19937_64
// (independent of the library's own stream) and straight-line oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bgan/netcore.hpp"

namespace bgan::test {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

  Matrix matrix(Eigen::Index r, Eigen::Index c, double sd = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(sd);
    return m;
  }

  Vector vector(Eigen::Index n, double sd = 1.0) { return matrix(n, 1, sd).col(0); }

  /// Small random layer sizes: in, 1-2 hidden layers, out.
  NetworkSpec spec(int in, int out, OutputHead head) {
    NetworkSpec s;
    s.layer_sizes.push_back(in);
    const int hidden = integer(1, 2);
    for (int h = 0; h < hidden; ++h) s.layer_sizes.push_back(integer(2, 6));
    s.layer_sizes.push_back(out);
    s.output_head = head;
    return s;
  }

  ParamVector params(const NetworkSpec& s, double sd = 0.7) { return {s, vector(s.param_count(), sd)}; }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Pre-head outputs by explicit loops over the flat layout
/// [W_1 (in x out, column-major), b_1, ...].
inline Matrix naive_logits(const ParamVector& p, const Matrix& x) {
  const auto& sizes = p.spec.layer_sizes;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) rows[static_cast<std::size_t>(r)].push_back(x(r, c));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const Eigen::Index w0 = off, b0 = off + static_cast<Eigen::Index>(in) * out;
    const bool last = l + 2 == sizes.size();
    for (auto& row : rows) {
      std::vector<double> next(static_cast<std::size_t>(out));
      for (int o = 0; o < out; ++o) {
        double acc = p.values[b0 + o];
        for (int i = 0; i < in; ++i) acc += row[static_cast<std::size_t>(i)] * p.values[w0 + i + static_cast<Eigen::Index>(o) * in];
        next[static_cast<std::size_t>(o)] = last ? acc : std::max(acc, 0.0);
      }
      row = next;
    }
    off = b0 + out;
  }
  Matrix out(x.rows(), sizes.back());
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return out;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }
inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Softmax of one row by the textbook formula.
inline std::vector<double> softmax_row(const Matrix& logits, Eigen::Index r) {
  double mx = logits(r, 0);
  for (Eigen::Index c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
  std::vector<double> e;
  double s = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    e.push_back(std::exp(logits(r, c) - mx));
    s += e.back();
  }
  for (double& v : e) v /= s;
  return e;
}

inline double naive_log_prior(const Vector& theta, double sigma) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) sq += theta[i] * theta[i];
  return -sq / (2 * sigma * sigma) - 0.5 * static_cast<double>(theta.size()) * std::log(2 * M_PI * sigma * sigma);
}

/// Central finite-difference gradient of f at theta.
template <class F>
Vector fd_gradient(F&& f, const Vector& theta, double h = 1e-5) {
  Vector g(theta.size());
  Vector t = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    t[i] = theta[i] + h;
    const double up = f(t);
    t[i] = theta[i] - h;
    const double down = f(t);
    t[i] = theta[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_rel_error(const Vector& a, const Vector& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double den = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / den);
  }
  return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bgan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bgan::test
