#include <doctest.h>

#include "bgan/errors.hpp"
#include "bgan/predict.hpp"
#include "support.hpp"

using namespace bgan;
using bgan::test::Gen;

namespace {

NetworkSpec head(int in, int K) { return NetworkSpec{{in, 5, K + 1}, Activation::relu, OutputHead::softmax}; }

// Softmax over classes 1..K only, from straight-line logits.
Matrix oracle_single(const ParamVector& p, int K, const Matrix& x) {
  const Matrix l = test::naive_logits(p, x);
  Matrix out(x.rows(), K);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto s = test::softmax_row(l, i);
    double real = 0;
    for (int k = 1; k <= K; ++k) real += s[static_cast<std::size_t>(k)];
    for (int k = 1; k <= K; ++k) out(i, k - 1) = s[static_cast<std::size_t>(k)] / real;
  }
  return out;
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("identical samples give the single-sample prediction") {
  Gen g(1);
  const ParamVector p = g.params(head(3, 4));
  const Matrix x = g.matrix(6, 3);
  const Matrix one = predict_single(p, 4, x);
  const Matrix bma = predict_bma({{p, p, p}, 4}, x);
  CHECK((bma - one).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("two opposite predictors average to one half") {
  // Linear K = 2 heads with fixed logits (0, 0, 50) and (0, 50, 0) via biases.
  Vector a = Vector::Zero(2 * 3 + 3), b = a;
  a[8] = 50;
  b[7] = 50;
  const NetworkSpec s{{2, 3}, Activation::relu, OutputHead::softmax};
  const Matrix p = predict_bma({{ParamVector(s, a), ParamVector(s, b)}, 2}, Matrix::Zero(1, 2));
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("BMA equals the mean of independently computed predictions") {
  Gen g(2);
  for (int rep = 0; rep < 10; ++rep) {
    const int K = g.integer(1, 4), T = g.integer(1, 6);
    Predictor pr{{}, K};
    Matrix expect = Matrix::Zero(7, K);
    const Matrix x = g.matrix(7, 3);
    for (int t = 0; t < T; ++t) {
      pr.disc_samples.push_back(g.params(head(3, K)));
      expect += oracle_single(pr.disc_samples.back(), K, x);
    }
    expect /= T;
    const Matrix got = predict_bma(pr, x);
    CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-12);
    for (Eigen::Index i = 0; i < got.rows(); ++i) {
      CHECK(std::abs(got.row(i).sum() - 1) <= 1e-12);
      CHECK(got.row(i).minCoeff() >= 0);
    }
  }
}

TEST_CASE("averaging is permutation invariant and duplicates reweight") {
  Gen g(3);
  Predictor pr{{}, 3};
  for (int t = 0; t < 4; ++t) pr.disc_samples.push_back(g.params(head(2, 3)));
  const Matrix x = g.matrix(5, 2);
  const Matrix base = predict_bma(pr, x);
  Predictor rev = pr;
  std::reverse(rev.disc_samples.begin(), rev.disc_samples.end());
  CHECK((predict_bma(rev, x) - base).cwiseAbs().maxCoeff() <= 1e-14);
  Predictor dup = pr;
  dup.disc_samples.push_back(pr.disc_samples[1]);
  const Matrix expect = (4 * base + predict_single(pr.disc_samples[1], 3, x)) / 5;
  CHECK((predict_bma(dup, x) - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("predictor errors") {
  CHECK_THROWS_AS(predict_bma({{}, 2}, Matrix::Zero(1, 2)), ConfigError);
  Gen g(4);
  CHECK_THROWS_AS(predict_bma({{g.params(head(2, 3))}, 2}, Matrix::Zero(1, 2)), ShapeError);
  CHECK_THROWS_AS(predict_bma({{g.params(head(2, 3))}, 3}, Matrix::Zero(1, 5)), ShapeError);
}

TEST_CASE("perfect predictor has zero error; ties go to class 1") {
  Matrix probs(4, 2);
  probs << 1, 0, 0, 1, 1, 0, 0, 1;
  const ErrorStats e = classification_error(probs, {1, 2, 1, 2});
  CHECK(e.rate == 0.0);
  CHECK(e.misclassified == 0);
  const ErrorStats u = classification_error(Matrix::Constant(10, 2, 0.5), {1, 2, 2, 2, 1, 1, 2, 1, 2, 2});
  CHECK(u.misclassified == 6);
  CHECK(u.rate == doctest::Approx(0.6));
  CHECK_THROWS_AS(classification_error(probs, {1, 2, 3, 1}), DataError);
}

TEST_CASE("hand-built linear K = 3 predictor against enumeration") {
  // logits = (0, x0, x1, -x0 - x1): class 1 wins when x0 is the largest of (x0, x1, -x0-x1).
  Vector w = Vector::Zero(2 * 4 + 4);
  w[2] = 1;   // W(0, 1)
  w[5] = 1;   // W(1, 2)
  w[6] = -1;  // W(0, 3)
  w[7] = -1;  // W(1, 3)
  const ParamVector p(NetworkSpec{{2, 4}, Activation::relu, OutputHead::softmax}, w);
  Matrix x(20, 2);
  std::vector<int> labels;
  int expect_wrong = 0;
  Gen g(5);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = g.integer(-3, 3) + 0.25;
    x(i, 1) = g.integer(-3, 3) - 0.125;
    const double s[3] = {x(i, 0), x(i, 1), -x(i, 0) - x(i, 1)};
    const int truth = 1 + static_cast<int>(std::max_element(s, s + 3) - s);
    labels.push_back(i % 3 == 0 ? 1 + (truth % 3) : truth);
    if (i % 3 == 0) ++expect_wrong;
  }
  const ErrorStats e = test_error({{p}, 3}, x, labels);
  CHECK(e.misclassified == expect_wrong);
  CHECK(e.total == 20);
}

}  // TEST_SUITE
