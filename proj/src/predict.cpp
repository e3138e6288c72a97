#include "bgan/predict.hpp"

#include <cmath>

#include "bgan/errors.hpp"

namespace bgan {

void Predictor::validate() const {
  if (disc_samples.empty()) throw ConfigError("predictor needs at least one discriminator sample");
  if (K < 1) throw ConfigError("predictor needs K >= 1");
  const NetworkSpec& spec = disc_samples.front().spec;
  for (const ParamVector& s : disc_samples) {
    if (s.spec != spec) throw ConfigError("discriminator samples have differing network specs");
  }
  if (spec.output_size() != K + 1) {
    throw ShapeError("discriminator has " + std::to_string(spec.output_size()) + " outputs, expected K+1 = " +
                     std::to_string(K + 1));
  }
}

Matrix predict_single(const ParamVector& disc, int K, const Matrix& x) {
  const Matrix logits = forward_trace(disc, x).logits();
  if (logits.cols() != K + 1) throw ShapeError("discriminator output is not K+1 wide");
  // softmax over columns 1..K only, which equals renormalizing the full softmax
  Matrix probs(x.rows(), K);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto real = logits.row(i).tail(K);
    const double mx = real.maxCoeff();
    probs.row(i) = (real.array() - mx).exp();
    probs.row(i) /= probs.row(i).sum();
  }
  return probs;
}

Matrix predict_bma(const Predictor& predictor, const Matrix& x) {
  predictor.validate();
  if (x.cols() != predictor.disc_samples.front().spec.input_size()) {
    throw ShapeError("feature dimension does not match the discriminator input");
  }
  Matrix sum = Matrix::Zero(x.rows(), predictor.K);
  for (const ParamVector& s : predictor.disc_samples) sum += predict_single(s, predictor.K, x);
  return sum / static_cast<double>(predictor.disc_samples.size());
}

ErrorStats classification_error(const Matrix& probs, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) throw ShapeError("label count does not match predictions");
  ErrorStats stats;
  stats.total = static_cast<long>(labels.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 1 || y > probs.cols()) throw DataError("label " + std::to_string(y) + " outside 1.." + std::to_string(probs.cols()));
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    if (best + 1 != y) ++stats.misclassified;
  }
  stats.rate = stats.total ? static_cast<double>(stats.misclassified) / static_cast<double>(stats.total) : 0.0;
  return stats;
}

ErrorStats test_error(const Predictor& predictor, const Matrix& x, const std::vector<int>& labels) {
  return classification_error(predict_bma(predictor, x), labels);
}

}  // namespace bgan
