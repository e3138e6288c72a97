#pragma once

// Bayesian model averaging over discriminator samples for classification.
// Each sample's (K+1)-way softmax is renormalized over the real classes 1..K
// (the generated class is dropped at test time) and the T distributions are
// averaged.

#include <vector>

#include "bgan/netcore.hpp"

namespace bgan {

struct Predictor {
  std::vector<ParamVector> disc_samples;
  int K = 0;

  void validate() const;
};

/// n x K matrix; column c holds p(y = c + 1 | x).
Matrix predict_bma(const Predictor& predictor, const Matrix& x);

/// Class distribution of a single discriminator sample, renormalized over 1..K.
Matrix predict_single(const ParamVector& disc, int K, const Matrix& x);

struct ErrorStats {
  double rate = 0.0;
  long misclassified = 0;
  long total = 0;
};

/// Argmax (ties to the smallest class) of `probs` against labels in 1..K.
ErrorStats classification_error(const Matrix& probs, const std::vector<int>& labels);

ErrorStats test_error(const Predictor& predictor, const Matrix& x, const std::vector<int>& labels);

}  // namespace bgan
