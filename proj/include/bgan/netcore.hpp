#pragma once

// Dense feed-forward networks with hand-written reverse-mode gradients.
//
// A network is a chain of affine layers with ReLU between them and a
// configurable output head. Parameters live in one flat vector laid out
// layer by layer as [W_1 (in x out, column-major), b_1, W_2, b_2, ...], so
// that samplers and optimizers can treat them as a single point in R^P.
// Batches are row-per-sample matrices.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bgan {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

enum class Activation { relu };
enum class OutputHead { linear, sigmoid, softmax };

std::string to_string(OutputHead head);
OutputHead parse_output_head(const std::string& name);

struct NetworkSpec {
  std::vector<int> layer_sizes;
  Activation hidden_activation = Activation::relu;
  OutputHead output_head = OutputHead::linear;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  /// Sum over layers of in*out + out.
  Eigen::Index param_count() const;
  /// Throws ConfigError unless there are >= 2 sizes, all >= 1.
  void validate() const;
  std::string describe() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Flat weight vector of one network.
struct ParamVector {
  NetworkSpec spec;
  Vector values;

  ParamVector() = default;
  ParamVector(NetworkSpec s, Vector v);
  /// Zero parameters for `s`.
  explicit ParamVector(NetworkSpec s);

  Eigen::Index size() const { return values.size(); }
  bool all_finite() const { return values.allFinite(); }
};

/// Same spec and exactly equal values.
bool operator==(const ParamVector& a, const ParamVector& b);

/// Exact equality for vectors/matrices of possibly different shapes.
bool same_values(const Matrix& a, const Matrix& b);
bool same_values(const Vector& a, const Vector& b);

enum class InitKind { he, prior };

struct InitSpec {
  InitKind kind = InitKind::he;
  double sigma = 1.0;  // prior init only

  static InitSpec he() { return {InitKind::he, 0.0}; }
  static InitSpec prior(double sigma) { return {InitKind::prior, sigma}; }
};

/// He: weights ~ N(0, 2/fan_in), biases 0. Prior: every entry ~ N(0, sigma^2).
ParamVector init_params(const NetworkSpec& spec, const InitSpec& init, std::uint64_t seed);

/// Per-layer activations recorded by a forward pass; needed by backward().
struct ForwardTrace {
  /// activations[0] is the input, activations[l] the post-ReLU output of hidden
  /// layer l, activations.back() the pre-head output ("logits").
  std::vector<Matrix> activations;

  const Matrix& logits() const { return activations.back(); }
};

ForwardTrace forward_trace(const ParamVector& params, const Matrix& batch);

/// Applies the output head to pre-head outputs. Sigmoid outputs are clamped to
/// [kProbFloor, 1 - kProbFloor]; softmax uses max subtraction.
Matrix apply_head(OutputHead head, const Matrix& logits);

/// Network output for a batch (n x out).
Matrix forward(const ParamVector& params, const Matrix& batch);

/// Back-propagates d(objective)/d(logits). Either output may be null.
/// `param_grad`, when given, is accumulated into (it must already be sized).
void backward(const ParamVector& params, const ForwardTrace& trace, const Matrix& d_logits,
              Vector* param_grad, Matrix* input_grad);

/// Scalar objectives on the pre-head outputs. Every kind is a sum over batch
/// rows multiplied by `scale`.
enum class LossKind {
  constant,          // value = constant, gradient 0
  log_prob_real,     // sum log D(x),      D = sigmoid(logit)
  log_prob_fake,     // sum log(1 - D(x))
  log_softmax_class, // sum log p_{labels[i]}(x_i)
  log_not_fake,      // sum log(sum_{y>=1} p_y(x_i)) = log(1 - p_0)
  log_fake,          // sum log p_0(x_i)
  squared_error,     // (1/n) sum ||logits_i - targets_i||^2
};

struct LossSpec {
  LossKind kind = LossKind::constant;
  double scale = 1.0;
  double constant = 0.0;
  std::vector<int> labels;  // log_softmax_class
  Matrix targets;           // squared_error

  static LossSpec constant_value(double c) { return {LossKind::constant, 1.0, c, {}, {}}; }
  static LossSpec of(LossKind kind, double scale = 1.0) { return {kind, scale, 0.0, {}, {}}; }
  static LossSpec classes(std::vector<int> labels, double scale = 1.0) {
    return {LossKind::log_softmax_class, scale, 0.0, std::move(labels), {}};
  }
  static LossSpec squared(Matrix targets) {
    return {LossKind::squared_error, 1.0, 0.0, {}, std::move(targets)};
  }
};

/// Value of `loss` at `logits`; writes d(value)/d(logits) when `d_logits` is
/// non-null. Clamped probabilities contribute zero gradient.
double evaluate_loss(const LossSpec& loss, const Matrix& logits, Matrix* d_logits);

struct ValueGrad {
  double value = 0.0;
  Vector grad;
};

/// Objective value and its gradient with respect to the parameters.
ValueGrad loss_grad(const ParamVector& params, const Matrix& batch, const LossSpec& loss);

/// Gradient of the objective with respect to the input batch.
Matrix grad_wrt_input(const ParamVector& params, const Matrix& batch, const LossSpec& loss);

}  // namespace bgan
