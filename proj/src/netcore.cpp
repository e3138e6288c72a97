#include "bgan/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bgan/errors.hpp"
#include "bgan/random.hpp"

namespace bgan {
namespace {

using ConstMatMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MatMap = Eigen::Map<Matrix>;
using VecMap = Eigen::Map<Vector>;

struct LayerView {
  Eigen::Index w_offset;
  Eigen::Index b_offset;
  int in;
  int out;
};

std::vector<LayerView> layer_views(const NetworkSpec& spec) {
  std::vector<LayerView> views;
  views.reserve(spec.layer_sizes.size());
  Eigen::Index offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    views.push_back({offset, offset + Eigen::Index{in} * out, in, out});
    offset += Eigen::Index{in} * out + out;
  }
  return views;
}

void check_params(const ParamVector& params) {
  params.spec.validate();
  if (params.values.size() != params.spec.param_count()) {
    throw ShapeError("parameter vector has " + std::to_string(params.values.size()) +
                     " entries, network " + params.spec.describe() + " needs " +
                     std::to_string(params.spec.param_count()));
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double row_logsumexp(const Matrix& logits, Eigen::Index row, Eigen::Index first_col) {
  const auto r = logits.row(row).tail(logits.cols() - first_col);
  const double mx = r.maxCoeff();
  return mx + std::log((r.array() - mx).exp().sum());
}

const double kLogFloor = std::log(kProbFloor);
const double kLogCeil = std::log1p(-kProbFloor);

void require_cols(const Matrix& logits, Eigen::Index cols, bool at_least, const char* what) {
  if (at_least ? logits.cols() < cols : logits.cols() != cols) {
    throw ShapeError(std::string(what) + ": network has " + std::to_string(logits.cols()) +
                     " outputs, expected " + (at_least ? "at least " : "") + std::to_string(cols));
  }
}

}  // namespace

std::string to_string(OutputHead head) {
  switch (head) {
    case OutputHead::linear: return "linear";
    case OutputHead::sigmoid: return "sigmoid";
    case OutputHead::softmax: return "softmax";
  }
  return "?";
}

OutputHead parse_output_head(const std::string& name) {
  if (name == "linear") return OutputHead::linear;
  if (name == "sigmoid") return OutputHead::sigmoid;
  if (name == "softmax") return OutputHead::softmax;
  throw ConfigError("unknown output head '" + name + "'");
}

Eigen::Index NetworkSpec::param_count() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    total += Eigen::Index{layer_sizes[l]} * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return total;
}

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("network needs at least an input and an output layer");
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("layer sizes must be >= 1, got " + describe());
  }
}

std::string NetworkSpec::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) os << (i ? "-" : "") << layer_sizes[i];
  os << " (" << to_string(output_head) << ")";
  return os.str();
}

ParamVector::ParamVector(NetworkSpec s, Vector v) : spec(std::move(s)), values(std::move(v)) {
  check_params(*this);
}

ParamVector::ParamVector(NetworkSpec s) : spec(std::move(s)) {
  spec.validate();
  values = Vector::Zero(spec.param_count());
}

bool same_values(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool same_values(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool operator==(const ParamVector& a, const ParamVector& b) {
  return a.spec == b.spec && same_values(a.values, b.values);
}

ParamVector init_params(const NetworkSpec& spec, const InitSpec& init, std::uint64_t seed) {
  spec.validate();
  if (init.kind == InitKind::prior && !(init.sigma >= 0.0)) {
    throw ConfigError("prior initialization needs sigma >= 0");
  }
  ParamVector params(spec);
  Stream stream(seed);
  if (init.kind == InitKind::prior) {
    if (init.sigma > 0.0) stream.fill_normal({params.values.data(), static_cast<std::size_t>(params.size())}, init.sigma);
    return params;
  }
  for (const LayerView& layer : layer_views(spec)) {
    const double stddev = std::sqrt(2.0 / layer.in);
    stream.fill_normal({params.values.data() + layer.w_offset, static_cast<std::size_t>(layer.in) * layer.out}, stddev);
  }
  return params;
}

ForwardTrace forward_trace(const ParamVector& params, const Matrix& batch) {
  check_params(params);
  const NetworkSpec& spec = params.spec;
  if (batch.cols() != spec.input_size()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network input is " +
                     std::to_string(spec.input_size()));
  }
  if (batch.rows() < 1) throw ShapeError("empty batch");

  ForwardTrace trace;
  trace.activations.reserve(spec.layer_sizes.size());
  trace.activations.push_back(batch);
  const auto views = layer_views(spec);
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    const ConstMatMap w(params.values.data() + v.w_offset, v.in, v.out);
    const ConstVecMap b(params.values.data() + v.b_offset, v.out);
    Matrix z = trace.activations.back() * w;
    z.rowwise() += b.transpose();
    if (l + 1 < views.size()) z = z.cwiseMax(0.0);
    if (!z.allFinite()) {
      throw NumericError("non-finite activation in layer " + std::to_string(l + 1) + " of " + spec.describe());
    }
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

Matrix apply_head(OutputHead head, const Matrix& logits) {
  switch (head) {
    case OutputHead::linear:
      return logits;
    case OutputHead::sigmoid:
      return logits.unaryExpr([](double a) { return std::clamp(sigmoid(a), kProbFloor, 1.0 - kProbFloor); });
    case OutputHead::softmax: {
      Matrix out(logits.rows(), logits.cols());
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - mx).exp();
        out.row(i) /= out.row(i).sum();
      }
      return out;
    }
  }
  return logits;
}

Matrix forward(const ParamVector& params, const Matrix& batch) {
  return apply_head(params.spec.output_head, forward_trace(params, batch).logits());
}

void backward(const ParamVector& params, const ForwardTrace& trace, const Matrix& d_logits,
              Vector* param_grad, Matrix* input_grad) {
  const auto views = layer_views(params.spec);
  if (trace.activations.size() != views.size() + 1) throw ShapeError("trace does not match network depth");
  if (d_logits.rows() != trace.logits().rows() || d_logits.cols() != trace.logits().cols()) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  if (param_grad && param_grad->size() != params.size()) throw ShapeError("gradient buffer has wrong size");

  Matrix delta = d_logits;
  for (std::size_t l = views.size(); l-- > 0;) {
    const LayerView& v = views[l];
    const Matrix& a_prev = trace.activations[l];
    if (param_grad) {
      MatMap dw(param_grad->data() + v.w_offset, v.in, v.out);
      VecMap db(param_grad->data() + v.b_offset, v.out);
      dw.noalias() += a_prev.transpose() * delta;
      db.noalias() += delta.colwise().sum().transpose();
    }
    if (l == 0 && !input_grad) break;
    const ConstMatMap w(params.values.data() + v.w_offset, v.in, v.out);
    Matrix below = delta * w.transpose();
    if (l == 0) {
      *input_grad = std::move(below);
      break;
    }
    // ReLU: gradient passes where the activation was positive (0 at the kink).
    delta = (a_prev.array() > 0.0).select(below, 0.0);
  }
}

double evaluate_loss(const LossSpec& loss, const Matrix& logits, Matrix* d_logits) {
  const Eigen::Index n = logits.rows();
  if (d_logits) d_logits->setZero(logits.rows(), logits.cols());
  double value = 0.0;

  switch (loss.kind) {
    case LossKind::constant:
      value = loss.constant;
      break;

    case LossKind::log_prob_real:
    case LossKind::log_prob_fake: {
      require_cols(logits, 1, false, "log-sigmoid loss");
      const bool real = loss.kind == LossKind::log_prob_real;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double a = logits(i, 0);
        const double p = sigmoid(a);
        double term;
        double grad = 0.0;
        if (p < kProbFloor) {
          term = real ? kLogFloor : kLogCeil;
        } else if (p > 1.0 - kProbFloor) {
          term = real ? kLogCeil : kLogFloor;
        } else if (real) {
          term = -softplus(-a);
          grad = sigmoid(-a);
        } else {
          term = -softplus(a);
          grad = -p;
        }
        value += term;
        if (d_logits) (*d_logits)(i, 0) = loss.scale * grad;
      }
      value *= loss.scale;
      break;
    }

    case LossKind::log_softmax_class:
    case LossKind::log_fake: {
      require_cols(logits, 2, true, "softmax loss");
      const bool fake = loss.kind == LossKind::log_fake;
      if (!fake && static_cast<Eigen::Index>(loss.labels.size()) != n) {
        throw ShapeError("label count " + std::to_string(loss.labels.size()) + " != batch rows " + std::to_string(n));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const int y = fake ? 0 : loss.labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= logits.cols()) {
          throw DataError("class label " + std::to_string(y) + " outside [0, " + std::to_string(logits.cols()) + ")");
        }
        const double lse = row_logsumexp(logits, i, 0);
        const double lp = logits(i, y) - lse;
        const double p = std::exp(lp);
        if (p < kProbFloor) {
          value += kLogFloor;
        } else if (p > 1.0 - kProbFloor) {
          value += kLogCeil;
        } else {
          value += lp;
          if (d_logits) {
            d_logits->row(i) = -loss.scale * (logits.row(i).array() - lse).exp().matrix();
            (*d_logits)(i, y) += loss.scale;
          }
        }
      }
      value *= loss.scale;
      break;
    }

    case LossKind::log_not_fake: {
      require_cols(logits, 2, true, "softmax loss");
      for (Eigen::Index i = 0; i < n; ++i) {
        const double lse_all = row_logsumexp(logits, i, 0);
        const double lse_real = row_logsumexp(logits, i, 1);
        const double log_s = lse_real - lse_all;
        const double s = std::exp(log_s);
        if (s < kProbFloor) {
          value += kLogFloor;
        } else if (s > 1.0 - kProbFloor) {
          value += kLogCeil;
        } else {
          value += log_s;
          if (d_logits) {
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
              const double p_j = std::exp(logits(i, j) - lse_all);
              const double q_j = j >= 1 ? std::exp(logits(i, j) - lse_real) : 0.0;
              (*d_logits)(i, j) = loss.scale * (q_j - p_j);
            }
          }
        }
      }
      value *= loss.scale;
      break;
    }

    case LossKind::squared_error: {
      if (loss.targets.rows() != n || loss.targets.cols() != logits.cols()) {
        throw ShapeError("squared-error targets do not match network output shape");
      }
      const Matrix diff = logits - loss.targets;
      value = loss.scale * diff.squaredNorm() / static_cast<double>(n);
      if (d_logits) *d_logits = (2.0 * loss.scale / static_cast<double>(n)) * diff;
      break;
    }
  }

  if (!std::isfinite(value)) throw NumericError("non-finite loss value");
  return value;
}

ValueGrad loss_grad(const ParamVector& params, const Matrix& batch, const LossSpec& loss) {
  const ForwardTrace trace = forward_trace(params, batch);
  Matrix d_logits;
  ValueGrad out;
  out.value = evaluate_loss(loss, trace.logits(), &d_logits);
  out.grad = Vector::Zero(params.size());
  if (loss.kind != LossKind::constant) backward(params, trace, d_logits, &out.grad, nullptr);
  if (!out.grad.allFinite()) throw NumericError("non-finite parameter gradient");
  return out;
}

Matrix grad_wrt_input(const ParamVector& params, const Matrix& batch, const LossSpec& loss) {
  const ForwardTrace trace = forward_trace(params, batch);
  Matrix d_logits;
  evaluate_loss(loss, trace.logits(), &d_logits);
  Matrix dx;
  backward(params, trace, d_logits, nullptr, &dx);
  if (!dx.allFinite()) throw NumericError("non-finite input gradient");
  return dx;
}

}  // namespace bgan
