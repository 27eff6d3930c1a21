#pragma once

// Minimal neural core: dense layers over column batches, the two losses the
// models need, reverse-mode gradients, Adam/SGD and a finite-difference
// gradient checker. Arithmetic is double; checkpoints store float32.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmshot/error.hpp"
#include "mmshot/random.hpp"

namespace mmshot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kRelu, kSigmoid, kSoftmax, kLinear };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
    case Activation::kLinear: return "linear";
  }
  return "linear";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "softmax") return Activation::kSoftmax;
  if (s == "linear") return Activation::kLinear;
  throw Error(ErrorKind::kFormat, "unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::kLinear;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }

  static DenseLayer zeros(std::size_t in, std::size_t out, Activation act) {
    return {Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
            Vector::Zero(static_cast<Eigen::Index>(out)), act};
  }

  /// Uniform(-sqrt(6/(in+out)), +sqrt(6/(in+out))) weights, zero bias.
  static DenseLayer glorot(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer layer = zeros(in, out, act);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    // Filled in row-major order so initialization does not depend on storage order.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    return layer;
  }

  bool operator==(const DenseLayer& other) const {
    return activation == other.activation && weights.rows() == other.weights.rows() &&
           weights.cols() == other.weights.cols() && weights == other.weights && bias == other.bias;
  }
};

/// Rounds every parameter to the nearest float32, the checkpoint precision.
inline void quantize_to_float(DenseLayer& layer) {
  layer.weights = layer.weights.cast<float>().cast<double>();
  layer.bias = layer.bias.cast<float>().cast<double>();
}

inline Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

/// Column-wise softmax.
inline Matrix softmax(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).maxCoeff();
    out.col(c) = (x.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

inline Matrix activate(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kSigmoid: return sigmoid(pre);
    case Activation::kSoftmax: return softmax(pre);
    case Activation::kLinear: return pre;
  }
  return pre;
}

struct DenseCache {
  Matrix input;
  Matrix pre;
  Matrix output;
};

inline DenseCache dense_forward(const DenseLayer& layer, const Matrix& input) {
  require(static_cast<std::size_t>(input.rows()) == layer.in_dim(), ErrorKind::kShapeMismatch,
          "layer expects input dim " + std::to_string(layer.in_dim()) + ", got " +
              std::to_string(input.rows()));
  DenseCache cache;
  cache.input = input;
  cache.pre.noalias() = layer.weights * input;
  cache.pre.colwise() += layer.bias;
  cache.output = activate(layer.activation, cache.pre);
  return cache;
}

struct DenseGradient {
  Matrix weights;
  Vector bias;
};

// Which quantity the upstream gradient is taken with respect to. Losses that
// consume logits (softmax cross-entropy) pass kPreActivation.
enum class GradientAt { kOutput, kPreActivation };

/// Fills `grad` with parameter gradients and returns d(loss)/d(input).
inline Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& upstream,
                             GradientAt at, DenseGradient& grad) {
  require(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(),
          ErrorKind::kShapeMismatch, "upstream gradient does not match layer output");
  Matrix d_pre;
  if (at == GradientAt::kPreActivation) {
    d_pre = upstream;
  } else {
    switch (layer.activation) {
      case Activation::kRelu:
        d_pre = upstream.cwiseProduct(cache.pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
        break;
      case Activation::kSigmoid:
        d_pre = upstream.cwiseProduct(
            cache.output.unaryExpr([](double p) { return p * (1.0 - p); }));
        break;
      case Activation::kSoftmax: {
        const Eigen::RowVectorXd dot = upstream.cwiseProduct(cache.output).colwise().sum();
        d_pre = cache.output.cwiseProduct(upstream - dot.replicate(upstream.rows(), 1));
        break;
      }
      case Activation::kLinear:
        d_pre = upstream;
        break;
    }
  }
  grad.weights.noalias() = d_pre * cache.input.transpose();
  grad.bias = d_pre.rowwise().sum();
  return layer.weights.transpose() * d_pre;
}

struct Mlp {
  std::vector<DenseLayer> layers;

  /// sizes has layers+1 entries; activations one per layer.
  static Mlp create(std::span<const std::size_t> sizes, std::span<const Activation> activations,
                    Rng& rng) {
    require(sizes.size() == activations.size() + 1 && !activations.empty(),
            ErrorKind::kInvalidArgument, "need one activation per layer");
    Mlp mlp;
    for (std::size_t i = 0; i < activations.size(); ++i) {
      mlp.layers.push_back(DenseLayer::glorot(sizes[i], sizes[i + 1], activations[i], rng));
    }
    return mlp;
  }

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  bool operator==(const Mlp&) const = default;
};

struct ForwardCache {
  std::vector<DenseCache> layers;

  const Matrix& output() const { return layers.back().output; }
  const Matrix& logits() const { return layers.back().pre; }
};

inline ForwardCache mlp_forward(const Mlp& mlp, const Matrix& input) {
  ForwardCache cache;
  cache.layers.reserve(mlp.layers.size());
  const Matrix* x = &input;
  for (const auto& layer : mlp.layers) {
    cache.layers.push_back(dense_forward(layer, *x));
    x = &cache.layers.back().output;
  }
  return cache;
}

struct MlpGradient {
  std::vector<DenseGradient> layers;
  Matrix input;
};

inline MlpGradient backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& upstream,
                            GradientAt at = GradientAt::kOutput) {
  require(cache.layers.size() == mlp.layers.size(), ErrorKind::kShapeMismatch,
          "cache does not come from this network");
  MlpGradient grad;
  grad.layers.resize(mlp.layers.size());
  Matrix g = upstream;
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    g = dense_backward(mlp.layers[i], cache.layers[i], g,
                       i + 1 == mlp.layers.size() ? at : GradientAt::kOutput, grad.layers[i]);
  }
  grad.input = std::move(g);
  return grad;
}

// ---------------------------------------------------------------------------
// Losses. Batch losses average over columns (samples).

inline constexpr double kProbabilityClamp = 1e-7;

struct LossValue {
  double loss = 0.0;
  Matrix gradient;
};

/// Binary cross-entropy averaged over genres (rows) and samples (columns).
/// The gradient is with respect to the probabilities and is zero where the
/// clamp is active.
inline LossValue bce_loss(const Matrix& probs, const Matrix& labels) {
  require(probs.rows() == labels.rows() && probs.cols() == labels.cols() && probs.size() > 0,
          ErrorKind::kShapeMismatch, "bce_loss: probabilities and labels differ in shape");
  const double scale = 1.0 / static_cast<double>(probs.rows() * probs.cols());
  LossValue out;
  out.gradient.resize(probs.rows(), probs.cols());
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      const double raw = probs(r, c);
      const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
      const double y = labels(r, c);
      out.loss -= scale * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
      const bool clamped = raw < kProbabilityClamp || raw > 1.0 - kProbabilityClamp;
      out.gradient(r, c) = clamped ? 0.0 : -scale * (y / p - (1.0 - y) / (1.0 - p));
    }
  }
  return out;
}

struct ClassWeights {
  double positive = 1.0;  // class index 1
  double negative = 1.0;  // class index 0
};

/// Softmax cross-entropy on 2-row logits, each sample scaled by the weight
/// of its label, averaged over samples. Gradient is with respect to logits.
inline LossValue weighted_ce_loss(const Matrix& logits, std::span<const std::uint8_t> labels,
                                  ClassWeights weights) {
  require(logits.rows() == 2 && static_cast<std::size_t>(logits.cols()) == labels.size() &&
              !labels.empty(),
          ErrorKind::kShapeMismatch, "weighted_ce_loss expects 2 x batch logits");
  require(logits.allFinite(), ErrorKind::kInvalidArgument, "non-finite logits");
  const Matrix probs = softmax(logits);
  const double scale = 1.0 / static_cast<double>(labels.size());
  LossValue out;
  out.gradient = probs;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const int label = labels[static_cast<std::size_t>(c)] ? 1 : 0;
    const double w = label ? weights.positive : weights.negative;
    const double m = logits.col(c).maxCoeff();
    const double log_norm = m + std::log(std::exp(logits(0, c) - m) + std::exp(logits(1, c) - m));
    out.loss += scale * w * (log_norm - logits(label, c));
    out.gradient(label, c) -= 1.0;
    out.gradient.col(c) *= scale * w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters and optimizers

using ParameterSpans = std::vector<std::span<double>>;

inline void append_parameters(DenseLayer& layer, ParameterSpans& out) {
  out.emplace_back(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
  out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
}

inline void append_gradients(DenseGradient& grad, ParameterSpans& out) {
  out.emplace_back(grad.weights.data(), static_cast<std::size_t>(grad.weights.size()));
  out.emplace_back(grad.bias.data(), static_cast<std::size_t>(grad.bias.size()));
}

inline ParameterSpans parameters(Mlp& mlp) {
  ParameterSpans out;
  for (auto& l : mlp.layers) append_parameters(l, out);
  return out;
}

inline ParameterSpans gradients(MlpGradient& grad) {
  ParameterSpans out;
  for (auto& l : grad.layers) append_gradients(l, out);
  return out;
}

inline void check_same_shapes(const ParameterSpans& a, const ParameterSpans& b) {
  require(a.size() == b.size(), ErrorKind::kShapeMismatch, "parameter/gradient count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].size() == b[i].size(), ErrorKind::kShapeMismatch, "parameter/gradient shape mismatch");
  }
}

enum class OptimizerKind { kAdam, kSgd };

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

/// One bias-corrected Adam update at learning rate `lr`.
inline void adam_step(const ParameterSpans& params, const ParameterSpans& grads, AdamState& state,
                      double lr) {
  check_same_shapes(params, grads);
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.size(), 0.0);
      state.second.emplace_back(p.size(), 0.0);
    }
  }
  require(state.first.size() == params.size(), ErrorKind::kShapeMismatch,
          "optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.first[t];
    auto& v = state.second[t];
    require(m.size() == params[t].size(), ErrorKind::kShapeMismatch,
            "optimizer state does not match parameters");
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      params[t][i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

inline void sgd_step(const ParameterSpans& params, const ParameterSpans& grads, double lr) {
  check_same_shapes(params, grads);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) params[t][i] -= lr * grads[t][i];
  }
}

/// Linear warmup over the first `warmup_fraction` of steps up to `max_lr`,
/// then cosine decay towards zero.
struct LearningRateSchedule {
  double max_lr = 1e-3;
  std::size_t total_steps = 1;
  double warmup_fraction = 0.05;

  double at(std::size_t step) const {
    const auto warmup = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps))));
    if (step < warmup) return max_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double span = static_cast<double>(std::max<std::size_t>(1, total_steps - std::min(total_steps, warmup)));
    const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
    return max_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }
};

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Flat indices (over all spans, in order) whose one-sided differences
  // disagree, i.e. the step straddles a non-differentiable point.
  std::vector<std::size_t> skipped;
};

/// Compares `analytic` against central differences of `loss` around the
/// current `params`. Relative error is |a-n| / max(1e-8, |a|+|n|).
inline GradCheckResult grad_check(const std::function<double()>& loss, const ParameterSpans& params,
                                  const ParameterSpans& analytic, double h = 1e-4) {
  check_same_shapes(params, analytic);
  GradCheckResult result;
  const double base = loss();
  std::size_t flat = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i, ++flat) {
      double& p = params[t][i];
      const double saved = p;
      p = saved + h;
      const double plus = loss();
      p = saved - h;
      const double minus = loss();
      p = saved;
      const double forward = (plus - base) / h;
      const double backward = (base - minus) / h;
      if (std::abs(forward - backward) > 1e-7 + 1e-2 * (std::abs(forward) + std::abs(backward))) {
        result.skipped.push_back(flat);
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[t][i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, rel);
      ++result.checked;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: a magic line, one JSON header line, then every layer's
// weights (row-major, out x in) followed by its bias as little-endian float32.

inline constexpr std::string_view kCheckpointMagic = "MMSHOT-CHECKPOINT 1";

inline void write_checkpoint(const std::string& path, nlohmann::json header,
                             std::span<const DenseLayer* const> layers) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto* l : layers) {
    shapes.push_back({{"in", l->in_dim()}, {"out", l->out_dim()}, {"activation", to_string(l->activation)}});
  }
  header["layers"] = shapes;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  auto put = [&out](double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
  };
  for (const auto* l : layers) {
    for (Eigen::Index r = 0; r < l->weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l->weights.cols(); ++c) put(l->weights(r, c));
    }
    for (Eigen::Index r = 0; r < l->bias.size(); ++r) put(l->bias(r));
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

struct Checkpoint {
  nlohmann::json header;
  std::vector<DenseLayer> layers;
};

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  std::string magic, header_text;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw Error(ErrorKind::kFormat, path + ": not a checkpoint");
  std::getline(in, header_text);
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(header_text);
    for (const auto& shape : ck.header.at("layers")) {
      ck.layers.push_back(DenseLayer::zeros(shape.at("in").get<std::size_t>(), shape.at("out").get<std::size_t>(),
                                            parse_activation(shape.at("activation").get<std::string>())));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path + ": malformed checkpoint header: " + e.what());
  }
  auto get = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      throw Error(ErrorKind::kFormat, path + ": truncated checkpoint");
    }
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                               (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    return static_cast<double>(std::bit_cast<float>(bits));
  };
  for (auto& l : ck.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = get();
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = get();
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kFormat, path + ": trailing bytes after parameters");
  }
  return ck;
}

}  // namespace mmshot
