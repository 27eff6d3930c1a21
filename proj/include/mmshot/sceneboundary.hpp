#pragma once

// Scene-boundary detection from four consecutive shots: is there a boundary
// between the second and third shot?

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmshot/aggregate.hpp"
#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"
#include "mmshot/metrics.hpp"
#include "mmshot/nn.hpp"
#include "mmshot/random.hpp"

namespace mmshot {

inline constexpr std::size_t kBoundaryContext = 4;

struct BoundarySample {
  std::array<ShotFeature, kBoundaryContext> shots;
  std::uint8_t label = 0;  // 1: boundary between shots[1] and shots[2]
};

/// One sample per position i in [0, n-4]; flags[j] marks a boundary between
/// shots j and j+1, so sample i takes flags[i+1].
inline std::vector<BoundarySample> build_samples(std::span<const ShotFeature> shots,
                                                 std::span<const std::uint8_t> flags) {
  require(shots.size() >= kBoundaryContext, ErrorKind::kEmptyInput,
          "boundary samples need at least 4 shots, got " + std::to_string(shots.size()));
  require(flags.size() + 1 == shots.size(), ErrorKind::kShapeMismatch, "need one boundary flag per shot gap");
  std::vector<BoundarySample> out;
  for (std::size_t i = 0; i + kBoundaryContext <= shots.size(); ++i) {
    BoundarySample s;
    for (std::size_t k = 0; k < kBoundaryContext; ++k) s.shots[k] = shots[i + k];
    s.label = flags[i + 1] ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

/// Shot features from evenly spaced frames of every shot of an annotated record.
inline std::vector<BoundarySample> samples_from_record(const VideoRecord& record, std::size_t frames_per_shot = 3) {
  std::vector<ShotFeature> features;
  for (const auto& shot : record.shots) {
    std::vector<FeatureVector> frames;
    for (auto f : evenly_spaced(shot.frames.size(), frames_per_shot)) frames.push_back(shot.frames.at(f));
    features.push_back(shot_feature(frames));
  }
  return build_samples(features, record.boundary_flags);
}

inline std::vector<BoundarySample> samples_from_dataset(const Dataset& dataset, Split split,
                                                        std::size_t frames_per_shot = 3) {
  std::vector<BoundarySample> out;
  for (const auto* r : dataset.split(split)) {
    if (r->shots.size() < kBoundaryContext) continue;
    auto s = samples_from_record(*r, frames_per_shot);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

struct BoundaryModel {
  Mlp mlp;  // [4d, hidden..., 2], relu hidden, softmax head

  std::size_t feature_dim() const { return mlp.in_dim() / kBoundaryContext; }

  static BoundaryModel create(std::size_t feature_dim, std::span<const std::size_t> hidden, Rng& rng) {
    require(feature_dim > 0, ErrorKind::kInvalidArgument, "feature dim must be >= 1");
    std::vector<std::size_t> sizes{kBoundaryContext * feature_dim};
    std::vector<Activation> acts;
    for (auto h : hidden) {
      sizes.push_back(h);
      acts.push_back(Activation::kRelu);
    }
    sizes.push_back(2);
    acts.push_back(Activation::kSoftmax);
    return {Mlp::create(sizes, acts, rng)};
  }

  bool operator==(const BoundaryModel&) const = default;
};

inline Matrix stack_samples(std::span<const BoundarySample> samples, std::size_t feature_dim) {
  Matrix x(static_cast<Eigen::Index>(kBoundaryContext * feature_dim), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t c = 0; c < samples.size(); ++c) {
    for (std::size_t k = 0; k < kBoundaryContext; ++k) {
      const auto& f = samples[c].shots[k];
      require(f.size() == feature_dim, ErrorKind::kDimensionMismatch,
              "shot feature has dim " + std::to_string(f.size()) + ", model expects " + std::to_string(feature_dim));
      for (std::size_t d = 0; d < feature_dim; ++d) {
        x(static_cast<Eigen::Index>(k * feature_dim + d), static_cast<Eigen::Index>(c)) = f[d];
      }
    }
  }
  return x;
}

/// Softmax probability of the boundary class for every sample.
inline std::vector<double> boundary_probabilities(const BoundaryModel& model, std::span<const BoundarySample> samples,
                                                  std::size_t batch = 512) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const auto chunk = samples.subspan(start, std::min(batch, samples.size() - start));
    const auto cache = mlp_forward(model.mlp, stack_samples(chunk, model.feature_dim()));
    for (Eigen::Index c = 0; c < cache.output().cols(); ++c) out.push_back(cache.output()(1, c));
  }
  return out;
}

inline std::vector<std::uint8_t> sample_labels(std::span<const BoundarySample> samples) {
  std::vector<std::uint8_t> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

inline BoundaryReport eval_boundary(const BoundaryModel& model, std::span<const BoundarySample> samples) {
  require(!samples.empty(), ErrorKind::kEmptyInput, "no boundary samples to evaluate");
  const auto probs = boundary_probabilities(model, samples);
  const auto labels = sample_labels(samples);
  return boundary_report(probs, labels);
}

/// Weighted cross-entropy on one batch plus gradients for every layer.
inline std::pair<LossValue, MlpGradient> boundary_loss_and_gradients(const BoundaryModel& model,
                                                                     std::span<const BoundarySample> batch,
                                                                     ClassWeights weights) {
  const auto cache = mlp_forward(model.mlp, stack_samples(batch, model.feature_dim()));
  const auto labels = sample_labels(batch);
  auto loss = weighted_ce_loss(cache.logits(), labels, weights);
  auto grad = backward(model.mlp, cache, loss.gradient, GradientAt::kPreActivation);
  return {std::move(loss), std::move(grad)};
}

struct BoundaryTrainConfig {
  ClassWeights weights{10.0, 1.0};
  std::size_t batch_size = 128;
  double max_lr = 1e-3;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{4096, 1024};
  double warmup_fraction = 0.05;
  OptimizerKind optimizer = OptimizerKind::kAdam;
};

struct BoundaryEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_ap = 0.0;
};

struct BoundaryTrainResult {
  BoundaryModel model;
  std::vector<BoundaryEpoch> history;
  std::size_t best_epoch = 0;
};

/// Deterministic given the seed; keeps the epoch with the best validation AP
/// (parameters rounded to float32).
inline BoundaryTrainResult train_boundary(std::span<const BoundarySample> train_samples,
                                          std::span<const BoundarySample> val_samples,
                                          const BoundaryTrainConfig& config) {
  require(!train_samples.empty() && !val_samples.empty(), ErrorKind::kDegenerateSplit,
          "boundary training needs non-empty train and val samples");
  std::size_t positives = 0;
  for (const auto& s : train_samples) positives += s.label;
  require(positives > 0 && positives < train_samples.size(), ErrorKind::kDegenerateSplit,
          "boundary train split needs both boundary and non-boundary samples");
  require(config.batch_size > 0, ErrorKind::kInvalidArgument, "batch size must be positive");
  const std::size_t dim = train_samples.front().shots.front().size();

  Rng init(derive_seed(config.seed, "boundary/init"));
  BoundaryTrainResult result{BoundaryModel::create(dim, config.hidden, init), {}, 0};
  BoundaryModel& model = result.model;
  if (config.epochs == 0) {
    for (auto& l : model.mlp.layers) quantize_to_float(l);
    return result;
  }

  const std::size_t n = train_samples.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const LearningRateSchedule schedule{config.max_lr, steps_per_epoch * config.epochs, config.warmup_fraction};
  AdamState adam;
  std::vector<std::size_t> order(n);
  std::vector<BoundarySample> batch;
  double best_ap = -1.0;
  BoundaryModel best = model;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(derive_seed(config.seed, "boundary/shuffle", epoch));
    shuffle.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_samples[order[k]]);
      auto [loss, grad] = boundary_loss_and_gradients(model, batch, config.weights);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorKind::kDivergence, "non-finite boundary loss at epoch " + std::to_string(epoch) +
                                                ", step " + std::to_string(step));
      }
      loss_sum += loss.loss * static_cast<double>(end - start);
      if (config.optimizer == OptimizerKind::kAdam) {
        adam_step(parameters(model.mlp), gradients(grad), adam, schedule.at(step));
      } else {
        sgd_step(parameters(model.mlp), gradients(grad), schedule.at(step));
      }
    }
    const double val_ap = eval_boundary(model, val_samples).ap;
    result.history.push_back({epoch, loss_sum / static_cast<double>(n), val_ap});
    if (val_ap > best_ap) {
      best_ap = val_ap;
      best = model;
      result.best_epoch = epoch;
    }
  }
  result.model = std::move(best);
  for (auto& l : result.model.mlp.layers) quantize_to_float(l);
  return result;
}

inline void write_boundary_model(const std::string& path, const BoundaryModel& model, std::uint64_t seed) {
  nlohmann::json h;
  h["kind"] = "boundary-model";
  h["feature_dim"] = model.feature_dim();
  h["context_shots"] = kBoundaryContext;
  h["seed"] = seed;
  std::vector<const DenseLayer*> layers;
  for (const auto& l : model.mlp.layers) layers.push_back(&l);
  write_checkpoint(path, h, layers);
}

inline BoundaryModel read_boundary_model(const std::string& path) {
  auto ck = read_checkpoint(path);
  require(ck.header.value("kind", "") == "boundary-model", ErrorKind::kFormat,
          path + ": not a boundary model checkpoint");
  require(!ck.layers.empty() && ck.layers.back().out_dim() == 2 && ck.layers.front().in_dim() % kBoundaryContext == 0,
          ErrorKind::kFormat, path + ": unexpected boundary model shape");
  return {Mlp{std::move(ck.layers)}};
}

}  // namespace mmshot
