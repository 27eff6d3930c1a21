#pragma once

// Genre classifier over visual/audio/language video features with early,
// intermediate or late fusion, trained as independent per-genre binary
// classifiers (sigmoid heads, averaged binary cross-entropy).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmshot/aggregate.hpp"
#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"
#include "mmshot/metrics.hpp"
#include "mmshot/nn.hpp"
#include "mmshot/parallel.hpp"
#include "mmshot/random.hpp"
#include "mmshot/textlab.hpp"

namespace mmshot {

enum class Modality { kVisual = 0, kAudio = 1, kLanguage = 2 };
inline constexpr std::array<Modality, 3> kModalities = {Modality::kVisual, Modality::kAudio,
                                                        Modality::kLanguage};

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kVisual: return "visual";
    case Modality::kAudio: return "audio";
    case Modality::kLanguage: return "language";
  }
  return "visual";
}

class ModalitySet {
 public:
  constexpr ModalitySet() = default;
  constexpr ModalitySet(bool visual, bool audio, bool language) : enabled_{visual, audio, language} {}

  static constexpr ModalitySet all() { return {true, true, true}; }

  /// Parses a comma-separated list of v/a/l (or visual/audio/language).
  static ModalitySet parse(const std::string& text) {
    ModalitySet set(false, false, false);
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t comma = std::min(text.find(',', start), text.size());
      const std::string item = text.substr(start, comma - start);
      if (item == "v" || item == "visual") {
        set.enabled_[0] = true;
      } else if (item == "a" || item == "audio") {
        set.enabled_[1] = true;
      } else if (item == "l" || item == "language") {
        set.enabled_[2] = true;
      } else {
        throw Error(ErrorKind::kInvalidArgument, "unknown modality '" + item + "'");
      }
      start = comma + 1;
    }
    require(set.count() > 0, ErrorKind::kInvalidArgument, "no modality enabled");
    return set;
  }

  constexpr bool has(Modality m) const { return enabled_[static_cast<std::size_t>(m)]; }

  std::size_t count() const { return std::size_t(enabled_[0]) + enabled_[1] + enabled_[2]; }

  std::vector<Modality> list() const {
    std::vector<Modality> out;
    for (auto m : kModalities) {
      if (has(m)) out.push_back(m);
    }
    return out;
  }

  std::string to_string() const {
    std::string out;
    static constexpr const char* kShort[] = {"v", "a", "l"};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!enabled_[i]) continue;
      if (!out.empty()) out += ',';
      out += kShort[i];
    }
    return out;
  }

  bool operator==(const ModalitySet&) const = default;

 private:
  std::array<bool, 3> enabled_{true, true, true};
};

enum class FusionStrategy { kEarly, kIntermediate, kLate };

inline std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kEarly: return "early";
    case FusionStrategy::kIntermediate: return "intermediate";
    case FusionStrategy::kLate: return "late";
  }
  return "intermediate";
}

inline FusionStrategy parse_strategy(const std::string& s) {
  if (s == "early") return FusionStrategy::kEarly;
  if (s == "intermediate") return FusionStrategy::kIntermediate;
  if (s == "late") return FusionStrategy::kLate;
  throw Error(ErrorKind::kInvalidArgument, "unknown fusion strategy '" + s + "'");
}

inline std::size_t modality_dim(const Dimensions& dims, Modality m) {
  switch (m) {
    case Modality::kVisual: return dims.visual;
    case Modality::kAudio: return dims.audio;
    case Modality::kLanguage: return dims.language;
  }
  return 0;
}

// A per-modality hidden layer Z_m = relu(W1 x + b1) with its own sigmoid
// head rho_m = sigmoid(W2 Z_m + b2).
struct ModalityBranch {
  Modality modality = Modality::kVisual;
  DenseLayer hidden;
  DenseLayer head;

  bool operator==(const ModalityBranch&) const = default;
};

struct GenreModel {
  FusionStrategy strategy = FusionStrategy::kIntermediate;
  ModalitySet modalities;
  GenreTaxonomy taxonomy;
  Dimensions dims;
  std::size_t hidden_dim = 512;
  // early: a single trunk over the concatenated raw features.
  std::optional<DenseLayer> trunk_hidden;
  std::optional<DenseLayer> trunk_head;
  // intermediate and late: one branch per enabled modality, in v/a/l order.
  std::vector<ModalityBranch> branches;
  // intermediate: sigmoid head over the concatenated branch hidden layers.
  std::optional<DenseLayer> joint_head;

  static GenreModel create(FusionStrategy strategy, ModalitySet modalities, GenreTaxonomy taxonomy,
                           Dimensions dims, std::size_t hidden_dim, Rng& rng) {
    require(hidden_dim > 0 && taxonomy.size() > 0, ErrorKind::kInvalidArgument,
            "model needs hidden_dim >= 1 and at least one genre");
    GenreModel m;
    m.strategy = strategy;
    m.modalities = modalities;
    m.taxonomy = std::move(taxonomy);
    m.dims = dims;
    m.hidden_dim = hidden_dim;
    const std::size_t G = m.taxonomy.size();
    if (strategy == FusionStrategy::kEarly) {
      std::size_t in = 0;
      for (auto mod : modalities.list()) in += modality_dim(dims, mod);
      m.trunk_hidden = DenseLayer::glorot(in, hidden_dim, Activation::kRelu, rng);
      m.trunk_head = DenseLayer::glorot(hidden_dim, G, Activation::kSigmoid, rng);
      return m;
    }
    for (auto mod : modalities.list()) {
      ModalityBranch b;
      b.modality = mod;
      b.hidden = DenseLayer::glorot(modality_dim(dims, mod), hidden_dim, Activation::kRelu, rng);
      b.head = DenseLayer::glorot(hidden_dim, G, Activation::kSigmoid, rng);
      m.branches.push_back(std::move(b));
    }
    if (strategy == FusionStrategy::kIntermediate) {
      m.joint_head = DenseLayer::glorot(hidden_dim * m.branches.size(), G, Activation::kSigmoid, rng);
    }
    return m;
  }

  /// Layers in declaration order; gradients and checkpoints follow it.
  std::vector<const DenseLayer*> layers() const {
    std::vector<const DenseLayer*> out;
    if (trunk_hidden) out.push_back(&*trunk_hidden);
    if (trunk_head) out.push_back(&*trunk_head);
    for (const auto& b : branches) {
      out.push_back(&b.hidden);
      out.push_back(&b.head);
    }
    if (joint_head) out.push_back(&*joint_head);
    return out;
  }

  std::vector<DenseLayer*> mutable_layers() {
    std::vector<DenseLayer*> out;
    for (const auto* l : layers()) out.push_back(const_cast<DenseLayer*>(l));
    return out;
  }

  ParameterSpans parameters() {
    ParameterSpans out;
    for (auto* l : mutable_layers()) append_parameters(*l, out);
    return out;
  }

  void quantize() {
    for (auto* l : mutable_layers()) quantize_to_float(*l);
  }

  bool operator==(const GenreModel&) const = default;
};

/// Per-modality feature batches (d_m x B); disabled modalities stay empty.
struct ModelInputs {
  std::array<Matrix, 3> features;

  const Matrix& of(Modality m) const { return features[static_cast<std::size_t>(m)]; }
  Matrix& of(Modality m) { return features[static_cast<std::size_t>(m)]; }

  Eigen::Index batch_size() const {
    for (const auto& f : features) {
      if (f.size() > 0) return f.cols();
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Forward and loss

struct DropoutConfig {
  double rate = 0.0;
  Rng* rng = nullptr;
};

namespace detail {

struct HiddenPass {
  DenseCache cache;
  Matrix mask;  // empty when dropout is off
};

inline HiddenPass hidden_forward(const DenseLayer& layer, const Matrix& x, const DropoutConfig& dropout) {
  HiddenPass pass{dense_forward(layer, x), {}};
  if (dropout.rate > 0.0 && dropout.rng != nullptr) {
    const double keep = 1.0 - dropout.rate;
    pass.mask.resize(pass.cache.output.rows(), pass.cache.output.cols());
    for (Eigen::Index c = 0; c < pass.mask.cols(); ++c) {
      for (Eigen::Index r = 0; r < pass.mask.rows(); ++r) {
        pass.mask(r, c) = dropout.rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
    }
    pass.cache.output = pass.cache.output.cwiseProduct(pass.mask);
  }
  return pass;
}

inline Matrix apply_mask(const HiddenPass& pass, const Matrix& grad) {
  return pass.mask.size() ? grad.cwiseProduct(pass.mask) : grad;
}

inline void check_inputs(const GenreModel& model, const ModelInputs& inputs) {
  const Eigen::Index batch = inputs.batch_size();
  require(batch > 0, ErrorKind::kEmptyInput, "empty input batch");
  for (auto m : kModalities) {
    const Matrix& f = inputs.of(m);
    if (!model.modalities.has(m)) {
      require(f.size() == 0, ErrorKind::kShapeMismatch,
              std::string("input provided for disabled modality ") + std::string(to_string(m)));
      continue;
    }
    require(static_cast<std::size_t>(f.rows()) == modality_dim(model.dims, m) && f.cols() == batch,
            ErrorKind::kShapeMismatch,
            std::string("input for ") + std::string(to_string(m)) + " has " + std::to_string(f.rows()) +
                " rows, model expects " + std::to_string(modality_dim(model.dims, m)));
  }
}

struct FusionPass {
  Matrix prediction;
  Matrix early_input;
  std::vector<HiddenPass> hidden;     // trunk hidden (early) or one per branch
  std::vector<DenseCache> heads;      // trunk head (early) or one per branch
  std::optional<DenseCache> joint;
};

inline FusionPass fusion_forward(const GenreModel& model, const ModelInputs& inputs,
                                 const DropoutConfig& dropout = {}) {
  check_inputs(model, inputs);
  FusionPass pass;
  if (model.strategy == FusionStrategy::kEarly) {
    Eigen::Index rows = 0;
    for (auto m : model.modalities.list()) rows += inputs.of(m).rows();
    pass.early_input.resize(rows, inputs.batch_size());
    Eigen::Index at = 0;
    for (auto m : model.modalities.list()) {
      pass.early_input.middleRows(at, inputs.of(m).rows()) = inputs.of(m);
      at += inputs.of(m).rows();
    }
    pass.hidden.push_back(hidden_forward(*model.trunk_hidden, pass.early_input, dropout));
    pass.heads.push_back(dense_forward(*model.trunk_head, pass.hidden.back().cache.output));
    pass.prediction = pass.heads.back().output;
    return pass;
  }
  for (const auto& b : model.branches) {
    pass.hidden.push_back(hidden_forward(b.hidden, inputs.of(b.modality), dropout));
    pass.heads.push_back(dense_forward(b.head, pass.hidden.back().cache.output));
  }
  if (model.strategy == FusionStrategy::kIntermediate) {
    Matrix z(static_cast<Eigen::Index>(model.hidden_dim * model.branches.size()), inputs.batch_size());
    for (std::size_t i = 0; i < pass.hidden.size(); ++i) {
      z.middleRows(static_cast<Eigen::Index>(i * model.hidden_dim), static_cast<Eigen::Index>(model.hidden_dim)) =
          pass.hidden[i].cache.output;
    }
    pass.joint = dense_forward(*model.joint_head, z);
    pass.prediction = pass.joint->output;
  } else {
    pass.prediction = Matrix::Zero(pass.heads.front().output.rows(), pass.heads.front().output.cols());
    for (const auto& h : pass.heads) pass.prediction += h.output;
    pass.prediction /= static_cast<double>(pass.heads.size());
  }
  return pass;
}

}  // namespace detail

/// Per-genre probabilities (G x B).
inline Matrix predict(const GenreModel& model, const ModelInputs& inputs) {
  return detail::fusion_forward(model, inputs).prediction;
}

/// Sigmoid outputs of each branch head (intermediate and late only).
inline std::vector<Matrix> branch_predictions(const GenreModel& model, const ModelInputs& inputs) {
  auto pass = detail::fusion_forward(model, inputs);
  std::vector<Matrix> out;
  if (model.strategy == FusionStrategy::kEarly) return out;
  for (auto& h : pass.heads) out.push_back(std::move(h.output));
  return out;
}

struct FusionLoss {
  double loss = 0.0;
  std::vector<DenseGradient> gradients;  // GenreModel::layers() order

  ParameterSpans spans() {
    ParameterSpans out;
    for (auto& g : gradients) append_gradients(g, out);
    return out;
  }
};

/// early: bce(rho); intermediate: bce(rho) + sum_m bce(rho_m);
/// late: sum_m bce(rho_m). Each bce is averaged over genres and samples.
inline FusionLoss training_loss_and_gradients(const GenreModel& model, const ModelInputs& inputs,
                                              const Matrix& labels, const DropoutConfig& dropout = {}) {
  const auto pass = detail::fusion_forward(model, inputs, dropout);
  require(labels.rows() == pass.prediction.rows() && labels.cols() == pass.prediction.cols(),
          ErrorKind::kShapeMismatch, "labels do not match model output");
  FusionLoss out;
  const auto layer_count = model.layers().size();
  out.gradients.resize(layer_count);

  if (model.strategy == FusionStrategy::kEarly) {
    const auto l = bce_loss(pass.prediction, labels);
    out.loss = l.loss;
    const Matrix dh = dense_backward(*model.trunk_head, pass.heads[0], l.gradient, GradientAt::kOutput,
                                     out.gradients[1]);
    dense_backward(*model.trunk_hidden, pass.hidden[0].cache, detail::apply_mask(pass.hidden[0], dh),
                   GradientAt::kOutput, out.gradients[0]);
    return out;
  }

  Matrix dz;
  if (model.strategy == FusionStrategy::kIntermediate) {
    const auto l = bce_loss(pass.prediction, labels);
    out.loss += l.loss;
    dz = dense_backward(*model.joint_head, *pass.joint, l.gradient, GradientAt::kOutput,
                        out.gradients[layer_count - 1]);
  }
  for (std::size_t i = 0; i < model.branches.size(); ++i) {
    const auto& b = model.branches[i];
    const auto l = bce_loss(pass.heads[i].output, labels);
    out.loss += l.loss;
    Matrix dh = dense_backward(b.head, pass.heads[i], l.gradient, GradientAt::kOutput, out.gradients[2 * i + 1]);
    if (dz.size()) {
      dh += dz.middleRows(static_cast<Eigen::Index>(i * model.hidden_dim), static_cast<Eigen::Index>(model.hidden_dim));
    }
    dense_backward(b.hidden, pass.hidden[i].cache, detail::apply_mask(pass.hidden[i], dh), GradientAt::kOutput,
                   out.gradients[2 * i]);
  }
  return out;
}

inline double training_loss(const GenreModel& model, const ModelInputs& inputs, const Matrix& labels) {
  return training_loss_and_gradients(model, inputs, labels).loss;
}

// ---------------------------------------------------------------------------
// Input assembly

struct AssembleOptions {
  SamplingConfig sampling;
  std::size_t keywords = kDefaultKeywords;
};

struct ModalityFeatures {
  FeatureVector visual;
  FeatureVector audio;
  FeatureVector language;
  bool language_out_of_vocabulary = false;
};

/// Visual: mean-pooled sampled shots (seeded-random in train mode,
/// evenly spaced otherwise). Audio: the stored embedding. Language: mean
/// embedding of the transcript's keywords.
inline ModalityFeatures assemble_inputs(const VideoRecord& record, const EmbeddingTable* table,
                                        ModalitySet modalities, bool train_mode, std::uint64_t seed,
                                        const AssembleOptions& options = {}) {
  ModalityFeatures out;
  if (modalities.has(Modality::kVisual)) {
    const auto shots = sample_shots(record, options.sampling,
                                    train_mode ? SamplingMode::kSeededRandom : SamplingMode::kDeterministicUniform,
                                    seed);
    out.visual = pooled_visual_feature(shots);
  }
  if (modalities.has(Modality::kAudio)) out.audio = record.audio_embedding;
  if (modalities.has(Modality::kLanguage)) {
    require(table != nullptr, ErrorKind::kInvalidArgument, "language modality requires an embedding table");
    auto lf = language_feature(extract_keywords(record.transcript, options.keywords), *table);
    out.language = std::move(lf.values);
    out.language_out_of_vocabulary = lf.all_out_of_vocabulary;
  }
  return out;
}

inline ModelInputs stack_inputs(std::span<const ModalityFeatures* const> rows, ModalitySet modalities) {
  ModelInputs in;
  const auto B = static_cast<Eigen::Index>(rows.size());
  auto fill = [&](Modality m, auto member) {
    if (!modalities.has(m) || rows.empty()) return;
    const auto dim = static_cast<Eigen::Index>((rows[0]->*member).size());
    Matrix& x = in.of(m);
    x.resize(dim, B);
    for (Eigen::Index c = 0; c < B; ++c) {
      const FeatureVector& v = rows[static_cast<std::size_t>(c)]->*member;
      require(static_cast<Eigen::Index>(v.size()) == dim, ErrorKind::kShapeMismatch, "ragged feature batch");
      for (Eigen::Index r = 0; r < dim; ++r) x(r, c) = v[static_cast<std::size_t>(r)];
    }
  };
  fill(Modality::kVisual, &ModalityFeatures::visual);
  fill(Modality::kAudio, &ModalityFeatures::audio);
  fill(Modality::kLanguage, &ModalityFeatures::language);
  return in;
}

inline Matrix stack_labels(std::span<const VideoRecord* const> records, const GenreTaxonomy& taxonomy) {
  Matrix y(static_cast<Eigen::Index>(taxonomy.size()), static_cast<Eigen::Index>(records.size()));
  for (std::size_t c = 0; c < records.size(); ++c) {
    const auto l = taxonomy.label_vector(records[c]->genres);
    for (std::size_t g = 0; g < l.size(); ++g) y(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c)) = l[g];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Training and inference

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 200;
  double max_lr = 1e-3;
  std::uint64_t seed = 0;
  SamplingConfig sampling;
  std::size_t keywords = kDefaultKeywords;
  FusionStrategy strategy = FusionStrategy::kIntermediate;
  ModalitySet modalities = ModalitySet::all();
  std::size_t hidden_dim = 512;
  double dropout = 0.0;
  // Re-draw shot samples every epoch rather than once per video.
  bool resample_each_epoch = true;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double warmup_fraction = 0.05;
  std::size_t threads = 1;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_macro_map = 0.0;
};

struct TrainResult {
  GenreModel model;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 0 means the initialized model
};

inline std::vector<ModalityFeatures> assemble_all(std::span<const VideoRecord* const> records,
                                                  const EmbeddingTable* table, ModalitySet modalities,
                                                  bool train_mode, std::uint64_t seed, std::uint64_t round,
                                                  const AssembleOptions& options, std::size_t threads) {
  std::vector<ModalityFeatures> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    out[i] = assemble_inputs(*records[i], table, modalities, train_mode,
                             derive_seed(seed, "sample/" + records[i]->id, round), options);
  });
  return out;
}

inline ModelInputs stack_all(const std::vector<ModalityFeatures>& features, ModalitySet modalities) {
  std::vector<const ModalityFeatures*> rows;
  for (const auto& f : features) rows.push_back(&f);
  return stack_inputs(rows, modalities);
}

inline void check_compatible(const GenreModel& model, const Dataset& dataset) {
  for (auto m : model.modalities.list()) {
    const auto want = modality_dim(model.dims, m);
    const auto have = modality_dim(dataset.dims, m);
    require(want == have, ErrorKind::kDimensionMismatch,
            "model expects " + std::string(to_string(m)) + " dim " + std::to_string(want) + " but data has " +
                std::to_string(have));
  }
  require(model.taxonomy == dataset.taxonomy, ErrorKind::kDimensionMismatch,
          "model taxonomy (" + std::to_string(model.taxonomy.size()) + " genres) differs from data taxonomy (" +
              std::to_string(dataset.taxonomy.size()) + " genres)");
}

inline Matrix predict_records(const GenreModel& model, std::span<const VideoRecord* const> records,
                              const EmbeddingTable* table, const AssembleOptions& options, std::size_t threads) {
  const auto features = assemble_all(records, table, model.modalities, false, 0, 0, options, threads);
  return predict(model, stack_all(features, model.modalities));
}

inline double macro_map(const Matrix& scores, const Matrix& labels, const GenreTaxonomy& taxonomy) {
  std::vector<std::vector<double>> s(static_cast<std::size_t>(scores.cols()));
  std::vector<std::vector<std::uint8_t>> y(s.size());
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    for (Eigen::Index g = 0; g < scores.rows(); ++g) {
      s[static_cast<std::size_t>(c)].push_back(scores(g, c));
      y[static_cast<std::size_t>(c)].push_back(labels(g, c) > 0.5 ? 1 : 0);
    }
  }
  return genre_report(s, y, taxonomy).macro.map;
}

/// Trains with seeded init, shuffling and shot sampling, and returns the
/// epoch with the best validation macro-mAP (parameters rounded to float32).
inline TrainResult train(const Dataset& dataset, const TrainConfig& config, const EmbeddingTable* table) {
  require(config.batch_size > 0 && config.hidden_dim > 0, ErrorKind::kInvalidArgument,
          "batch size and hidden dim must be positive");
  require(config.dropout >= 0.0 && config.dropout < 1.0, ErrorKind::kInvalidArgument, "dropout must be in [0,1)");
  if (config.modalities.has(Modality::kLanguage)) {
    require(table != nullptr, ErrorKind::kInvalidArgument, "language modality requires an embedding table");
    require(table->dimension == dataset.dims.language, ErrorKind::kDimensionMismatch,
            "embedding table dim " + std::to_string(table->dimension) + " differs from d_l " +
                std::to_string(dataset.dims.language));
  }
  const auto train_records = dataset.split(Split::kTrain);
  const auto val_records = dataset.split(Split::kVal);
  require(!train_records.empty(), ErrorKind::kDegenerateSplit, "train split is empty");
  require(!val_records.empty(), ErrorKind::kDegenerateSplit, "val split is empty");

  Rng init(derive_seed(config.seed, "init"));
  TrainResult result;
  result.model = GenreModel::create(config.strategy, config.modalities, dataset.taxonomy, dataset.dims,
                                    config.hidden_dim, init);
  GenreModel& model = result.model;
  if (config.epochs == 0) {
    model.quantize();
    return result;
  }

  const AssembleOptions options{config.sampling, config.keywords};
  const auto val_inputs = stack_all(
      assemble_all(val_records, table, config.modalities, false, 0, 0, options, config.threads), config.modalities);
  const Matrix val_labels = stack_labels(val_records, dataset.taxonomy);
  const Matrix train_labels = stack_labels(train_records, dataset.taxonomy);

  const std::size_t n = train_records.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const LearningRateSchedule schedule{config.max_lr, steps_per_epoch * config.epochs, config.warmup_fraction};
  AdamState adam;
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  const DropoutConfig dropout{config.dropout, &dropout_rng};

  std::vector<ModalityFeatures> features;
  double best_val = -1.0;
  GenreModel best = model;
  std::size_t step = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch == 1 || config.resample_each_epoch) {
      features = assemble_all(train_records, table, config.modalities, true, config.seed,
                              config.resample_each_epoch ? epoch : 0, options, config.threads);
    }
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(derive_seed(config.seed, "shuffle", epoch));
    shuffle.shuffle(std::span(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<const ModalityFeatures*> rows;
      Matrix y(train_labels.rows(), static_cast<Eigen::Index>(end - start));
      for (std::size_t k = start; k < end; ++k) {
        rows.push_back(&features[order[k]]);
        y.col(static_cast<Eigen::Index>(k - start)) = train_labels.col(static_cast<Eigen::Index>(order[k]));
      }
      auto loss = training_loss_and_gradients(model, stack_inputs(rows, config.modalities), y, dropout);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorKind::kDivergence, "non-finite training loss at epoch " + std::to_string(epoch) +
                                                ", step " + std::to_string(step));
      }
      loss_sum += loss.loss * static_cast<double>(end - start);
      const double lr = schedule.at(step);
      if (config.optimizer == OptimizerKind::kAdam) {
        adam_step(model.parameters(), loss.spans(), adam, lr);
      } else {
        sgd_step(model.parameters(), loss.spans(), lr);
      }
    }
    const double val_map = macro_map(predict(model, val_inputs), val_labels, dataset.taxonomy);
    result.history.push_back({epoch, loss_sum / static_cast<double>(n), val_map});
    if (val_map > best_val) {
      best_val = val_map;
      best = model;
      result.best_epoch = epoch;
    }
  }
  result.model = std::move(best);
  result.model.quantize();
  return result;
}

/// One probability vector per record of `split`, in dataset order, using
/// evenly spaced shot sampling.
inline PredictionSet infer_dataset(const GenreModel& model, const Dataset& dataset, Split split,
                                   const EmbeddingTable* table, const AssembleOptions& options = {},
                                   std::size_t threads = 1) {
  check_compatible(model, dataset);
  const auto records = dataset.split(split);
  require(!records.empty(), ErrorKind::kEmptyInput,
          "split '" + std::string(to_string(split)) + "' has no records");
  const Matrix scores = predict_records(model, records, table, options, threads);
  PredictionSet out;
  out.taxonomy = model.taxonomy;
  for (std::size_t c = 0; c < records.size(); ++c) {
    Prediction p{records[c]->id, {}};
    for (Eigen::Index g = 0; g < scores.rows(); ++g) {
      p.scores.push_back(static_cast<float>(scores(g, static_cast<Eigen::Index>(c))));
    }
    out.predictions.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline void write_model(const std::string& path, const GenreModel& model, std::uint64_t seed) {
  nlohmann::json h;
  h["kind"] = "genre-model";
  h["strategy"] = std::string(to_string(model.strategy));
  h["modalities"] = model.modalities.to_string();
  h["hidden_dim"] = model.hidden_dim;
  h["taxonomy"] = model.taxonomy.names();
  h["dims"] = {{"d_v", model.dims.visual}, {"d_a", model.dims.audio}, {"d_l", model.dims.language}};
  h["seed"] = seed;
  write_checkpoint(path, h, model.layers());
}

inline GenreModel read_model(const std::string& path) {
  auto ck = read_checkpoint(path);
  try {
    const auto& h = ck.header;
    require(h.at("kind") == "genre-model", ErrorKind::kFormat, path + ": not a genre model checkpoint");
    const Dimensions dims{h.at("dims").at("d_v").get<std::size_t>(), h.at("dims").at("d_a").get<std::size_t>(),
                          h.at("dims").at("d_l").get<std::size_t>()};
    Rng unused(0);
    GenreModel model = GenreModel::create(parse_strategy(h.at("strategy").get<std::string>()),
                                          ModalitySet::parse(h.at("modalities").get<std::string>()),
                                          GenreTaxonomy(h.at("taxonomy").get<std::vector<std::string>>()), dims,
                                          h.at("hidden_dim").get<std::size_t>(), unused);
    auto layers = model.mutable_layers();
    require(layers.size() == ck.layers.size(), ErrorKind::kFormat, path + ": layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      require(layers[i]->in_dim() == ck.layers[i].in_dim() && layers[i]->out_dim() == ck.layers[i].out_dim() &&
                  layers[i]->activation == ck.layers[i].activation,
              ErrorKind::kFormat, path + ": layer " + std::to_string(i) + " shape mismatch");
      *layers[i] = std::move(ck.layers[i]);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path + ": malformed checkpoint header: " + e.what());
  }
}

}  // namespace mmshot
