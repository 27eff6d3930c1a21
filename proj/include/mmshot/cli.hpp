#pragma once

// The mmshot command-line driver. Every subcommand reads a JSON config file
// (--config) whose keys are the long flag names; flags and path environment
// variables override it. Each run leaves a manifest next to its outputs.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmshot/analysis.hpp"
#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"
#include "mmshot/fusion.hpp"
#include "mmshot/metrics.hpp"
#include "mmshot/parallel.hpp"
#include "mmshot/random.hpp"
#include "mmshot/sceneboundary.hpp"
#include "mmshot/textlab.hpp"

namespace mmshot::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

/// Reads one flat JSON object holding options of the subcommand being run;
/// `snake_case` keys are accepted for `kebab-case` flags. Keys whose flag has
/// its environment variable set are dropped so the variable wins.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a single JSON object");
    const auto parsed = root_->get_subcommands();
    if (parsed.empty()) throw CLI::ConfigError("a config file needs a subcommand");
    const CLI::App* sub = parsed.front();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.parents = {sub->get_name()};
      item.name = key;
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      const CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
      if (opt == nullptr || item.name == "help") {
        throw CLI::ConfigError("unknown config key '" + key + "' for " + sub->get_name());
      }
      if (!opt->get_envname().empty() && std::getenv(opt->get_envname().c_str()) != nullptr) continue;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(key, v));
      } else {
        item.inputs.push_back(scalar(key, value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config key '" + key + "' must hold a string, number, bool or list of those");
  }

  const CLI::App* root_;
};

// ---------------------------------------------------------------------------
// Run bookkeeping

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

/// "runs/d.jsonl" -> "runs/d"; other extensions are kept.
inline std::string stem_of(const std::string& path) {
  for (std::string_view ext : {".jsonl", ".ckpt", ".json", ".csv"}) {
    if (path.size() > ext.size() && path.ends_with(ext)) return path.substr(0, path.size() - ext.size());
  }
  return path;
}

inline void check_output_path(const std::string& path) {
  require(!path.empty(), ErrorKind::kInvalidArgument, "empty output path");
  const auto parent = std::filesystem::path(path).parent_path();
  require(parent.empty() || std::filesystem::is_directory(parent), ErrorKind::kIo,
          "output directory '" + parent.string() + "' does not exist");
  require(!std::filesystem::is_directory(path), ErrorKind::kIo, "output path '" + path + "' is a directory");
}

inline void check_input_path(const std::string& path, const std::string& what) {
  require(std::filesystem::is_regular_file(path), ErrorKind::kIo, what + " '" + path + "' does not exist");
}

struct RunContext {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string manifest_path;
  std::vector<std::string> artifacts;
  std::string started_at;

  void artifact(const std::string& path) { artifacts.push_back(path); }

  void write_manifest(const std::string& status, const std::string& error = {}) const {
    if (manifest_path.empty()) return;
    nlohmann::json m;
    m["tool"] = "mmshot";
    m["version"] = kVersion;
    m["versions"] = {{"record_format", kFormatVersion},
                     {"checkpoint", std::string(kCheckpointMagic)},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = config;
    m["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    m["threads"] = threads;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["artifacts"] = nlohmann::json::array();
    for (const auto& a : artifacts) {
      const auto bytes = read_file(a);
      m["artifacts"].push_back({{"path", a}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
    }
    m["started_at"] = started_at;
    m["finished_at"] = utc_timestamp();
    write_text(manifest_path, m.dump(2) + "\n");
  }
};

/// Every option's effective value, for the manifest.
inline nlohmann::json echo_options(const CLI::App& sub) {
  nlohmann::json out = nlohmann::json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      out[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
    } else if (!opt->get_default_str().empty()) {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

inline CLI::Validator modality_validator() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          ModalitySet::parse(s);
        } catch (const Error& e) {
          return e.what();
        }
        return {};
      },
      "MODALITIES", "modality list");
}

inline std::string csv_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Subcommands. Each `register_*` binds flags to an argument struct and
// returns the handler that runs after a successful parse.

using Handler = std::function<void(RunContext&, std::ostream&)>;

struct Common {
  std::size_t threads = default_thread_count();
  std::string manifest;
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--manifest", c.manifest, "Manifest path (default: next to the main output)");
}

inline EmbeddingTable load_embeddings(const std::string& path, std::size_t language_dim) {
  check_input_path(path, "embedding table");
  auto table = read_embeddings(path);
  require(table.dimension == language_dim, ErrorKind::kDimensionMismatch,
          "embedding table dim " + std::to_string(table.dimension) + " differs from dataset d_l " +
              std::to_string(language_dim));
  return table;
}

inline std::string default_embeddings(const std::string& explicit_path, const std::string& data) {
  return explicit_path.empty() ? stem_of(data) + ".embeddings.jsonl" : explicit_path;
}

struct SynthArgs {
  Common common;
  std::string out, kind = "genre";
  std::uint64_t seed = 0;
  SynthConfig genre;
  BoundarySynthConfig boundary;
};

inline Handler register_synth(CLI::App& app, SynthArgs& a) {
  auto* sub = app.add_subcommand("synth", "Generate a seeded synthetic dataset with planted structure");
  add_common(sub, a.common);
  sub->add_option("--out", a.out, "Output record stream (.jsonl)")->required();
  sub->add_option("--kind", a.kind, "genre or boundary")->check(CLI::IsMember({"genre", "boundary"}));
  sub->add_option("--seed", a.seed, "Root seed");
  sub->add_option("--videos", a.genre.num_videos, "Number of videos")->check(CLI::PositiveNumber);
  sub->add_option("--genres", a.genre.num_genres, "Number of genres")->check(CLI::PositiveNumber);
  sub->add_option("--visual-dim", a.genre.visual_dim)->check(CLI::PositiveNumber);
  sub->add_option("--audio-dim", a.genre.audio_dim)->check(CLI::PositiveNumber);
  sub->add_option("--language-dim", a.genre.language_dim)->check(CLI::PositiveNumber);
  sub->add_option("--shots", a.genre.shots_per_video, "Shots per video")->check(CLI::PositiveNumber);
  sub->add_option("--frames", a.genre.frames_per_shot, "Frames per shot")->check(CLI::PositiveNumber);
  sub->add_option("--noise-visual", a.genre.noise_visual)->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-audio", a.genre.noise_audio)->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-language", a.genre.noise_language)->check(CLI::NonNegativeNumber);
  sub->add_option("--vocab", a.genre.vocab_per_genre, "Planted words per genre")->check(CLI::PositiveNumber);
  sub->add_option("--asr-noise", a.genre.asr_noise_words, "Off-genre content words per transcript");
  sub->add_option("--sequences", a.boundary.num_sequences, "Boundary kind: annotated sequences")
      ->check(CLI::PositiveNumber);
  sub->add_option("--sequence-shots", a.boundary.shots_per_sequence, "Boundary kind: shots per sequence");
  sub->add_option("--dim", a.boundary.feature_dim, "Boundary kind: shot feature dim")->check(CLI::PositiveNumber);
  sub->add_option("--boundary-rate", a.boundary.boundary_rate)->check(CLI::Range(0.0, 1.0));
  sub->add_option("--shot-noise", a.boundary.shot_noise)->check(CLI::NonNegativeNumber);
  sub->add_option("--opening-shift", a.boundary.opening_shift)->check(CLI::NonNegativeNumber);
  return [&a](RunContext& ctx, std::ostream& out) {
    ctx.seed = a.seed;
    check_output_path(a.out);
    if (a.kind == "boundary") {
      a.boundary.frames_per_shot = a.genre.frames_per_shot;
      const auto ds = synth_boundary_dataset(a.boundary, a.seed);
      write_dataset(ds, a.out);
      ctx.artifact(a.out);
      out << "wrote " << ds.records.size() << " annotated sequences to " << a.out << "\n";
      return;
    }
    const auto s = synth_dataset(a.genre, a.seed);
    const std::string stem = stem_of(a.out);
    write_dataset(s.dataset, a.out);
    write_embeddings(s.embeddings, stem + ".embeddings.jsonl");
    write_text(stem + ".truth.json", truth_to_json(s.truth).dump() + "\n");
    ctx.artifact(a.out);
    ctx.artifact(stem + ".embeddings.jsonl");
    ctx.artifact(stem + ".truth.json");
    out << "wrote " << s.dataset.records.size() << " videos, " << s.embeddings.vectors.size()
        << " embeddings and planted truth under " << stem << ".*\n";
  };
}

struct TrainArgs {
  Common common;
  std::string data, embeddings, out, fusion = "intermediate", modalities = "v,a,l", optimizer = "adam";
  TrainConfig config;
};

inline Handler register_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train a multi-modal genre classifier");
  add_common(sub, a.common);
  sub->add_option("--data", a.data, "Record stream")->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--embeddings", a.embeddings, "Word-embedding table (default: <data>.embeddings.jsonl)")
      ->envname("MMSHOT_EMBEDDINGS");
  sub->add_option("--out", a.out, "Output checkpoint")->required();
  sub->add_option("--fusion", a.fusion)->check(CLI::IsMember({"early", "intermediate", "late"}));
  sub->add_option("--modalities", a.modalities, "Comma list of v,a,l")->check(modality_validator());
  sub->add_option("--seed", a.config.seed);
  sub->add_option("--epochs", a.config.epochs);
  sub->add_option("--batch", a.config.batch_size)->check(CLI::PositiveNumber);
  sub->add_option("--lr", a.config.max_lr, "Peak learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--hidden", a.config.hidden_dim, "Hidden width")->check(CLI::PositiveNumber);
  sub->add_option("--dropout", a.config.dropout)->check(CLI::Range(0.0, 0.99));
  sub->add_option("--keywords", a.config.keywords, "Keywords per transcript")->check(CLI::PositiveNumber);
  sub->add_option("--sample-shots", a.config.sampling.num_shots)->check(CLI::PositiveNumber);
  sub->add_option("--sample-frames", a.config.sampling.frames_per_shot)->check(CLI::PositiveNumber);
  sub->add_option("--warmup", a.config.warmup_fraction)->check(CLI::Range(0.0, 1.0));
  sub->add_option("--optimizer", a.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  sub->add_flag("!--fixed-samples", a.config.resample_each_epoch, "Draw shot samples once instead of every epoch");
  return [&a](RunContext& ctx, std::ostream& out) {
    ctx.seed = a.config.seed;
    check_output_path(a.out);
    a.config.strategy = parse_strategy(a.fusion);
    a.config.modalities = ModalitySet::parse(a.modalities);
    a.config.optimizer = a.optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
    a.config.threads = a.common.threads;
    const bool language = a.config.modalities.has(Modality::kLanguage);
    const std::string emb = default_embeddings(a.embeddings, a.data);
    if (language) check_input_path(emb, "embedding table");

    const auto ds = read_dataset(a.data, a.common.threads);
    std::optional<EmbeddingTable> table;
    if (language) table = load_embeddings(emb, ds.dims.language);
    const auto result = train(ds, a.config, table ? &*table : nullptr);
    write_model(a.out, result.model, a.config.seed);
    std::ostringstream history;
    history << "epoch,train_loss,val_macro_map\n";
    for (const auto& e : result.history) {
      history << e.epoch << ',' << csv_double(e.train_loss) << ',' << csv_double(e.val_macro_map) << '\n';
    }
    write_text(a.out + ".history.csv", history.str());
    ctx.artifact(a.out);
    ctx.artifact(a.out + ".history.csv");
    out << "trained " << to_string(a.config.strategy) << " fusion on " << a.config.modalities.to_string()
        << "; best epoch " << result.best_epoch;
    if (result.best_epoch > 0) out << " (val macro mAP " << result.history[result.best_epoch - 1].val_macro_map << ")";
    out << "\n";
  };
}

inline void write_report_files(RunContext& ctx, const MetricsReport& report, const std::string& prefix) {
  write_text(prefix + ".metrics.json", report_to_json(report).dump(2) + "\n");
  write_text(prefix + ".metrics.csv", report_to_csv(report));
  ctx.artifact(prefix + ".metrics.json");
  ctx.artifact(prefix + ".metrics.csv");
}

inline void print_report(std::ostream& out, const MetricsReport& r) {
  out << "macro: R@0.5 " << r.macro.recall_at_05 << "  P@0.5 " << r.macro.precision_at_05 << "  mAP " << r.macro.map
      << "\nmicro: R@0.5 " << r.micro.recall_at_05 << "  P@0.5 " << r.micro.precision_at_05 << "  mAP "
      << r.micro.map << "\n";
}

struct EvalArgs {
  Common common;
  std::string data, model, embeddings, split = "test", out, micro = "pooled";
  double threshold = 0.5;
  AssembleOptions options;
};

inline Handler register_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Predict a split and write the metrics report");
  add_common(sub, a.common);
  sub->add_option("--data", a.data)->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--model", a.model)->required()->check(CLI::ExistingFile)->envname("MMSHOT_MODEL");
  sub->add_option("--embeddings", a.embeddings)->envname("MMSHOT_EMBEDDINGS");
  sub->add_option("--split", a.split)->check(CLI::IsMember({"train", "val", "test"}));
  sub->add_option("--out", a.out, "Output prefix (default: <model>.<split>)");
  sub->add_option("--threshold", a.threshold)->check(CLI::Range(0.0, 1.0));
  sub->add_option("--micro-map", a.micro, "pooled or weighted")->check(CLI::IsMember({"pooled", "weighted"}));
  sub->add_option("--keywords", a.options.keywords)->check(CLI::PositiveNumber);
  sub->add_option("--sample-shots", a.options.sampling.num_shots)->check(CLI::PositiveNumber);
  sub->add_option("--sample-frames", a.options.sampling.frames_per_shot)->check(CLI::PositiveNumber);
  return [&a](RunContext& ctx, std::ostream& out) {
    const std::string prefix = a.out.empty() ? stem_of(a.model) + "." + a.split : a.out;
    check_output_path(prefix + ".metrics.json");
    const auto model = read_model(a.model);
    const auto ds = read_dataset(a.data, a.common.threads);
    check_compatible(model, ds);
    std::optional<EmbeddingTable> table;
    if (model.modalities.has(Modality::kLanguage)) {
      table = load_embeddings(default_embeddings(a.embeddings, a.data), ds.dims.language);
    }
    const auto preds = infer_dataset(model, ds, *parse_split(a.split), table ? &*table : nullptr, a.options,
                                     a.common.threads);
    write_predictions(preds, prefix + ".predictions.jsonl");
    ctx.artifact(prefix + ".predictions.jsonl");
    const auto report = genre_report(preds, ds, a.threshold,
                                     a.micro == "weighted" ? MicroMapMode::kPrevalenceWeighted : MicroMapMode::kPooled);
    write_report_files(ctx, report, prefix);
    out << a.split << " split, " << preds.predictions.size() << " videos\n";
    print_report(out, report);
  };
}

struct KeywordsArgs {
  Common common;
  std::string data, out;
  std::size_t k = kDefaultKeywords;
};

inline Handler register_keywords(CLI::App& app, KeywordsArgs& a) {
  auto* sub = app.add_subcommand("keywords", "Top-k noun/pronoun/adjective keywords per transcript");
  add_common(sub, a.common);
  sub->add_option("--data", a.data)->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--out", a.out, "Output CSV")->required();
  sub->add_option("-k,--k", a.k, "Keywords per transcript")->check(CLI::PositiveNumber);
  return [&a](RunContext& ctx, std::ostream& out) {
    check_output_path(a.out);
    const auto ds = read_dataset(a.data, a.common.threads);
    std::ostringstream csv;
    csv << "id,rank,keyword,count\n";
    for (const auto& r : ds.records) {
      const auto kw = extract_keywords(r.transcript, a.k);
      for (std::size_t i = 0; i < kw.size(); ++i) {
        std::size_t count = 0;
        for (const auto& t : r.transcript) count += t.text == kw[i] && is_keyword_pos(t.pos);
        csv << r.id << ',' << i + 1 << ',' << kw[i] << ',' << count << '\n';
      }
    }
    write_text(a.out, csv.str());
    ctx.artifact(a.out);
    out << "wrote keywords for " << ds.records.size() << " transcripts to " << a.out << "\n";
  };
}

struct TfidfArgs {
  Common common;
  std::string data, out, raw_out;
  ExclusionConfig exclusion;
  bool no_pos_filter = false;
  std::size_t limit = 20;
};

inline Handler register_tfidf(CLI::App& app, TfidfArgs& a) {
  auto* sub = app.add_subcommand("tfidf", "Per-genre TF-IDF word rankings with cross-genre exclusion");
  add_common(sub, a.common);
  sub->add_option("--data", a.data)->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--out", a.out, "Filtered ranking CSV")->required();
  sub->add_option("--raw-out", a.raw_out, "Also write the unfiltered ranking");
  sub->add_option("--top-n", a.exclusion.top_n, "Words per genre pooled for exclusion")->check(CLI::PositiveNumber);
  sub->add_option("--max-genres", a.exclusion.max_genres, "Exclude words in more than this many top lists");
  sub->add_option("--limit", a.limit, "Rows per genre in the CSVs (0: all)");
  sub->add_flag("--no-pos-filter", a.no_pos_filter, "Count every token, not only nouns/pronouns/adjectives");
  return [&a](RunContext& ctx, std::ostream& out) {
    check_output_path(a.out);
    if (!a.raw_out.empty()) check_output_path(a.raw_out);
    const auto ds = read_dataset(a.data, a.common.threads);
    const auto lists = genre_word_lists(ds, {!a.no_pos_filter});
    const auto filtered = exclusion_filter(lists, a.exclusion);
    write_text(a.out, word_lists_to_csv(filtered, a.limit));
    ctx.artifact(a.out);
    if (!a.raw_out.empty()) {
      write_text(a.raw_out, word_lists_to_csv(lists, a.limit));
      ctx.artifact(a.raw_out);
    }
    std::size_t removed = 0;
    for (std::size_t g = 0; g < lists.size(); ++g) removed += lists[g].words.size() - filtered[g].words.size();
    out << "ranked words for " << lists.size() << " genres; exclusion removed " << removed << " entries\n";
  };
}

struct SlideArgs {
  Common common;
  std::string data, model, embeddings, out, retrieve, retrieve_out;
  std::vector<std::string> ids;
  WindowConfig window;
  std::size_t top_k = 5, keywords = kDefaultKeywords;
};

inline Handler register_slide(CLI::App& app, SlideArgs& a) {
  auto* sub = app.add_subcommand("slide", "Sliding-window genre labeling of long videos");
  add_common(sub, a.common);
  sub->add_option("--data", a.data)->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--model", a.model)->required()->check(CLI::ExistingFile)->envname("MMSHOT_MODEL");
  sub->add_option("--embeddings", a.embeddings)->envname("MMSHOT_EMBEDDINGS");
  sub->add_option("--out", a.out, "Window score CSV")->required();
  sub->add_option("--ids", a.ids, "Record ids to label (default: all)")->delimiter(',');
  sub->add_option("--window", a.window.window, "Shots per window")->check(CLI::PositiveNumber);
  sub->add_option("--stride", a.window.stride)->check(CLI::PositiveNumber);
  sub->add_option("--frames", a.window.frames_per_shot, "Frames per shot feature")->check(CLI::PositiveNumber);
  sub->add_option("--keywords", a.keywords)->check(CLI::PositiveNumber);
  sub->add_option("--retrieve", a.retrieve, "Genre whose top windows are listed");
  sub->add_option("--top-k", a.top_k)->check(CLI::PositiveNumber);
  sub->add_option("--retrieve-out", a.retrieve_out, "Retrieval CSV (default: <out>.retrieval.csv)");
  return [&a](RunContext& ctx, std::ostream& out) {
    check_output_path(a.out);
    const std::string retrieve_out = a.retrieve_out.empty() ? stem_of(a.out) + ".retrieval.csv" : a.retrieve_out;
    if (!a.retrieve.empty()) check_output_path(retrieve_out);
    const auto model = read_model(a.model);
    const auto ds = read_dataset(a.data, a.common.threads);
    check_compatible(model, ds);
    if (!a.retrieve.empty()) {
      require(model.taxonomy.index_of(a.retrieve).has_value(), ErrorKind::kUnknownGenre,
              "unknown genre '" + a.retrieve + "'");
    }
    std::optional<EmbeddingTable> table;
    if (model.modalities.has(Modality::kLanguage)) {
      table = load_embeddings(default_embeddings(a.embeddings, a.data), ds.dims.language);
    }
    std::vector<const VideoRecord*> records;
    if (a.ids.empty()) {
      for (const auto& r : ds.records) records.push_back(&r);
    } else {
      for (const auto& id : a.ids) {
        const auto* r = ds.find(id);
        require(r != nullptr, ErrorKind::kInvalidArgument, "record '" + id + "' not in dataset");
        records.push_back(r);
      }
    }
    std::ostringstream csv, top;
    csv << std::setprecision(9) << "id,start,end,genre,score\n";
    top << std::setprecision(9) << "id,rank,start,end,score\n";
    std::size_t windows = 0;
    for (const auto* r : records) {
      const auto labeling = sliding_window(*r, model, a.window, table ? &*table : nullptr, a.common.threads,
                                           a.keywords);
      windows += labeling.windows.size();
      for (const auto& w : labeling.windows) {
        for (std::size_t g = 0; g < w.scores.size(); ++g) {
          csv << r->id << ',' << w.range.start << ',' << w.range.end << ',' << labeling.taxonomy.name(g) << ','
              << w.scores[g] << '\n';
        }
      }
      if (!a.retrieve.empty()) {
        const auto g = *labeling.taxonomy.index_of(a.retrieve);
        const auto best = retrieve_shots(labeling, a.retrieve, a.top_k);
        for (std::size_t i = 0; i < best.size(); ++i) {
          double score = 0;
          for (const auto& w : labeling.windows) {
            if (w.range == best[i]) score = w.scores[g];
          }
          top << r->id << ',' << i + 1 << ',' << best[i].start << ',' << best[i].end << ',' << score << '\n';
        }
      }
    }
    write_text(a.out, csv.str());
    ctx.artifact(a.out);
    if (!a.retrieve.empty()) {
      write_text(retrieve_out, top.str());
      ctx.artifact(retrieve_out);
    }
    out << "labeled " << windows << " windows across " << records.size() << " videos\n";
  };
}

struct PixstatsArgs {
  Common common;
  std::string data, out;
  std::vector<std::string> ppm;
};

inline Handler register_pixstats(CLI::App& app, PixstatsArgs& a) {
  auto* sub = app.add_subcommand("pixstats", "Brightness and cold/warm statistics per frame or per genre");
  add_common(sub, a.common);
  auto* data = sub->add_option("--data", a.data, "Record stream with pixel stats: per-genre profiles")
                   ->check(CLI::ExistingFile)
                   ->envname("MMSHOT_DATA");
  auto* ppm = sub->add_option("--ppm", a.ppm, "Binary PPM frames: per-frame statistics")->check(CLI::ExistingFile);
  data->excludes(ppm);
  sub->add_option("--out", a.out, "Output CSV")->required();
  return [&a](RunContext& ctx, std::ostream& out) {
    require(!a.data.empty() || !a.ppm.empty(), ErrorKind::kInvalidArgument, "pixstats needs --data or --ppm");
    check_output_path(a.out);
    if (!a.data.empty()) {
      const auto profiles = genre_profiles(read_dataset(a.data, a.common.threads));
      write_text(a.out, profiles_to_csv(profiles));
      out << "wrote profiles for " << profiles.size() << " genres to " << a.out << "\n";
    } else {
      std::ostringstream csv;
      csv << std::setprecision(9) << "path,mean_luma,warm_frac,cold_frac\n";
      for (const auto& p : a.ppm) {
        const auto s = pixel_stats(read_ppm(p));
        csv << p << ',' << s.mean_luma << ',' << s.warm_frac << ',' << s.cold_frac << '\n';
      }
      write_text(a.out, csv.str());
      out << "wrote statistics for " << a.ppm.size() << " frames to " << a.out << "\n";
    }
    ctx.artifact(a.out);
  };
}

struct BoundaryTrainArgs {
  Common common;
  std::string data, out, optimizer = "adam";
  std::size_t frames = 3;
  BoundaryTrainConfig config;
};

inline Handler register_boundary_train(CLI::App& app, BoundaryTrainArgs& a) {
  auto* sub = app.add_subcommand("boundary-train", "Train the four-shot scene-boundary classifier");
  add_common(sub, a.common);
  sub->add_option("--data", a.data, "Annotated sequences")->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--out", a.out, "Output checkpoint")->required();
  sub->add_option("--seed", a.config.seed);
  sub->add_option("--epochs", a.config.epochs);
  sub->add_option("--batch", a.config.batch_size)->check(CLI::PositiveNumber);
  sub->add_option("--lr", a.config.max_lr)->check(CLI::PositiveNumber);
  sub->add_option("--hidden", a.config.hidden, "Hidden widths, comma separated")->delimiter(',');
  sub->add_option("--pos-weight", a.config.weights.positive, "Loss weight of boundary samples")
      ->check(CLI::PositiveNumber);
  sub->add_option("--neg-weight", a.config.weights.negative)->check(CLI::PositiveNumber);
  sub->add_option("--warmup", a.config.warmup_fraction)->check(CLI::Range(0.0, 1.0));
  sub->add_option("--frames", a.frames, "Frames per shot feature")->check(CLI::PositiveNumber);
  sub->add_option("--optimizer", a.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  return [&a](RunContext& ctx, std::ostream& out) {
    ctx.seed = a.config.seed;
    check_output_path(a.out);
    a.config.optimizer = a.optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
    const auto ds = read_dataset(a.data, a.common.threads);
    const auto train_samples = samples_from_dataset(ds, Split::kTrain, a.frames);
    const auto val_samples = samples_from_dataset(ds, Split::kVal, a.frames);
    const auto result = train_boundary(train_samples, val_samples, a.config);
    write_boundary_model(a.out, result.model, a.config.seed);
    std::ostringstream history;
    history << "epoch,train_loss,val_ap\n";
    for (const auto& e : result.history) {
      history << e.epoch << ',' << csv_double(e.train_loss) << ',' << csv_double(e.val_ap) << '\n';
    }
    write_text(a.out + ".history.csv", history.str());
    ctx.artifact(a.out);
    ctx.artifact(a.out + ".history.csv");
    out << "trained on " << train_samples.size() << " samples; best epoch " << result.best_epoch << "\n";
  };
}

struct BoundaryEvalArgs {
  Common common;
  std::string data, model, split = "test", out;
  std::size_t frames = 3;
};

inline Handler register_boundary_eval(CLI::App& app, BoundaryEvalArgs& a) {
  auto* sub = app.add_subcommand("boundary-eval", "AP and Recall@0.5 of a boundary model on a split");
  add_common(sub, a.common);
  sub->add_option("--data", a.data)->required()->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--model", a.model)->required()->check(CLI::ExistingFile)->envname("MMSHOT_MODEL");
  sub->add_option("--split", a.split)->check(CLI::IsMember({"train", "val", "test"}));
  sub->add_option("--out", a.out, "Report JSON (default: <model>.<split>.boundary.json)");
  sub->add_option("--frames", a.frames)->check(CLI::PositiveNumber);
  return [&a](RunContext& ctx, std::ostream& out) {
    const std::string path = a.out.empty() ? stem_of(a.model) + "." + a.split + ".boundary.json" : a.out;
    check_output_path(path);
    const auto model = read_boundary_model(a.model);
    const auto ds = read_dataset(a.data, a.common.threads);
    require(ds.dims.visual == model.feature_dim(), ErrorKind::kDimensionMismatch,
            "model expects shot dim " + std::to_string(model.feature_dim()) + " but data has " +
                std::to_string(ds.dims.visual));
    const auto samples = samples_from_dataset(ds, *parse_split(a.split), a.frames);
    const auto report = eval_boundary(model, samples);
    std::size_t positives = 0;
    for (const auto& s : samples) positives += s.label;
    const nlohmann::json j{{"split", a.split},        {"samples", samples.size()},
                           {"positives", positives},  {"ap", report.ap},
                           {"recall_at_05", report.recall_at_05}, {"no_positives", report.no_positives}};
    write_text(path, j.dump(2) + "\n");
    ctx.artifact(path);
    out << "AP " << report.ap << "  R@0.5 " << report.recall_at_05 << " on " << samples.size() << " samples\n";
  };
}

struct ReportArgs {
  Common common;
  std::string data, predictions, out, micro = "pooled";
  std::vector<std::string> compare;
  double threshold = 0.5;
};

inline Handler register_report(CLI::App& app, ReportArgs& a) {
  auto* sub = app.add_subcommand("report", "Metrics from saved predictions, genre correlation, run comparison");
  add_common(sub, a.common);
  sub->add_option("--data", a.data, "Ground-truth record stream")->check(CLI::ExistingFile)->envname("MMSHOT_DATA");
  sub->add_option("--predictions", a.predictions)->check(CLI::ExistingFile);
  sub->add_option("--compare", a.compare, "name=metrics.json pairs to tabulate")->delimiter(',');
  sub->add_option("--out", a.out, "Output prefix")->required();
  sub->add_option("--threshold", a.threshold)->check(CLI::Range(0.0, 1.0));
  sub->add_option("--micro-map", a.micro)->check(CLI::IsMember({"pooled", "weighted"}));
  return [&a](RunContext& ctx, std::ostream& out) {
    require(!a.data.empty() || !a.compare.empty(), ErrorKind::kInvalidArgument,
            "report needs --data (with optional --predictions) or --compare");
    check_output_path(a.out + ".metrics.json");
    if (!a.data.empty()) {
      const auto ds = read_dataset(a.data, a.common.threads);
      if (!a.predictions.empty()) {
        const auto report = genre_report(read_predictions(a.predictions), ds, a.threshold,
                                         a.micro == "weighted" ? MicroMapMode::kPrevalenceWeighted
                                                               : MicroMapMode::kPooled);
        write_report_files(ctx, report, a.out);
        print_report(out, report);
      }
      const auto corr = genre_correlation(ds);
      std::ostringstream csv;
      csv << std::setprecision(17) << "genre";
      for (const auto& g : ds.taxonomy.names()) csv << ',' << g;
      csv << '\n';
      for (std::size_t i = 0; i < corr.size(); ++i) {
        csv << ds.taxonomy.name(i);
        for (double v : corr[i]) csv << ',' << v;
        csv << '\n';
      }
      write_text(a.out + ".correlation.csv", csv.str());
      ctx.artifact(a.out + ".correlation.csv");
    }
    if (!a.compare.empty()) {
      std::ostringstream csv;
      csv << std::setprecision(17)
          << "run,macro_recall_at_05,macro_precision_at_05,macro_map,micro_recall_at_05,micro_precision_at_05,"
             "micro_map\n";
      for (const auto& entry : a.compare) {
        const auto eq = entry.find('=');
        require(eq != std::string::npos && eq > 0, ErrorKind::kInvalidArgument,
                "--compare entries look like name=path, got '" + entry + "'");
        const std::string name = entry.substr(0, eq), path = entry.substr(eq + 1);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(read_file(path));
          csv << name;
          for (const char* level : {"macro", "micro"}) {
            for (const char* key : {"recall_at_05", "precision_at_05", "map"}) csv << ',' << j.at(level).at(key).get<double>();
          }
          csv << '\n';
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorKind::kFormat, path + ": not a metrics report: " + e.what());
        }
      }
      write_text(a.out + ".comparison.csv", csv.str());
      ctx.artifact(a.out + ".comparison.csv");
      out << csv.str();
    }
  };
}

struct AllArgs {
  SynthArgs synth;
  TrainArgs train;
  EvalArgs eval;
  KeywordsArgs keywords;
  TfidfArgs tfidf;
  SlideArgs slide;
  PixstatsArgs pixstats;
  BoundaryTrainArgs boundary_train;
  BoundaryEvalArgs boundary_eval;
  ReportArgs report;
};

/// The manifest goes next to the first output the subcommand names.
inline std::string default_manifest(const std::string& command, const AllArgs& a) {
  std::string base;
  if (command == "synth") base = a.synth.out;
  if (command == "train") base = a.train.out;
  if (command == "eval") base = a.eval.out.empty() ? stem_of(a.eval.model) + "." + a.eval.split : a.eval.out;
  if (command == "keywords") base = a.keywords.out;
  if (command == "tfidf") base = a.tfidf.out;
  if (command == "slide") base = a.slide.out;
  if (command == "pixstats") base = a.pixstats.out;
  if (command == "boundary-train") base = a.boundary_train.out;
  if (command == "boundary-eval") {
    base = a.boundary_eval.out.empty() ? stem_of(a.boundary_eval.model) + "." + a.boundary_eval.split + ".boundary"
                                       : a.boundary_eval.out;
  }
  if (command == "report") base = a.report.out;
  return stem_of(base) + ".manifest.json";
}

inline const Common& common_of(const std::string& command, const AllArgs& a) {
  if (command == "synth") return a.synth.common;
  if (command == "train") return a.train.common;
  if (command == "eval") return a.eval.common;
  if (command == "keywords") return a.keywords.common;
  if (command == "tfidf") return a.tfidf.common;
  if (command == "slide") return a.slide.common;
  if (command == "pixstats") return a.pixstats.common;
  if (command == "boundary-train") return a.boundary_train.common;
  if (command == "boundary-eval") return a.boundary_eval.common;
  return a.report.common;
}

/// Parses argv and runs one subcommand. Returns 0 on success, 2 on usage
/// errors, 1 on runtime failures; diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"mmshot: multi-modal movie genre classification from shots, audio and transcripts", "mmshot"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON config file; keys are the subcommand's long flag names");
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  auto args = std::make_unique<AllArgs>();
  std::map<std::string, Handler> handlers{
      {"synth", register_synth(app, args->synth)},
      {"train", register_train(app, args->train)},
      {"eval", register_eval(app, args->eval)},
      {"keywords", register_keywords(app, args->keywords)},
      {"tfidf", register_tfidf(app, args->tfidf)},
      {"slide", register_slide(app, args->slide)},
      {"pixstats", register_pixstats(app, args->pixstats)},
      {"boundary-train", register_boundary_train(app, args->boundary_train)},
      {"boundary-eval", register_boundary_eval(app, args->boundary_eval)},
      {"report", register_report(app, args->report)},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  RunContext ctx;
  ctx.command = sub->get_name();
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);
  ctx.config = echo_options(*sub);
  const Common& common = common_of(ctx.command, *args);
  ctx.threads = common.threads;
  ctx.manifest_path = common.manifest.empty() ? default_manifest(ctx.command, *args) : common.manifest;
  ctx.started_at = utc_timestamp();

  auto fail = [&](const std::string& message) {
    err << "mmshot " << ctx.command << ": error: " << message << "\n";
    ctx.artifacts.erase(std::remove_if(ctx.artifacts.begin(), ctx.artifacts.end(),
                                       [](const std::string& p) { return !std::filesystem::is_regular_file(p); }),
                        ctx.artifacts.end());
    try {
      if (std::filesystem::path(ctx.manifest_path).parent_path().empty() ||
          std::filesystem::is_directory(std::filesystem::path(ctx.manifest_path).parent_path())) {
        ctx.write_manifest("failed", message);
      }
    } catch (const std::exception&) {
      // The failure itself is what gets reported.
    }
    return kRuntimeFailure;
  };

  try {
    handlers.at(ctx.command)(ctx, out);
    ctx.write_manifest("ok");
  } catch (const Error& e) {
    return fail(e.what());
  } catch (const std::exception& e) {
    return fail(std::string("unexpected failure: ") + e.what());
  }
  return kOk;
}

}  // namespace mmshot::cli
