#pragma once

// Dataset model, the JSON Lines record-stream format, record validation and
// a seeded generator for datasets with planted, recoverable structure.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "mmshot/error.hpp"
#include "mmshot/parallel.hpp"
#include "mmshot/random.hpp"

namespace mmshot {

// JSON value whose floating-point type is float: numbers are written as the
// shortest decimal that round-trips the 32-bit value and parsed back with
// strtof, which makes the file format bit-exact for feature data.
using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool,
                                       std::int64_t, std::uint64_t, float>;

using FeatureVector = std::vector<float>;

enum class PartOfSpeech { kNoun, kPron, kAdj, kVerb, kAdv, kOther };
enum class Split { kTrain, kVal, kTest };

inline std::string_view to_string(PartOfSpeech pos) {
  switch (pos) {
    case PartOfSpeech::kNoun: return "NOUN";
    case PartOfSpeech::kPron: return "PRON";
    case PartOfSpeech::kAdj: return "ADJ";
    case PartOfSpeech::kVerb: return "VERB";
    case PartOfSpeech::kAdv: return "ADV";
    case PartOfSpeech::kOther: return "OTHER";
  }
  return "OTHER";
}

inline std::optional<PartOfSpeech> parse_pos(std::string_view s) {
  if (s == "NOUN") return PartOfSpeech::kNoun;
  if (s == "PRON") return PartOfSpeech::kPron;
  if (s == "ADJ") return PartOfSpeech::kAdj;
  if (s == "VERB") return PartOfSpeech::kVerb;
  if (s == "ADV") return PartOfSpeech::kAdv;
  if (s == "OTHER") return PartOfSpeech::kOther;
  return std::nullopt;
}

inline std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

struct PixelStats {
  float mean_luma = 0.0f;
  float warm_frac = 0.0f;
  float cold_frac = 0.0f;

  bool operator==(const PixelStats&) const = default;
};

struct Shot {
  std::vector<FeatureVector> frames;
  std::vector<PixelStats> pixel_stats;  // empty, or one per frame

  bool operator==(const Shot&) const = default;
};

struct Token {
  std::string text;
  PartOfSpeech pos = PartOfSpeech::kOther;

  bool operator==(const Token&) const = default;
};

struct VideoRecord {
  std::string id;
  Split split = Split::kTrain;
  std::vector<std::string> genres;
  std::vector<Shot> shots;
  FeatureVector audio_embedding;
  std::vector<Token> transcript;
  // Scene-boundary annotation between consecutive shots; empty when absent.
  std::vector<std::uint8_t> boundary_flags;

  bool operator==(const VideoRecord&) const = default;
};

struct Dimensions {
  std::size_t visual = 512;
  std::size_t audio = 2048;
  std::size_t language = 512;

  bool operator==(const Dimensions&) const = default;
};

inline const std::vector<std::string>& default_genre_names() {
  static const std::vector<std::string> names = {
      "Action",  "Adventure", "Animation", "Biography", "Comedy",
      "Crime",   "Documentary", "Drama",   "Family",    "Fantasy",
      "History", "Horror",    "Music",     "Musical",   "Mystery",
      "Romance", "Sci-Fi",    "Sport",     "Thriller",  "War",
      "Western"};
  return names;
}

class GenreTaxonomy {
 public:
  GenreTaxonomy() : GenreTaxonomy(default_genre_names()) {}

  explicit GenreTaxonomy(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
      require(!n.empty(), ErrorKind::kInvalidArgument, "empty genre name in taxonomy");
      require(seen.insert(n).second, ErrorKind::kInvalidArgument,
              "duplicate genre '" + n + "' in taxonomy");
    }
  }

  /// The first `count` default names, extended with "Genre<k>" past 21.
  static GenreTaxonomy first(std::size_t count) {
    std::vector<std::string> names;
    const auto& defaults = default_genre_names();
    for (std::size_t g = 0; g < count; ++g) {
      names.push_back(g < defaults.size() ? defaults[g] : "Genre" + std::to_string(g + 1));
    }
    return GenreTaxonomy(std::move(names));
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::vector<std::uint8_t> label_vector(const std::vector<std::string>& genres) const {
    std::vector<std::uint8_t> labels(size(), 0);
    for (const auto& g : genres) {
      const auto idx = index_of(g);
      require(idx.has_value(), ErrorKind::kUnknownGenre, "unknown genre '" + g + "'");
      labels[*idx] = 1;
    }
    return labels;
  }

  bool operator==(const GenreTaxonomy&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Dataset {
  GenreTaxonomy taxonomy;
  Dimensions dims;
  std::vector<VideoRecord> records;

  bool operator==(const Dataset&) const = default;

  std::vector<const VideoRecord*> split(Split which) const {
    std::vector<const VideoRecord*> out;
    for (const auto& r : records) {
      if (r.split == which) out.push_back(&r);
    }
    return out;
  }

  const VideoRecord* find(std::string_view id) const {
    for (const auto& r : records) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }
};

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::map<std::string, FeatureVector> vectors;

  const FeatureVector* find(const std::string& token) const {
    const auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }

  bool operator==(const EmbeddingTable&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { kDimensionMismatch, kUnknownGenre, kStructure, kNonFinite };

struct Violation {
  ViolationKind kind;
  std::string message;
};

namespace detail {

inline bool all_finite(const FeatureVector& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

inline bool in_unit(float x) { return std::isfinite(x) && x >= 0.0f && x <= 1.0f; }

}  // namespace detail

/// Returns every violated invariant of `record`; an empty result means valid.
inline std::vector<Violation> validate_record(const VideoRecord& record,
                                              const GenreTaxonomy& taxonomy,
                                              const Dimensions& dims) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind kind, std::string msg) { out.push_back({kind, std::move(msg)}); };

  if (record.id.empty()) add(ViolationKind::kStructure, "empty id");

  std::set<std::string> seen_genres;
  for (const auto& g : record.genres) {
    if (!taxonomy.index_of(g)) add(ViolationKind::kUnknownGenre, "unknown genre '" + g + "'");
    if (!seen_genres.insert(g).second) add(ViolationKind::kStructure, "duplicate genre '" + g + "'");
  }

  if (record.shots.empty()) add(ViolationKind::kStructure, "record has no shots");
  for (std::size_t s = 0; s < record.shots.size(); ++s) {
    const Shot& shot = record.shots[s];
    const std::string where = "shot " + std::to_string(s);
    if (shot.frames.empty()) add(ViolationKind::kStructure, where + " has no frames");
    for (std::size_t f = 0; f < shot.frames.size(); ++f) {
      const auto& frame = shot.frames[f];
      if (frame.size() != dims.visual) {
        add(ViolationKind::kDimensionMismatch,
            where + " frame " + std::to_string(f) + " has length " + std::to_string(frame.size()) +
                ", expected d_v=" + std::to_string(dims.visual));
      } else if (!detail::all_finite(frame)) {
        add(ViolationKind::kNonFinite, where + " frame " + std::to_string(f) + " is not finite");
      }
    }
    if (!shot.pixel_stats.empty()) {
      if (shot.pixel_stats.size() != shot.frames.size()) {
        add(ViolationKind::kStructure, where + " has " + std::to_string(shot.pixel_stats.size()) +
                                           " pixel stats for " + std::to_string(shot.frames.size()) +
                                           " frames");
      }
      for (const auto& ps : shot.pixel_stats) {
        if (!detail::in_unit(ps.mean_luma) || !detail::in_unit(ps.warm_frac) ||
            !detail::in_unit(ps.cold_frac) || ps.warm_frac + ps.cold_frac > 1.0f) {
          add(ViolationKind::kStructure, where + " has out-of-range pixel stats");
          break;
        }
      }
    }
  }

  if (record.audio_embedding.size() != dims.audio) {
    add(ViolationKind::kDimensionMismatch,
        "audio embedding has length " + std::to_string(record.audio_embedding.size()) +
            ", expected d_a=" + std::to_string(dims.audio));
  } else if (!detail::all_finite(record.audio_embedding)) {
    add(ViolationKind::kNonFinite, "audio embedding is not finite");
  }

  for (const auto& tok : record.transcript) {
    if (tok.text.empty()) {
      add(ViolationKind::kStructure, "empty transcript token");
    } else if (std::any_of(tok.text.begin(), tok.text.end(),
                           [](unsigned char c) { return std::isupper(c); })) {
      add(ViolationKind::kStructure, "token '" + tok.text + "' is not lowercase");
    }
  }

  if (!record.boundary_flags.empty()) {
    if (record.boundary_flags.size() + 1 != record.shots.size()) {
      add(ViolationKind::kStructure, "boundary_flags has length " +
                                         std::to_string(record.boundary_flags.size()) +
                                         ", expected shots-1");
    }
    if (std::any_of(record.boundary_flags.begin(), record.boundary_flags.end(),
                    [](std::uint8_t f) { return f > 1; })) {
      add(ViolationKind::kStructure, "boundary flag outside {0,1}");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record-stream serialization

inline constexpr std::string_view kRecordFormat = "mmshot-records";
inline constexpr std::string_view kEmbeddingFormat = "mmshot-embeddings";
inline constexpr int kFormatVersion = 1;

namespace detail {

inline FloatJson record_to_json(const VideoRecord& r) {
  FloatJson j;
  j["id"] = r.id;
  j["split"] = std::string(to_string(r.split));
  j["genres"] = r.genres;
  FloatJson shots = FloatJson::array();
  for (const auto& shot : r.shots) {
    FloatJson s;
    s["frames"] = shot.frames;
    if (!shot.pixel_stats.empty()) {
      FloatJson stats = FloatJson::array();
      for (const auto& ps : shot.pixel_stats) {
        stats.push_back({{"luma", ps.mean_luma}, {"warm", ps.warm_frac}, {"cold", ps.cold_frac}});
      }
      s["pixel_stats"] = std::move(stats);
    }
    shots.push_back(std::move(s));
  }
  j["shots"] = std::move(shots);
  j["audio"] = r.audio_embedding;
  FloatJson tokens = FloatJson::array();
  for (const auto& t : r.transcript) tokens.push_back({t.text, std::string(to_string(t.pos))});
  j["transcript"] = std::move(tokens);
  if (!r.boundary_flags.empty()) {
    std::vector<int> flags(r.boundary_flags.begin(), r.boundary_flags.end());
    j["boundary_flags"] = flags;
  }
  return j;
}

inline FeatureVector floats_from(const FloatJson& j) {
  if (!j.is_array()) throw Error(ErrorKind::kFormat, "expected an array of numbers");
  FeatureVector out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorKind::kFormat, "expected a number");
    out.push_back(v.get<float>());
  }
  return out;
}

inline const FloatJson& field(const FloatJson& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::kFormat, std::string("missing field '") + key + "'");
  return *it;
}

inline VideoRecord record_from_json(const FloatJson& j) {
  if (!j.is_object()) throw Error(ErrorKind::kFormat, "record is not an object");
  static const std::set<std::string> known = {"id",    "split",      "genres",        "shots",
                                              "audio", "transcript", "boundary_flags"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::kFormat, "unknown field '" + key + "'");
  }
  VideoRecord r;
  r.id = field(j, "id").get<std::string>();
  const auto split = parse_split(field(j, "split").get<std::string>());
  if (!split) throw Error(ErrorKind::kFormat, "record '" + r.id + "': bad split");
  r.split = *split;
  r.genres = field(j, "genres").get<std::vector<std::string>>();
  for (const auto& sj : field(j, "shots")) {
    Shot shot;
    for (const auto& fj : field(sj, "frames")) shot.frames.push_back(floats_from(fj));
    if (const auto it = sj.find("pixel_stats"); it != sj.end()) {
      for (const auto& pj : *it) {
        shot.pixel_stats.push_back({field(pj, "luma").get<float>(), field(pj, "warm").get<float>(),
                                    field(pj, "cold").get<float>()});
      }
    }
    r.shots.push_back(std::move(shot));
  }
  r.audio_embedding = floats_from(field(j, "audio"));
  for (const auto& tj : field(j, "transcript")) {
    if (!tj.is_array() || tj.size() != 2) {
      throw Error(ErrorKind::kFormat, "record '" + r.id + "': token must be [text, pos]");
    }
    const auto pos = parse_pos(tj[1].get<std::string>());
    if (!pos) throw Error(ErrorKind::kFormat, "record '" + r.id + "': unknown POS tag");
    r.transcript.push_back({tj[0].get<std::string>(), *pos});
  }
  if (const auto it = j.find("boundary_flags"); it != j.end()) {
    for (const auto& f : *it) r.boundary_flags.push_back(static_cast<std::uint8_t>(f.get<int>()));
  }
  return r;
}

inline ErrorKind error_kind_for(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kDimensionMismatch: return ErrorKind::kDimensionMismatch;
    case ViolationKind::kUnknownGenre: return ErrorKind::kUnknownGenre;
    default: return ErrorKind::kFormat;
  }
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::ofstream open_for_writing(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline std::string header_line(const GenreTaxonomy& taxonomy, const Dimensions& dims) {
  FloatJson h;
  h["format"] = std::string(kRecordFormat);
  h["version"] = kFormatVersion;
  h["taxonomy"] = taxonomy.names();
  h["d_v"] = dims.visual;
  h["d_a"] = dims.audio;
  h["d_l"] = dims.language;
  return h.dump();
}

inline void write_dataset(const Dataset& dataset, const std::string& path) {
  auto out = detail::open_for_writing(path);
  out << header_line(dataset.taxonomy, dataset.dims) << '\n';
  for (const auto& r : dataset.records) out << detail::record_to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

/// Parses and validates a record stream. Lines may be parsed concurrently;
/// records keep file order and the earliest faulty line is the one reported.
inline Dataset read_dataset(const std::string& path, std::size_t threads = 1) {
  auto lines = detail::read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorKind::kFormat, path + ": missing header line");

  Dataset ds;
  try {
    const auto h = FloatJson::parse(lines[0]);
    if (detail::field(h, "format").get<std::string>() != kRecordFormat) {
      throw Error(ErrorKind::kFormat, "not a record stream");
    }
    if (detail::field(h, "version").get<int>() != kFormatVersion) {
      throw Error(ErrorKind::kFormat, "unsupported format version");
    }
    ds.taxonomy = GenreTaxonomy(detail::field(h, "taxonomy").get<std::vector<std::string>>());
    ds.dims = {detail::field(h, "d_v").get<std::size_t>(), detail::field(h, "d_a").get<std::size_t>(),
               detail::field(h, "d_l").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path + ":1: malformed header: " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ":1: " + e.what());
  }

  const std::size_t n = lines.size() - 1;
  std::vector<VideoRecord> records(n);
  std::vector<std::optional<Error>> failures(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::string where = path + ":" + std::to_string(i + 2) + ": ";
    try {
      records[i] = detail::record_from_json(FloatJson::parse(lines[i + 1]));
      const auto violations = validate_record(records[i], ds.taxonomy, ds.dims);
      if (!violations.empty()) {
        std::string msg = where + "record '" + records[i].id + "': ";
        for (std::size_t v = 0; v < violations.size(); ++v) {
          msg += (v ? "; " : "") + violations[v].message;
        }
        failures[i] = Error(detail::error_kind_for(violations.front().kind), msg);
      }
    } catch (const nlohmann::json::exception& e) {
      failures[i] = Error(ErrorKind::kFormat, where + "malformed line: " + e.what());
    } catch (const Error& e) {
      failures[i] = Error(e.kind(), where + e.what());
    }
  });
  for (const auto& f : failures) {
    if (f) throw *f;
  }
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ids.insert(records[i].id).second) {
      throw Error(ErrorKind::kDuplicateId,
                  path + ":" + std::to_string(i + 2) + ": duplicate id '" + records[i].id + "'");
    }
  }
  ds.records = std::move(records);
  return ds;
}

inline void write_embeddings(const EmbeddingTable& table, const std::string& path) {
  auto out = detail::open_for_writing(path);
  FloatJson h;
  h["format"] = std::string(kEmbeddingFormat);
  h["version"] = kFormatVersion;
  h["d_l"] = table.dimension;
  out << h.dump() << '\n';
  for (const auto& [token, vec] : table.vectors) {
    FloatJson j;
    j["token"] = token;
    j["vector"] = vec;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

inline EmbeddingTable read_embeddings(const std::string& path) {
  auto lines = detail::read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorKind::kFormat, path + ": missing header line");
  EmbeddingTable table;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path + ":" + std::to_string(i + 1) + ": ";
    try {
      const auto j = FloatJson::parse(lines[i]);
      if (i == 0) {
        if (detail::field(j, "format").get<std::string>() != kEmbeddingFormat) {
          throw Error(ErrorKind::kFormat, "not an embedding table");
        }
        table.dimension = detail::field(j, "d_l").get<std::size_t>();
        continue;
      }
      auto token = detail::field(j, "token").get<std::string>();
      auto vec = detail::floats_from(detail::field(j, "vector"));
      if (vec.size() != table.dimension) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "vector for '" + token + "' has length " + std::to_string(vec.size()) +
                        ", expected d_l=" + std::to_string(table.dimension));
      }
      if (!detail::all_finite(vec)) throw Error(ErrorKind::kFormat, "non-finite vector");
      if (!table.vectors.emplace(std::move(token), std::move(vec)).second) {
        throw Error(ErrorKind::kDuplicateId, "duplicate token");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, where + "malformed line: " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Splits

/// Re-draws every record's split with a 7:1:2 train/val/test ratio.
inline void resplit(Dataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "resplit"));
  rng.shuffle(std::span(order));
  const std::size_t n_train = n * 7 / 10;
  const std::size_t n_val = n / 10;
  for (std::size_t k = 0; k < n; ++k) {
    dataset.records[order[k]].split =
        k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
  std::size_t num_videos = 600;
  std::size_t num_genres = 8;
  std::size_t visual_dim = 16;
  std::size_t audio_dim = 16;
  std::size_t language_dim = 16;
  std::size_t shots_per_video = 12;
  std::size_t frames_per_shot = 4;
  double noise_visual = 0.3;
  double noise_audio = 0.3;
  double noise_language = 0.3;
  std::size_t vocab_per_genre = 8;
  // Words present in every transcript, more often than any genre word.
  std::size_t common_words = 12;
  std::size_t filler_vocab = 300;
  std::size_t filler_per_video = 20;
  // Content-POS tokens unrelated to genre, repeated like genre words so they
  // compete for keyword slots.
  std::size_t asr_noise_words = 4;
  std::size_t vocab_repeats = 2;
  std::size_t common_repeats = 3;
  double genre_skew = 0.8;
  bool pixel_stats = true;
};

struct PlantedTruth {
  GenreTaxonomy taxonomy;
  // One direction per genre (outer index genre).
  std::vector<FeatureVector> visual_directions;
  std::vector<FeatureVector> audio_directions;
  std::vector<FeatureVector> language_directions;
  std::vector<std::vector<std::string>> vocabularies;
  std::vector<std::string> common_words;
  std::vector<float> genre_brightness;
  std::vector<float> genre_warmth;

  bool operator==(const PlantedTruth&) const = default;
};

struct SynthResult {
  Dataset dataset;
  EmbeddingTable embeddings;
  PlantedTruth truth;
};

namespace detail {

inline std::string make_word(Rng& rng, std::size_t syllables) {
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kConsonants[rng.index(kConsonants.size())];
    w += kVowels[rng.index(kVowels.size())];
  }
  return w;
}

/// Draws `count` distinct words not already in `used`.
inline std::vector<std::string> make_words(Rng& rng, std::size_t count, std::size_t syllables,
                                           std::set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < count) {
    auto w = make_word(rng, syllables);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

inline FeatureVector random_direction(Rng& rng, std::size_t dim) {
  FeatureVector v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

inline float clamp_unit(double x) { return static_cast<float>(std::clamp(x, 0.0, 1.0)); }

inline void validate_synth_config(const SynthConfig& c) {
  require(c.num_videos >= 1 && c.num_genres >= 1 && c.visual_dim >= 1 && c.audio_dim >= 1 &&
              c.language_dim >= 1 && c.shots_per_video >= 1 && c.frames_per_shot >= 1 &&
              c.vocab_per_genre >= 1,
          ErrorKind::kInvalidArgument, "synthetic config counts must be >= 1");
  require(c.noise_visual >= 0 && c.noise_audio >= 0 && c.noise_language >= 0,
          ErrorKind::kInvalidArgument, "noise sigma must be >= 0");
  require(c.vocab_repeats >= 2 && c.common_repeats > c.vocab_repeats, ErrorKind::kInvalidArgument,
          "need common_repeats > vocab_repeats >= 2 so filler words never tie genre words");
  require(c.filler_per_video <= c.filler_vocab, ErrorKind::kInvalidArgument,
          "filler_per_video exceeds filler_vocab");
  require(c.genre_skew > 0 && c.genre_skew <= 1, ErrorKind::kInvalidArgument,
          "genre_skew must be in (0, 1]");
}

/// 1-3 positives, genres drawn without replacement with weights skew^g.
inline std::vector<std::size_t> draw_genres(Rng& rng, std::size_t num_genres, double skew) {
  const std::size_t k = std::min<std::size_t>(1 + rng.index(3), num_genres);
  std::vector<double> weight(num_genres);
  for (std::size_t g = 0; g < num_genres; ++g) weight[g] = std::pow(skew, static_cast<double>(g));
  std::vector<std::size_t> chosen;
  for (std::size_t pick = 0; pick < k; ++pick) {
    double total = 0;
    for (double w : weight) total += w;
    double u = rng.uniform() * total;
    std::size_t g = 0;
    for (; g + 1 < num_genres; ++g) {
      if (weight[g] > 0 && u < weight[g]) break;
      u -= weight[g];
    }
    while (weight[g] == 0) --g;
    chosen.push_back(g);
    weight[g] = 0;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace detail

/// Generates a dataset where visual frames are sum_g y_g * dir_v[g] + noise,
/// audio is sum_g y_g * dir_a[g] + noise, and transcripts carry each active
/// genre's vocabulary. A pure function of (config, seed).
inline SynthResult synth_dataset(const SynthConfig& config, std::uint64_t seed) {
  detail::validate_synth_config(config);
  const std::size_t G = config.num_genres;
  SynthResult out;
  PlantedTruth& truth = out.truth;
  truth.taxonomy = GenreTaxonomy::first(G);

  Rng plant(derive_seed(seed, "synth/plant"));
  for (std::size_t g = 0; g < G; ++g) {
    truth.visual_directions.push_back(detail::random_direction(plant, config.visual_dim));
    truth.audio_directions.push_back(detail::random_direction(plant, config.audio_dim));
    truth.language_directions.push_back(detail::random_direction(plant, config.language_dim));
    truth.genre_brightness.push_back(static_cast<float>(plant.uniform(0.2, 0.8)));
    truth.genre_warmth.push_back(static_cast<float>(plant.uniform(0.1, 0.6)));
  }

  std::set<std::string> used;
  Rng words(derive_seed(seed, "synth/words"));
  for (std::size_t g = 0; g < G; ++g) {
    truth.vocabularies.push_back(detail::make_words(words, config.vocab_per_genre, 3, used));
  }
  truth.common_words = detail::make_words(words, config.common_words, 2, used);
  const auto filler = detail::make_words(words, config.filler_vocab, 4, used);
  std::vector<PartOfSpeech> filler_pos;
  for (std::size_t i = 0; i < filler.size(); ++i) {
    filler_pos.push_back(static_cast<PartOfSpeech>(words.index(6)));
  }
  static constexpr PartOfSpeech kContent[] = {PartOfSpeech::kNoun, PartOfSpeech::kPron,
                                              PartOfSpeech::kAdj};

  // Language embeddings: genre words sit near their genre direction, every
  // other word is pure noise.
  EmbeddingTable& table = out.embeddings;
  table.dimension = config.language_dim;
  Rng embed(derive_seed(seed, "synth/embeddings"));
  for (std::size_t g = 0; g < G; ++g) {
    for (const auto& w : truth.vocabularies[g]) {
      FeatureVector v = truth.language_directions[g];
      for (auto& x : v) x += static_cast<float>(config.noise_language * embed.normal());
      table.vectors[w] = std::move(v);
    }
  }
  for (const auto& w : truth.common_words) table.vectors[w] = detail::random_direction(embed, config.language_dim);
  for (const auto& w : filler) table.vectors[w] = detail::random_direction(embed, config.language_dim);

  Dataset& ds = out.dataset;
  ds.taxonomy = truth.taxonomy;
  ds.dims = {config.visual_dim, config.audio_dim, config.language_dim};
  Rng rng(derive_seed(seed, "synth/records"));
  const std::size_t id_width = std::to_string(config.num_videos).size();

  for (std::size_t v = 0; v < config.num_videos; ++v) {
    VideoRecord r;
    std::string num = std::to_string(v);
    r.id = "vid" + std::string(id_width - num.size(), '0') + num;
    const auto active = detail::draw_genres(rng, G, config.genre_skew);
    for (auto g : active) r.genres.push_back(truth.taxonomy.name(g));

    FeatureVector clean_visual(config.visual_dim, 0.0f);
    FeatureVector clean_audio(config.audio_dim, 0.0f);
    double brightness = 0, warmth = 0;
    for (auto g : active) {
      for (std::size_t d = 0; d < config.visual_dim; ++d) clean_visual[d] += truth.visual_directions[g][d];
      for (std::size_t d = 0; d < config.audio_dim; ++d) clean_audio[d] += truth.audio_directions[g][d];
      brightness += truth.genre_brightness[g];
      warmth += truth.genre_warmth[g];
    }
    brightness /= static_cast<double>(active.size());
    warmth /= static_cast<double>(active.size());

    for (std::size_t s = 0; s < config.shots_per_video; ++s) {
      Shot shot;
      for (std::size_t f = 0; f < config.frames_per_shot; ++f) {
        FeatureVector frame = clean_visual;
        if (config.noise_visual > 0) {
          for (auto& x : frame) x += static_cast<float>(config.noise_visual * rng.normal());
        }
        shot.frames.push_back(std::move(frame));
        if (config.pixel_stats) {
          const float warm = detail::clamp_unit(warmth + 0.05 * rng.normal());
          const float cold = std::min(detail::clamp_unit(0.7 - warmth + 0.05 * rng.normal()), 1.0f - warm);
          shot.pixel_stats.push_back({detail::clamp_unit(brightness + 0.05 * rng.normal()), warm, cold});
        }
      }
      r.shots.push_back(std::move(shot));
    }

    r.audio_embedding = clean_audio;
    if (config.noise_audio > 0) {
      for (auto& x : r.audio_embedding) x += static_cast<float>(config.noise_audio * rng.normal());
    }

    for (auto g : active) {
      for (const auto& w : truth.vocabularies[g]) {
        const PartOfSpeech pos = kContent[fnv1a64(w) % 3];
        for (std::size_t k = 0; k < config.vocab_repeats; ++k) r.transcript.push_back({w, pos});
      }
    }
    for (const auto& w : truth.common_words) {
      const PartOfSpeech pos = kContent[fnv1a64(w) % 3];
      for (std::size_t k = 0; k < config.common_repeats; ++k) r.transcript.push_back({w, pos});
    }
    std::vector<std::size_t> filler_idx(filler.size());
    for (std::size_t i = 0; i < filler.size(); ++i) filler_idx[i] = i;
    for (std::size_t i = 0; i < config.filler_per_video; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.index(filler.size() - i));
      std::swap(filler_idx[i], filler_idx[j]);
      r.transcript.push_back({filler[filler_idx[i]], filler_pos[filler_idx[i]]});
    }
    for (std::size_t i = 0; i < config.asr_noise_words; ++i) {
      const std::size_t j = static_cast<std::size_t>(rng.index(filler.size()));
      for (std::size_t k = 0; k < config.vocab_repeats; ++k) {
        r.transcript.push_back({filler[j], PartOfSpeech::kNoun});
      }
    }
    rng.shuffle(std::span(r.transcript));
    ds.records.push_back(std::move(r));
  }
  resplit(ds, derive_seed(seed, "synth/split"));
  return out;
}

inline FloatJson truth_to_json(const PlantedTruth& t) {
  FloatJson j;
  j["taxonomy"] = t.taxonomy.names();
  j["visual_directions"] = t.visual_directions;
  j["audio_directions"] = t.audio_directions;
  j["language_directions"] = t.language_directions;
  j["vocabularies"] = t.vocabularies;
  j["common_words"] = t.common_words;
  j["genre_brightness"] = t.genre_brightness;
  j["genre_warmth"] = t.genre_warmth;
  return j;
}

inline PlantedTruth truth_from_json(const FloatJson& j) {
  PlantedTruth t;
  t.taxonomy = GenreTaxonomy(j.at("taxonomy").get<std::vector<std::string>>());
  for (const auto& v : j.at("visual_directions")) t.visual_directions.push_back(detail::floats_from(v));
  for (const auto& v : j.at("audio_directions")) t.audio_directions.push_back(detail::floats_from(v));
  for (const auto& v : j.at("language_directions")) t.language_directions.push_back(detail::floats_from(v));
  t.vocabularies = j.at("vocabularies").get<std::vector<std::vector<std::string>>>();
  t.common_words = j.at("common_words").get<std::vector<std::string>>();
  t.genre_brightness = detail::floats_from(j.at("genre_brightness"));
  t.genre_warmth = detail::floats_from(j.at("genre_warmth"));
  return t;
}

// ---------------------------------------------------------------------------
// Annotated shot sequences for scene-boundary detection

struct BoundarySynthConfig {
  std::size_t num_sequences = 40;
  std::size_t shots_per_sequence = 53;
  std::size_t feature_dim = 16;
  std::size_t frames_per_shot = 3;
  // Probability that a scene ends after any given shot.
  double boundary_rate = 1.0 / 11.0;
  double scene_spread = 1.0;
  double shot_noise = 0.3;
  // Magnitude of the planted shift carried by the first shot of every scene.
  double opening_shift = 2.0;
};

/// Each scene has its own centroid; the first shot after a boundary is
/// additionally shifted along a planted direction, so boundaries are
/// separable from the two shots around the gap.
inline Dataset synth_boundary_dataset(const BoundarySynthConfig& config, std::uint64_t seed) {
  require(config.num_sequences >= 1 && config.shots_per_sequence >= 4 && config.feature_dim >= 1 &&
              config.frames_per_shot >= 1,
          ErrorKind::kInvalidArgument, "boundary synth needs >= 4 shots per sequence");
  Dataset ds;
  ds.taxonomy = GenreTaxonomy(std::vector<std::string>{});
  ds.dims = {config.feature_dim, 1, 1};
  Rng plant(derive_seed(seed, "boundary/plant"));
  FeatureVector shift = detail::random_direction(plant, config.feature_dim);
  double norm = 0;
  for (float x : shift) norm += double(x) * x;
  norm = std::sqrt(norm);
  for (auto& x : shift) x = static_cast<float>(x / norm * config.opening_shift);

  Rng rng(derive_seed(seed, "boundary/records"));
  const std::size_t id_width = std::to_string(config.num_sequences).size();
  for (std::size_t q = 0; q < config.num_sequences; ++q) {
    VideoRecord r;
    std::string num = std::to_string(q);
    r.id = "seq" + std::string(id_width - num.size(), '0') + num;
    r.audio_embedding = {0.0f};
    FeatureVector centroid = detail::random_direction(rng, config.feature_dim);
    for (auto& x : centroid) x = static_cast<float>(x * config.scene_spread);
    bool opening = false;
    for (std::size_t s = 0; s < config.shots_per_sequence; ++s) {
      if (s > 0) {
        const bool boundary = rng.uniform() < config.boundary_rate;
        r.boundary_flags.push_back(boundary ? 1 : 0);
        if (boundary) {
          centroid = detail::random_direction(rng, config.feature_dim);
          for (auto& x : centroid) x = static_cast<float>(x * config.scene_spread);
        }
        opening = boundary;
      }
      Shot shot;
      for (std::size_t f = 0; f < config.frames_per_shot; ++f) {
        FeatureVector frame(config.feature_dim);
        for (std::size_t d = 0; d < config.feature_dim; ++d) {
          frame[d] = static_cast<float>(centroid[d] + (opening ? shift[d] : 0.0f) +
                                        config.shot_noise * rng.normal());
        }
        shot.frames.push_back(std::move(frame));
      }
      r.shots.push_back(std::move(shot));
    }
    ds.records.push_back(std::move(r));
  }
  resplit(ds, derive_seed(seed, "boundary/split"));
  return ds;
}

}  // namespace mmshot
