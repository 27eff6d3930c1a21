#pragma once

// Long-video analysis: sliding-window genre labeling, window retrieval per
// genre, and low-level pixel statistics aggregated into genre profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mmshot/aggregate.hpp"
#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"
#include "mmshot/fusion.hpp"
#include "mmshot/parallel.hpp"

namespace mmshot {

struct WindowConfig {
  std::size_t window = 8;
  std::size_t stride = 4;
  std::size_t frames_per_shot = 3;
};

struct WindowRange {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const WindowRange&) const = default;
};

/// Full windows at starts 0, s, 2s, ...; when they leave a tail uncovered, one
/// partial window at the next start is kept if it spans at least W/2 shots.
/// A sequence shorter than W yields a single window over all shots.
inline std::vector<WindowRange> window_ranges(std::size_t shot_count, const WindowConfig& config) {
  require(shot_count > 0, ErrorKind::kEmptyInput, "sliding window over an empty record");
  require(config.window > 0 && config.stride > 0, ErrorKind::kInvalidArgument, "window and stride must be >= 1");
  std::vector<WindowRange> out;
  if (shot_count < config.window) return {{0, shot_count}};
  std::size_t start = 0;
  for (; start + config.window <= shot_count; start += config.stride) out.push_back({start, start + config.window});
  const std::size_t covered = out.back().end;
  if (covered < shot_count && start < shot_count && 2 * (shot_count - start) >= config.window) {
    out.push_back({start, shot_count});
  }
  return out;
}

struct WindowScore {
  WindowRange range;
  std::vector<double> scores;  // one per genre
};

struct WindowLabeling {
  GenreTaxonomy taxonomy;
  std::vector<WindowScore> windows;
};

/// Predicts every window from the mean of its shot features. Audio and
/// language, if the model uses them, come from the whole record.
inline WindowLabeling sliding_window(const VideoRecord& record, const GenreModel& model, const WindowConfig& config,
                                     const EmbeddingTable* table, std::size_t threads = 1,
                                     std::size_t keywords = kDefaultKeywords) {
  require(model.modalities.has(Modality::kVisual), ErrorKind::kInvalidArgument,
          "sliding-window analysis needs a model with the visual modality");
  const auto ranges = window_ranges(record.shots.size(), config);
  std::vector<ShotFeature> shot_features(record.shots.size());
  for (std::size_t s = 0; s < record.shots.size(); ++s) {
    std::vector<FeatureVector> frames;
    for (auto f : evenly_spaced(record.shots[s].frames.size(), config.frames_per_shot)) {
      frames.push_back(record.shots[s].frames.at(f));
    }
    shot_features[s] = shot_feature(frames);
  }

  ModalitySet global_only(false, model.modalities.has(Modality::kAudio), model.modalities.has(Modality::kLanguage));
  ModalityFeatures global;
  if (global_only.count() > 0) {
    AssembleOptions options;
    options.keywords = keywords;
    global = assemble_inputs(record, table, global_only, false, 0, options);
  }

  std::vector<ModalityFeatures> rows(ranges.size());
  parallel_for(ranges.size(), threads, [&](std::size_t w) {
    rows[w] = global;
    rows[w].visual = video_feature(
        std::span<const ShotFeature>(shot_features.data() + ranges[w].start, ranges[w].end - ranges[w].start));
  });
  const Matrix scores = predict(model, stack_all(rows, model.modalities));

  WindowLabeling out;
  out.taxonomy = model.taxonomy;
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    WindowScore ws{ranges[w], {}};
    for (Eigen::Index g = 0; g < scores.rows(); ++g) ws.scores.push_back(scores(g, static_cast<Eigen::Index>(w)));
    out.windows.push_back(std::move(ws));
  }
  return out;
}

/// The top_k windows by the genre's score (desc), earlier windows first on ties.
inline std::vector<WindowRange> retrieve_shots(const WindowLabeling& labeling, const std::string& genre,
                                               std::size_t top_k) {
  const auto g = labeling.taxonomy.index_of(genre);
  require(g.has_value(), ErrorKind::kUnknownGenre, "unknown genre '" + genre + "'");
  std::vector<std::size_t> order(labeling.windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return labeling.windows[a].scores[*g] > labeling.windows[b].scores[*g];
  });
  std::vector<WindowRange> out;
  for (std::size_t i = 0; i < order.size() && i < top_k; ++i) out.push_back(labeling.windows[order[i]].range);
  return out;
}

inline std::string labeling_to_csv(const WindowLabeling& labeling) {
  std::ostringstream out;
  out << std::setprecision(9) << "start,end,genre,score\n";
  for (const auto& w : labeling.windows) {
    for (std::size_t g = 0; g < w.scores.size(); ++g) {
      out << w.range.start << ',' << w.range.end << ',' << labeling.taxonomy.name(g) << ',' << w.scores[g] << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Pixel statistics

struct RgbFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples
};

struct PixelCounts {
  std::size_t total = 0;
  std::size_t warm = 0;
  std::size_t cold = 0;
  std::size_t neutral = 0;
  double luma_sum = 0.0;
};

inline constexpr double kNeutralSaturation = 0.15;
inline constexpr double kNeutralValue = 0.1;

/// Rec. 709 luma per pixel; HSV hue bands classify chromatic pixels as warm
/// ([0,90) or [330,360) degrees) or cold ([90,330)). Pixels with saturation
/// below 0.15 or value below 0.1 are neutral.
inline PixelCounts count_pixels(const RgbFrame& frame) {
  require(frame.width > 0 && frame.height > 0, ErrorKind::kEmptyInput, "empty frame");
  require(frame.pixels.size() == frame.width * frame.height * 3, ErrorKind::kShapeMismatch,
          "frame buffer size does not match width x height x 3");
  PixelCounts c;
  c.total = frame.width * frame.height;
  for (std::size_t p = 0; p < c.total; ++p) {
    const double r = frame.pixels[3 * p], g = frame.pixels[3 * p + 1], b = frame.pixels[3 * p + 2];
    c.luma_sum += (0.2126 * r + 0.7152 * g + 0.0722 * b) / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double value = mx / 255.0;
    const double saturation = mx > 0 ? (mx - mn) / mx : 0.0;
    if (saturation < kNeutralSaturation || value < kNeutralValue) {
      ++c.neutral;
      continue;
    }
    const double delta = mx - mn;
    double hue;
    if (mx == r) {
      hue = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      hue = 60.0 * ((b - r) / delta + 2.0);
    } else {
      hue = 60.0 * ((r - g) / delta + 4.0);
    }
    if (hue < 0) hue += 360.0;
    if (hue < 90.0 || hue >= 330.0) {
      ++c.warm;
    } else {
      ++c.cold;
    }
  }
  return c;
}

inline PixelStats pixel_stats(const RgbFrame& frame) {
  const auto c = count_pixels(frame);
  const double n = static_cast<double>(c.total);
  return {static_cast<float>(c.luma_sum / n), static_cast<float>(static_cast<double>(c.warm) / n),
          static_cast<float>(static_cast<double>(c.cold) / n)};
}

/// Reads a binary PPM (P6, maxval 255).
inline RgbFrame read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok += ch;
    }
    return tok;
  };
  if (next_token() != "P6") throw Error(ErrorKind::kFormat, path + ": not a binary PPM (P6)");
  RgbFrame frame;
  try {
    frame.width = std::stoul(next_token());
    frame.height = std::stoul(next_token());
    if (std::stoul(next_token()) != 255) throw Error(ErrorKind::kFormat, path + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::kFormat, path + ": malformed PPM header");
  }
  frame.pixels.resize(frame.width * frame.height * 3);
  if (!in.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()))) {
    throw Error(ErrorKind::kFormat, path + ": truncated PPM");
  }
  return frame;
}

struct IntervalEstimate {
  double mean = 0.0;
  std::optional<double> half_width;  // 1.96 * s / sqrt(n); absent for n < 2
};

inline IntervalEstimate confidence_interval(std::span<const double> values) {
  IntervalEstimate out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() >= 2) {
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

struct GenreProfile {
  std::string genre;
  std::size_t videos = 0;
  IntervalEstimate brightness;
  IntervalEstimate cold_warm_ratio;
  // Fewer than two videos: the interval is not reported.
  bool flagged = false;
};

inline constexpr double kWarmFloor = 1e-6;

/// Per-video means over all frames' pixel stats, then per-genre means with
/// 95% normal intervals. Videos without pixel stats are ignored.
inline std::vector<GenreProfile> genre_profiles(const Dataset& dataset) {
  const std::size_t G = dataset.taxonomy.size();
  std::vector<std::vector<double>> brightness(G), ratio(G);
  for (const auto& r : dataset.records) {
    double luma = 0, warm = 0, cold = 0, frames = 0;
    for (const auto& shot : r.shots) {
      for (const auto& ps : shot.pixel_stats) {
        luma += ps.mean_luma;
        warm += ps.warm_frac;
        cold += ps.cold_frac;
        ++frames;
      }
    }
    if (frames == 0) continue;
    for (const auto& g : r.genres) {
      const auto idx = dataset.taxonomy.index_of(g);
      if (!idx) continue;
      brightness[*idx].push_back(luma / frames);
      ratio[*idx].push_back((cold / frames) / std::max(warm / frames, kWarmFloor));
    }
  }
  std::vector<GenreProfile> out;
  for (std::size_t g = 0; g < G; ++g) {
    GenreProfile p;
    p.genre = dataset.taxonomy.name(g);
    p.videos = brightness[g].size();
    p.brightness = confidence_interval(brightness[g]);
    p.cold_warm_ratio = confidence_interval(ratio[g]);
    p.flagged = p.videos < 2;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string profiles_to_csv(const std::vector<GenreProfile>& profiles) {
  std::ostringstream out;
  out << std::setprecision(9) << "genre,videos,brightness_mean,brightness_ci,cold_warm_mean,cold_warm_ci,flagged\n";
  for (const auto& p : profiles) {
    out << p.genre << ',' << p.videos << ',' << p.brightness.mean << ',';
    if (p.brightness.half_width) out << *p.brightness.half_width;
    out << ',' << p.cold_warm_ratio.mean << ',';
    if (p.cold_warm_ratio.half_width) out << *p.cold_warm_ratio.half_width;
    out << ',' << (p.flagged ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace mmshot
