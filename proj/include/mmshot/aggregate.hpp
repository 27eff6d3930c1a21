#pragma once

// Shot and video feature aggregation by mean pooling, and the shot/frame
// sampling policy used to build a video's visual representation.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"
#include "mmshot/random.hpp"

namespace mmshot {

using ShotFeature = FeatureVector;
using VideoFeature = FeatureVector;

namespace detail {

// Per coordinate, the values are summed in ascending order in double. The
// result depends only on the multiset of inputs, so it is bit-identical
// under any permutation of the vectors.
inline FeatureVector sorted_mean(std::span<const FeatureVector* const> rows) {
  const std::size_t dim = rows.front()->size();
  FeatureVector out(dim);
  std::vector<double> column(rows.size());
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = (*rows[i])[d];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double x : column) sum += x;
    out[d] = static_cast<float>(sum / static_cast<double>(rows.size()));
  }
  return out;
}

inline FeatureVector mean_of(std::span<const FeatureVector> rows, const char* what) {
  require(!rows.empty(), ErrorKind::kEmptyInput, std::string("cannot average an empty ") + what);
  std::vector<const FeatureVector*> ptrs;
  ptrs.reserve(rows.size());
  for (const auto& r : rows) {
    require(r.size() == rows.front().size(), ErrorKind::kShapeMismatch,
            std::string("inconsistent feature lengths in ") + what);
    ptrs.push_back(&r);
  }
  return sorted_mean(ptrs);
}

}  // namespace detail

inline ShotFeature shot_feature(std::span<const FeatureVector> frames) {
  return detail::mean_of(frames, "shot");
}

inline ShotFeature shot_feature(const Shot& shot) { return shot_feature(shot.frames); }

inline VideoFeature video_feature(std::span<const ShotFeature> shots) {
  return detail::mean_of(shots, "shot sequence");
}

enum class SamplingMode { kSeededRandom, kDeterministicUniform };

struct SamplingConfig {
  std::size_t num_shots = 8;
  std::size_t frames_per_shot = 3;
};

/// Indices floor(j * (count - 1) / (picks - 1)) for j in [0, picks); a single
/// pick takes index 0. Duplicates occur when count < picks.
inline std::vector<std::size_t> evenly_spaced(std::size_t count, std::size_t picks) {
  std::vector<std::size_t> idx(picks, 0);
  if (picks <= 1 || count == 0) return idx;
  for (std::size_t j = 0; j < picks; ++j) idx[j] = j * (count - 1) / (picks - 1);
  return idx;
}

/// Indices of the shots kept by sample_shots, in ascending order.
inline std::vector<std::size_t> sample_shot_indices(std::size_t shot_count, std::size_t num_shots,
                                                    SamplingMode mode, std::uint64_t seed) {
  require(shot_count > 0, ErrorKind::kEmptyInput, "cannot sample from a record with no shots");
  require(num_shots > 0, ErrorKind::kInvalidArgument, "num_shots must be >= 1");
  if (shot_count <= num_shots) {
    std::vector<std::size_t> all(shot_count);
    for (std::size_t i = 0; i < shot_count; ++i) all[i] = i;
    return all;
  }
  if (mode == SamplingMode::kDeterministicUniform) return evenly_spaced(shot_count, num_shots);

  std::vector<std::size_t> pool(shot_count);
  for (std::size_t i = 0; i < shot_count; ++i) pool[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < num_shots; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(shot_count - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(num_shots);
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline std::vector<Shot> sample_shots(const VideoRecord& record, const SamplingConfig& config,
                                      SamplingMode mode, std::uint64_t seed) {
  require(config.frames_per_shot > 0, ErrorKind::kInvalidArgument, "frames_per_shot must be >= 1");
  const auto indices = sample_shot_indices(record.shots.size(), config.num_shots, mode, seed);
  std::vector<Shot> out;
  out.reserve(indices.size());
  for (auto s : indices) {
    const Shot& src = record.shots[s];
    require(!src.frames.empty(), ErrorKind::kEmptyInput, "shot " + std::to_string(s) + " has no frames");
    Shot picked;
    for (auto f : evenly_spaced(src.frames.size(), config.frames_per_shot)) {
      picked.frames.push_back(src.frames[f]);
      if (!src.pixel_stats.empty()) picked.pixel_stats.push_back(src.pixel_stats[f]);
    }
    out.push_back(std::move(picked));
  }
  return out;
}

/// Mean-pooled visual representation of a list of shots.
inline VideoFeature pooled_visual_feature(std::span<const Shot> shots) {
  std::vector<ShotFeature> features;
  features.reserve(shots.size());
  for (const auto& s : shots) features.push_back(shot_feature(s));
  return video_feature(features);
}

}  // namespace mmshot
