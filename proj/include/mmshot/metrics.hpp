#pragma once

// Multi-label threshold and ranking metrics (recall@0.5, precision@0.5,
// mAP at macro and micro level) and the two-number boundary report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"

namespace mmshot {

/// Non-interpolated average precision: rank by descending score (ties keep
/// ascending index), then average precision@k over the positive ranks.
/// Returns 0 when there are no positives. Precisions accumulate in long
/// double and round once, so simple fractions come out correctly rounded.
inline double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), ErrorKind::kShapeMismatch,
          "average_precision: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  long double hits = 0.0L;
  long double sum = 0.0L;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]]) {
      hits += 1.0L;
      sum += hits / static_cast<long double>(k + 1);
    }
  }
  return hits > 0 ? static_cast<double>(sum / hits) : 0.0;
}

struct GenreMetrics {
  std::string genre;
  double recall = 0.0;
  double precision = 0.0;
  double ap = 0.0;
  std::size_t support = 0;  // 0 flags a genre without positives
};

struct AveragedMetrics {
  double recall_at_05 = 0.0;
  double precision_at_05 = 0.0;
  double map = 0.0;
};

struct MetricsReport {
  AveragedMetrics macro;
  AveragedMetrics micro;
  std::vector<GenreMetrics> per_genre;
};

enum class MicroMapMode {
  kPooled,              // one ranking over every (sample, genre) pair
  kPrevalenceWeighted,  // per-genre AP weighted by support
};

namespace detail {
inline double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }
}  // namespace detail

/// scores and labels are sample-major (N x G). A sample counts as positive
/// for a genre when score >= threshold.
inline MetricsReport genre_report(const std::vector<std::vector<double>>& scores,
                                  const std::vector<std::vector<std::uint8_t>>& labels,
                                  const GenreTaxonomy& taxonomy, double threshold = 0.5,
                                  MicroMapMode micro_mode = MicroMapMode::kPooled) {
  require(!scores.empty(), ErrorKind::kEmptyInput, "genre_report: empty prediction set");
  require(scores.size() == labels.size(), ErrorKind::kShapeMismatch,
          "genre_report: predictions and ground truth differ in size");
  const std::size_t G = taxonomy.size();
  const std::size_t N = scores.size();
  for (std::size_t i = 0; i < N; ++i) {
    require(scores[i].size() == G && labels[i].size() == G, ErrorKind::kShapeMismatch,
            "genre_report: row width differs from taxonomy size");
  }

  MetricsReport report;
  double tp_all = 0, fp_all = 0, fn_all = 0;
  double weighted_ap = 0, support_all = 0;
  std::vector<double> col_scores(N);
  std::vector<std::uint8_t> col_labels(N);
  for (std::size_t g = 0; g < G; ++g) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < N; ++i) {
      col_scores[i] = scores[i][g];
      col_labels[i] = labels[i][g];
      const bool predicted = scores[i][g] >= threshold;
      if (predicted && labels[i][g]) ++tp;
      if (predicted && !labels[i][g]) ++fp;
      if (!predicted && labels[i][g]) ++fn;
    }
    GenreMetrics m;
    m.genre = taxonomy.name(g);
    m.support = static_cast<std::size_t>(tp + fn);
    m.recall = detail::ratio(tp, tp + fn);
    m.precision = detail::ratio(tp, tp + fp);
    m.ap = average_precision(col_scores, col_labels);
    report.macro.recall_at_05 += m.recall / static_cast<double>(G);
    report.macro.precision_at_05 += m.precision / static_cast<double>(G);
    report.macro.map += m.ap / static_cast<double>(G);
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    weighted_ap += m.ap * static_cast<double>(m.support);
    support_all += static_cast<double>(m.support);
    report.per_genre.push_back(std::move(m));
  }
  report.micro.recall_at_05 = detail::ratio(tp_all, tp_all + fn_all);
  report.micro.precision_at_05 = detail::ratio(tp_all, tp_all + fp_all);
  if (micro_mode == MicroMapMode::kPooled) {
    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_labels;
    pooled_scores.reserve(N * G);
    pooled_labels.reserve(N * G);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t g = 0; g < G; ++g) {
        pooled_scores.push_back(scores[i][g]);
        pooled_labels.push_back(labels[i][g]);
      }
    }
    report.micro.map = average_precision(pooled_scores, pooled_labels);
  } else {
    report.micro.map = detail::ratio(weighted_ap, support_all);
  }
  return report;
}

struct BoundaryReport {
  double ap = 0.0;
  double recall_at_05 = 0.0;
  bool no_positives = false;
};

inline BoundaryReport boundary_report(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  BoundaryReport out;
  out.ap = average_precision(scores, labels);
  double positives = 0, hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) {
      ++positives;
      if (scores[i] >= 0.5) ++hits;
    }
  }
  out.no_positives = positives == 0;
  out.recall_at_05 = detail::ratio(hits, positives);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction sets

struct Prediction {
  std::string id;
  std::vector<float> scores;

  bool operator==(const Prediction&) const = default;
};

struct PredictionSet {
  GenreTaxonomy taxonomy;
  std::vector<Prediction> predictions;

  bool operator==(const PredictionSet&) const = default;
};

inline constexpr std::string_view kPredictionFormat = "mmshot-predictions";

inline void write_predictions(const PredictionSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  FloatJson h;
  h["format"] = std::string(kPredictionFormat);
  h["version"] = kFormatVersion;
  h["taxonomy"] = set.taxonomy.names();
  out << h.dump() << '\n';
  for (const auto& p : set.predictions) {
    FloatJson j;
    j["id"] = p.id;
    j["scores"] = p.scores;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

inline PredictionSet read_predictions(const std::string& path) {
  auto lines = detail::read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorKind::kFormat, path + ": missing header line");
  PredictionSet set;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      const auto j = FloatJson::parse(lines[i]);
      if (i == 0) {
        if (detail::field(j, "format").get<std::string>() != kPredictionFormat) {
          throw Error(ErrorKind::kFormat, "not a prediction set");
        }
        set.taxonomy = GenreTaxonomy(detail::field(j, "taxonomy").get<std::vector<std::string>>());
        continue;
      }
      Prediction p{detail::field(j, "id").get<std::string>(), detail::floats_from(detail::field(j, "scores"))};
      if (p.scores.size() != set.taxonomy.size()) {
        throw Error(ErrorKind::kDimensionMismatch, "score vector length differs from taxonomy");
      }
      set.predictions.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, path + ":" + std::to_string(i + 1) + ": malformed line: " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return set;
}

/// Aligns predictions with ground-truth records by id and builds the report.
inline MetricsReport genre_report(const PredictionSet& set, const Dataset& truth, double threshold = 0.5,
                                  MicroMapMode micro_mode = MicroMapMode::kPooled) {
  require(!set.predictions.empty(), ErrorKind::kEmptyInput, "genre_report: empty prediction set");
  require(set.taxonomy == truth.taxonomy, ErrorKind::kDimensionMismatch,
          "prediction taxonomy differs from dataset taxonomy");
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<std::uint8_t>> labels;
  for (const auto& p : set.predictions) {
    const VideoRecord* r = truth.find(p.id);
    require(r != nullptr, ErrorKind::kInvalidArgument, "prediction id '" + p.id + "' not in dataset");
    scores.emplace_back(p.scores.begin(), p.scores.end());
    labels.push_back(truth.taxonomy.label_vector(r->genres));
  }
  return genre_report(scores, labels, truth.taxonomy, threshold, micro_mode);
}

inline nlohmann::json report_to_json(const MetricsReport& report) {
  auto averaged = [](const AveragedMetrics& a) {
    return nlohmann::json{{"recall_at_05", a.recall_at_05}, {"precision_at_05", a.precision_at_05}, {"map", a.map}};
  };
  nlohmann::json j;
  j["macro"] = averaged(report.macro);
  j["micro"] = averaged(report.micro);
  j["per_genre"] = nlohmann::json::array();
  for (const auto& g : report.per_genre) {
    j["per_genre"].push_back({{"genre", g.genre},
                              {"recall", g.recall},
                              {"precision", g.precision},
                              {"ap", g.ap},
                              {"support", g.support},
                              {"no_positives", g.support == 0}});
  }
  return j;
}

inline std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "genre,support,recall_at_05,precision_at_05,ap\n";
  for (const auto& g : report.per_genre) {
    out << g.genre << ',' << g.support << ',' << g.recall << ',' << g.precision << ',' << g.ap << '\n';
  }
  return out.str();
}

/// Pearson correlation between genre label indicators (G x G). Constant
/// columns get 0 off the diagonal.
inline std::vector<std::vector<double>> genre_correlation(const Dataset& dataset) {
  const std::size_t G = dataset.taxonomy.size();
  const double N = static_cast<double>(dataset.records.size());
  std::vector<std::vector<double>> x;
  for (const auto& r : dataset.records) {
    const auto l = dataset.taxonomy.label_vector(r.genres);
    x.emplace_back(l.begin(), l.end());
  }
  std::vector<double> mean(G, 0.0), sd(G, 0.0);
  for (const auto& row : x) {
    for (std::size_t g = 0; g < G; ++g) mean[g] += row[g] / N;
  }
  for (const auto& row : x) {
    for (std::size_t g = 0; g < G; ++g) sd[g] += (row[g] - mean[g]) * (row[g] - mean[g]);
  }
  std::vector<std::vector<double>> corr(G, std::vector<double>(G, 0.0));
  for (std::size_t a = 0; a < G; ++a) {
    for (std::size_t b = 0; b < G; ++b) {
      if (a == b) {
        corr[a][b] = 1.0;
        continue;
      }
      double cov = 0;
      for (const auto& row : x) cov += (row[a] - mean[a]) * (row[b] - mean[b]);
      const double den = std::sqrt(sd[a] * sd[b]);
      corr[a][b] = den > 0 ? cov / den : 0.0;
    }
  }
  return corr;
}

}  // namespace mmshot
