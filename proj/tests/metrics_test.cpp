#include "mmshot/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"

namespace mmshot {
namespace {

// Brute force: for every positive, precision among items ranked at or above
// it. Rank ties resolve towards the lower index.
double ap_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  const std::size_t n = s.size();
  double total = 0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!y[i]) continue;
    ++positives;
    std::size_t above = 0, above_pos = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool ranked_before = s[j] > s[i] || (s[j] == s[i] && j <= i);
      if (ranked_before) {
        ++above;
        above_pos += y[j];
      }
    }
    total += static_cast<double>(above_pos) / static_cast<double>(above);
  }
  return positives ? total / static_cast<double>(positives) : 0.0;
}

TEST(AveragePrecision, HandCase) {
  const std::vector<double> s{0.9, 0.8, 0.7};
  const std::vector<std::uint8_t> y{1, 0, 1};
  EXPECT_NEAR(average_precision(s, y), 5.0 / 6.0, 1e-15);
}

TEST(AveragePrecision, NoPositivesIsZero) {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<std::uint8_t> y{0, 0};
  EXPECT_EQ(average_precision(s, y), 0.0);
}

TEST(AveragePrecision, MatchesBruteForceIncludingTies) {
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? static_cast<double>(rng.index(4)) / 4.0 : rng.uniform();
      y[i] = rng.uniform() < 0.3;
    }
    EXPECT_NEAR(average_precision(s, y), ap_oracle(s, y), 1e-12);
  }
}

TEST(AveragePrecision, PerfectRankingIsOne) {
  const std::vector<double> s{0.1, 0.9, 0.8, 0.2};
  const std::vector<std::uint8_t> y{0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(average_precision(s, y), 1.0);
}

TEST(GenreReport, HandComputedMacroAndMicro) {
  const GenreTaxonomy tax({"A", "B"});
  // A: predictions 1,1,0 against truth 1,0,1 -> tp 1 fp 1 fn 1.
  // B: predictions 0,0,0 against truth 0,0,0 -> no positives.
  const std::vector<std::vector<double>> s{{0.9, 0.1}, {0.5, 0.2}, {0.3, 0.4}};
  const std::vector<std::vector<std::uint8_t>> y{{1, 0}, {0, 0}, {1, 0}};
  const auto r = genre_report(s, y, tax);
  EXPECT_DOUBLE_EQ(r.per_genre[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(r.per_genre[0].precision, 0.5);
  EXPECT_NEAR(r.per_genre[0].ap, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(r.per_genre[1].support, 0u);
  EXPECT_EQ(r.per_genre[1].ap, 0.0);
  EXPECT_DOUBLE_EQ(r.macro.recall_at_05, 0.25);
  EXPECT_DOUBLE_EQ(r.micro.recall_at_05, 0.5);
  EXPECT_DOUBLE_EQ(r.micro.precision_at_05, 0.5);
  // Pooled ranking: 0.9(A+) 0.5 0.4 0.3(A+) 0.2 0.1 -> (1 + 2/4) / 2.
  EXPECT_NEAR(r.micro.map, 0.75, 1e-15);
  const auto w = genre_report(s, y, tax, 0.5, MicroMapMode::kPrevalenceWeighted);
  EXPECT_NEAR(w.micro.map, r.per_genre[0].ap, 1e-15);
}

TEST(GenreReport, ThresholdIsInclusive) {
  const GenreTaxonomy tax({"A"});
  const auto r = genre_report({{0.5}}, {{1}}, tax);
  EXPECT_EQ(r.per_genre[0].recall, 1.0);
}

TEST(GenreReport, EmptyOrRaggedInputIsAnError) {
  const GenreTaxonomy tax({"A", "B"});
  EXPECT_THROW(genre_report({}, {}, tax), Error);
  EXPECT_THROW(genre_report({{0.1}}, {{1}}, tax), Error);
}

TEST(GenreReport, InvariantUnderSamplePermutation) {
  Rng rng(2);
  const GenreTaxonomy tax({"A", "B", "C"});
  std::vector<std::vector<double>> s(30, std::vector<double>(3));
  std::vector<std::vector<std::uint8_t>> y(30, std::vector<std::uint8_t>(3));
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t g = 0; g < 3; ++g) {
      s[i][g] = rng.uniform();
      y[i][g] = rng.uniform() < 0.4;
    }
  }
  const auto a = genre_report(s, y, tax);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0u);
  rng.shuffle(std::span(perm));
  std::vector<std::vector<double>> s2;
  std::vector<std::vector<std::uint8_t>> y2;
  for (auto p : perm) {
    s2.push_back(s[p]);
    y2.push_back(y[p]);
  }
  const auto b = genre_report(s2, y2, tax);
  EXPECT_NEAR(a.macro.map, b.macro.map, 1e-12);
  EXPECT_NEAR(a.micro.map, b.micro.map, 1e-12);
  EXPECT_EQ(a.macro.recall_at_05, b.macro.recall_at_05);
}

TEST(BoundaryReport, TwoNumbers) {
  const std::vector<double> s{0.9, 0.4, 0.6, 0.1};
  const std::vector<std::uint8_t> y{1, 1, 0, 0};
  const auto r = boundary_report(s, y);
  EXPECT_NEAR(r.ap, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.recall_at_05, 0.5);
  EXPECT_FALSE(r.no_positives);
  const std::vector<std::uint8_t> none{0, 0, 0, 0};
  EXPECT_TRUE(boundary_report(s, none).no_positives);
}

TEST(Predictions, RoundTripAndAlignment) {
  testing::TempDir dir;
  PredictionSet set{GenreTaxonomy({"A", "B"}), {{"x", {0.9f, 0.1f}}, {"y", {0.2f, 0.7f}}}};
  write_predictions(set, dir.file("p.jsonl"));
  EXPECT_EQ(read_predictions(dir.file("p.jsonl")), set);

  Dataset truth;
  truth.taxonomy = set.taxonomy;
  VideoRecord a, b;
  a.id = "y";
  a.genres = {"B"};
  b.id = "x";
  b.genres = {"A"};
  truth.records = {a, b};
  const auto r = genre_report(set, truth);
  EXPECT_DOUBLE_EQ(r.macro.map, 1.0);
  set.predictions[0].id = "zzz";
  EXPECT_THROW(genre_report(set, truth), Error);
}

TEST(Correlation, PerfectlyCorrelatedAndConstantColumns) {
  Dataset ds;
  ds.taxonomy = GenreTaxonomy({"A", "B", "C"});
  for (int i = 0; i < 6; ++i) {
    VideoRecord r;
    r.id = std::to_string(i);
    if (i % 2) r.genres = {"A", "B"};
    ds.records.push_back(r);
  }
  const auto c = genre_correlation(ds);
  EXPECT_NEAR(c[0][1], 1.0, 1e-12);
  EXPECT_EQ(c[0][2], 0.0);
  EXPECT_EQ(c[2][2], 1.0);
}

}  // namespace
}  // namespace mmshot
