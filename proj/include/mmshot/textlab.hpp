#pragma once

// Keyword extraction from POS-tagged transcripts, the keyword-based language
// feature, and per-genre TF-IDF word rankings with cross-genre exclusion.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"

namespace mmshot {

inline constexpr std::size_t kDefaultKeywords = 20;

/// Nouns, pronouns and adjectives are the keyword-bearing parts of speech.
inline bool is_keyword_pos(PartOfSpeech pos) {
  return pos == PartOfSpeech::kNoun || pos == PartOfSpeech::kPron || pos == PartOfSpeech::kAdj;
}

using KeywordList = std::vector<std::string>;

/// Top-k eligible tokens by frequency (desc), ties by text (asc).
inline KeywordList extract_keywords(std::span<const Token> transcript, std::size_t k = kDefaultKeywords) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : transcript) {
    if (is_keyword_pos(t.pos)) ++counts[t.text];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  KeywordList out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

struct LanguageFeature {
  FeatureVector values;
  // Set when no keyword had an embedding; values is then all zeros.
  bool all_out_of_vocabulary = false;
};

/// Mean embedding of the keywords found in the table.
inline LanguageFeature language_feature(const KeywordList& keywords, const EmbeddingTable& table) {
  std::vector<double> sum(table.dimension, 0.0);
  std::size_t found = 0;
  for (const auto& w : keywords) {
    const FeatureVector* e = table.find(w);
    if (e == nullptr) continue;
    for (std::size_t d = 0; d < table.dimension; ++d) sum[d] += (*e)[d];
    ++found;
  }
  LanguageFeature out;
  out.values.assign(table.dimension, 0.0f);
  out.all_out_of_vocabulary = found == 0;
  if (found > 0) {
    for (std::size_t d = 0; d < table.dimension; ++d) {
      out.values[d] = static_cast<float>(sum[d] / static_cast<double>(found));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// TF-IDF

struct TfidfOptions {
  // Restrict counted tokens to keyword parts of speech.
  bool pos_filter = true;
};

struct TfidfTable {
  std::string genre;
  std::vector<std::string> movie_ids;        // n
  std::vector<std::string> vocabulary;       // m, sorted
  std::vector<std::vector<double>> values;   // n x m
  std::vector<double> scores;                // m, column sums
};

/// T_ij = count_ij * (ln((1+n)/(1+df_j)) + 1); s_j = sum_i T_ij.
inline TfidfTable tfidf_scores(const std::string& genre, std::span<const VideoRecord* const> movies,
                               const TfidfOptions& options = {}) {
  require(!movies.empty(), ErrorKind::kEmptyInput, "tfidf: genre '" + genre + "' has no movies");
  TfidfTable table;
  table.genre = genre;
  std::vector<std::map<std::string, double>> counts(movies.size());
  std::map<std::string, double> df;
  for (std::size_t i = 0; i < movies.size(); ++i) {
    table.movie_ids.push_back(movies[i]->id);
    for (const auto& t : movies[i]->transcript) {
      if (!options.pos_filter || is_keyword_pos(t.pos)) counts[i][t.text] += 1.0;
    }
    for (const auto& [w, _] : counts[i]) df[w] += 1.0;
  }
  const double n = static_cast<double>(movies.size());
  for (const auto& [w, _] : df) table.vocabulary.push_back(w);
  const std::size_t m = table.vocabulary.size();
  std::vector<double> idf(m);
  for (std::size_t j = 0; j < m; ++j) idf[j] = std::log((1.0 + n) / (1.0 + df[table.vocabulary[j]])) + 1.0;

  table.values.assign(movies.size(), std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < movies.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto it = counts[i].find(table.vocabulary[j]);
      if (it != counts[i].end()) table.values[i][j] = it->second * idf[j];
    }
  }
  table.scores.assign(m, 0.0);
  for (std::size_t i = 0; i < movies.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) table.scores[j] += table.values[i][j];
  }
  return table;
}

struct RankedWord {
  std::string word;
  double score = 0.0;

  bool operator==(const RankedWord&) const = default;
};

/// Words by score (desc), ties by word (asc).
inline std::vector<RankedWord> ranked_words(const TfidfTable& table) {
  std::vector<RankedWord> out;
  for (std::size_t j = 0; j < table.vocabulary.size(); ++j) out.push_back({table.vocabulary[j], table.scores[j]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

struct GenreWordList {
  std::string genre;
  std::vector<RankedWord> words;
};

/// Ranked TF-IDF words for every genre of the taxonomy; genres without any
/// movie get an empty list.
inline std::vector<GenreWordList> genre_word_lists(const Dataset& dataset, const TfidfOptions& options = {}) {
  std::vector<GenreWordList> out;
  for (const auto& genre : dataset.taxonomy.names()) {
    std::vector<const VideoRecord*> movies;
    for (const auto& r : dataset.records) {
      if (std::find(r.genres.begin(), r.genres.end(), genre) != r.genres.end()) movies.push_back(&r);
    }
    GenreWordList list{genre, {}};
    if (!movies.empty()) list.words = ranked_words(tfidf_scores(genre, movies, options));
    out.push_back(std::move(list));
  }
  return out;
}

struct ExclusionConfig {
  std::size_t top_n = 20;
  std::size_t max_genres = 5;
};

/// Pools every genre's top-N words; words occurring more than M times in the
/// pool are removed from every genre's list. Order is otherwise preserved.
inline std::vector<GenreWordList> exclusion_filter(const std::vector<GenreWordList>& lists,
                                                   const ExclusionConfig& config = {}) {
  std::map<std::string, std::size_t> occurrences;
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.words.size() && r < config.top_n; ++r) ++occurrences[list.words[r].word];
  }
  std::vector<GenreWordList> out;
  for (const auto& list : lists) {
    GenreWordList filtered{list.genre, {}};
    for (const auto& w : list.words) {
      const auto it = occurrences.find(w.word);
      if (it == occurrences.end() || it->second <= config.max_genres) filtered.words.push_back(w);
    }
    out.push_back(std::move(filtered));
  }
  return out;
}

/// CSV rows (genre, rank, word, score); rank is 1-based. `limit` of 0 emits
/// whole lists.
inline std::string word_lists_to_csv(const std::vector<GenreWordList>& lists, std::size_t limit = 0) {
  std::ostringstream out;
  out << std::setprecision(17) << "genre,rank,word,score\n";
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.words.size() && (limit == 0 || r < limit); ++r) {
      out << list.genre << ',' << r + 1 << ',' << list.words[r].word << ',' << list.words[r].score << '\n';
    }
  }
  return out.str();
}

}  // namespace mmshot
