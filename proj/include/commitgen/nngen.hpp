#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "commitgen/corpus.hpp"
#include "commitgen/error.hpp"
#include "commitgen/eval.hpp"

namespace commitgen {

// Bag-of-words index over training diffs. Dimensions are assigned by first
// appearance; vectors hold raw term frequencies (optionally idf-weighted for
// the ablation flag) and are immutable once built.
struct BowIndex {
  std::unordered_map<std::string, int> term_index;
  std::vector<std::vector<std::pair<int, double>>> vectors;  // sorted by dim
  std::vector<double> norms;
  std::vector<Tokens> messages;
  std::vector<Tokens> diffs;
  bool use_idf = false;
  std::vector<double> idf_weight;  // per dimension; 1.0 when use_idf is off

  std::size_t size() const { return vectors.size(); }
};

namespace detail {

inline std::vector<std::pair<int, double>> bow_vector(
    const Tokens& tokens, const std::unordered_map<std::string, int>& terms,
    const std::vector<double>& idf_weight) {
  std::unordered_map<int, double> counts;
  for (const std::string& tok : tokens) {
    auto it = terms.find(tok);
    if (it != terms.end()) counts[it->second] += 1.0;
  }
  std::vector<std::pair<int, double>> vec(counts.begin(), counts.end());
  for (auto& [dim, value] : vec) value *= idf_weight[dim];
  std::sort(vec.begin(), vec.end());
  return vec;
}

inline double vector_norm(const std::vector<std::pair<int, double>>& v) {
  double sum = 0.0;
  for (const auto& [dim, value] : v) sum += value * value;
  return std::sqrt(sum);
}

inline double sparse_dot(const std::vector<std::pair<int, double>>& a,
                         const std::vector<std::pair<int, double>>& b) {
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      dot += a[i].second * b[j].second;
      ++i;
      ++j;
    } else if (a[i].first < b[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return dot;
}

}  // namespace detail

inline BowIndex build_index(const CorpusSplit& train, bool use_idf = false) {
  if (train.commits.empty())
    throw Error(ErrorCategory::EmptyCorpus, "cannot index an empty split");
  BowIndex index;
  index.use_idf = use_idf;
  for (const Commit& c : train.commits)
    for (const std::string& tok : c.diff_tokens)
      index.term_index.emplace(tok, static_cast<int>(index.term_index.size()));

  index.idf_weight.assign(index.term_index.size(), 1.0);
  if (use_idf) {
    std::vector<std::int64_t> doc_freq(index.term_index.size(), 0);
    for (const Commit& c : train.commits) {
      std::vector<bool> seen(index.term_index.size(), false);
      for (const std::string& tok : c.diff_tokens) {
        int dim = index.term_index.at(tok);
        if (!seen[dim]) {
          seen[dim] = true;
          ++doc_freq[dim];
        }
      }
    }
    double n = static_cast<double>(train.commits.size());
    for (std::size_t d = 0; d < doc_freq.size(); ++d)
      index.idf_weight[d] =
          std::log((1.0 + n) / (1.0 + static_cast<double>(doc_freq[d]))) + 1.0;
  }

  index.vectors.reserve(train.commits.size());
  for (const Commit& c : train.commits) {
    index.vectors.push_back(
        detail::bow_vector(c.diff_tokens, index.term_index, index.idf_weight));
    index.norms.push_back(detail::vector_norm(index.vectors.back()));
    index.messages.push_back(c.msg_tokens);
    index.diffs.push_back(c.diff_tokens);
  }
  return index;
}

struct NNGenResult {
  Tokens message;
  int training_id = 0;
  bool degenerate = false;  // query shared no token with any training diff
  double cosine = 0.0;
  double bleu = 0.0;
};

// Two-stage retrieval: cosine top-k over bag-of-words vectors (ties: lower
// id), then the candidate whose diff scores highest sentence BLEU-4 against
// the query diff (ties: higher cosine, then lower id).
inline NNGenResult generate_nngen(const BowIndex& index,
                                  const Tokens& query_diff,
                                  std::size_t k = 5) {
  if (k < 1 || k > index.size())
    throw Error(ErrorCategory::ConfigError,
                "k must be in [1, " + std::to_string(index.size()) + "]");

  std::vector<std::pair<int, double>> query =
      detail::bow_vector(query_diff, index.term_index, index.idf_weight);
  double query_norm = detail::vector_norm(query);

  NNGenResult result;
  if (query.empty()) {
    result.message = index.messages[0];
    result.training_id = 0;
    result.degenerate = true;
    return result;
  }

  std::vector<std::pair<double, int>> sims;  // (-similarity is implicit)
  sims.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    double denom = query_norm * index.norms[i];
    double sim =
        denom > 0.0 ? detail::sparse_dot(query, index.vectors[i]) / denom : 0.0;
    sims.emplace_back(sim, static_cast<int>(i));
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  result.bleu = -1.0;
  for (std::size_t rank = 0; rank < k; ++rank) {
    auto [sim, id] = sims[rank];
    double bleu = sentence_bleu(index.diffs[id], query_diff);
    bool better = bleu > result.bleu ||
                  (bleu == result.bleu &&
                   (sim > result.cosine ||
                    (sim == result.cosine && id < result.training_id)));
    if (rank == 0 || better) {
      result.bleu = bleu;
      result.cosine = sim;
      result.training_id = id;
    }
  }
  result.message = index.messages[result.training_id];
  return result;
}

}  // namespace commitgen
