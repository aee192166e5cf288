#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "commitgen/corpus.hpp"
#include "commitgen/error.hpp"

namespace commitgen {

// Byte-pair-encoding model: an ordered merge list. The symbol inventory is
// the distinct characters of the training corpus plus one symbol per merge;
// the end-of-word marker is bookkeeping, not an inventory entry.
struct BpeModel {
  static constexpr const char* kEndOfWord = "</w>";

  std::vector<std::pair<std::string, std::string>> merges;
  std::size_t target_vocab_size = 0;
  std::size_t char_inventory = 0;

  std::size_t inventory_size() const { return char_inventory + merges.size(); }
};

namespace detail {

// Splits a token into UTF-8 code points; malformed bytes pass through as
// single-byte symbols so round trips stay exact on arbitrary input.
inline std::vector<std::string> split_utf8(const std::string& token) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < token.size()) {
    unsigned char c = static_cast<unsigned char>(token[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    if (i + len > token.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(token[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    out.push_back(token.substr(i, len));
    i += len;
  }
  return out;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

using SymbolPair = std::pair<std::string, std::string>;

struct PairEntry {
  std::int64_t count;
  SymbolPair pair;
  // Highest count first; ties by lexicographically smallest pair.
  bool operator<(const PairEntry& other) const {
    if (count != other.count) return count < other.count;
    return pair > other.pair;
  }
};

}  // namespace detail

// Learns merges greedily by highest pair frequency (ties: lexicographically
// smallest pair) until the inventory reaches the target or no pair occurs at
// least twice.
inline BpeModel learn_bpe(const std::vector<Tokens>& corpus,
                          std::size_t target_vocab_size) {
  std::map<std::string, std::int64_t> word_freq;
  for (const Tokens& seq : corpus)
    for (const std::string& tok : seq) ++word_freq[tok];
  if (word_freq.empty())
    throw Error(ErrorCategory::EmptyCorpus, "no tokens to learn BPE from");

  std::vector<std::vector<std::string>> words;
  std::vector<std::int64_t> freqs;
  std::set<std::string> charset;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    std::vector<std::string> syms = detail::split_utf8(word);
    for (const std::string& s : syms) charset.insert(s);
    syms.push_back(BpeModel::kEndOfWord);
    words.push_back(std::move(syms));
    freqs.push_back(freq);
  }

  BpeModel model;
  model.target_vocab_size = target_vocab_size;
  model.char_inventory = charset.size();
  if (target_vocab_size <= model.char_inventory)
    throw Error(ErrorCategory::TargetTooSmall,
                "target " + std::to_string(target_vocab_size) +
                    " <= character inventory " +
                    std::to_string(model.char_inventory));

  // Pair statistics with a word-id index so merges touch only the words that
  // contain the merged pair.
  std::map<detail::SymbolPair, std::int64_t> counts;
  std::map<detail::SymbolPair, std::unordered_set<std::size_t>> where;
  auto add_word = [&](std::size_t wi, std::int64_t sign) {
    const auto& syms = words[wi];
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      detail::SymbolPair p{syms[i], syms[i + 1]};
      counts[p] += sign * freqs[wi];
      if (sign > 0)
        where[p].insert(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_word(wi, +1);

  std::priority_queue<detail::PairEntry> heap;
  for (const auto& [pair, count] : counts) heap.push({count, pair});

  while (model.inventory_size() < target_vocab_size && !heap.empty()) {
    detail::PairEntry top = heap.top();
    heap.pop();
    auto it = counts.find(top.pair);
    if (it == counts.end() || it->second != top.count) continue;  // stale
    if (top.count < 2) break;
    // Word-final symbols (right side already marker-suffixed) may end with
    // the marker; any other merge whose spelling ends with it would make the
    // decoder close a word mid-token, so those pairs are never learned.
    std::string merged = top.pair.first + top.pair.second;
    if (!detail::ends_with(top.pair.second, BpeModel::kEndOfWord) &&
        detail::ends_with(merged, BpeModel::kEndOfWord)) {
      counts.erase(it);
      continue;
    }

    model.merges.push_back(top.pair);

    std::unordered_set<std::size_t> touched = std::move(where[top.pair]);
    where.erase(top.pair);
    std::vector<detail::SymbolPair> dirty;
    for (std::size_t wi : touched) {
      // Retract this word's pair contributions, rewrite it, re-add.
      const auto& syms = words[wi];
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        detail::SymbolPair p{syms[i], syms[i + 1]};
        counts[p] -= freqs[wi];
        dirty.push_back(p);
      }
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == top.pair.first &&
            syms[i + 1] == top.pair.second) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      words[wi] = std::move(next);
      for (std::size_t i = 0; i + 1 < words[wi].size(); ++i) {
        detail::SymbolPair p{words[wi][i], words[wi][i + 1]};
        counts[p] += freqs[wi];
        where[p].insert(wi);
        dirty.push_back(p);
      }
    }
    counts.erase(top.pair);
    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    for (const auto& p : dirty) {
      auto cit = counts.find(p);
      if (cit == counts.end()) continue;
      if (cit->second <= 0) {
        counts.erase(cit);
        where.erase(p);
      } else {
        heap.push({cit->second, p});
      }
    }
  }
  return model;
}

namespace detail {

// Encodes one word by repeatedly merging the present pair with the lowest
// learned rank; equivalent to applying the merge list in order.
inline std::vector<std::string> encode_word(
    const std::string& word,
    const std::map<SymbolPair, std::size_t>& ranks) {
  std::vector<std::string> syms = split_utf8(word);
  syms.push_back(BpeModel::kEndOfWord);
  while (syms.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = ranks.find({syms[i], syms[i + 1]});
      if (it != ranks.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == SIZE_MAX) break;
    std::vector<std::string> next;
    next.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size()) {
        auto it = ranks.find({syms[i], syms[i + 1]});
        if (it != ranks.end() && it->second == best_rank) {
          next.push_back(syms[i] + syms[i + 1]);
          i += 2;
          continue;
        }
      }
      next.push_back(syms[i]);
      ++i;
    }
    syms = std::move(next);
  }
  return syms;
}

}  // namespace detail

// Splits every token into learned subunits. Tokens never seen in training
// fall back to characters; characters absent from training survive as their
// own subunits.
inline Tokens apply_bpe(const BpeModel& model, const Tokens& tokens) {
  static thread_local const BpeModel* cached_model = nullptr;
  static thread_local std::map<detail::SymbolPair, std::size_t> ranks;
  static thread_local std::unordered_map<std::string, Tokens> memo;
  if (cached_model != &model) {
    ranks.clear();
    memo.clear();
    for (std::size_t r = 0; r < model.merges.size(); ++r)
      ranks.emplace(model.merges[r], r);
    cached_model = &model;
  }
  Tokens out;
  out.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    auto it = memo.find(tok);
    if (it == memo.end())
      it = memo.emplace(tok, detail::encode_word(tok, ranks)).first;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

// Inverse of apply_bpe: concatenate subunits, closing a word whenever the
// appended subunit ends with the marker. The boundary test is per subunit,
// not per buffer, so tokens containing the literal marker text round-trip. A
// missing final marker is reported through `dangling` and the partial word is
// still emitted.
inline Tokens decode_bpe(const Tokens& subunits, bool* dangling = nullptr) {
  static const std::string marker = BpeModel::kEndOfWord;
  if (dangling) *dangling = false;
  Tokens out;
  std::string word;
  for (const std::string& sub : subunits) {
    word += sub;
    if (detail::ends_with(sub, marker)) {
      word.erase(word.size() - marker.size());
      out.push_back(word);
      word.clear();
    }
  }
  if (!word.empty()) {
    if (dangling) *dangling = true;
    out.push_back(word);
  }
  return out;
}

inline void save_bpe(const BpeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::IoError, "cannot write " + path);
  for (const auto& [a, b] : model.merges) out << a << ' ' << b << '\n';
}

inline BpeModel load_bpe(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::IoError, "cannot read " + path);
  BpeModel model;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= line.size())
      throw Error(ErrorCategory::IoError,
                  path + ": malformed merge at line " + std::to_string(lineno));
    model.merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return model;
}

}  // namespace commitgen
