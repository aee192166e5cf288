#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "commitgen/error.hpp"

namespace commitgen {

// Frequency-ranked token table. Indices 0..3 are reserved for the special
// tokens; corpus tokens follow, ordered by descending count with
// lexicographic tie-breaking so that indices are reproducible across runs.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  // Corpus tokens that would collide with a special string (or with an
  // already-escaped form) get one sentinel byte prefixed. The sentinel is
  // stripped again when tokens are rendered back to text.
  static constexpr char kEscapeSentinel = '\x01';

  static const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> specials = {"<pad>", "<bos>", "<eos>",
                                                      "<unk>"};
    return specials;
  }

  static bool needs_escape(const std::string& token) {
    if (!token.empty() && token.front() == kEscapeSentinel) return true;
    for (const auto& s : special_tokens())
      if (token == s) return true;
    return false;
  }

  static std::string escape(const std::string& token) {
    if (needs_escape(token)) return std::string(1, kEscapeSentinel) + token;
    return token;
  }

  static std::string unescape(const std::string& stored) {
    if (!stored.empty() && stored.front() == kEscapeSentinel)
      return stored.substr(1);
    return stored;
  }

  Vocabulary() {
    for (const auto& s : special_tokens()) push_token(s, 0);
  }

  // Builds a vocabulary from raw token counts. Tokens absent from `parent`
  // are filtered first, then the min_count threshold is applied.
  static Vocabulary from_counts(
      const std::unordered_map<std::string, std::int64_t>& counts,
      std::int64_t min_count, const Vocabulary* parent = nullptr) {
    std::vector<std::pair<std::string, std::int64_t>> kept;
    kept.reserve(counts.size());
    for (const auto& [token, count] : counts) {
      if (parent && !parent->contains(token)) continue;
      if (count < min_count) continue;
      kept.emplace_back(token, count);
    }
    if (kept.empty())
      throw Error(ErrorCategory::EmptyVocabulary,
                  "no token survives min_count=" + std::to_string(min_count));
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [token, count] : kept) v.push_token(escape(token), count);
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int corpus_size() const { return size() - kNumSpecials; }

  bool contains(const std::string& token) const {
    return index_.count(escape(token)) > 0;
  }

  // Raw corpus token -> index, UNK for out-of-vocabulary tokens.
  int encode(const std::string& token) const {
    auto it = index_.find(escape(token));
    return it == index_.end() ? kUnk : it->second;
  }

  // Index -> surface form (escape sentinel stripped).
  std::string surface(std::int64_t id) const { return unescape(stored(id)); }

  // Stored (escaped) form; what the vocabulary file contains.
  const std::string& stored(std::int64_t id) const {
    check_id(id);
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::int64_t count(std::int64_t id) const {
    check_id(id);
    return counts_[static_cast<std::size_t>(id)];
  }

  std::int64_t count_of(const std::string& token) const {
    auto it = index_.find(escape(token));
    return it == index_.end() ? 0 : counts_[it->second];
  }

  // Keeps only corpus tokens with count >= min_count (specials always stay).
  Vocabulary filtered(std::int64_t min_count) const {
    Vocabulary v;
    for (int i = kNumSpecials; i < size(); ++i)
      if (counts_[i] >= min_count) v.push_token(tokens_[i], counts_[i]);
    if (v.corpus_size() == 0)
      throw Error(ErrorCategory::EmptyVocabulary,
                  "no token survives min_count=" + std::to_string(min_count));
    return v;
  }

  // One token per line; the first four lines are the specials. Counts are
  // not part of the interchange format.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCategory::IoError, "cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  // Rebuild from stored-form lines (same layout as the save format). Used by
  // checkpoint files, which embed their vocabularies.
  static Vocabulary from_stored_lines(const std::vector<std::string>& lines) {
    if (lines.size() < static_cast<std::size_t>(kNumSpecials))
      throw Error(ErrorCategory::CheckpointMismatch,
                  "vocabulary block shorter than the special tokens");
    for (int i = 0; i < kNumSpecials; ++i)
      if (lines[i] != special_tokens()[i])
        throw Error(ErrorCategory::CheckpointMismatch,
                    "vocabulary block line " + std::to_string(i + 1) +
                        " is not the expected special token");
    Vocabulary v;
    for (std::size_t i = kNumSpecials; i < lines.size(); ++i)
      v.push_token(lines[i], 0);
    return v;
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::IoError, "cannot read " + path);
    Vocabulary v;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      if (line_no < kNumSpecials) {
        if (line != special_tokens()[line_no])
          throw Error(ErrorCategory::IoError,
                      path + ": line " + std::to_string(line_no + 1) +
                          " is not the expected special token");
      } else {
        v.push_token(line, 0);
      }
      ++line_no;
    }
    if (line_no < kNumSpecials)
      throw Error(ErrorCategory::IoError, path + ": truncated vocabulary file");
    return v;
  }

  // FNV-1a over the stored token lines; used to detect checkpoint/corpus
  // vocabulary mismatches before prediction starts.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](unsigned char c) {
      h ^= c;
      h *= 1099511628211ull;
    };
    for (const auto& t : tokens_) {
      for (unsigned char c : t) mix(c);
      mix('\n');
    }
    return h;
  }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

  const std::vector<std::string>& stored_tokens() const { return tokens_; }

 private:
  void check_id(std::int64_t id) const {
    if (id < 0 || id >= static_cast<std::int64_t>(tokens_.size()))
      throw Error(ErrorCategory::IndexOutOfVocab,
                  "id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(tokens_.size()));
  }

  void push_token(const std::string& stored_form, std::int64_t count) {
    index_.emplace(stored_form, static_cast<int>(tokens_.size()));
    tokens_.push_back(stored_form);
    counts_.push_back(count);
  }

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, int> index_;
};

// Vocabulary reduction ahead of copy-mechanism training. Config 1 keeps
// message tokens seen at least once and leaves the diff side alone; config 2
// keeps tokens seen at least ten times on both sides. Removed tokens map to
// UNK at encoding time.
inline std::pair<Vocabulary, Vocabulary> reduce_vocabulary(
    const Vocabulary& msg_vocab, const Vocabulary& diff_vocab, int config) {
  switch (config) {
    case 1:
      return {msg_vocab.filtered(1), diff_vocab};
    case 2:
      return {msg_vocab.filtered(10), diff_vocab.filtered(10)};
    default:
      throw Error(ErrorCategory::ConfigError,
                  "reduction config must be 1 or 2, got " +
                      std::to_string(config));
  }
}

}  // namespace commitgen
