#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "commitgen/nngen.hpp"
#include "oracles.hpp"

using namespace commitgen;

namespace {

Tokens toks(const std::string& line) {
  Tokens out;
  std::istringstream iss(line);
  std::string t;
  while (iss >> t) out.push_back(t);
  return out;
}

CorpusSplit make_split(const std::vector<std::pair<std::string, std::string>>&
                           diff_msg_pairs) {
  CorpusSplit split;
  split.name = "train";
  for (const auto& [diff, msg] : diff_msg_pairs) {
    Commit c;
    c.id = static_cast<int>(split.commits.size());
    c.diff_tokens = toks(diff);
    c.msg_tokens = toks(msg);
    split.commits.push_back(c);
  }
  return split;
}

// Brute-force reference: string-keyed cosine over every training example,
// top-k by (similarity desc, id asc), re-rank with the oracle sentence BLEU,
// final ties by higher cosine then lower id.
int oracle_nngen(const CorpusSplit& train, const Tokens& query,
                 std::size_t k) {
  std::unordered_map<std::string, double> qc;
  for (const auto& t : query) {
    bool seen = false;
    for (const auto& c : train.commits)
      if (std::find(c.diff_tokens.begin(), c.diff_tokens.end(), t) !=
          c.diff_tokens.end()) {
        seen = true;
        break;
      }
    if (seen) qc[t] += 1.0;
  }
  if (qc.empty()) return 0;
  double qn = 0.0;
  for (const auto& [t, v] : qc) qn += v * v;
  qn = std::sqrt(qn);

  std::vector<std::pair<double, int>> sims;
  for (const auto& c : train.commits) {
    std::unordered_map<std::string, double> cc;
    for (const auto& t : c.diff_tokens) cc[t] += 1.0;
    double dot = 0.0, cn = 0.0;
    for (const auto& [t, v] : cc) {
      cn += v * v;
      auto it = qc.find(t);
      if (it != qc.end()) dot += v * it->second;
    }
    sims.emplace_back(dot / (qn * std::sqrt(cn)), c.id);
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  int best_id = sims[0].second;
  double best_bleu = -1.0, best_sim = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    auto [sim, id] = sims[r];
    double bleu =
        oracles::sentence_bleu(train.commits[id].diff_tokens, query);
    if (r == 0 || bleu > best_bleu ||
        (bleu == best_bleu &&
         (sim > best_sim || (sim == best_sim && id < best_id)))) {
      best_bleu = bleu;
      best_sim = sim;
      best_id = id;
    }
  }
  return best_id;
}

}  // namespace

TEST_CASE("index aligns vectors, messages, and diffs") {
  CorpusSplit train = make_split({{"a b c", "one"}, {"d e f", "two"}});
  BowIndex index = build_index(train);
  CHECK(index.size() == 2);
  CHECK(index.vectors.size() == index.messages.size());
  CHECK(index.vectors.size() == index.diffs.size());
  // Disjoint token sets give orthogonal vectors.
  CHECK(detail::sparse_dot(index.vectors[0], index.vectors[1]) == 0.0);

  CorpusSplit dup = make_split({{"x y x", "m1"}, {"x y x", "m2"}});
  BowIndex di = build_index(dup);
  CHECK(di.vectors[0] == di.vectors[1]);
}

TEST_CASE("empty training split is rejected") {
  CHECK_THROWS_MATCHES(
      build_index(CorpusSplit{}), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::EmptyCorpus;
      }));
}

TEST_CASE("self-retrieval returns the training message verbatim") {
  CorpusSplit train = make_split({
      {"+ fix the parser bug <nl> - old parser line", "fix parser"},
      {"+ add widget tests <nl> + more tests", "add tests"},
      {"+ bump version to next <nl>", "bump version"},
      {"+ rename helper method <nl> - old name", "rename helper"},
      {"+ drop dead code path <nl>", "drop dead code"},
  });
  BowIndex index = build_index(train);
  for (const Commit& c : train.commits) {
    NNGenResult r = generate_nngen(index, c.diff_tokens, 5);
    CHECK(r.training_id == c.id);
    CHECK(r.message == c.msg_tokens);
    CHECK_FALSE(r.degenerate);
  }
}

TEST_CASE("query overlapping exactly one diff retrieves it") {
  CorpusSplit train = make_split({
      {"alpha beta gamma", "first"},
      {"delta epsilon zeta", "second"},
      {"eta theta iota", "third"},
  });
  BowIndex index = build_index(train);
  NNGenResult r = generate_nngen(index, toks("epsilon something delta"), 3);
  CHECK(r.training_id == 1);
  CHECK(r.message == toks("second"));
}

TEST_CASE("zero-overlap query degrades to training id 0") {
  CorpusSplit train = make_split({{"a b", "m0"}, {"c d", "m1"}});
  BowIndex index = build_index(train);
  NNGenResult r = generate_nngen(index, toks("zz yy"), 2);
  CHECK(r.degenerate);
  CHECK(r.training_id == 0);
  CHECK(r.message == toks("m0"));
}

TEST_CASE("k outside [1, n] is rejected") {
  CorpusSplit train = make_split({{"a b", "m0"}, {"c d", "m1"}});
  BowIndex index = build_index(train);
  CHECK_THROWS_AS(generate_nngen(index, toks("a"), 0), Error);
  CHECK_THROWS_AS(generate_nngen(index, toks("a"), 3), Error);
}

TEST_CASE("scale invariance of the retrieved id") {
  CorpusSplit train = make_split({
      {"red green blue", "m0"},
      {"red red yellow", "m1"},
      {"cyan magenta", "m2"},
  });
  BowIndex index = build_index(train);
  Tokens query = toks("red green");
  Tokens tripled;
  for (int rep = 0; rep < 3; ++rep)
    for (const auto& t : query) tripled.push_back(t);
  NNGenResult a = generate_nngen(index, query, 1);
  NNGenResult b = generate_nngen(index, tripled, 1);
  CHECK(a.training_id == b.training_id);
}

TEST_CASE("matches the brute-force oracle on a 200-example corpus") {
  std::mt19937 rng(777);
  std::uniform_int_distribution<int> len(3, 20), word(0, 39);
  std::vector<std::string> vocab;
  for (int i = 0; i < 40; ++i) vocab.push_back("tok" + std::to_string(i));

  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 0; i < 200; ++i) {
    std::string diff;
    int n = len(rng);
    for (int k = 0; k < n; ++k) {
      if (k) diff += ' ';
      diff += vocab[word(rng)];
    }
    pairs.emplace_back(diff, "msg" + std::to_string(i));
  }
  CorpusSplit train = make_split(pairs);
  BowIndex index = build_index(train);

  for (int q = 0; q < 50; ++q) {
    Tokens query;
    int n = len(rng);
    for (int k = 0; k < n; ++k) query.push_back(vocab[word(rng)]);
    NNGenResult r = generate_nngen(index, query, 5);
    int expected = oracle_nngen(train, query, 5);
    CHECK(r.training_id == expected);
    CHECK(r.message == train.commits[expected].msg_tokens);
  }
}

TEST_CASE("retrieval is deterministic") {
  CorpusSplit train = make_split({
      {"a b c d", "m0"},
      {"a b c d", "m1"},  // exact duplicate: tie must go to lower id
      {"a b x y", "m2"},
  });
  BowIndex index = build_index(train);
  NNGenResult r1 = generate_nngen(index, toks("a b c d"), 3);
  NNGenResult r2 = generate_nngen(index, toks("a b c d"), 3);
  CHECK(r1.training_id == 0);
  CHECK(r2.training_id == 0);
  CHECK(r1.message == toks("m0"));
}

TEST_CASE("idf weighting is flag-gated and changes crafted retrievals") {
  CorpusSplit train = make_split({
      {"the the filler stuff", "common"},
      {"rare zed", "rare"},
      {"the x1", "c1"},
      {"the x2", "c2"},
      {"the x3", "c3"},
  });
  Tokens query = toks("the rare");
  BowIndex raw = build_index(train, false);
  BowIndex idf = build_index(train, true);
  CHECK(generate_nngen(raw, query, 1).training_id == 0);
  CHECK(generate_nngen(idf, query, 1).training_id == 1);
}
