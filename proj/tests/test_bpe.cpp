#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "commitgen/bpe.hpp"
#include "testutil.hpp"

using namespace commitgen;

namespace {

std::vector<Tokens> corpus_of(const std::vector<std::string>& lines) {
  std::vector<Tokens> out;
  for (const auto& line : lines) {
    Tokens toks;
    std::istringstream iss(line);
    std::string t;
    while (iss >> t) toks.push_back(t);
    out.push_back(toks);
  }
  return out;
}

// Reference encoder: applies the merge list strictly in learned order, each
// rule rewriting every occurrence left to right. The production encoder uses
// lowest-rank-first greedy merging; the two must agree.
Tokens naive_apply(const BpeModel& model, const Tokens& tokens) {
  Tokens out;
  for (const std::string& tok : tokens) {
    std::vector<std::string> syms = detail::split_utf8(tok);
    syms.push_back(BpeModel::kEndOfWord);
    for (const auto& [a, b] : model.merges) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          next.push_back(a + b);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
    }
    out.insert(out.end(), syms.begin(), syms.end());
  }
  return out;
}

}  // namespace

TEST_CASE("single merge picks the most frequent pair, ties lexicographic") {
  // "low low lower": chars {l,o,w,e,r} = 5. Pair counts by hand:
  //   (l,o)=3 (o,w)=3 (w,</w>)=2 (w,e)=1 (e,r)=1 (r,</w>)=1
  // Max 3 is shared by (l,o) and (o,w); lexicographic order picks (l,o).
  auto corpus = corpus_of({"low low lower"});
  BpeModel m = learn_bpe(corpus, 6);
  REQUIRE(m.merges.size() == 1);
  CHECK(m.merges[0] == std::pair<std::string, std::string>("l", "o"));
  CHECK(m.char_inventory == 5);
  CHECK(m.inventory_size() == 6);
}

TEST_CASE("three-merge trace matches the hand-derived table") {
  // Words: low x2, lower x1, newest x2. Chars {l,o,w,e,r,n,s,t} = 8.
  // Merge 1: (l,o)=3 ties (o,w)=3 and (w,e)=3 -> (l,o).
  // Merge 2: (lo,w)=3 ties (w,e)=3 -> (lo,w).
  // Merge 3: count-2 pairs; lexicographically smallest is (e,s).
  auto corpus = corpus_of({"low low lower newest newest"});
  BpeModel m = learn_bpe(corpus, 11);
  REQUIRE(m.merges.size() == 3);
  CHECK(m.merges[0] == std::pair<std::string, std::string>("l", "o"));
  CHECK(m.merges[1] == std::pair<std::string, std::string>("lo", "w"));
  CHECK(m.merges[2] == std::pair<std::string, std::string>("e", "s"));

  // "lowest" was never seen whole; its encoding follows the merge ranks.
  Tokens enc = apply_bpe(m, {"lowest"});
  CHECK(enc == Tokens{"low", "es", "t", BpeModel::kEndOfWord});
  CHECK(decode_bpe(enc) == Tokens{"lowest"});
}

TEST_CASE("learning stops when no pair repeats") {
  auto corpus = corpus_of({"a"});
  BpeModel m = learn_bpe(corpus, 2);
  CHECK(m.merges.empty());

  // All pairs unique -> nothing reaches frequency 2.
  BpeModel m2 = learn_bpe(corpus_of({"abc def"}), 100);
  CHECK(m2.merges.empty());
  CHECK(m2.inventory_size() == 6);
}

TEST_CASE("token seen whole during learning becomes one symbol") {
  auto corpus = corpus_of({"ab ab ab"});
  BpeModel m = learn_bpe(corpus, 4);
  REQUIRE(m.merges.size() == 2);
  Tokens enc = apply_bpe(m, {"ab"});
  REQUIRE(enc.size() == 1);
  CHECK(enc[0] == std::string("ab") + BpeModel::kEndOfWord);
}

TEST_CASE("unseen characters pass through as their own subunits") {
  BpeModel m = learn_bpe(corpus_of({"ab ab ab"}), 4);
  Tokens enc = apply_bpe(m, {"axb"});
  CHECK(enc == Tokens{"a", "x", "b", BpeModel::kEndOfWord});
  CHECK(decode_bpe(enc) == Tokens{"axb"});
}

TEST_CASE("target at or below the character inventory is rejected") {
  auto corpus = corpus_of({"low low"});
  CHECK_THROWS_MATCHES(
      learn_bpe(corpus, 3), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::TargetTooSmall;
      }));
  CHECK_THROWS_AS(learn_bpe(corpus, 0), Error);
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_MATCHES(
      learn_bpe({}, 10), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::EmptyCorpus;
      }));
}

TEST_CASE("empty sequences map to empty sequences") {
  BpeModel m = learn_bpe(corpus_of({"ab ab"}), 4);
  CHECK(apply_bpe(m, {}).empty());
  CHECK(decode_bpe({}).empty());
}

TEST_CASE("output length never shrinks below input length") {
  BpeModel m = learn_bpe(corpus_of({"alpha beta gamma alpha beta"}), 20);
  for (const Tokens& seq :
       {Tokens{"alpha"}, Tokens{"alpha", "beta", "unseen"}, Tokens{"z"}})
    CHECK(apply_bpe(m, seq).size() >= seq.size());
}

TEST_CASE("dangling subunit emits a partial word and sets the flag") {
  bool dangling = false;
  Tokens out = decode_bpe({"ab"}, &dangling);
  CHECK(dangling);
  CHECK(out == Tokens{"ab"});

  dangling = true;
  Tokens ok = decode_bpe({std::string("ab") + BpeModel::kEndOfWord}, &dangling);
  CHECK_FALSE(dangling);
  CHECK(ok == Tokens{"ab"});
}

TEST_CASE("round trip holds on adversarial and multibyte tokens") {
  std::vector<Tokens> corpus = corpus_of({
      "naïve café naïve café übung",
      "a</w>b </w> x</w> <nl> low lower lowest",
      "test</w></w> <unk> <pad> --git a/x.java",
  });
  BpeModel m = learn_bpe(corpus, 60);
  for (const Tokens& seq : corpus) {
    bool dangling = true;
    CHECK(decode_bpe(apply_bpe(m, seq), &dangling) == seq);
    CHECK_FALSE(dangling);
  }
}

TEST_CASE("round trip and order-equivalence on random corpora") {
  std::mt19937 rng(12345);
  std::uniform_int_distribution<int> len(1, 8), nw(1, 12), pick(0, 9);
  const std::string alphabet = "abcde<>/w";
  auto random_token = [&] {
    std::string t;
    int n = len(rng);
    for (int i = 0; i < n; ++i) t += alphabet[pick(rng)];
    return t;
  };
  std::vector<Tokens> corpus;
  for (int s = 0; s < 60; ++s) {
    Tokens seq;
    int n = nw(rng);
    for (int i = 0; i < n; ++i) seq.push_back(random_token());
    corpus.push_back(seq);
  }
  BpeModel m = learn_bpe(corpus, 48);
  CHECK(m.merges.size() > 4);
  for (const Tokens& seq : corpus) {
    Tokens enc = apply_bpe(m, seq);
    CHECK(decode_bpe(enc) == seq);
    CHECK(enc == naive_apply(m, seq));
  }
}

TEST_CASE("monotone compression: encoded vocabulary stays within bounds") {
  std::vector<Tokens> corpus = corpus_of({
      "public static void main string args",
      "public static int count public void run",
      "private static final string name value string",
  });
  for (std::size_t target : {20, 25, 30}) {
    BpeModel m = learn_bpe(corpus, target);
    std::set<std::string> subunits;
    for (const Tokens& seq : corpus)
      for (const std::string& s : apply_bpe(m, seq)) subunits.insert(s);
    CHECK(subunits.size() <= target + m.char_inventory);
  }
}

TEST_CASE("learning is deterministic") {
  auto corpus =
      corpus_of({"merge sort merge heap sort", "heap merge sort sort"});
  BpeModel a = learn_bpe(corpus, 18);
  BpeModel b = learn_bpe(corpus, 18);
  CHECK(a.merges == b.merges);
}

TEST_CASE("merge table file round trips and reproduces encodings") {
  testutil::TempDir dir("bpe");
  auto corpus = corpus_of({"low low lower newest newest"});
  BpeModel m = learn_bpe(corpus, 11);
  std::string path = dir.file("merges.txt");
  save_bpe(m, path);
  BpeModel loaded = load_bpe(path);
  CHECK(loaded.merges == m.merges);
  Tokens probe = {"lowest", "low", "new"};
  CHECK(apply_bpe(loaded, probe) == apply_bpe(m, probe));
}

TEST_CASE("malformed merge table lines are rejected") {
  testutil::TempDir dir("bpe_bad");
  std::string path = dir.file("merges.txt");
  testutil::write_lines(path, {"a b", "nospace"});
  CHECK_THROWS_MATCHES(
      load_bpe(path), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::IoError;
      }));
}
