#include <catch2/catch_amalgamated.hpp>

#include "commitgen/vocabulary.hpp"
#include "testutil.hpp"

using commitgen::Error;
using commitgen::ErrorCategory;
using commitgen::Vocabulary;

namespace {

Vocabulary make_vocab(
    const std::vector<std::pair<std::string, std::int64_t>>& counts,
    std::int64_t min_count = 1, const Vocabulary* parent = nullptr) {
  std::unordered_map<std::string, std::int64_t> map(counts.begin(),
                                                    counts.end());
  return Vocabulary::from_counts(map, min_count, parent);
}

}  // namespace

TEST_CASE("specials occupy fixed indices") {
  Vocabulary v = make_vocab({{"a", 3}, {"b", 1}});
  CHECK(v.surface(Vocabulary::kPad) == "<pad>");
  CHECK(v.surface(Vocabulary::kBos) == "<bos>");
  CHECK(v.surface(Vocabulary::kEos) == "<eos>");
  CHECK(v.surface(Vocabulary::kUnk) == "<unk>");
  CHECK(v.size() == 6);
}

TEST_CASE("ordering is count desc then lexicographic") {
  Vocabulary v = make_vocab({{"b", 2}, {"a", 2}, {"c", 5}});
  CHECK(v.surface(4) == "c");
  CHECK(v.surface(5) == "a");
  CHECK(v.surface(6) == "b");
}

TEST_CASE("threshold keeps only tokens at or above min_count") {
  // tokens {a:3, b:1}, min_count 2 -> {a} + specials
  Vocabulary v = make_vocab({{"a", 3}, {"b", 1}}, 2);
  CHECK(v.size() == 5);
  CHECK(v.encode("a") == 4);
  CHECK(v.encode("b") == Vocabulary::kUnk);
}

TEST_CASE("threshold monotonicity: raising min_count never grows vocabulary") {
  std::vector<std::pair<std::string, std::int64_t>> counts = {
      {"x", 1}, {"y", 2}, {"z", 3}, {"w", 7}, {"q", 2}};
  std::size_t prev = SIZE_MAX;
  for (std::int64_t mc = 1; mc <= 8; ++mc) {
    Vocabulary v = make_vocab(counts, mc < 4 ? mc : 7);
    CHECK(v.size() <= prev);
    prev = v.size();
    if (v.size() == Vocabulary::kNumSpecials) break;
  }
}

TEST_CASE("empty vocabulary after filtering throws") {
  CHECK_THROWS_MATCHES(
      make_vocab({{"a", 1}}, 2), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::EmptyVocabulary;
      }));
}

TEST_CASE("parent filtering runs before thresholding") {
  Vocabulary parent = make_vocab({{"a", 1}, {"b", 1}});
  // c is frequent but absent from parent, so it is dropped.
  Vocabulary child = make_vocab({{"a", 5}, {"c", 100}}, 1, &parent);
  CHECK(child.encode("a") == 4);
  CHECK(child.encode("c") == Vocabulary::kUnk);
  CHECK(child.size() == 5);
}

TEST_CASE("encode maps unknown tokens to <unk>") {
  Vocabulary v = make_vocab({{"hello", 2}});
  CHECK(v.encode("hello") == 4);
  CHECK(v.encode("world") == Vocabulary::kUnk);
}

TEST_CASE("surface literals colliding with specials round trip via escaping") {
  // A corpus token spelled "<unk>" must stay distinct from the real special.
  Vocabulary v = make_vocab({{"<unk>", 3}, {"<pad>", 2}, {"plain", 1}});
  std::int64_t unk_lit = v.encode("<unk>");
  std::int64_t pad_lit = v.encode("<pad>");
  CHECK(unk_lit != Vocabulary::kUnk);
  CHECK(pad_lit != Vocabulary::kPad);
  CHECK(unk_lit >= Vocabulary::kNumSpecials);
  CHECK(v.surface(unk_lit) == "<unk>");
  CHECK(v.surface(pad_lit) == "<pad>");
  CHECK(v.surface(v.encode("plain")) == "plain");
  // The stored form differs so the file format stays unambiguous.
  CHECK(v.stored(unk_lit) != "<unk>");
}

TEST_CASE("escaping is reversible for sentinel-prefixed surfaces") {
  std::string tricky(1, Vocabulary::kEscapeSentinel);
  tricky += "<unk>";
  Vocabulary v = make_vocab({{tricky, 2}, {"<eos>", 2}});
  CHECK(v.surface(v.encode(tricky)) == tricky);
  CHECK(v.surface(v.encode("<eos>")) == "<eos>");
  CHECK(v.encode(tricky) != v.encode("<eos>"));
}

TEST_CASE("save and load round trip preserves ids, surfaces, and hash") {
  testutil::TempDir dir("vocab");
  Vocabulary v = make_vocab(
      {{"alpha", 9}, {"beta", 4}, {"<unk>", 2}, {"gamma", 4}});
  std::string path = dir.file("vocab.txt");
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded == v);
  CHECK(loaded.hash() == v.hash());
  CHECK(loaded.size() == v.size());
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(v.size()); ++i)
    CHECK(loaded.surface(i) == v.surface(i));
  CHECK(loaded.encode("<unk>") == v.encode("<unk>"));
}

TEST_CASE("load rejects files without the special header") {
  testutil::TempDir dir("vocab_bad");
  std::string path = dir.file("vocab.txt");
  testutil::write_lines(path, {"<pad>", "<bos>", "<unk>", "<eos>", "a"});
  CHECK_THROWS_MATCHES(
      Vocabulary::load(path), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::IoError;
      }));
}

TEST_CASE("hash differs when contents differ") {
  Vocabulary a = make_vocab({{"x", 1}, {"y", 1}});
  Vocabulary b = make_vocab({{"x", 1}, {"z", 1}});
  CHECK(a.hash() != b.hash());
}

TEST_CASE("surface rejects out-of-range ids") {
  Vocabulary v = make_vocab({{"a", 1}});
  CHECK_THROWS_MATCHES(
      v.surface(v.size()), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::IndexOutOfVocab;
      }));
  CHECK_THROWS_AS(v.surface(-1), Error);
}

TEST_CASE("filtered keeps specials and applies threshold") {
  Vocabulary v = make_vocab({{"a", 10}, {"b", 2}, {"c", 1}});
  Vocabulary f = v.filtered(2);
  CHECK(f.size() == 6);
  CHECK(f.encode("a") == 4);
  CHECK(f.encode("b") == 5);
  CHECK(f.encode("c") == Vocabulary::kUnk);
}

TEST_CASE("reduce_vocabulary config 1 keeps diff side unchanged") {
  Vocabulary msg = make_vocab({{"fix", 12}, {"rare", 1}});
  Vocabulary diff = make_vocab({{"int", 3}, {"x", 1}});
  auto [m, d] = commitgen::reduce_vocabulary(msg, diff, 1);
  CHECK(m.size() == msg.size());  // min_count 1 drops nothing
  CHECK(d == diff);
}

TEST_CASE("reduce_vocabulary config 2 thresholds both sides at 10") {
  Vocabulary msg = make_vocab({{"fix", 12}, {"rare", 9}});
  Vocabulary diff = make_vocab({{"int", 10}, {"x", 2}});
  auto [m, d] = commitgen::reduce_vocabulary(msg, diff, 2);
  CHECK(m.encode("fix") == 4);
  CHECK(m.encode("rare") == Vocabulary::kUnk);
  CHECK(d.encode("int") == 4);
  CHECK(d.encode("x") == Vocabulary::kUnk);
}

TEST_CASE("reduce_vocabulary rejects unknown configs") {
  Vocabulary msg = make_vocab({{"a", 1}});
  Vocabulary diff = make_vocab({{"b", 1}});
  CHECK_THROWS_MATCHES(
      commitgen::reduce_vocabulary(msg, diff, 3), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.category() == ErrorCategory::ConfigError;
      }));
}
