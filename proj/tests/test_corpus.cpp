#include <catch2/catch_amalgamated.hpp>

#include "commitgen/corpus.hpp"
#include "testutil.hpp"

using namespace commitgen;

namespace {

Tokens toks(const std::string& line) {
  Tokens out;
  std::istringstream iss(line);
  std::string t;
  while (iss >> t) out.push_back(t);
  return out;
}

bool is_category(const Error& e, ErrorCategory cat) {
  return e.category() == cat;
}

}  // namespace

TEST_CASE("classify_file_type basic extension rules") {
  CHECK(classify_file_type(toks("diff --git a/src/Main.java b/src/Main.java")) ==
        FileType::Java);
  CHECK(classify_file_type(toks("diff --git a/.gitignore b/.gitignore")) ==
        FileType::Gitignore);
  CHECK(classify_file_type(toks("diff --git a/lib/util.groovy b/lib/util.groovy")) ==
        FileType::Others);
}

TEST_CASE("classify_file_type full label table") {
  auto type_of = [](const std::string& path) {
    return classify_file_type(toks("diff --git a/" + path + " b/" + path));
  };
  CHECK(type_of("pom.xml") == FileType::Xml);
  CHECK(type_of("build.gradle") == FileType::Gradle);
  CHECK(type_of("README.md") == FileType::Md);
  CHECK(type_of("sub/.gitrepo") == FileType::Gitrepo);
  CHECK(type_of("app.properties") == FileType::Properties);
  CHECK(type_of("notes.txt") == FileType::Txt);
  CHECK(type_of("ci.yml") == FileType::Yml);
  CHECK(type_of("ci.yaml") == FileType::Yml);
  CHECK(type_of("script.js") == FileType::Others);
  CHECK(type_of("Makefile") == FileType::Others);
}

TEST_CASE("classify_file_type is case-insensitive on the extension") {
  CHECK(classify_file_type(toks("diff --git a/Main.JAVA b/Main.JAVA")) ==
        FileType::Java);
  CHECK(classify_file_type(toks("diff --git a/README.MD b/README.MD")) ==
        FileType::Md);
}

TEST_CASE("classify_file_type handles tokenizer-split paths") {
  // The corpus tokenizer splits paths on punctuation.
  Tokens split = toks(
      "diff --git a / src / main / java / com / foo / Bar . java "
      "b / src / main / java / com / foo / Bar . java <nl> index 123 .. 456");
  CHECK(classify_file_type(split) == FileType::Java);

  Tokens dotfile = toks("diff --git a / . gitrepo b / . gitrepo <nl> stuff");
  CHECK(classify_file_type(dotfile) == FileType::Gitrepo);
}

TEST_CASE("classify_file_type is total: headerless input maps to Others") {
  bool missing = false;
  CHECK(classify_file_type(toks("@@ -1,2 +1,2 @@ nothing here"), &missing) ==
        FileType::Others);
  CHECK(missing);
  missing = false;
  CHECK(classify_file_type(toks("diff without markers"), &missing) ==
        FileType::Others);
  CHECK(missing);
  missing = true;
  CHECK(classify_file_type(toks("diff --git a/x.java b/x.java"), &missing) ==
        FileType::Java);
  CHECK_FALSE(missing);
}

TEST_CASE("load_parallel_corpus pairs lines in order") {
  testutil::TempDir dir("corpus");
  testutil::write_lines(dir.file("diff.txt"),
                        {"diff --git a/A.java b/A.java <nl> + int x ;",
                         "diff --git a/b.md b/b.md <nl> + hello",
                         "no header here"});
  testutil::write_lines(dir.file("msg.txt"),
                        {"add x", "update docs", "misc change"});
  CorpusSplit split = load_parallel_corpus(dir.file("diff.txt"),
                                           dir.file("msg.txt"), "train");
  REQUIRE(split.size() == 3);
  CHECK(split.name == "train");
  CHECK(split.commits[0].id == 0);
  CHECK(split.commits[1].id == 1);
  CHECK(split.commits[2].id == 2);
  CHECK(split.commits[0].file_type == FileType::Java);
  CHECK(split.commits[1].file_type == FileType::Md);
  CHECK(split.commits[2].file_type == FileType::Others);
  CHECK(split.stats.missing_header == 1);
  CHECK(split.commits[0].msg_tokens == Tokens{"add", "x"});
  CHECK(split.commits[1].diff_tokens.size() == 7);
}

TEST_CASE("load_parallel_corpus rejects mismatched line counts") {
  testutil::TempDir dir("corpus_mismatch");
  testutil::write_lines(dir.file("diff.txt"), {"a", "b"});
  testutil::write_lines(dir.file("msg.txt"), {"x"});
  CHECK_THROWS_MATCHES(
      load_parallel_corpus(dir.file("diff.txt"), dir.file("msg.txt"), "t"),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return is_category(e, ErrorCategory::LineCountMismatch);
      }));
}

TEST_CASE("blank lines are fatal unless skipping is requested") {
  testutil::TempDir dir("corpus_empty");
  testutil::write_lines(dir.file("diff.txt"), {"diff --git a/x.java b/x.java", ""});
  testutil::write_lines(dir.file("msg.txt"), {"msg one", "msg two"});
  CHECK_THROWS_MATCHES(
      load_parallel_corpus(dir.file("diff.txt"), dir.file("msg.txt"), "t"),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return is_category(e, ErrorCategory::EmptyExample) &&
               std::string(e.what()).find("line 2") != std::string::npos;
      }));

  CorpusSplit split = load_parallel_corpus(dir.file("diff.txt"),
                                           dir.file("msg.txt"), "t", true);
  CHECK(split.size() == 1);
  CHECK(split.stats.skipped_empty == 1);
  CHECK(split.commits[0].id == 0);
}

TEST_CASE("determinism: two loads of the same files are identical") {
  testutil::TempDir dir("corpus_det");
  testutil::write_lines(dir.file("diff.txt"),
                        {"diff --git a/x.java b/x.java <nl> + a",
                         "diff --git a/y.xml b/y.xml <nl> - b"});
  testutil::write_lines(dir.file("msg.txt"), {"first", "second"});
  CorpusSplit a = load_parallel_corpus(dir.file("diff.txt"),
                                       dir.file("msg.txt"), "t");
  CorpusSplit b = load_parallel_corpus(dir.file("diff.txt"),
                                       dir.file("msg.txt"), "t");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.commits[i].diff_tokens == b.commits[i].diff_tokens);
    CHECK(a.commits[i].msg_tokens == b.commits[i].msg_tokens);
    CHECK(a.commits[i].file_type == b.commits[i].file_type);
  }
}

TEST_CASE("split_by_file_type partitions and re-numbers") {
  CorpusSplit split;
  split.name = "test";
  auto add = [&](const std::string& path) {
    Commit c;
    c.id = static_cast<int>(split.commits.size());
    c.diff_tokens = toks("diff --git a/" + path + " b/" + path);
    c.msg_tokens = {"m"};
    c.file_type = classify_file_type(c.diff_tokens);
    split.commits.push_back(c);
  };
  for (int i = 0; i < 4; ++i) add("f" + std::to_string(i) + ".java");
  for (int i = 0; i < 3; ++i) add("f" + std::to_string(i) + ".yml");
  for (int i = 0; i < 3; ++i) add("f" + std::to_string(i) + ".cpp");

  SECTION("top9 keeps Yml separate") {
    auto parts = split_by_file_type(split, SplitScenario::Top9);
    REQUIRE(parts.count(FileType::Java) == 1);
    REQUIRE(parts.count(FileType::Yml) == 1);
    REQUIRE(parts.count(FileType::Others) == 1);
    CHECK(parts.at(FileType::Java).size() == 4);
    CHECK(parts.at(FileType::Yml).size() == 3);
    CHECK(parts.at(FileType::Others).size() == 3);
    CHECK(parts.at(FileType::Java).name == "test.Java");
    // re-numbered ids are contiguous from zero
    for (auto& [type, part] : parts)
      for (std::size_t i = 0; i < part.size(); ++i)
        CHECK(part.commits[i].id == static_cast<int>(i));
  }

  SECTION("top5 folds Yml into Others") {
    auto parts = split_by_file_type(split, SplitScenario::Top5);
    REQUIRE(parts.count(FileType::Java) == 1);
    CHECK(parts.count(FileType::Yml) == 0);
    CHECK(parts.at(FileType::Others).size() == 6);
  }

  SECTION("partition invariant: sizes sum to the input size") {
    for (auto scenario : {SplitScenario::Top5, SplitScenario::Top9}) {
      auto parts = split_by_file_type(split, scenario);
      std::size_t total = 0;
      for (auto& [type, part] : parts) total += part.size();
      CHECK(total == split.size());
    }
  }
}

TEST_CASE("build_vocabulary counts one side only") {
  CorpusSplit split;
  Commit c1;
  c1.diff_tokens = toks("int x int");
  c1.msg_tokens = toks("fix bug");
  Commit c2;
  c2.diff_tokens = toks("int y");
  c2.msg_tokens = toks("fix typo");
  split.commits = {c1, c2};

  Vocabulary diff = build_vocabulary(split, Side::Diff, 1);
  CHECK(diff.encode("int") == 4);  // count 3, most frequent
  CHECK(diff.encode("fix") == Vocabulary::kUnk);

  Vocabulary msg = build_vocabulary(split, Side::Msg, 2);
  CHECK(msg.encode("fix") == 4);
  CHECK(msg.encode("bug") == Vocabulary::kUnk);
  CHECK(msg.size() == 5);
}

TEST_CASE("build_vocabulary honours a parent vocabulary") {
  CorpusSplit joint;
  Commit c;
  c.diff_tokens = toks("a b");
  c.msg_tokens = toks("m");
  joint.commits = {c};
  Vocabulary parent = build_vocabulary(joint, Side::Diff, 1);

  CorpusSplit per_type;
  Commit d;
  d.diff_tokens = toks("a c c c");
  d.msg_tokens = toks("m");
  per_type.commits = {d};
  Vocabulary v = build_vocabulary(per_type, Side::Diff, 1, &parent);
  CHECK(v.encode("a") == 4);
  CHECK(v.encode("c") == Vocabulary::kUnk);  // filtered by parent
}

TEST_CASE("truncate_sequences clips both sides") {
  Commit c;
  for (int i = 0; i < 150; ++i) c.diff_tokens.push_back("d" + std::to_string(i));
  for (int i = 0; i < 40; ++i) c.msg_tokens.push_back("m" + std::to_string(i));
  Commit t = truncate_sequences(c, 100, 30);
  CHECK(t.diff_tokens.size() == 100);
  CHECK(t.msg_tokens.size() == 30);
  CHECK(t.diff_tokens.front() == "d0");
  CHECK(t.diff_tokens.back() == "d99");

  Commit small;
  small.diff_tokens = toks("a b c");
  small.msg_tokens = toks("x");
  Commit u = truncate_sequences(small, 100, 30);
  CHECK(u.diff_tokens.size() == 3);
  CHECK(u.msg_tokens.size() == 1);
}

TEST_CASE("file type labels round trip") {
  for (FileType t : all_file_types())
    CHECK(file_type_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(file_type_from_string("Groovy"), Error);
}
