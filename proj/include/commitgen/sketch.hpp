#pragma once

#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "commitgen/corpus.hpp"
#include "commitgen/error.hpp"
#include "commitgen/java_keywords.hpp"

namespace commitgen {

enum class IdentifierKind { Constant, Class, Function, Variable };

inline const char* placeholder_prefix(IdentifierKind kind) {
  switch (kind) {
    case IdentifierKind::Constant: return "CONST";
    case IdentifierKind::Class: return "CLASS";
    case IdentifierKind::Function: return "FUNC";
    case IdentifierKind::Variable: return "VAR";
  }
  return "VAR";
}

// Naming-convention heuristics, applied in order: all-caps -> Constant;
// leading uppercase with a lowercase later -> Class; leading lowercase with a
// following `(` -> Function, without -> Variable. Everything else (operators,
// leading digits/symbols) is left alone.
inline std::optional<IdentifierKind> classify_identifier(
    const std::string& token, const std::string* next = nullptr) {
  if (token.empty()) return std::nullopt;
  unsigned char first = static_cast<unsigned char>(token[0]);
  if (!std::isalpha(first) && token[0] != '_') return std::nullopt;

  bool all_const_chars = true;
  bool has_lower = false;
  for (char ch : token) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (!(std::isupper(c) || std::isdigit(c) || ch == '_'))
      all_const_chars = false;
    if (std::islower(c)) has_lower = true;
  }
  if (all_const_chars) return IdentifierKind::Constant;
  if (std::isupper(first) && has_lower) return IdentifierKind::Class;
  if (std::islower(first))
    return next && *next == "(" ? IdentifierKind::Function
                                : IdentifierKind::Variable;
  return std::nullopt;
}

struct SketchDiagnostics {
  std::size_t unterminated_spans = 0;
};

namespace detail {

// Distinguishes diff metadata lines (preserved verbatim) from code content.
// Hunk headers and +/- lines are handled separately: their markers stay but
// the trailing code is processed.
inline bool is_metadata_line(const Tokens& line) {
  if (line.empty()) return false;
  const std::string& first = line[0];
  auto second = [&]() -> const std::string& {
    static const std::string empty;
    return line.size() > 1 ? line[1] : empty;
  };
  if (first == "---" || first == "+++" || first == "mmm" || first == "ppp" ||
      first == "\\")
    return true;
  if (first == "diff") return true;
  if (first == "index") {
    std::size_t limit = std::min<std::size_t>(line.size(), 5);
    for (std::size_t i = 1; i < limit; ++i)
      if (line[i].find("..") != std::string::npos) return true;
    return false;
  }
  if (first == "new" || first == "old" || first == "deleted")
    return second() == "file" || second() == "mode";
  if (first == "rename" || first == "copy")
    return second() == "from" || second() == "to";
  if (first == "similarity" || first == "dissimilarity")
    return second() == "index";
  if (first == "Binary") return second() == "files";
  return false;
}

inline bool is_numeric_literal(const std::string& token) {
  return !token.empty() &&
         std::isdigit(static_cast<unsigned char>(token[0]));
}

inline bool opens_string(const std::string& token, char quote) {
  return token.size() >= 1 && token[0] == quote &&
         !(token.size() >= 2 && token.back() == quote);
}

inline bool self_contained_literal(const std::string& token, char quote) {
  return token.size() >= 2 && token[0] == quote && token.back() == quote;
}

// Strips one code segment in place onto `out`; comment/string states persist
// through the caller's loop so block comments can span lines.
struct StripState {
  bool in_block_comment = false;
  bool in_string = false;
  char quote = '"';
  bool in_import = false;
  std::size_t unterminated = 0;

  void line_break() {
    // Strings and import statements never span lines.
    if (in_string) {
      ++unterminated;
      in_string = false;
    }
    in_import = false;
  }

  void finish() {
    if (in_block_comment) {
      ++unterminated;
      in_block_comment = false;
    }
    line_break();
  }

  bool open_span() const { return in_block_comment || in_string || in_import; }

  // Returns the number of tokens consumed (>=1); appends kept tokens to out.
  std::size_t feed(const Tokens& line, std::size_t i, Tokens* out) {
    const std::string& tok = line[i];
    if (in_block_comment) {
      if (tok.find("*/") != std::string::npos) in_block_comment = false;
      return 1;
    }
    if (in_string) {
      if (!tok.empty() && tok.back() == quote) in_string = false;
      return 1;
    }
    if (in_import) {
      if (tok == ";" || (!tok.empty() && tok.back() == ';')) in_import = false;
      return 1;
    }
    if (tok.rfind("/*", 0) == 0) {
      if (tok.find("*/", 2) == std::string::npos) in_block_comment = true;
      return 1;
    }
    if (tok == "import" || tok == "package") {
      in_import = true;
      return 1;
    }
    if (self_contained_literal(tok, '"') || self_contained_literal(tok, '\''))
      return 1;
    if (opens_string(tok, '"')) {
      in_string = true;
      quote = '"';
      return 1;
    }
    if (opens_string(tok, '\'')) {
      in_string = true;
      quote = '\'';
      return 1;
    }
    if (is_numeric_literal(tok)) return 1;
    if (!tok.empty() && tok[0] == '@') return 1;
    if (is_java_keyword(tok)) return 1;
    // A literal initializer collapses with its `=` (`MAX = 3 ;` -> `MAX ;`).
    if (tok == "=" && i + 1 < line.size() &&
        (is_numeric_literal(line[i + 1]) || line[i + 1][0] == '"' ||
         line[i + 1][0] == '\''))
      return 1;
    out->push_back(tok);
    return 1;
  }
};

// Splits a token stream into lines on the <nl> sentinel. The sentinel is
// attached to the end of the line it terminates.
inline std::vector<Tokens> split_lines(const Tokens& tokens) {
  std::vector<Tokens> lines(1);
  for (const std::string& tok : tokens) {
    lines.back().push_back(tok);
    if (tok == kNewlineToken) lines.emplace_back();
  }
  if (lines.back().empty()) lines.pop_back();
  return lines;
}

// Where the code content of a line starts: 0 for plain content, past the
// marker for +/- lines, past the second @@ for hunk headers, npos for
// metadata lines preserved whole.
inline std::size_t code_start(const Tokens& line) {
  if (line.empty()) return std::string::npos;
  if (is_metadata_line(line)) return std::string::npos;
  if (line[0] == "+" || line[0] == "-") return 1;
  if (line[0] == "@@") {
    for (std::size_t i = 1; i < line.size(); ++i)
      if (line[i] == "@@") return i + 1;
    return std::string::npos;
  }
  return 0;
}

}  // namespace detail

// Removes Java keywords, annotations, import/package statements, numeric and
// string/char literals, and comments from a diff's code content. Metadata
// lines, hunk markers, and +/- prefixes survive untouched. Spans left open at
// the end of the diff are stripped to the end and tallied in diagnostics.
inline Tokens strip_java_lexemes(const Tokens& diff_tokens,
                                 SketchDiagnostics* diagnostics = nullptr) {
  Tokens out;
  detail::StripState state;
  for (const Tokens& line : detail::split_lines(diff_tokens)) {
    std::size_t start = detail::code_start(line);
    if (start == std::string::npos) {
      out.insert(out.end(), line.begin(), line.end());
      continue;
    }
    std::size_t i = 0;
    for (; i < start; ++i) out.push_back(line[i]);
    bool ends_with_nl = !line.empty() && line.back() == kNewlineToken;
    std::size_t end = line.size() - (ends_with_nl ? 1 : 0);
    bool line_comment_hit = false;
    while (i < end) {
      // `//` opens a span through the line's <nl> inclusive.
      if (!state.open_span() && line[i].rfind("//", 0) == 0) {
        line_comment_hit = true;
        break;
      }
      i += state.feed(line, i, &out);
    }
    if (ends_with_nl && !line_comment_hit) out.push_back(kNewlineToken);
    state.line_break();
  }
  state.finish();
  if (diagnostics) diagnostics->unterminated_spans += state.unterminated;
  return out;
}

// Per-example mapping between placeholders and the identifiers they stand
// for; injective in both directions when indexing is on (the default).
struct PlaceholderDictionary {
  int example_id = 0;
  std::map<std::string, std::string> entries;  // placeholder -> identifier

  const std::string* identifier_for(const std::string& placeholder) const {
    auto it = entries.find(placeholder);
    return it == entries.end() ? nullptr : &it->second;
  }

  const std::string* placeholder_for(const std::string& identifier) const {
    auto it = by_name_.find(identifier);
    return it == by_name_.end() ? nullptr : &it->second;
  }

  // Returns the placeholder for `name`, minting one on first sight.
  const std::string& intern(IdentifierKind kind, const std::string& name,
                            bool indexed) {
    auto it = by_name_.find(name);
    if (it != by_name_.end()) return it->second;
    std::string placeholder = placeholder_prefix(kind);
    if (indexed) {
      placeholder += '_';
      placeholder += std::to_string(next_index_[static_cast<int>(kind)]++);
    }
    // Unindexed mode shares one placeholder per kind; keep the first mapping.
    entries.emplace(placeholder, name);
    return by_name_.emplace(name, std::move(placeholder)).first->second;
  }

  void insert_loaded(const std::string& placeholder, const std::string& name) {
    entries[placeholder] = name;
    by_name_.emplace(name, placeholder);
  }

  // All identifiers of this example, in placeholder order.
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& [ph, name] : entries) out.push_back(name);
    return out;
  }

 private:
  std::unordered_map<std::string, std::string> by_name_;
  std::array<int, 4> next_index_{0, 0, 0, 0};
};

struct SketchExample {
  Tokens sketched_diff;
  Tokens sketched_msg;
  PlaceholderDictionary dictionary;
  SketchDiagnostics diagnostics;
};

inline bool is_placeholder_token(const std::string& token) {
  for (IdentifierKind kind :
       {IdentifierKind::Constant, IdentifierKind::Class,
        IdentifierKind::Function, IdentifierKind::Variable}) {
    const std::string prefix = placeholder_prefix(kind);
    if (token == prefix) return true;  // unindexed form
    if (token.size() > prefix.size() + 1 &&
        token.compare(0, prefix.size(), prefix) == 0 &&
        token[prefix.size()] == '_') {
      bool digits = true;
      for (std::size_t i = prefix.size() + 1; i < token.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(token[i]))) {
          digits = false;
          break;
        }
      if (digits) return true;
    }
  }
  return false;
}

// Strips the diff, replaces each classified identifier with its placeholder
// (first appearance mints it, repeats reuse it), and mirrors the replacement
// onto message tokens that equal a mapped identifier.
inline SketchExample encode_sketch(const Commit& commit, bool indexed = true) {
  SketchExample example;
  example.dictionary.example_id = commit.id;
  Tokens stripped =
      strip_java_lexemes(commit.diff_tokens, &example.diagnostics);

  for (const Tokens& line : detail::split_lines(stripped)) {
    std::size_t start = detail::code_start(line);
    if (start == std::string::npos) {
      example.sketched_diff.insert(example.sketched_diff.end(), line.begin(),
                                   line.end());
      continue;
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
      const std::string& tok = line[i];
      if (i < start || tok == kNewlineToken) {
        example.sketched_diff.push_back(tok);
        continue;
      }
      const std::string* next =
          (i + 1 < line.size() && line[i + 1] != kNewlineToken) ? &line[i + 1]
                                                                : nullptr;
      std::optional<IdentifierKind> kind = classify_identifier(tok, next);
      if (kind) {
        example.sketched_diff.push_back(
            example.dictionary.intern(*kind, tok, indexed));
      } else {
        example.sketched_diff.push_back(tok);
      }
    }
  }

  example.sketched_msg.reserve(commit.msg_tokens.size());
  for (const std::string& tok : commit.msg_tokens) {
    const std::string* ph = example.dictionary.placeholder_for(tok);
    example.sketched_msg.push_back(ph ? *ph : tok);
  }
  return example;
}

// Replaces placeholders in a predicted message: dictionary entry first, then
// a seeded uniform draw from the diff's identifiers, else removal.
inline Tokens decode_sketch(const Tokens& predicted_msg,
                            const PlaceholderDictionary& dictionary,
                            const std::vector<std::string>& diff_names,
                            std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  Tokens out;
  out.reserve(predicted_msg.size());
  for (const std::string& tok : predicted_msg) {
    if (const std::string* name = dictionary.identifier_for(tok)) {
      out.push_back(*name);
    } else if (is_placeholder_token(tok)) {
      if (!diff_names.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0,
                                                        diff_names.size() - 1);
        out.push_back(diff_names[pick(rng)]);
      }
      // no candidates: placeholder dropped
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

// ---- dictionary sidecar -------------------------------------------------
// `example_id<TAB>placeholder<TAB>identifier`, sorted by example id then
// placeholder; the format is byte-exact so files can be diffed.

inline void save_dictionaries(const std::vector<PlaceholderDictionary>& dicts,
                              const std::string& path) {
  std::vector<const PlaceholderDictionary*> order;
  order.reserve(dicts.size());
  for (const auto& d : dicts) order.push_back(&d);
  std::sort(order.begin(), order.end(),
            [](const PlaceholderDictionary* a, const PlaceholderDictionary* b) {
              return a->example_id < b->example_id;
            });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::IoError, "cannot write " + path);
  for (const PlaceholderDictionary* d : order)
    for (const auto& [placeholder, name] : d->entries)
      out << d->example_id << '\t' << placeholder << '\t' << name << '\n';
}

inline std::map<int, PlaceholderDictionary> load_dictionaries(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::IoError, "cannot read " + path);
  std::map<int, PlaceholderDictionary> dicts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw Error(ErrorCategory::IoError,
                  path + ": malformed row at line " + std::to_string(lineno));
    int id = 0;
    try {
      id = std::stoi(line.substr(0, t1));
    } catch (const std::exception&) {
      throw Error(ErrorCategory::IoError,
                  path + ": bad example id at line " + std::to_string(lineno));
    }
    PlaceholderDictionary& d = dicts[id];
    d.example_id = id;
    d.insert_loaded(line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1));
  }
  return dicts;
}

}  // namespace commitgen
