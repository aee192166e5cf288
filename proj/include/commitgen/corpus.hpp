#pragma once

#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "commitgen/error.hpp"
#include "commitgen/vocabulary.hpp"

namespace commitgen {

// Newline sentinel used inside the line-aligned corpus files.
inline constexpr const char* kNewlineToken = "<nl>";

enum class FileType {
  Java,
  Gitrepo,
  Xml,
  Gradle,
  Md,
  Gitignore,
  Properties,
  Txt,
  Yml,
  Others,
};

inline const std::array<FileType, 10>& all_file_types() {
  static const std::array<FileType, 10> types = {
      FileType::Java,       FileType::Gitrepo, FileType::Xml,
      FileType::Gradle,     FileType::Md,      FileType::Gitignore,
      FileType::Properties, FileType::Txt,     FileType::Yml,
      FileType::Others};
  return types;
}

inline const char* to_string(FileType t) {
  switch (t) {
    case FileType::Java: return "Java";
    case FileType::Gitrepo: return "Gitrepo";
    case FileType::Xml: return "Xml";
    case FileType::Gradle: return "Gradle";
    case FileType::Md: return "Md";
    case FileType::Gitignore: return "Gitignore";
    case FileType::Properties: return "Properties";
    case FileType::Txt: return "Txt";
    case FileType::Yml: return "Yml";
    case FileType::Others: return "Others";
  }
  return "Others";
}

inline FileType file_type_from_string(const std::string& label) {
  for (FileType t : all_file_types())
    if (label == to_string(t)) return t;
  throw Error(ErrorCategory::ConfigError, "unknown file type label: " + label);
}

using Tokens = std::vector<std::string>;

// One training/evaluation example: a tokenized diff, its tokenized commit
// message, and the single file type the diff touches.
struct Commit {
  int id = 0;
  Tokens diff_tokens;
  Tokens msg_tokens;
  FileType file_type = FileType::Others;
};

struct LoadStats {
  std::size_t missing_header = 0;
  std::size_t skipped_empty = 0;
};

struct CorpusSplit {
  std::string name;
  std::vector<Commit> commits;
  LoadStats stats;

  std::size_t size() const { return commits.size(); }
};

namespace detail {

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Reconstructs the changed file's path from the first `diff --git` header
// line. The corpus tokenizer may have split the path ("a / src / Main .
// java"), so the text between the a/ prefix and the b/ suffix is joined back
// together by dropping whitespace.
inline bool extract_header_path(const Tokens& diff_tokens, std::string* path) {
  std::string line;
  for (const auto& tok : diff_tokens) {
    if (tok == kNewlineToken) break;
    if (!line.empty()) line += ' ';
    line += tok;
  }
  if (line.rfind("diff", 0) != 0) return false;

  auto find_marker = [&line](const std::string& spaced, const std::string& tight,
                             std::size_t from, bool last) {
    std::size_t pos = std::string::npos;
    if (last) {
      pos = line.rfind(spaced);
      std::size_t p2 = line.rfind(tight);
      if (pos == std::string::npos || (p2 != std::string::npos && p2 > pos)) {
        if (p2 != std::string::npos && line.compare(p2, spaced.size(), spaced) != 0)
          pos = p2;
      }
    } else {
      pos = line.find(spaced, from);
      std::size_t p2 = line.find(tight, from);
      if (p2 != std::string::npos && (pos == std::string::npos || p2 < pos) &&
          line.compare(p2, spaced.size(), spaced) != 0)
        pos = p2;
    }
    return pos;
  };

  // a-side marker: " a / " (split) or " a/" (intact).
  std::size_t a_pos = find_marker(" a / ", " a/", 0, false);
  if (a_pos == std::string::npos) return false;
  std::size_t a_end = line.compare(a_pos, 5, " a / ") == 0 ? a_pos + 5 : a_pos + 3;

  std::size_t b_pos = find_marker(" b / ", " b/", a_end, true);
  if (b_pos == std::string::npos || b_pos < a_end) return false;

  std::string raw = line.substr(a_end, b_pos - a_end);
  std::string joined;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) joined += c;
  if (joined.empty()) return false;
  *path = joined;
  return true;
}

inline FileType classify_path(const std::string& path) {
  std::string basename = path;
  std::size_t slash = basename.find_last_of('/');
  if (slash != std::string::npos) basename = basename.substr(slash + 1);
  basename = lowercase(basename);

  if (basename == ".gitignore") return FileType::Gitignore;
  if (basename == ".gitrepo") return FileType::Gitrepo;

  std::size_t dot = basename.find_last_of('.');
  if (dot == std::string::npos || dot == 0) return FileType::Others;
  std::string ext = basename.substr(dot + 1);
  if (ext == "java") return FileType::Java;
  if (ext == "xml") return FileType::Xml;
  if (ext == "gradle") return FileType::Gradle;
  if (ext == "md") return FileType::Md;
  if (ext == "properties") return FileType::Properties;
  if (ext == "txt") return FileType::Txt;
  if (ext == "yml" || ext == "yaml") return FileType::Yml;
  return FileType::Others;
}

}  // namespace detail

// Maps a diff to one of the ten file type labels via the path in its first
// header line. Headerless diffs classify as Others; the caller can count
// those through `missing_header`.
inline FileType classify_file_type(const Tokens& diff_tokens,
                                   bool* missing_header = nullptr) {
  if (missing_header) *missing_header = false;
  std::string path;
  if (!detail::extract_header_path(diff_tokens, &path)) {
    if (missing_header) *missing_header = true;
    return FileType::Others;
  }
  return detail::classify_path(path);
}

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::IoError, "cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline Tokens split_tokens(const std::string& line) {
  Tokens tokens;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace detail

// Loads a line-aligned parallel corpus: one whitespace-tokenized example per
// line, `<nl>` encoding newlines inside a diff. Blank lines are fatal unless
// skip_empty is set, in which case the pair is dropped and counted.
inline CorpusSplit load_parallel_corpus(const std::string& diff_path,
                                        const std::string& msg_path,
                                        const std::string& split_name,
                                        bool skip_empty = false) {
  std::vector<std::string> diff_lines = detail::read_lines(diff_path);
  std::vector<std::string> msg_lines = detail::read_lines(msg_path);
  if (diff_lines.size() != msg_lines.size())
    throw Error(ErrorCategory::LineCountMismatch,
                diff_path + " has " + std::to_string(diff_lines.size()) +
                    " lines, " + msg_path + " has " +
                    std::to_string(msg_lines.size()));

  CorpusSplit split;
  split.name = split_name;
  split.commits.reserve(diff_lines.size());
  for (std::size_t i = 0; i < diff_lines.size(); ++i) {
    Tokens diff = detail::split_tokens(diff_lines[i]);
    Tokens msg = detail::split_tokens(msg_lines[i]);
    if (diff.empty() || msg.empty()) {
      if (skip_empty) {
        ++split.stats.skipped_empty;
        continue;
      }
      throw Error(ErrorCategory::EmptyExample,
                  "blank " + std::string(diff.empty() ? "diff" : "message") +
                      " at line " + std::to_string(i + 1));
    }
    Commit c;
    c.id = static_cast<int>(split.commits.size());
    bool missing = false;
    c.file_type = classify_file_type(diff, &missing);
    if (missing) ++split.stats.missing_header;
    c.diff_tokens = std::move(diff);
    c.msg_tokens = std::move(msg);
    split.commits.push_back(std::move(c));
  }
  return split;
}

enum class SplitScenario { Top5, Top9 };

inline bool scenario_keeps(SplitScenario scenario, FileType t) {
  switch (t) {
    case FileType::Gitrepo:
    case FileType::Gradle:
    case FileType::Java:
    case FileType::Md:
    case FileType::Xml:
      return true;
    case FileType::Gitignore:
    case FileType::Properties:
    case FileType::Txt:
    case FileType::Yml:
      return scenario == SplitScenario::Top9;
    case FileType::Others:
      return false;
  }
  return false;
}

// Partitions a split into per-file-type splits. Types outside the scenario
// fold into the Others bucket; commits are re-numbered within each output.
inline std::map<FileType, CorpusSplit> split_by_file_type(
    const CorpusSplit& split, SplitScenario scenario) {
  std::map<FileType, CorpusSplit> out;
  for (const Commit& c : split.commits) {
    FileType bucket =
        scenario_keeps(scenario, c.file_type) ? c.file_type : FileType::Others;
    CorpusSplit& dest = out[bucket];
    if (dest.commits.empty())
      dest.name = split.name + "." + to_string(bucket);
    Commit copy = c;
    copy.id = static_cast<int>(dest.commits.size());
    dest.commits.push_back(std::move(copy));
  }
  return out;
}

enum class Side { Diff, Msg };

inline const Tokens& side_tokens(const Commit& c, Side side) {
  return side == Side::Diff ? c.diff_tokens : c.msg_tokens;
}

// Counts tokens on one side of a split and keeps those at or above
// min_count. Gitrepo per-type vocabularies use min_count 2, everything else
// 1; a parent vocabulary restricts per-type vocabularies to tokens from the
// initial joint one.
inline Vocabulary build_vocabulary(const CorpusSplit& split, Side side,
                                   std::int64_t min_count,
                                   const Vocabulary* parent = nullptr) {
  if (min_count < 1)
    throw Error(ErrorCategory::ConfigError, "min_count must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const Commit& c : split.commits)
    for (const std::string& tok : side_tokens(c, side)) ++counts[tok];
  return Vocabulary::from_counts(counts, min_count, parent);
}

// Truncates to the first max_diff / max_msg tokens. Defaults follow the
// 100/30 input/output lengths; BPE runs override the diff side per their
// configuration (185/170/160).
inline Commit truncate_sequences(Commit commit, std::size_t max_diff,
                                 std::size_t max_msg) {
  if (max_diff < 1 || max_msg < 1)
    throw Error(ErrorCategory::ConfigError, "truncation lengths must be >= 1");
  if (commit.diff_tokens.size() > max_diff) commit.diff_tokens.resize(max_diff);
  if (commit.msg_tokens.size() > max_msg) commit.msg_tokens.resize(max_msg);
  return commit;
}

}  // namespace commitgen
