#pragma once

#include <algorithm>
#include <array>
#include <string_view>

namespace commitgen {

// Java SE reserved words plus the literals true/false/null, alphabetized.
// Mirrored line for line in data/java_keywords.txt; a test compares the two
// so edits cannot drift.
inline constexpr std::array<std::string_view, 53> kJavaKeywords = {
    "abstract",  "assert",     "boolean",    "break",      "byte",
    "case",      "catch",      "char",       "class",      "const",
    "continue",  "default",    "do",         "double",     "else",
    "enum",      "extends",    "false",      "final",      "finally",
    "float",     "for",        "goto",       "if",         "implements",
    "import",    "instanceof", "int",        "interface",  "long",
    "native",    "new",        "null",       "package",    "private",
    "protected", "public",     "return",     "short",      "static",
    "strictfp",  "super",      "switch",     "synchronized", "this",
    "throw",     "throws",     "transient",  "true",       "try",
    "void",      "volatile",   "while",
};

inline bool is_java_keyword(std::string_view token) {
  return std::binary_search(kJavaKeywords.begin(), kJavaKeywords.end(), token);
}

}  // namespace commitgen
