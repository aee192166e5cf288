#pragma once

#include <stdexcept>
#include <string>

namespace commitgen {

// Machine-parsable failure categories. The CLI prints them as
// "error: <Category>: <detail>" and exits nonzero.
enum class ErrorCategory {
  LineCountMismatch,
  EmptyExample,
  EmptyVocabulary,
  TargetTooSmall,
  EmptyCorpus,
  IndexOutOfVocab,
  NonFiniteLoss,
  CheckpointMismatch,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::LineCountMismatch: return "LineCountMismatch";
    case ErrorCategory::EmptyExample: return "EmptyExample";
    case ErrorCategory::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCategory::TargetTooSmall: return "TargetTooSmall";
    case ErrorCategory::EmptyCorpus: return "EmptyCorpus";
    case ErrorCategory::IndexOutOfVocab: return "IndexOutOfVocab";
    case ErrorCategory::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCategory::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCategory::ConfigError: return "ConfigError";
    case ErrorCategory::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& detail)
      : std::runtime_error(std::string(to_string(category)) + ": " + detail),
        category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace commitgen
