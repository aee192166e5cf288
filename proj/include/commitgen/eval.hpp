#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "commitgen/corpus.hpp"
#include "commitgen/error.hpp"

namespace commitgen {

struct BleuReport {
  double corpus_bleu = 0.0;
  double brevity_penalty = 1.0;
  // Modified precisions for n = 1..4; an order with no n-grams anywhere
  // reports 1 and drops out of the geometric mean.
  std::array<double, 4> ngram_precisions{1.0, 1.0, 1.0, 1.0};
  std::map<FileType, std::pair<std::size_t, double>> per_type;
};

namespace detail {

struct BleuAccumulator {
  std::array<std::int64_t, 4> matched{0, 0, 0, 0};
  std::array<std::int64_t, 4> total{0, 0, 0, 0};
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;

  void add(const Tokens& hyp, const Tokens& ref) {
    hyp_len += static_cast<std::int64_t>(hyp.size());
    ref_len += static_cast<std::int64_t>(ref.size());
    for (int n = 1; n <= 4; ++n) {
      if (static_cast<int>(hyp.size()) < n) continue;
      std::map<std::vector<std::string>, std::int64_t> hyp_counts, ref_counts;
      for (std::size_t i = 0; i + n <= hyp.size(); ++i)
        ++hyp_counts[std::vector<std::string>(hyp.begin() + i,
                                              hyp.begin() + i + n)];
      for (std::size_t i = 0; i + n <= ref.size(); ++i)
        ++ref_counts[std::vector<std::string>(ref.begin() + i,
                                              ref.begin() + i + n)];
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end())
          matched[n - 1] += std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }

  BleuReport finish(bool smoothed = false) const {
    BleuReport report;
    if (hyp_len == 0) return report;  // corpus_bleu 0
    double log_sum = 0.0;
    bool zero = false;
    for (int n = 0; n < 4; ++n) {
      double m = static_cast<double>(matched[n]);
      double t = static_cast<double>(total[n]);
      if (smoothed && n > 0) {
        m += 1.0;
        t += 1.0;
      }
      if (t == 0.0) {
        report.ngram_precisions[n] = 1.0;
        continue;
      }
      double p = m / t;
      report.ngram_precisions[n] = p;
      if (p == 0.0)
        zero = true;
      else
        log_sum += 0.25 * std::log(p);
    }
    report.brevity_penalty =
        hyp_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) /
                                 static_cast<double>(hyp_len));
    report.corpus_bleu =
        zero ? 0.0 : report.brevity_penalty * std::exp(log_sum) * 100.0;
    return report;
  }
};

}  // namespace detail

// BLEU-4 with clipped modified n-gram precision aggregated over the corpus
// before the geometric mean; brevity penalty exp(1 - r/c) when c < r; no
// smoothing.
inline BleuReport corpus_bleu(const std::vector<Tokens>& hypotheses,
                              const std::vector<Tokens>& references) {
  if (hypotheses.size() != references.size())
    throw Error(ErrorCategory::ConfigError,
                "hypothesis/reference counts differ: " +
                    std::to_string(hypotheses.size()) + " vs " +
                    std::to_string(references.size()));
  if (hypotheses.empty())
    throw Error(ErrorCategory::EmptyCorpus, "nothing to score");
  detail::BleuAccumulator acc;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    acc.add(hypotheses[i], references[i]);
  return acc.finish();
}

// Same formula on a single pair. The smoothed variant (add-one on orders
// 2..4) is for diagnostics only and never feeds reported numbers.
inline double sentence_bleu(const Tokens& hypothesis, const Tokens& reference,
                            bool smoothed = false) {
  detail::BleuAccumulator acc;
  acc.add(hypothesis, reference);
  return acc.finish(smoothed).corpus_bleu;
}

// Corpus BLEU within each file-type group plus overall.
inline BleuReport per_type_bleu(const std::vector<Tokens>& hypotheses,
                                const std::vector<Tokens>& references,
                                const std::vector<FileType>& types) {
  if (hypotheses.size() != types.size())
    throw Error(ErrorCategory::ConfigError,
                "types list length does not match hypotheses");
  BleuReport report = corpus_bleu(hypotheses, references);
  std::map<FileType, detail::BleuAccumulator> groups;
  std::map<FileType, std::size_t> counts;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    groups[types[i]].add(hypotheses[i], references[i]);
    ++counts[types[i]];
  }
  for (const auto& [type, acc] : groups)
    report.per_type[type] = {counts[type], acc.finish().corpus_bleu};
  return report;
}

// Descending counts, lexicographic ties; at most top_n rows.
inline std::vector<std::pair<std::string, std::int64_t>>
token_frequency_report(const CorpusSplit& split, Side side,
                       std::size_t top_n) {
  if (top_n < 1)
    throw Error(ErrorCategory::ConfigError, "top_n must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const Commit& c : split.commits)
    for (const std::string& tok : side_tokens(c, side)) ++counts[tok];
  std::vector<std::pair<std::string, std::int64_t>> rows(counts.begin(),
                                                         counts.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (rows.size() > top_n) rows.resize(top_n);
  return rows;
}

// ---- report files -----------------------------------------------------
// Machine format: `# run: <id>` header, then `type<TAB>count<TAB>bleu4`
// rows, final row ALL. Scores from repeated runs are merged by `aggregate`.

struct ReportRow {
  std::string type;
  std::size_t count = 0;
  double bleu = 0.0;
};

struct SavedReport {
  std::string run_id;
  std::vector<ReportRow> rows;  // per-type rows first, ALL last
};

inline SavedReport to_saved_report(const BleuReport& report,
                                   const std::string& run_id,
                                   std::size_t example_count) {
  SavedReport saved;
  saved.run_id = run_id;
  for (const auto& [type, entry] : report.per_type)
    saved.rows.push_back({to_string(type), entry.first, entry.second});
  saved.rows.push_back({"ALL", example_count, report.corpus_bleu});
  return saved;
}

inline void save_report(const SavedReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::IoError, "cannot write " + path);
  out << "# run: " << report.run_id << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& row : report.rows)
    out << row.type << '\t' << row.count << '\t' << row.bleu << '\n';
}

inline SavedReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::IoError, "cannot read " + path);
  SavedReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# run:", 0) == 0) {
      report.run_id = line.substr(6);
      while (!report.run_id.empty() && report.run_id.front() == ' ')
        report.run_id.erase(report.run_id.begin());
      continue;
    }
    std::istringstream iss(line);
    ReportRow row;
    if (!(iss >> row.type >> row.count >> row.bleu))
      throw Error(ErrorCategory::IoError,
                  path + ": malformed row at line " + std::to_string(lineno));
    report.rows.push_back(row);
  }
  return report;
}

// Means per type across runs; counts must agree between runs.
inline SavedReport aggregate_reports(const std::vector<SavedReport>& runs) {
  if (runs.empty())
    throw Error(ErrorCategory::EmptyCorpus, "no reports to aggregate");
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::size_t, double>> sums;
  std::map<std::string, std::size_t> seen;
  for (const SavedReport& run : runs) {
    for (const ReportRow& row : run.rows) {
      auto it = sums.find(row.type);
      if (it == sums.end()) {
        order.push_back(row.type);
        sums[row.type] = {row.count, row.bleu};
        seen[row.type] = 1;
      } else {
        if (it->second.first != row.count)
          throw Error(ErrorCategory::ConfigError,
                      "run " + run.run_id + " disagrees on count for " +
                          row.type);
        it->second.second += row.bleu;
        ++seen[row.type];
      }
    }
  }
  SavedReport out;
  out.run_id = "aggregate(n=" + std::to_string(runs.size()) + ")";
  for (const std::string& type : order) {
    if (seen[type] != runs.size())
      throw Error(ErrorCategory::ConfigError,
                  "type " + type + " missing from some runs");
    out.rows.push_back(
        {type, sums[type].first, sums[type].second / runs.size()});
  }
  return out;
}

// Human-readable rendering of the same rows.
inline std::string format_report(const SavedReport& report) {
  std::size_t width = 4;  // "type"
  for (const auto& row : report.rows) width = std::max(width, row.type.size());
  std::ostringstream out;
  out << "run: " << report.run_id << '\n';
  out << std::left << std::setw(static_cast<int>(width) + 2) << "type"
      << std::right << std::setw(8) << "count" << std::setw(10) << "bleu4"
      << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& row : report.rows)
    out << std::left << std::setw(static_cast<int>(width) + 2) << row.type
        << std::right << std::setw(8) << row.count << std::setw(10) << row.bleu
        << '\n';
  return out.str();
}

}  // namespace commitgen
