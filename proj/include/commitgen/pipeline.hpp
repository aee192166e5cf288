#pragma once

// Ensemble pipeline: route each example to a per-file-type model, decode,
// and score the whole run. Specs are plain JSON so experiment setups can be
// checked in and diffed.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "commitgen/corpus.hpp"
#include "commitgen/error.hpp"
#include "commitgen/eval.hpp"
#include "commitgen/nmt.hpp"
#include "commitgen/nmt_decode.hpp"
#include "commitgen/sketch.hpp"

namespace commitgen {

// One model descriptor: which checkpoint serves a route and how to decode
// with it. The optional vocabulary hashes pin the checkpoint to the corpus
// it was trained on; zero means unchecked.
struct RouteSpec {
  std::string checkpoint;
  bool uses_sketch = false;
  int beam_width = 10;
  double length_penalty = 1.0;
  std::uint64_t src_vocab_hash = 0;
  std::uint64_t tgt_vocab_hash = 0;
};

struct EnsembleSpec {
  std::map<FileType, RouteSpec> routes;
  std::optional<RouteSpec> fallback;  // serves every type without a route
};

inline void validate_route(const RouteSpec& route, const std::string& label) {
  if (route.checkpoint.empty())
    throw Error(ErrorCategory::ConfigError,
                "route " + label + " has no checkpoint path");
  if (route.beam_width < 1)
    throw Error(ErrorCategory::ConfigError,
                "route " + label + " beam width must be at least 1");
  if (route.length_penalty < 0.0)
    throw Error(ErrorCategory::ConfigError,
                "route " + label + " length penalty must be non-negative");
}

// Sketching only exists for Java, so only the Java route may ask for it;
// the fallback serves mixed types and therefore may not either.
inline void validate_spec(const EnsembleSpec& spec) {
  for (const auto& [type, route] : spec.routes) {
    validate_route(route, to_string(type));
    if (route.uses_sketch && type != FileType::Java)
      throw Error(ErrorCategory::ConfigError,
                  std::string("uses_sketch is only valid on the Java route, "
                              "not ") +
                      to_string(type));
  }
  if (spec.fallback) {
    validate_route(*spec.fallback, "fallback");
    if (spec.fallback->uses_sketch)
      throw Error(ErrorCategory::ConfigError,
                  "uses_sketch is only valid on the Java route, not fallback");
  }
  for (FileType t : all_file_types())
    if (!spec.routes.count(t) && !spec.fallback)
      throw Error(ErrorCategory::ConfigError,
                  std::string("no route or fallback for file type ") +
                      to_string(t));
}

inline const RouteSpec& route_example(const EnsembleSpec& spec,
                                      const Commit& commit) {
  auto it = spec.routes.find(commit.file_type);
  if (it != spec.routes.end()) return it->second;
  if (spec.fallback) return *spec.fallback;
  throw Error(ErrorCategory::ConfigError,
              std::string("no route or fallback for file type ") +
                  to_string(commit.file_type));
}

namespace detail {

// Hashes may exceed 2^53, so the writer emits them as strings; accept a
// plain number too for hand-written specs.
inline std::uint64_t hash_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return 0;
  const auto& v = j.at(key);
  if (v.is_string()) return std::stoull(v.get<std::string>());
  return v.get<std::uint64_t>();
}

inline RouteSpec route_from_json(const nlohmann::json& j,
                                 const std::string& label) {
  if (!j.is_object())
    throw Error(ErrorCategory::ConfigError,
                "route " + label + " must be a JSON object");
  RouteSpec route;
  route.checkpoint = j.value("checkpoint", std::string());
  route.uses_sketch = j.value("uses_sketch", false);
  route.beam_width = j.value("beam_width", 10);
  route.length_penalty = j.value("length_penalty", 1.0);
  route.src_vocab_hash = hash_field(j, "src_vocab_hash");
  route.tgt_vocab_hash = hash_field(j, "tgt_vocab_hash");
  return route;
}

inline nlohmann::json route_to_json(const RouteSpec& route) {
  nlohmann::json j;
  j["checkpoint"] = route.checkpoint;
  j["uses_sketch"] = route.uses_sketch;
  j["beam_width"] = route.beam_width;
  j["length_penalty"] = route.length_penalty;
  if (route.src_vocab_hash)
    j["src_vocab_hash"] = std::to_string(route.src_vocab_hash);
  if (route.tgt_vocab_hash)
    j["tgt_vocab_hash"] = std::to_string(route.tgt_vocab_hash);
  return j;
}

// splitmix64; mixes the run seed with an example id so every example gets
// its own reproducible stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

inline EnsembleSpec parse_ensemble_spec(const nlohmann::json& j) {
  if (!j.is_object())
    throw Error(ErrorCategory::ConfigError,
                "ensemble spec must be a JSON object");
  EnsembleSpec spec;
  if (j.contains("routes")) {
    const auto& routes = j.at("routes");
    if (!routes.is_object())
      throw Error(ErrorCategory::ConfigError, "\"routes\" must be an object");
    for (auto it = routes.begin(); it != routes.end(); ++it) {
      FileType type = file_type_from_string(it.key());
      spec.routes[type] = detail::route_from_json(it.value(), it.key());
    }
  }
  if (j.contains("fallback"))
    spec.fallback = detail::route_from_json(j.at("fallback"), "fallback");
  validate_spec(spec);
  return spec;
}

inline EnsembleSpec load_ensemble_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCategory::IoError, "cannot read ensemble spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::ConfigError,
                "bad ensemble spec " + path + ": " + e.what());
  }
  return parse_ensemble_spec(j);
}

inline void save_ensemble_spec(const EnsembleSpec& spec,
                               const std::string& path) {
  validate_spec(spec);
  nlohmann::json j;
  j["routes"] = nlohmann::json::object();
  for (const auto& [type, route] : spec.routes)
    j["routes"][to_string(type)] = detail::route_to_json(route);
  if (spec.fallback) j["fallback"] = detail::route_to_json(*spec.fallback);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCategory::IoError, "cannot write ensemble spec " + path);
  out << j.dump(2) << '\n';
}

struct EnsemblePrediction {
  std::vector<Tokens> messages;  // one per input commit, input order
  std::vector<double> seconds;   // per-example decode wall time
};

// Decodes every example through its route. All checkpoints load and verify
// up front, so a vocabulary mismatch is fatal before the first prediction.
inline EnsemblePrediction predict_ensemble(const EnsembleSpec& spec,
                                           const CorpusSplit& test,
                                           std::uint64_t seed) {
  validate_spec(spec);

  std::map<std::string, Checkpoint> loaded;
  auto preload = [&](const RouteSpec& route, const std::string& label) {
    if (!loaded.count(route.checkpoint))
      loaded.emplace(route.checkpoint, load_checkpoint(route.checkpoint));
    const Checkpoint& ckpt = loaded.at(route.checkpoint);
    if (route.src_vocab_hash &&
        route.src_vocab_hash != ckpt.config.src_vocab.hash())
      throw Error(ErrorCategory::CheckpointMismatch,
                  "route " + label + ": checkpoint " + route.checkpoint +
                      " source vocabulary hash differs from the route's "
                      "corpus");
    if (route.tgt_vocab_hash &&
        route.tgt_vocab_hash != ckpt.config.tgt_vocab.hash())
      throw Error(ErrorCategory::CheckpointMismatch,
                  "route " + label + ": checkpoint " + route.checkpoint +
                      " target vocabulary hash differs from the route's "
                      "corpus");
  };
  for (const auto& [type, route] : spec.routes) preload(route, to_string(type));
  if (spec.fallback) preload(*spec.fallback, "fallback");

  EnsemblePrediction out;
  out.messages.reserve(test.size());
  out.seconds.reserve(test.size());
  for (const Commit& commit : test.commits) {
    const RouteSpec& route = route_example(spec, commit);
    const Checkpoint& ckpt = loaded.at(route.checkpoint);
    auto start = std::chrono::steady_clock::now();
    Tokens message;
    if (route.uses_sketch) {
      SketchExample sk = encode_sketch(commit);
      Tokens sketched = beam_decode(ckpt, sk.sketched_diff, route.beam_width,
                                    route.length_penalty);
      message = decode_sketch(
          sketched, sk.dictionary, sk.dictionary.names(),
          detail::mix_seed(seed, static_cast<std::uint64_t>(commit.id)));
    } else {
      message = beam_decode(ckpt, commit.diff_tokens, route.beam_width,
                            route.length_penalty);
    }
    auto stop = std::chrono::steady_clock::now();
    out.messages.push_back(std::move(message));
    out.seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return out;
}

struct ExperimentResult {
  std::string run_id;
  BleuReport bleu;
  std::size_t examples = 0;
  double total_seconds = 0.0;      // whole run: load + decode + scoring
  double mean_decode_seconds = 0.0;  // mean per-example decode time
  std::vector<Tokens> predictions;
};

// Experiment config JSON:
//   run_id     name stamped on the report (default "run")
//   test_diff  path to the diff side of the test split
//   test_msg   path to the message side
//   ensemble   path to an ensemble spec file, or the spec object inline
//   seed       decode seed (default 0)
//   report_out optional path; when set the scored report is written there
inline ExperimentResult run_experiment(const std::string& config_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in)
    throw Error(ErrorCategory::IoError,
                "cannot read experiment config " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::ConfigError,
                "bad experiment config " + config_path + ": " + e.what());
  }
  if (!j.contains("test_diff") || !j.contains("test_msg"))
    throw Error(ErrorCategory::ConfigError,
                "experiment config needs test_diff and test_msg paths");
  if (!j.contains("ensemble"))
    throw Error(ErrorCategory::ConfigError,
                "experiment config needs an ensemble spec");

  auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.run_id = j.value("run_id", std::string("run"));
  std::uint64_t seed = j.value("seed", std::uint64_t{0});

  CorpusSplit test =
      load_parallel_corpus(j.at("test_diff").get<std::string>(),
                           j.at("test_msg").get<std::string>(), "test");
  if (test.size() == 0)
    throw Error(ErrorCategory::EmptyCorpus, "test split is empty");

  EnsembleSpec spec;
  if (j.at("ensemble").is_string())
    spec = load_ensemble_spec(j.at("ensemble").get<std::string>());
  else
    spec = parse_ensemble_spec(j.at("ensemble"));

  EnsemblePrediction pred = predict_ensemble(spec, test, seed);

  std::vector<Tokens> references;
  std::vector<FileType> types;
  references.reserve(test.size());
  types.reserve(test.size());
  for (const Commit& c : test.commits) {
    references.push_back(c.msg_tokens);
    types.push_back(c.file_type);
  }
  result.bleu = per_type_bleu(pred.messages, references, types);
  result.examples = test.size();
  double decode_total = 0.0;
  for (double s : pred.seconds) decode_total += s;
  result.mean_decode_seconds = decode_total / static_cast<double>(test.size());
  result.predictions = std::move(pred.messages);

  if (j.contains("report_out"))
    save_report(to_saved_report(result.bleu, result.run_id, result.examples),
                j.at("report_out").get<std::string>());

  auto stop = std::chrono::steady_clock::now();
  result.total_seconds = std::chrono::duration<double>(stop - start).count();
  return result;
}

}  // namespace commitgen
