// commitgen: one binary covering the whole workflow — corpus preparation,
// per-type splitting, sketching, training, decoding, retrieval, scoring and
// full experiment runs. Every failure exits nonzero with a single
// "error: <Category>: <detail>" line on stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commitgen/corpus.hpp"
#include "commitgen/error.hpp"
#include "commitgen/eval.hpp"
#include "commitgen/nmt.hpp"
#include "commitgen/nmt_decode.hpp"
#include "commitgen/nmt_train.hpp"
#include "commitgen/nngen.hpp"
#include "commitgen/pipeline.hpp"
#include "commitgen/sketch.hpp"

namespace {

using namespace commitgen;

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

void write_token_lines(const std::string& path,
                       const std::vector<Tokens>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::IoError, "cannot write " + path);
  for (const Tokens& row : rows) out << join_tokens(row) << '\n';
}

std::vector<Tokens> read_token_lines(const std::string& path) {
  std::vector<Tokens> rows;
  for (const std::string& line : detail::read_lines(path))
    rows.push_back(detail::split_tokens(line));
  return rows;
}

void write_split(const CorpusSplit& split, const std::string& prefix) {
  std::vector<Tokens> diffs, msgs;
  diffs.reserve(split.size());
  msgs.reserve(split.size());
  for (const Commit& c : split.commits) {
    diffs.push_back(c.diff_tokens);
    msgs.push_back(c.msg_tokens);
  }
  write_token_lines(prefix + ".diff", diffs);
  write_token_lines(prefix + ".msg", msgs);
}

// ---- prepare --------------------------------------------------------------

int cmd_prepare(const std::string& diff_path, const std::string& msg_path,
                const std::string& out_prefix, std::int64_t min_count,
                std::size_t max_diff, std::size_t max_msg) {
  CorpusSplit split = load_parallel_corpus(diff_path, msg_path, "train");
  for (Commit& c : split.commits)
    c = truncate_sequences(std::move(c), max_diff, max_msg);

  std::map<FileType, std::size_t> per_type;
  for (const Commit& c : split.commits) ++per_type[c.file_type];

  Vocabulary diff_vocab = build_vocabulary(split, Side::Diff, min_count);
  Vocabulary msg_vocab = build_vocabulary(split, Side::Msg, min_count);

  if (!out_prefix.empty()) {
    write_split(split, out_prefix);
    diff_vocab.save(out_prefix + ".vocab.diff");
    msg_vocab.save(out_prefix + ".vocab.msg");
  }

  std::cout << "examples: " << split.size() << '\n'
            << "skipped empty: " << split.stats.skipped_empty << '\n'
            << "missing headers: " << split.stats.missing_header << '\n'
            << "diff vocabulary: " << diff_vocab.size() << " (hash "
            << diff_vocab.hash() << ")\n"
            << "msg vocabulary: " << msg_vocab.size() << " (hash "
            << msg_vocab.hash() << ")\n";
  for (const auto& [type, n] : per_type)
    std::cout << "type " << to_string(type) << ": " << n << '\n';
  return 0;
}

// ---- split ----------------------------------------------------------------

int cmd_split(const std::string& diff_path, const std::string& msg_path,
              const std::string& scenario_name, const std::string& out_dir) {
  SplitScenario scenario;
  if (scenario_name == "top5")
    scenario = SplitScenario::Top5;
  else if (scenario_name == "top9")
    scenario = SplitScenario::Top9;
  else
    throw Error(ErrorCategory::ConfigError,
                "scenario must be top5 or top9, got " + scenario_name);

  CorpusSplit split = load_parallel_corpus(diff_path, msg_path, "corpus");
  std::map<FileType, CorpusSplit> parts = split_by_file_type(split, scenario);

  std::filesystem::create_directories(out_dir);
  std::size_t total = 0;
  for (const auto& [type, part] : parts) {
    if (part.size() == 0) continue;
    write_split(part, out_dir + "/" + to_string(type));
    std::cout << to_string(type) << ": " << part.size() << '\n';
    total += part.size();
  }
  std::cout << "total: " << total << '\n';
  return 0;
}

// ---- sketch ---------------------------------------------------------------

int cmd_sketch_encode(const std::string& diff_path, const std::string& msg_path,
                      const std::string& out_prefix, bool unindexed) {
  CorpusSplit split = load_parallel_corpus(diff_path, msg_path, "sketch");
  std::vector<Tokens> diffs, msgs;
  std::vector<PlaceholderDictionary> dicts;
  for (const Commit& c : split.commits) {
    SketchExample ex = encode_sketch(c, !unindexed);
    diffs.push_back(std::move(ex.sketched_diff));
    msgs.push_back(std::move(ex.sketched_msg));
    dicts.push_back(std::move(ex.dictionary));
  }
  write_token_lines(out_prefix + ".diff", diffs);
  write_token_lines(out_prefix + ".msg", msgs);
  save_dictionaries(dicts, out_prefix + ".dict");
  std::cout << "sketched " << split.size() << " examples\n";
  return 0;
}

int cmd_sketch_decode(const std::string& pred_path, const std::string& dict_path,
                      const std::string& out_path, std::uint64_t seed) {
  std::vector<Tokens> preds = read_token_lines(pred_path);
  std::map<int, PlaceholderDictionary> dicts = load_dictionaries(dict_path);
  const PlaceholderDictionary empty;
  std::vector<Tokens> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto it = dicts.find(static_cast<int>(i));
    const PlaceholderDictionary& dict = it == dicts.end() ? empty : it->second;
    out.push_back(decode_sketch(preds[i], dict, dict.names(),
                                detail::mix_seed(seed, i)));
  }
  write_token_lines(out_path, out);
  std::cout << "decoded " << preds.size() << " messages\n";
  return 0;
}

// ---- train ----------------------------------------------------------------

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.enc_layers = j.value("enc_layers", cfg.enc_layers);
  cfg.dec_layers = j.value("dec_layers", cfg.dec_layers);
  cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
  cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
  cfg.residual = j.value("residual", cfg.residual);
  cfg.copy_enabled = j.value("copy", cfg.copy_enabled);
  cfg.bidirectional_encoder = j.value("bidirectional", cfg.bidirectional_encoder);
  cfg.max_src_len = j.value("max_src_len", cfg.max_src_len);
  cfg.max_tgt_len = j.value("max_tgt_len", cfg.max_tgt_len);
  return cfg;
}

TrainOptions train_options_from_json(const nlohmann::json& j) {
  TrainOptions opt;
  if (!j.contains("train")) return opt;
  const auto& t = j.at("train");
  opt.steps = t.value("steps", opt.steps);
  opt.batch_size = t.value("batch_size", opt.batch_size);
  opt.lr = t.value("lr", opt.lr);
  opt.beta1 = t.value("beta1", opt.beta1);
  opt.beta2 = t.value("beta2", opt.beta2);
  opt.adam_eps = t.value("adam_eps", opt.adam_eps);
  opt.eval_every = t.value("eval_every", opt.eval_every);
  opt.patience = t.value("patience", opt.patience);
  return opt;
}

nlohmann::json load_json(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCategory::IoError,
                std::string("cannot read ") + what + " " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::ConfigError,
                std::string("bad ") + what + " " + path + ": " + e.what());
  }
  return j;
}

int cmd_train(const std::string& config_path, const std::string& train_prefix,
              const std::string& valid_prefix, const std::string& out_path,
              std::uint64_t seed) {
  nlohmann::json j = load_json(config_path, "model config");
  ModelConfig cfg = model_config_from_json(j);
  cfg.seed = seed;

  CorpusSplit train = load_parallel_corpus(train_prefix + ".diff",
                                           train_prefix + ".msg", "train");
  CorpusSplit valid = load_parallel_corpus(valid_prefix + ".diff",
                                           valid_prefix + ".msg", "valid");
  std::int64_t min_count = j.value("min_count", 1);
  cfg.src_vocab = build_vocabulary(train, Side::Diff, min_count);
  cfg.tgt_vocab = build_vocabulary(train, Side::Msg, min_count);

  Checkpoint start = init_model(cfg);
  std::cout << "parameters: " << param_count(start) << '\n'
            << "train examples: " << train.size() << '\n'
            << "valid examples: " << valid.size() << '\n';

  TrainOptions opt = train_options_from_json(j);
  TrainLog log;
  Checkpoint best = train_model(start, encode_corpus(cfg, train),
                                encode_corpus(cfg, valid), opt, &log);
  for (const EvalPoint& p : log.evals)
    std::cout << "step " << p.step << " valid loss " << p.valid_loss << '\n';
  std::cout << "best step: " << log.best_step << " (valid loss "
            << log.best_valid << ")\n";
  if (log.stopped_early) std::cout << "stopped early\n";

  save_checkpoint(best, out_path);
  std::cout << "saved " << out_path << '\n';
  return 0;
}

// ---- predict --------------------------------------------------------------

int cmd_predict(const std::string& ckpt_path, const std::string& src_path,
                int beam, double len_penalty, const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  std::vector<Tokens> srcs = read_token_lines(src_path);
  std::vector<Tokens> out;
  out.reserve(srcs.size());
  for (const Tokens& src : srcs)
    out.push_back(beam_decode(ckpt, src, beam, len_penalty));
  write_token_lines(out_path, out);
  std::cout << "decoded " << srcs.size() << " inputs\n";
  return 0;
}

// ---- nngen ----------------------------------------------------------------

int cmd_nngen(const std::string& train_diff, const std::string& train_msg,
              const std::string& test_diff, const std::string& out_path,
              std::size_t k, bool idf) {
  CorpusSplit train = load_parallel_corpus(train_diff, train_msg, "train");
  BowIndex index = build_index(train, idf);
  std::vector<Tokens> queries = read_token_lines(test_diff);
  std::vector<Tokens> out;
  out.reserve(queries.size());
  std::size_t degenerate = 0;
  for (const Tokens& q : queries) {
    NNGenResult r = generate_nngen(index, q, k);
    if (r.degenerate) ++degenerate;
    out.push_back(std::move(r.message));
  }
  write_token_lines(out_path, out);
  std::cout << "retrieved " << queries.size() << " messages";
  if (degenerate) std::cout << " (" << degenerate << " degenerate)";
  std::cout << '\n';
  return 0;
}

// ---- evaluate / aggregate ---------------------------------------------------

int cmd_evaluate(const std::string& hyp_path, const std::string& ref_path,
                 const std::string& diff_path, const std::string& run_id,
                 const std::string& out_path) {
  std::vector<Tokens> hyps = read_token_lines(hyp_path);
  std::vector<Tokens> refs = read_token_lines(ref_path);
  BleuReport report;
  if (!diff_path.empty()) {
    std::vector<FileType> types;
    for (const Tokens& diff : read_token_lines(diff_path))
      types.push_back(classify_file_type(diff, nullptr));
    report = per_type_bleu(hyps, refs, types);
  } else {
    report = corpus_bleu(hyps, refs);
  }
  SavedReport saved = to_saved_report(report, run_id, hyps.size());
  std::cout << format_report(saved);
  if (!out_path.empty()) save_report(saved, out_path);
  return 0;
}

int cmd_aggregate(const std::vector<std::string>& inputs,
                  const std::string& out_path) {
  std::vector<SavedReport> runs;
  runs.reserve(inputs.size());
  for (const std::string& path : inputs) runs.push_back(load_report(path));
  SavedReport mean = aggregate_reports(runs);
  std::cout << format_report(mean);
  if (!out_path.empty()) save_report(mean, out_path);
  return 0;
}

// ---- run-experiment ---------------------------------------------------------

int cmd_run_experiment(const std::string& config_path) {
  ExperimentResult res = run_experiment(config_path);
  std::cout << format_report(
      to_saved_report(res.bleu, res.run_id, res.examples));
  std::cout << "examples: " << res.examples << '\n'
            << "mean decode seconds/example: " << res.mean_decode_seconds
            << '\n'
            << "total seconds: " << res.total_seconds << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"commit message generation toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // prepare
  std::string p_diff, p_msg, p_out;
  std::int64_t p_min_count = 1;
  std::size_t p_max_diff = 100, p_max_msg = 30;
  auto* prepare = app.add_subcommand(
      "prepare", "load a parallel corpus, truncate, build vocabularies");
  prepare->add_option("--diff", p_diff, "diff side file")->required();
  prepare->add_option("--msg", p_msg, "message side file")->required();
  prepare->add_option("--out-prefix", p_out,
                      "write <prefix>.{diff,msg,vocab.diff,vocab.msg}");
  prepare->add_option("--min-count", p_min_count, "vocabulary threshold");
  prepare->add_option("--max-diff", p_max_diff, "diff truncation length");
  prepare->add_option("--max-msg", p_max_msg, "message truncation length");
  prepare->callback([&] {
    rc = cmd_prepare(p_diff, p_msg, p_out, p_min_count, p_max_diff, p_max_msg);
  });

  // split
  std::string s_diff, s_msg, s_scenario = "top9", s_out;
  auto* split = app.add_subcommand("split", "partition a corpus by file type");
  split->add_option("--diff", s_diff, "diff side file")->required();
  split->add_option("--msg", s_msg, "message side file")->required();
  split->add_option("--scenario", s_scenario, "top5 or top9");
  split->add_option("--out-dir", s_out, "output directory")->required();
  split->callback([&] { rc = cmd_split(s_diff, s_msg, s_scenario, s_out); });

  // sketch encode/decode
  auto* sketch = app.add_subcommand("sketch", "identifier sketching");
  sketch->require_subcommand(1);
  std::string se_diff, se_msg, se_out;
  bool se_unindexed = false;
  std::uint64_t se_seed = 0;
  auto* enc = sketch->add_subcommand("encode", "sketch a parallel corpus");
  enc->add_option("--diff", se_diff, "diff side file")->required();
  enc->add_option("--msg", se_msg, "message side file")->required();
  enc->add_option("--out-prefix", se_out, "write <prefix>.{diff,msg,dict}")
      ->required();
  enc->add_flag("--unindexed", se_unindexed,
                "one shared placeholder per identifier kind");
  enc->add_option("--seed", se_seed, "accepted for interface symmetry");
  enc->callback(
      [&] { rc = cmd_sketch_encode(se_diff, se_msg, se_out, se_unindexed); });
  std::string sd_pred, sd_dict, sd_out;
  std::uint64_t sd_seed = 0;
  auto* dec = sketch->add_subcommand("decode", "restore identifiers");
  dec->add_option("--pred", sd_pred, "predicted sketched messages")->required();
  dec->add_option("--dict", sd_dict, "dictionary sidecar")->required();
  dec->add_option("--out", sd_out, "restored messages")->required();
  dec->add_option("--seed", sd_seed, "fallback sampling seed");
  dec->callback(
      [&] { rc = cmd_sketch_decode(sd_pred, sd_dict, sd_out, sd_seed); });

  // train
  std::string t_config, t_train, t_valid, t_out;
  std::uint64_t t_seed = 0;
  auto* train = app.add_subcommand("train", "train a translation model");
  train->add_option("--config", t_config, "model config json")->required();
  train->add_option("--train-prefix", t_train, "train split prefix")
      ->required();
  train->add_option("--valid-prefix", t_valid, "validation split prefix")
      ->required();
  train->add_option("--out", t_out, "checkpoint output path")->required();
  train->add_option("--seed", t_seed, "initialisation and shuffle seed");
  train->callback(
      [&] { rc = cmd_train(t_config, t_train, t_valid, t_out, t_seed); });

  // predict
  std::string d_ckpt, d_src, d_out;
  int d_beam = 10;
  double d_penalty = 1.0;
  auto* predict = app.add_subcommand("predict", "decode a source file");
  predict->add_option("--ckpt", d_ckpt, "checkpoint path")->required();
  predict->add_option("--src", d_src, "source token file")->required();
  predict->add_option("--beam", d_beam, "beam width");
  predict->add_option("--len-penalty", d_penalty, "length penalty exponent");
  predict->add_option("--out", d_out, "predictions output")->required();
  predict->callback(
      [&] { rc = cmd_predict(d_ckpt, d_src, d_beam, d_penalty, d_out); });

  // nngen
  std::string n_tdiff, n_tmsg, n_qdiff, n_out;
  std::size_t n_k = 5;
  bool n_idf = false;
  auto* nngen = app.add_subcommand("nngen", "retrieval baseline");
  nngen->add_option("--train-diff", n_tdiff, "training diffs")->required();
  nngen->add_option("--train-msg", n_tmsg, "training messages")->required();
  nngen->add_option("--test-diff", n_qdiff, "query diffs")->required();
  nngen->add_option("--out", n_out, "predictions output")->required();
  nngen->add_option("--nn-k", n_k, "re-ranked candidate count");
  nngen->add_flag("--idf", n_idf, "idf-weighted bag of words");
  nngen->callback(
      [&] { rc = cmd_nngen(n_tdiff, n_tmsg, n_qdiff, n_out, n_k, n_idf); });

  // evaluate
  std::string e_hyp, e_ref, e_diff, e_run = "run", e_out;
  auto* evaluate = app.add_subcommand("evaluate", "score predictions");
  evaluate->add_option("--hyp", e_hyp, "hypothesis file")->required();
  evaluate->add_option("--ref", e_ref, "reference file")->required();
  evaluate->add_option("--diff", e_diff,
                       "diff file for per-type rows (optional)");
  evaluate->add_option("--run-id", e_run, "report run id");
  evaluate->add_option("--out", e_out, "write the report here");
  evaluate->callback(
      [&] { rc = cmd_evaluate(e_hyp, e_ref, e_diff, e_run, e_out); });

  // aggregate
  std::vector<std::string> a_inputs;
  std::string a_out;
  auto* aggregate = app.add_subcommand("aggregate", "average run reports");
  aggregate->add_option("reports", a_inputs, "report files")
      ->required()
      ->expected(-1);
  aggregate->add_option("--out", a_out, "write the mean report here");
  aggregate->callback([&] { rc = cmd_aggregate(a_inputs, a_out); });

  // run-experiment
  std::string x_config;
  auto* runx = app.add_subcommand("run-experiment",
                                  "route, decode and score a test split");
  runx->add_option("--config", x_config, "experiment config json")->required();
  runx->callback([&] { rc = cmd_run_experiment(x_config); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const commitgen::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
