#pragma once

// Training loop for the recurrent translator: token-level cross-entropy,
// Adam, sequential batches over a seeded shuffle, periodic validation with
// best-checkpoint retention, and a central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "commitgen/corpus.hpp"
#include "commitgen/nmt.hpp"

namespace commitgen {

struct EncodedExample {
  std::vector<int> src;
  std::vector<int> tgt;  // message ids without BOS/EOS
};

inline std::vector<int> encode_tokens(const Vocabulary& vocab,
                                      const Tokens& tokens, int max_len) {
  std::vector<int> out;
  const std::size_t n =
      std::min(tokens.size(), static_cast<std::size_t>(max_len));
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab.encode(tokens[i]));
  return out;
}

inline EncodedExample encode_example(const ModelConfig& c, const Tokens& diff,
                                     const Tokens& msg) {
  return {encode_tokens(c.src_vocab, diff, c.max_src_len),
          encode_tokens(c.tgt_vocab, msg, c.max_tgt_len)};
}

inline std::vector<EncodedExample> encode_corpus(const ModelConfig& c,
                                                 const CorpusSplit& split) {
  std::vector<EncodedExample> out;
  out.reserve(split.commits.size());
  for (const Commit& commit : split.commits)
    out.push_back(encode_example(c, commit.diff_tokens, commit.msg_tokens));
  return out;
}

struct TrainOptions {
  std::int64_t steps = 5000;
  int batch_size = 32;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t eval_every = 100;
  int patience = 10;  // evaluations without improvement before stopping
};

struct EvalPoint {
  std::int64_t step;
  double valid_loss;
};

struct TrainLog {
  std::vector<EvalPoint> evals;
  std::int64_t best_step = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

namespace detail {

// Teacher-forced labels: the message followed by the end marker.
inline std::vector<int> with_eos(const std::vector<int>& tgt) {
  std::vector<int> labels = tgt;
  labels.push_back(Vocabulary::kEos);
  return labels;
}

inline double mean_valid_loss(const Checkpoint& ckpt,
                              const std::vector<EncodedExample>& valid) {
  double loss = 0.0;
  std::int64_t tokens = 0;
  for (const auto& ex : valid) {
    std::vector<int> labels = with_eos(ex.tgt);
    loss += sequence_loss(ckpt, ex.src, labels);
    tokens += static_cast<std::int64_t>(labels.size());
  }
  return tokens == 0 ? 0.0 : loss / static_cast<double>(tokens);
}

}  // namespace detail

inline Checkpoint train_model(const Checkpoint& start,
                              const std::vector<EncodedExample>& train_set,
                              const std::vector<EncodedExample>& valid_set,
                              const TrainOptions& opt,
                              TrainLog* log = nullptr) {
  if (train_set.empty())
    throw Error(ErrorCategory::EmptyCorpus, "training set is empty");
  if (opt.steps < 1)
    throw Error(ErrorCategory::ConfigError, "steps must be positive");
  if (opt.batch_size < 1)
    throw Error(ErrorCategory::ConfigError, "batch_size must be positive");
  if (opt.lr < 0.0)
    throw Error(ErrorCategory::ConfigError, "learning rate must be >= 0");
  if (opt.eval_every < 1)
    throw Error(ErrorCategory::ConfigError, "eval_every must be positive");

  Checkpoint ckpt = start;
  ParamTable grads = zero_like(ckpt.params);
  ParamTable m = zero_like(ckpt.params);
  ParamTable v = zero_like(ckpt.params);
  std::int64_t adam_t = 0;

  std::mt19937_64 rng(ckpt.config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  TrainLog local_log;
  TrainLog& tl = log ? *log : local_log;
  ParamTable best_params;
  std::int64_t evals_since_best = 0;

  auto evaluate = [&](std::int64_t step) {
    if (valid_set.empty()) return;
    const double vl = detail::mean_valid_loss(ckpt, valid_set);
    tl.evals.push_back({step, vl});
    if (vl < tl.best_valid) {
      tl.best_valid = vl;
      tl.best_step = step;
      best_params = ckpt.params;
      evals_since_best = 0;
    } else {
      ++evals_since_best;
    }
  };

  evaluate(0);
  std::int64_t step = 0;
  for (; step < opt.steps; ++step) {
    double batch_loss = 0.0;
    std::int64_t batch_tokens = 0;
    for (auto& [name, g] : grads) g.setZero();
    for (int b = 0; b < opt.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const EncodedExample& ex = train_set[order[cursor++]];
      std::vector<int> labels = detail::with_eos(ex.tgt);
      batch_loss += loss_and_gradients(ckpt, ex.src, labels, &grads);
      batch_tokens += static_cast<std::int64_t>(labels.size());
    }
    const double mean_loss =
        batch_loss / static_cast<double>(std::max<std::int64_t>(1, batch_tokens));
    if (!std::isfinite(mean_loss))
      throw Error(ErrorCategory::NonFiniteLoss,
                  "batch " + std::to_string(step) + " produced loss " +
                      std::to_string(mean_loss));

    ++adam_t;
    const double scale = 1.0 / static_cast<double>(std::max<std::int64_t>(1, batch_tokens));
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(adam_t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(adam_t));
    for (auto& [name, theta] : ckpt.params) {
      const Matrix g = grads.at(name) * scale;
      Matrix& mm = m.at(name);
      Matrix& vv = v.at(name);
      mm = opt.beta1 * mm + (1.0 - opt.beta1) * g;
      vv = opt.beta2 * vv + (1.0 - opt.beta2) * g.cwiseProduct(g);
      theta.array() -= opt.lr * (mm.array() / bc1) /
                       ((vv.array() / bc2).sqrt() + opt.adam_eps);
    }

    if ((step + 1) % opt.eval_every == 0) {
      evaluate(step + 1);
      if (evals_since_best > opt.patience) {
        tl.stopped_early = true;
        ++step;
        break;
      }
    }
  }
  if (!valid_set.empty() &&
      (tl.evals.empty() || tl.evals.back().step != step))
    evaluate(step);

  if (!best_params.empty()) {
    ckpt.params = std::move(best_params);
    ckpt.step = tl.best_step;
  } else {
    ckpt.step = step;
  }
  std::ostringstream rng_out;
  rng_out << rng;
  ckpt.rng_state = rng_out.str();
  return ckpt;
}

// Central finite differences over every parameter coefficient. The returned
// figure uses |a - n| / max(1, |a|, |n|), relative above unit scale and
// absolute below it, so zero-gradient coefficients are not swamped by
// cancellation noise in the difference quotient.
inline double gradient_check(const Checkpoint& ckpt, const std::vector<int>& src,
                             const std::vector<int>& tgt,
                             double epsilon = 1e-5) {
  ParamTable analytic = zero_like(ckpt.params);
  loss_and_gradients(ckpt, src, tgt, &analytic);

  Checkpoint probe = ckpt;
  double worst = 0.0;
  for (auto& [name, theta] : probe.params) {
    const Matrix& a = analytic.at(name);
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
      for (Eigen::Index j = 0; j < theta.cols(); ++j) {
        const double saved = theta(i, j);
        theta(i, j) = saved + epsilon;
        const double up = sequence_loss(probe, src, tgt);
        theta(i, j) = saved - epsilon;
        const double down = sequence_loss(probe, src, tgt);
        theta(i, j) = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom =
            std::max({1.0, std::abs(a(i, j)), std::abs(numeric)});
        worst = std::max(worst, std::abs(a(i, j) - numeric) / denom);
      }
    }
  }
  return worst;
}

}  // namespace commitgen
