#pragma once

// Greedy and beam-search decoding. The beam core is generic over a state
// type and an expansion function, so the search itself can be exercised with
// hand-built probability tables; the NMT stepper plugs the trained model in
// and extends the candidate set with copy targets, letting source surfaces
// outside the target vocabulary be emitted directly.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "commitgen/corpus.hpp"
#include "commitgen/nmt.hpp"

namespace commitgen {

namespace detail {

template <typename State>
struct BeamCandidate {
  std::string token;
  bool is_eos = false;
  double log_prob = 0.0;
  State state;
};

// Shared tie order: better log-prob first; on exact ties stopping beats
// continuing, then the smaller token string. Greedy and width-1 beam must
// pick the same candidate, so both use this.
template <typename State>
bool step_candidate_better(const BeamCandidate<State>& a,
                           const BeamCandidate<State>& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.is_eos != b.is_eos) return a.is_eos;
  return a.token < b.token;
}

inline double hypothesis_score(double log_prob, std::size_t length,
                               double length_penalty) {
  if (length_penalty == 0.0) return log_prob;
  return log_prob /
         std::pow(static_cast<double>(std::max<std::size_t>(1, length)),
                  length_penalty);
}

}  // namespace detail

// Standard beam expansion: at every step all candidates of all active
// hypotheses compete for `width` slots by accumulated log probability;
// candidates that took the end token retire to the finished pool. Hypotheses
// still active at max_len finish without an end-token factor. Finished
// hypotheses are scored by log_prob / length^penalty (penalty 0 = raw
// log_prob); ties go to the shorter output, then lexicographic.
template <typename State, typename Expand>
Tokens beam_search_core(const State& init, Expand&& expand, int width,
                        double length_penalty, int max_len) {
  if (width < 1)
    throw Error(ErrorCategory::ConfigError, "beam width must be >= 1");
  if (length_penalty < 0.0)
    throw Error(ErrorCategory::ConfigError, "length penalty must be >= 0");

  struct Hyp {
    Tokens tokens;
    double log_prob = 0.0;
    State state;
  };
  struct Done {
    Tokens tokens;
    double log_prob = 0.0;
  };

  std::vector<Hyp> active{{Tokens{}, 0.0, init}};
  std::vector<Done> finished;

  for (int step = 0; step < max_len && !active.empty(); ++step) {
    struct Cand {
      Tokens tokens;  // tokens after taking the candidate (EOS not appended)
      double log_prob;
      bool is_eos;
      State state;
    };
    std::vector<Cand> pool;
    for (Hyp& hyp : active) {
      for (auto& c : expand(hyp.state)) {
        Cand cand;
        cand.tokens = hyp.tokens;
        if (!c.is_eos) cand.tokens.push_back(c.token);
        cand.log_prob = hyp.log_prob + c.log_prob;
        cand.is_eos = c.is_eos;
        cand.state = std::move(c.state);
        pool.push_back(std::move(cand));
      }
    }
    const std::size_t keep =
        std::min<std::size_t>(static_cast<std::size_t>(width), pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep),
                      pool.end(), [](const Cand& a, const Cand& b) {
                        if (a.log_prob != b.log_prob)
                          return a.log_prob > b.log_prob;
                        if (a.tokens != b.tokens) return a.tokens < b.tokens;
                        return a.is_eos && !b.is_eos;
                      });
    std::vector<Hyp> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Cand& cand = pool[i];
      if (cand.is_eos)
        finished.push_back({std::move(cand.tokens), cand.log_prob});
      else
        next.push_back(
            {std::move(cand.tokens), cand.log_prob, std::move(cand.state)});
    }
    active = std::move(next);
  }
  for (Hyp& hyp : active)
    finished.push_back({std::move(hyp.tokens), hyp.log_prob});

  const Done* best = nullptr;
  double best_score = 0.0;
  for (const Done& d : finished) {
    const double score =
        detail::hypothesis_score(d.log_prob, d.tokens.size(), length_penalty);
    if (!best || score > best_score ||
        (score == best_score && (d.tokens.size() < best->tokens.size() ||
                                 (d.tokens.size() == best->tokens.size() &&
                                  d.tokens < best->tokens)))) {
      best = &d;
      best_score = score;
    }
  }
  return best ? best->tokens : Tokens{};
}

// Encodes the source once and exposes one decoder step at a time. Decoding
// against an immutable checkpoint is concurrency-safe; each session is
// independent.
class DecodeSession {
 public:
  struct State {
    std::vector<Vector> h;  // recurrent state per decoder layer
    Vector query;           // previous top-layer output
    int prev_id = Vocabulary::kBos;
  };

  DecodeSession(const Checkpoint& ckpt, const Tokens& src_tokens)
      : ckpt_(&ckpt) {
    const ModelConfig& c = ckpt.config;
    if (src_tokens.empty())
      throw Error(ErrorCategory::ConfigError, "source sequence is empty");
    src_ids_ = encode_surface(c.src_vocab, src_tokens, c.max_src_len);
    enc_ = detail::encode_source(ckpt, src_ids_);
    if (c.copy_enabled) {
      copy_map_ = detail::build_copy_map(c, src_ids_);
      surfaces_.assign(src_tokens.begin(),
                       src_tokens.begin() +
                           static_cast<std::ptrdiff_t>(src_ids_.size()));
    }
  }

  State initial() const {
    State s;
    s.h.assign(static_cast<std::size_t>(ckpt_->config.dec_layers),
               Vector::Zero(ckpt_->config.hidden_dim));
    s.query = Vector::Zero(ckpt_->config.hidden_dim);
    s.prev_id = Vocabulary::kBos;
    return s;
  }

  // Extended-vocabulary candidates: every target id, plus one bucket per
  // distinct out-of-vocabulary source surface carrying its copy mass.
  std::vector<detail::BeamCandidate<State>> expand(const State& state) const {
    const ModelConfig& c = ckpt_->config;
    std::vector<Vector> h = state.h;
    detail::DecStepTrace st = detail::decode_step(
        *ckpt_, enc_, copy_map_, state.prev_id, state.query, h, nullptr);

    State base;
    base.h = std::move(h);
    base.query = st.layer_out.back();

    Vector p = (1.0 - (c.copy_enabled ? st.gate : 0.0)) * st.p_gen;
    std::map<std::string, double> oov;
    if (c.copy_enabled) {
      for (std::size_t j = 0; j < copy_map_.size(); ++j) {
        const double mass = st.gate * st.alpha[static_cast<Eigen::Index>(j)];
        if (copy_map_[j] == Vocabulary::kUnk)
          oov[surfaces_[j]] += mass;
        else
          p[copy_map_[j]] += mass;
      }
    }

    std::vector<detail::BeamCandidate<State>> out;
    out.reserve(static_cast<std::size_t>(p.size()) + oov.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      detail::BeamCandidate<State> cand;
      cand.token = c.tgt_vocab.surface(i);
      cand.is_eos = i == Vocabulary::kEos;
      cand.log_prob = std::log(p[i]);
      cand.state = base;
      cand.state.prev_id = static_cast<int>(i);
      out.push_back(std::move(cand));
    }
    for (const auto& [surface, mass] : oov) {
      detail::BeamCandidate<State> cand;
      cand.token = surface;
      cand.log_prob = std::log(mass);
      cand.state = base;
      cand.state.prev_id = Vocabulary::kUnk;
      out.push_back(std::move(cand));
    }
    return out;
  }

  const std::vector<int>& src_ids() const { return src_ids_; }

 private:
  static std::vector<int> encode_surface(const Vocabulary& v,
                                         const Tokens& tokens, int max_len) {
    std::vector<int> ids;
    const std::size_t n =
        std::min(tokens.size(), static_cast<std::size_t>(max_len));
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(v.encode(tokens[i]));
    return ids;
  }

  const Checkpoint* ckpt_;
  std::vector<int> src_ids_;
  detail::EncoderTrace enc_;
  std::vector<int> copy_map_;
  std::vector<std::string> surfaces_;
};

// Argmax per step until the end token or max_tgt_len. Copy-produced source
// surfaces are emitted verbatim even when they are outside the target
// vocabulary.
inline Tokens greedy_decode(const Checkpoint& ckpt, const Tokens& src_tokens) {
  DecodeSession session(ckpt, src_tokens);
  DecodeSession::State state = session.initial();
  Tokens out;
  for (int t = 0; t < ckpt.config.max_tgt_len; ++t) {
    auto cands = session.expand(state);
    auto best = std::min_element(
        cands.begin(), cands.end(),
        detail::step_candidate_better<DecodeSession::State>);
    if (best->is_eos) break;
    out.push_back(best->token);
    state = std::move(best->state);
  }
  return out;
}

inline Tokens beam_decode(const Checkpoint& ckpt, const Tokens& src_tokens,
                          int width, double length_penalty) {
  DecodeSession session(ckpt, src_tokens);
  return beam_search_core(
      session.initial(),
      [&session](const DecodeSession::State& s) { return session.expand(s); },
      width, length_penalty, ckpt.config.max_tgt_len);
}

}  // namespace commitgen
