#pragma once

// Recurrent encoder-decoder translator: stacked GRUs with additive attention,
// optional residual connections (second layer upward), and an optional
// scalar-gated copy mechanism that mixes the generation softmax with the
// attention distribution scattered over source tokens. Everything runs in
// double precision; gradients are derived by hand and validated against
// finite differences in the test suite.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "commitgen/error.hpp"
#include "commitgen/vocabulary.hpp"

namespace commitgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ParamTable = std::map<std::string, Matrix>;

struct ModelConfig {
  int enc_layers = 2;
  int dec_layers = 2;
  int embedding_dim = 64;
  int hidden_dim = 64;
  bool residual = true;
  bool copy_enabled = false;
  bool bidirectional_encoder = false;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  int max_src_len = 100;
  int max_tgt_len = 30;
  std::uint64_t seed = 0;
};

inline void validate_config(const ModelConfig& c) {
  auto positive = [](int v, const char* what) {
    if (v < 1)
      throw Error(ErrorCategory::ConfigError,
                  std::string(what) + " must be positive");
  };
  positive(c.enc_layers, "enc_layers");
  positive(c.dec_layers, "dec_layers");
  positive(c.embedding_dim, "embedding_dim");
  positive(c.hidden_dim, "hidden_dim");
  positive(c.max_src_len, "max_src_len");
  positive(c.max_tgt_len, "max_tgt_len");
  if (c.residual && (c.enc_layers < 2 || c.dec_layers < 2))
    throw Error(ErrorCategory::ConfigError,
                "residual connections need at least 2 encoder and 2 decoder "
                "layers");
  if (c.src_vocab.size() <= Vocabulary::kNumSpecials ||
      c.tgt_vocab.size() <= Vocabulary::kNumSpecials)
    throw Error(ErrorCategory::ConfigError, "vocabularies must be built");
}

struct Checkpoint {
  ModelConfig config;
  ParamTable params;
  std::int64_t step = 0;
  std::string rng_state;
};

namespace detail {

struct ParamSpec {
  std::string name;
  Eigen::Index rows, cols;
};

inline void push_gru_specs(std::vector<ParamSpec>& out, const std::string& pre,
                           int in_dim, int hidden) {
  for (const char* gate : {"z", "r", "h"}) {
    out.push_back({pre + "W" + gate, hidden, in_dim});
    out.push_back({pre + "U" + gate, hidden, hidden});
    out.push_back({pre + "b" + gate, hidden, 1});
  }
}

// Canonical parameter enumeration; initialization and checkpoint layout both
// follow this order.
inline std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  std::vector<ParamSpec> out;
  const int E = c.embedding_dim, H = c.hidden_dim;
  out.push_back({"src_embed", c.src_vocab.size(), E});
  out.push_back({"tgt_embed", c.tgt_vocab.size(), E});
  for (int l = 0; l < c.enc_layers; ++l) {
    const int in = l == 0 ? E : H;
    push_gru_specs(out, "enc" + std::to_string(l) + ".", in, H);
    if (c.bidirectional_encoder)
      push_gru_specs(out, "enc" + std::to_string(l) + ".bwd.", in, H);
  }
  for (int l = 0; l < c.dec_layers; ++l) {
    const int in = l == 0 ? E + H : H;
    push_gru_specs(out, "dec" + std::to_string(l) + ".", in, H);
  }
  out.push_back({"att.W", H, H});
  out.push_back({"att.U", H, H});
  out.push_back({"att.v", H, 1});
  out.push_back({"out.W", c.tgt_vocab.size(), 2 * H});
  out.push_back({"out.b", c.tgt_vocab.size(), 1});
  if (c.copy_enabled) {
    out.push_back({"copy.w", 2 * H, 1});
    out.push_back({"copy.b", 1, 1});
  }
  return out;
}

inline const Matrix& P(const ParamTable& t, const std::string& name) {
  auto it = t.find(name);
  if (it == t.end())
    throw Error(ErrorCategory::CheckpointMismatch,
                "missing parameter " + name);
  return it->second;
}

inline Vector sigmoid(const Vector& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

struct GruView {
  const Matrix &Wz, &Uz, &bz, &Wr, &Ur, &br, &Wh, &Uh, &bh;
};

inline GruView gru_view(const ParamTable& t, const std::string& pre) {
  return {P(t, pre + "Wz"), P(t, pre + "Uz"), P(t, pre + "bz"),
          P(t, pre + "Wr"), P(t, pre + "Ur"), P(t, pre + "br"),
          P(t, pre + "Wh"), P(t, pre + "Uh"), P(t, pre + "bh")};
}

struct GruGradView {
  Matrix &Wz, &Uz, &bz, &Wr, &Ur, &br, &Wh, &Uh, &bh;
};

inline GruGradView gru_grad_view(ParamTable& t, const std::string& pre) {
  return {t.at(pre + "Wz"), t.at(pre + "Uz"), t.at(pre + "bz"),
          t.at(pre + "Wr"), t.at(pre + "Ur"), t.at(pre + "br"),
          t.at(pre + "Wh"), t.at(pre + "Uh"), t.at(pre + "bh")};
}

struct GruStep {
  Vector x, h_prev, z, r, rh, c, h;
};

inline GruStep gru_forward(const GruView& p, const Vector& x,
                           const Vector& h_prev) {
  GruStep s;
  s.x = x;
  s.h_prev = h_prev;
  s.z = sigmoid(p.Wz * x + p.Uz * h_prev + p.bz.col(0));
  s.r = sigmoid(p.Wr * x + p.Ur * h_prev + p.br.col(0));
  s.rh = s.r.cwiseProduct(h_prev);
  s.c = (p.Wh * x + p.Uh * s.rh + p.bh.col(0)).array().tanh().matrix();
  s.h = (Vector::Ones(s.z.size()) - s.z).cwiseProduct(h_prev) +
        s.z.cwiseProduct(s.c);
  return s;
}

// Accumulates parameter gradients for one timestep; returns (dx, dh_prev).
inline std::pair<Vector, Vector> gru_backward(const GruView& p, GruGradView& g,
                                              const GruStep& s,
                                              const Vector& dh) {
  const Vector ones = Vector::Ones(dh.size());
  Vector dz = dh.cwiseProduct(s.c - s.h_prev);
  Vector dc = dh.cwiseProduct(s.z);
  Vector dh_prev = dh.cwiseProduct(ones - s.z);

  Vector dah = dc.cwiseProduct(ones - s.c.cwiseProduct(s.c));
  g.Wh += dah * s.x.transpose();
  g.Uh += dah * s.rh.transpose();
  g.bh.col(0) += dah;
  Vector drh = p.Uh.transpose() * dah;
  Vector dar =
      drh.cwiseProduct(s.h_prev).cwiseProduct(s.r).cwiseProduct(ones - s.r);
  dh_prev += drh.cwiseProduct(s.r);
  g.Wr += dar * s.x.transpose();
  g.Ur += dar * s.h_prev.transpose();
  g.br.col(0) += dar;
  Vector daz = dz.cwiseProduct(s.z).cwiseProduct(ones - s.z);
  g.Wz += daz * s.x.transpose();
  g.Uz += daz * s.h_prev.transpose();
  g.bz.col(0) += daz;

  Vector dx = p.Wz.transpose() * daz + p.Wr.transpose() * dar +
              p.Wh.transpose() * dah;
  dh_prev += p.Uz.transpose() * daz + p.Ur.transpose() * dar;
  return {std::move(dx), std::move(dh_prev)};
}

struct LayerTrace {
  Matrix input;   // in_dim x S
  Matrix output;  // H x S, after direction sum and residual
  std::vector<GruStep> fwd;
  std::vector<GruStep> bwd;  // indexed by source position; empty if unidir
};

struct EncoderTrace {
  std::vector<LayerTrace> layers;
  Matrix memory;  // top-layer output, H x S
  Matrix u_mem;   // att.U * memory, cached for every decoder step
};

struct DecStepTrace {
  int prev_id = -1;
  int label = -1;
  Vector query;
  Matrix tanh_terms;  // H x S
  Vector alpha;       // S
  Vector ctx;         // H
  std::vector<GruStep> layers;
  std::vector<Vector> layer_out;  // residual-stream outputs per layer
  Vector feat;                    // [top_out; ctx]
  Vector p_gen;
  Vector p_copy;  // over tgt vocab; empty when copy disabled
  double gate = 0.0;
  bool gate_forced = false;
  Vector p_out;
};

struct ForwardCaches {
  EncoderTrace enc;
  std::vector<DecStepTrace> steps;
  std::vector<int> copy_map;  // src position -> tgt id (kUnk when absent)
};

inline void check_ids(const std::vector<int>& ids, int vocab_size,
                      const char* side) {
  for (int id : ids)
    if (id < 0 || id >= vocab_size)
      throw Error(ErrorCategory::IndexOutOfVocab,
                  std::string(side) + " id " + std::to_string(id) +
                      " outside vocabulary of size " +
                      std::to_string(vocab_size));
}

inline EncoderTrace encode_source(const Checkpoint& ckpt,
                                  const std::vector<int>& src) {
  const ModelConfig& c = ckpt.config;
  const int H = c.hidden_dim;
  const auto S = static_cast<Eigen::Index>(src.size());
  const Matrix& src_embed = P(ckpt.params, "src_embed");

  EncoderTrace enc;
  Matrix input(c.embedding_dim, S);
  for (Eigen::Index t = 0; t < S; ++t)
    input.col(t) = src_embed.row(src[static_cast<std::size_t>(t)]).transpose();

  for (int l = 0; l < c.enc_layers; ++l) {
    LayerTrace layer;
    layer.input = std::move(input);
    const std::string pre = "enc" + std::to_string(l) + ".";
    GruView fwd = gru_view(ckpt.params, pre);
    Matrix out = Matrix::Zero(H, S);
    Vector h = Vector::Zero(H);
    layer.fwd.reserve(static_cast<std::size_t>(S));
    for (Eigen::Index t = 0; t < S; ++t) {
      layer.fwd.push_back(gru_forward(fwd, layer.input.col(t), h));
      h = layer.fwd.back().h;
      out.col(t) = h;
    }
    if (c.bidirectional_encoder) {
      GruView bwd = gru_view(ckpt.params, pre + "bwd.");
      layer.bwd.resize(static_cast<std::size_t>(S));
      Vector hb = Vector::Zero(H);
      for (Eigen::Index t = S - 1; t >= 0; --t) {
        layer.bwd[static_cast<std::size_t>(t)] =
            gru_forward(bwd, layer.input.col(t), hb);
        hb = layer.bwd[static_cast<std::size_t>(t)].h;
        out.col(t) += hb;
      }
    }
    if (c.residual && l >= 1) out += layer.input;
    layer.output = out;
    input = std::move(out);
    enc.layers.push_back(std::move(layer));
  }
  enc.memory = enc.layers.back().output;
  enc.u_mem = P(ckpt.params, "att.U") * enc.memory;
  return enc;
}

// One teacher-forced (or decode-time) decoder step. `h_state` holds each
// layer's recurrent state and is updated in place.
inline DecStepTrace decode_step(const Checkpoint& ckpt,
                                const EncoderTrace& enc,
                                const std::vector<int>& copy_map, int prev_id,
                                const Vector& query,
                                std::vector<Vector>& h_state,
                                const double* force_gate) {
  const ModelConfig& c = ckpt.config;
  const int H = c.hidden_dim;
  const auto S = enc.memory.cols();
  const ParamTable& p = ckpt.params;

  DecStepTrace st;
  st.prev_id = prev_id;
  st.query = query;

  const Vector wq = P(p, "att.W") * query;
  st.tanh_terms =
      ((enc.u_mem.colwise() + wq).array().tanh()).matrix();  // H x S
  Vector scores = st.tanh_terms.transpose() * P(p, "att.v").col(0);
  const double mx = scores.maxCoeff();
  Vector ex = (scores.array() - mx).exp();
  st.alpha = ex / ex.sum();
  st.ctx = enc.memory * st.alpha;

  Vector x(c.embedding_dim + H);
  x.head(c.embedding_dim) = P(p, "tgt_embed").row(prev_id).transpose();
  x.tail(H) = st.ctx;

  st.layers.reserve(static_cast<std::size_t>(c.dec_layers));
  st.layer_out.reserve(static_cast<std::size_t>(c.dec_layers));
  Vector in = std::move(x);
  for (int l = 0; l < c.dec_layers; ++l) {
    GruView view = gru_view(p, "dec" + std::to_string(l) + ".");
    st.layers.push_back(gru_forward(view, in, h_state[static_cast<std::size_t>(l)]));
    h_state[static_cast<std::size_t>(l)] = st.layers.back().h;
    Vector out = st.layers.back().h;
    if (c.residual && l >= 1) out += in;
    st.layer_out.push_back(out);
    in = std::move(out);
  }

  st.feat.resize(2 * H);
  st.feat.head(H) = st.layer_out.back();
  st.feat.tail(H) = st.ctx;
  Vector logits = P(p, "out.W") * st.feat + P(p, "out.b").col(0);
  const double lmx = logits.maxCoeff();
  Vector le = (logits.array() - lmx).exp();
  st.p_gen = le / le.sum();

  if (c.copy_enabled) {
    if (force_gate) {
      st.gate = *force_gate;
      st.gate_forced = true;
    } else {
      const double u =
          P(p, "copy.w").col(0).dot(st.feat) + P(p, "copy.b")(0, 0);
      st.gate = 1.0 / (1.0 + std::exp(-u));
    }
    st.p_copy = Vector::Zero(c.tgt_vocab.size());
    for (Eigen::Index j = 0; j < S; ++j)
      st.p_copy[copy_map[static_cast<std::size_t>(j)]] += st.alpha[j];
    st.p_out = (1.0 - st.gate) * st.p_gen + st.gate * st.p_copy;
  } else {
    st.p_out = st.p_gen;
  }
  return st;
}

inline std::vector<int> build_copy_map(const ModelConfig& c,
                                       const std::vector<int>& src) {
  std::vector<int> map;
  map.reserve(src.size());
  for (int id : src)
    map.push_back(c.tgt_vocab.encode(c.src_vocab.surface(id)));
  return map;
}

inline ForwardCaches forward_caches(const Checkpoint& ckpt,
                                    const std::vector<int>& src,
                                    const std::vector<int>& tgt,
                                    const double* force_gate = nullptr) {
  const ModelConfig& c = ckpt.config;
  if (src.empty())
    throw Error(ErrorCategory::ConfigError, "source sequence is empty");
  if (static_cast<int>(src.size()) > c.max_src_len)
    throw Error(ErrorCategory::ConfigError,
                "source length " + std::to_string(src.size()) +
                    " exceeds max_src_len " + std::to_string(c.max_src_len));
  // One extra step is allowed so a full-length message can still carry its
  // end marker as a training label.
  if (static_cast<int>(tgt.size()) > c.max_tgt_len + 1)
    throw Error(ErrorCategory::ConfigError,
                "target length " + std::to_string(tgt.size()) +
                    " exceeds max_tgt_len " + std::to_string(c.max_tgt_len));
  check_ids(src, c.src_vocab.size(), "source");
  check_ids(tgt, c.tgt_vocab.size(), "target");

  ForwardCaches f;
  f.enc = encode_source(ckpt, src);
  if (c.copy_enabled) f.copy_map = build_copy_map(c, src);

  std::vector<Vector> h_state(static_cast<std::size_t>(c.dec_layers),
                              Vector::Zero(c.hidden_dim));
  Vector query = Vector::Zero(c.hidden_dim);
  int prev = Vocabulary::kBos;
  f.steps.reserve(tgt.size());
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    DecStepTrace st = decode_step(ckpt, f.enc, f.copy_map, prev, query,
                                  h_state, force_gate);
    st.label = tgt[t];
    query = st.layer_out.back();
    prev = tgt[t];
    f.steps.push_back(std::move(st));
  }
  return f;
}

}  // namespace detail

inline std::int64_t param_count(const Checkpoint& ckpt) {
  std::int64_t n = 0;
  for (const auto& [name, m] : ckpt.params) n += m.size();
  return n;
}

inline Checkpoint init_model(const ModelConfig& config) {
  validate_config(config);
  Checkpoint ckpt;
  ckpt.config = config;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> dist(-0.08, 0.08);
  for (const auto& spec : detail::param_specs(config)) {
    Matrix m(spec.rows, spec.cols);
    for (Eigen::Index i = 0; i < spec.rows; ++i)
      for (Eigen::Index j = 0; j < spec.cols; ++j) m(i, j) = dist(rng);
    ckpt.params.emplace(spec.name, std::move(m));
  }
  std::ostringstream rng_out;
  rng_out << rng;
  ckpt.rng_state = rng_out.str();
  return ckpt;
}

struct ForwardTrace {
  std::vector<Vector> distributions;  // per step, over tgt vocab
  std::vector<Vector> alignments;     // per step, over source positions
  std::vector<double> gates;          // copy gate values (empty when disabled)
};

inline ForwardTrace forward_trace(const Checkpoint& ckpt,
                                  const std::vector<int>& src,
                                  const std::vector<int>& tgt,
                                  const double* force_gate = nullptr) {
  detail::ForwardCaches f = detail::forward_caches(ckpt, src, tgt, force_gate);
  ForwardTrace trace;
  for (auto& st : f.steps) {
    trace.distributions.push_back(std::move(st.p_out));
    trace.alignments.push_back(std::move(st.alpha));
    if (ckpt.config.copy_enabled) trace.gates.push_back(st.gate);
  }
  return trace;
}

// Teacher-forced pass: distributions[t] predicts tgt[t] given BOS + tgt[<t].
inline std::vector<Vector> forward(const Checkpoint& ckpt,
                                   const std::vector<int>& src,
                                   const std::vector<int>& tgt) {
  return forward_trace(ckpt, src, tgt).distributions;
}

inline ParamTable zero_like(const ParamTable& params) {
  ParamTable out;
  for (const auto& [name, m] : params)
    out.emplace(name, Matrix::Zero(m.rows(), m.cols()));
  return out;
}

// Sum of per-token cross-entropy over the teacher-forced steps; when `grads`
// is non-null the full backward pass accumulates into it (pre-sized via
// zero_like). A zero-length target contributes no loss and no gradient.
inline double loss_and_gradients(const Checkpoint& ckpt,
                                 const std::vector<int>& src,
                                 const std::vector<int>& tgt,
                                 ParamTable* grads) {
  using namespace detail;
  const ModelConfig& c = ckpt.config;
  if (tgt.empty()) return 0.0;
  ForwardCaches f = forward_caches(ckpt, src, tgt);

  double loss = 0.0;
  for (const auto& st : f.steps) loss -= std::log(st.p_out[st.label]);
  if (!grads) return loss;

  const ParamTable& p = ckpt.params;
  const int H = c.hidden_dim, E = c.embedding_dim;
  const auto S = f.enc.memory.cols();
  const Matrix& attW = P(p, "att.W");
  const Matrix& attU = P(p, "att.U");
  const Vector attv = P(p, "att.v").col(0);
  const Matrix& outW = P(p, "out.W");

  Matrix dmem = Matrix::Zero(H, S);
  std::vector<Vector> dh_rec(static_cast<std::size_t>(c.dec_layers),
                             Vector::Zero(H));
  Vector pending_dquery = Vector::Zero(H);

  std::vector<GruGradView> dec_grads;
  std::vector<GruView> dec_views;
  for (int l = 0; l < c.dec_layers; ++l) {
    dec_views.push_back(gru_view(p, "dec" + std::to_string(l) + "."));
    dec_grads.push_back(gru_grad_view(*grads, "dec" + std::to_string(l) + "."));
  }

  for (auto ti = static_cast<std::int64_t>(f.steps.size()) - 1; ti >= 0; --ti) {
    const DecStepTrace& st = f.steps[static_cast<std::size_t>(ti)];
    const int y = st.label;

    Vector dlogits;
    Vector dalpha = Vector::Zero(S);
    Vector dfeat = Vector::Zero(2 * H);
    if (c.copy_enabled) {
      const double dpy = -1.0 / st.p_out[y];
      const double dgen_y = (1.0 - st.gate) * dpy;
      const double s = st.p_gen[y] * dgen_y;
      dlogits = (-s) * st.p_gen;
      dlogits[y] += st.p_gen[y] * dgen_y;
      const double dcopy_y = st.gate * dpy;
      for (Eigen::Index j = 0; j < S; ++j)
        if (f.copy_map[static_cast<std::size_t>(j)] == y) dalpha[j] += dcopy_y;
      if (!st.gate_forced) {
        const double dg = dpy * (st.p_copy[y] - st.p_gen[y]);
        const double du = dg * st.gate * (1.0 - st.gate);
        grads->at("copy.w").col(0) += du * st.feat;
        (*grads)["copy.b"](0, 0) += du;
        dfeat += du * P(p, "copy.w").col(0);
      }
    } else {
      dlogits = st.p_gen;
      dlogits[y] -= 1.0;
    }

    grads->at("out.W") += dlogits * st.feat.transpose();
    grads->at("out.b").col(0) += dlogits;
    dfeat += outW.transpose() * dlogits;

    Vector d_out = dfeat.head(H) + pending_dquery;
    Vector dctx = dfeat.tail(H);

    for (int l = c.dec_layers - 1; l >= 0; --l) {
      Vector d_res = (c.residual && l >= 1) ? d_out : Vector();
      Vector dh = d_out + dh_rec[static_cast<std::size_t>(l)];
      auto [dx, dh_prev] =
          gru_backward(dec_views[static_cast<std::size_t>(l)],
                       dec_grads[static_cast<std::size_t>(l)],
                       st.layers[static_cast<std::size_t>(l)], dh);
      dh_rec[static_cast<std::size_t>(l)] = std::move(dh_prev);
      if (d_res.size() > 0) dx += d_res;
      d_out = std::move(dx);
    }
    // d_out is now the gradient on the concatenated decoder input.
    grads->at("tgt_embed").row(st.prev_id) += d_out.head(E).transpose();
    dctx += d_out.tail(H);

    // Attention backward: ctx = memory * alpha, then the softmax, then the
    // additive scores.
    dalpha += f.enc.memory.transpose() * dctx;
    dmem += dctx * st.alpha.transpose();
    Vector de = st.alpha.cwiseProduct(
        dalpha - Vector::Constant(S, st.alpha.dot(dalpha)));
    Matrix dA = (attv * de.transpose())
                    .cwiseProduct(Matrix::Ones(H, S) -
                                  st.tanh_terms.cwiseProduct(st.tanh_terms));
    grads->at("att.v").col(0) += st.tanh_terms * de;
    Vector dA_sum = dA.rowwise().sum();
    grads->at("att.W") += dA_sum * st.query.transpose();
    grads->at("att.U") += dA * f.enc.memory.transpose();
    dmem += attU.transpose() * dA;
    pending_dquery = attW.transpose() * dA_sum;
    // At ti == 0 the query was the zero constant; the pending gradient is
    // dropped when the loop ends.
  }

  // Encoder backward, top layer to bottom.
  Matrix d_out_mat = std::move(dmem);
  for (int l = c.enc_layers - 1; l >= 0; --l) {
    const LayerTrace& layer = f.enc.layers[static_cast<std::size_t>(l)];
    const std::string pre = "enc" + std::to_string(l) + ".";
    GruView fwd = gru_view(p, pre);
    GruGradView gfwd = gru_grad_view(*grads, pre);
    Matrix d_in = Matrix::Zero(layer.input.rows(), S);
    Vector dh_carry = Vector::Zero(H);
    for (Eigen::Index t = S - 1; t >= 0; --t) {
      Vector dh = d_out_mat.col(t) + dh_carry;
      auto [dx, dh_prev] =
          gru_backward(fwd, gfwd, layer.fwd[static_cast<std::size_t>(t)], dh);
      d_in.col(t) += dx;
      dh_carry = std::move(dh_prev);
    }
    if (c.bidirectional_encoder) {
      GruView bwd = gru_view(p, pre + "bwd.");
      GruGradView gbwd = gru_grad_view(*grads, pre + "bwd.");
      Vector dh_carry_b = Vector::Zero(H);
      for (Eigen::Index t = 0; t < S; ++t) {
        Vector dh = d_out_mat.col(t) + dh_carry_b;
        auto [dx, dh_prev] = gru_backward(
            bwd, gbwd, layer.bwd[static_cast<std::size_t>(t)], dh);
        d_in.col(t) += dx;
        dh_carry_b = std::move(dh_prev);
      }
    }
    if (c.residual && l >= 1) d_in += d_out_mat;
    d_out_mat = std::move(d_in);
  }
  for (Eigen::Index t = 0; t < S; ++t)
    grads->at("src_embed").row(src[static_cast<std::size_t>(t)]) +=
        d_out_mat.col(t).transpose();

  return loss;
}

inline double sequence_loss(const Checkpoint& ckpt, const std::vector<int>& src,
                            const std::vector<int>& tgt) {
  return loss_and_gradients(ckpt, src, tgt, nullptr);
}

// ---- checkpoint files ----
//
// Byte layout (little-endian, doubles as raw IEEE-754 bytes):
//   magic "CGNMTCK1", u32 version
//   i32 enc_layers, dec_layers, embedding_dim, hidden_dim,
//       max_src_len, max_tgt_len
//   u8 residual, copy_enabled, bidirectional_encoder; u64 seed
//   vocab blocks (src then tgt): u64 line count, then u32 length + bytes per
//     stored-form line; u64 FNV-1a hash of the block
//   i64 step; u64 rng-state length + bytes
//   u64 parameter count, then per parameter: u32 name length + name,
//     u64 rows, u64 cols, rows*cols doubles in column-major order

namespace detail {

constexpr char kCkptMagic[8] = {'C', 'G', 'N', 'M', 'T', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCategory::IoError, "truncated checkpoint");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  auto n = read_pod<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorCategory::IoError, "truncated checkpoint");
  return s;
}

inline void write_vocab(std::ostream& out, const Vocabulary& v) {
  const auto& lines = v.stored_tokens();
  write_pod<std::uint64_t>(out, lines.size());
  for (const auto& line : lines) write_string(out, line);
  write_pod<std::uint64_t>(out, v.hash());
}

inline Vocabulary read_vocab(std::istream& in) {
  auto n = read_pod<std::uint64_t>(in);
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) lines.push_back(read_string(in));
  auto stored_hash = read_pod<std::uint64_t>(in);
  Vocabulary v = Vocabulary::from_stored_lines(lines);
  if (v.hash() != stored_hash)
    throw Error(ErrorCategory::CheckpointMismatch,
                "vocabulary hash does not match its token block");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  using namespace detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::IoError, "cannot write " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  write_pod<std::uint32_t>(out, 1u);
  const ModelConfig& c = ckpt.config;
  for (int v : {c.enc_layers, c.dec_layers, c.embedding_dim, c.hidden_dim,
                c.max_src_len, c.max_tgt_len})
    write_pod<std::int32_t>(out, v);
  write_pod<std::uint8_t>(out, c.residual ? 1 : 0);
  write_pod<std::uint8_t>(out, c.copy_enabled ? 1 : 0);
  write_pod<std::uint8_t>(out, c.bidirectional_encoder ? 1 : 0);
  write_pod<std::uint64_t>(out, c.seed);
  write_vocab(out, c.src_vocab);
  write_vocab(out, c.tgt_vocab);
  write_pod<std::int64_t>(out, ckpt.step);
  write_pod<std::uint64_t>(out, ckpt.rng_state.size());
  out.write(ckpt.rng_state.data(),
            static_cast<std::streamsize>(ckpt.rng_state.size()));
  write_pod<std::uint64_t>(out, ckpt.params.size());
  for (const auto& [name, m] : ckpt.params) {
    write_string(out, name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  if (!out) throw Error(ErrorCategory::IoError, "write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::IoError, "cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw Error(ErrorCategory::CheckpointMismatch,
                path + " is not a checkpoint file");
  auto version = read_pod<std::uint32_t>(in);
  if (version != 1)
    throw Error(ErrorCategory::CheckpointMismatch,
                "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  c.enc_layers = read_pod<std::int32_t>(in);
  c.dec_layers = read_pod<std::int32_t>(in);
  c.embedding_dim = read_pod<std::int32_t>(in);
  c.hidden_dim = read_pod<std::int32_t>(in);
  c.max_src_len = read_pod<std::int32_t>(in);
  c.max_tgt_len = read_pod<std::int32_t>(in);
  c.residual = read_pod<std::uint8_t>(in) != 0;
  c.copy_enabled = read_pod<std::uint8_t>(in) != 0;
  c.bidirectional_encoder = read_pod<std::uint8_t>(in) != 0;
  c.seed = read_pod<std::uint64_t>(in);
  c.src_vocab = read_vocab(in);
  c.tgt_vocab = read_vocab(in);
  ckpt.step = read_pod<std::int64_t>(in);
  auto rng_len = read_pod<std::uint64_t>(in);
  ckpt.rng_state.resize(rng_len);
  in.read(ckpt.rng_state.data(), static_cast<std::streamsize>(rng_len));
  if (!in) throw Error(ErrorCategory::IoError, "truncated checkpoint");
  auto n_params = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = read_string(in);
    auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    auto cols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw Error(ErrorCategory::IoError, "truncated checkpoint");
    ckpt.params.emplace(std::move(name), std::move(m));
  }

  validate_config(c);
  auto specs = detail::param_specs(c);
  if (specs.size() != ckpt.params.size())
    throw Error(ErrorCategory::CheckpointMismatch,
                "checkpoint holds " + std::to_string(ckpt.params.size()) +
                    " parameters, config expects " +
                    std::to_string(specs.size()));
  for (const auto& spec : specs) {
    auto it = ckpt.params.find(spec.name);
    if (it == ckpt.params.end())
      throw Error(ErrorCategory::CheckpointMismatch,
                  "checkpoint is missing parameter " + spec.name);
    if (it->second.rows() != spec.rows || it->second.cols() != spec.cols)
      throw Error(ErrorCategory::CheckpointMismatch,
                  "parameter " + spec.name + " has shape " +
                      std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", expected " +
                      std::to_string(spec.rows) + "x" +
                      std::to_string(spec.cols));
  }
  return ckpt;
}

}  // namespace commitgen
