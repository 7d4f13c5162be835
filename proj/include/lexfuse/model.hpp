#pragma once

#include "lexfuse/corpus.hpp"
#include "lexfuse/tape.hpp"

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {

enum class Variant {
  kBaseline,
  kPnCopy,
  kPgCopy,
  kLexPn,
  kLexPg,
  kLexPgS,
  kLexPgF,
  kLexPgSf,
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kPnCopy: return "pn_copy";
    case Variant::kPgCopy: return "pg_copy";
    case Variant::kLexPn: return "lexpn";
    case Variant::kLexPg: return "lexpg";
    case Variant::kLexPgS: return "lexpg_s";
    case Variant::kLexPgF: return "lexpg_f";
    case Variant::kLexPgSf: return "lexpg_sf";
  }
  throw std::invalid_argument("unknown variant");
}

inline Variant variant_from_name(const std::string& s) {
  for (Variant v : {Variant::kBaseline, Variant::kPnCopy, Variant::kPgCopy, Variant::kLexPn,
                    Variant::kLexPg, Variant::kLexPgS, Variant::kLexPgF, Variant::kLexPgSf})
    if (s == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant: " + s);
}

// Which heads a variant carries.
inline bool uses_sigmoid_gen(Variant v) {
  return v == Variant::kPgCopy || v == Variant::kLexPg || v == Variant::kLexPgS;
}
inline bool uses_beta(Variant v) { return v == Variant::kLexPgS || v == Variant::kLexPgSf; }
inline bool uses_pc(Variant v) { return v == Variant::kLexPgF || v == Variant::kLexPgSf; }
inline bool uses_dictionary(Variant v) {
  return v == Variant::kLexPn || v == Variant::kLexPg || v == Variant::kLexPgS ||
         v == Variant::kLexPgF || v == Variant::kLexPgSf;
}
// Variants whose training loss includes the fused distribution and γ term;
// pn_copy and lexpn only modify decoding, so they train as the baseline does.
inline bool trains_fused(Variant v) {
  return v == Variant::kPgCopy || v == Variant::kLexPg || v == Variant::kLexPgS ||
         v == Variant::kLexPgF || v == Variant::kLexPgSf;
}

struct ModelConfig {
  int embedding_dim = 256;
  int hidden_dim = 256;
  int layers = 2;
  Variant variant = Variant::kBaseline;
  double threshold = 0.5;  // p_gen gate at inference
  bool soft_gate = false;  // argmax over the mixed distribution instead of hard gating
  double dropout = 0.2;    // between stacked LSTM layers, training only
  std::uint64_t seed = 1;
  int src_vocab = 0;
  int tgt_vocab = 0;

  void validate() const {
    if (embedding_dim <= 0 || hidden_dim <= 0 || layers <= 0)
      throw std::invalid_argument("model dimensions must be positive");
    if (src_vocab < 4 || tgt_vocab < 4)
      throw std::invalid_argument("vocab sizes must include the reserved specials");
    if (threshold < 0.0 || threshold > 1.0)
      throw std::invalid_argument("threshold must lie in [0,1]");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0,1)");
  }
};

struct EncoderStates {
  std::vector<Var> states;  // per source position, extent 2*hidden
  Var final_forward;        // last layer's final forward hidden, seeds the decoder
};

struct DecoderState {
  std::vector<LstmVars> layers;
  Var feed;  // previous step's combined state, input-fed
};

// Per-step bundle consumed by every fusion head.
struct FusionStepState {
  Var alpha;    // attention weights over source
  Var context;  // c_t, extent 2*hidden
  Var h_dec;    // top-layer LSTM output
  Var h_hat;    // combined tanh(C [c; h_dec])
  Var p_dec;    // decoder distribution over target vocab
  Var p_gen;    // scalar; sigmoid head or softmax[0] for +F variants
  Var beta;     // separate pointer weights (+S variants)
  Var pc;       // per-position dictionary scores (+F variants)
  bool has_p_gen = false;
  bool has_beta = false;
  bool has_pc = false;
};

class TranslationModel {
 public:
  explicit TranslationModel(const ModelConfig& cfg) : cfg_(cfg), init_rng_(cfg.seed) {
    cfg_.validate();
    allocate();
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void set_train(bool on) { train_ = on; }
  bool training() const { return train_; }

  // Decode-time knobs; both leave the learned parameters untouched.
  void set_threshold(double th) {
    cfg_.threshold = th;
    cfg_.validate();
  }
  void set_soft_gate(bool on) { cfg_.soft_gate = on; }
  std::mt19937_64& dropout_rng() { return dropout_rng_; }
  void seed_dropout(std::uint64_t s) { dropout_rng_.seed(s); }

  EncoderStates encode(Tape& t, const std::vector<int>& src_ids) {
    if (src_ids.empty()) throw std::invalid_argument("encode: empty input");
    const int n = static_cast<int>(src_ids.size());
    Var emb = t.param(params_.at("src_embed"));
    std::vector<Var> inputs;
    inputs.reserve(static_cast<std::size_t>(n));
    for (int id : src_ids) inputs.push_back(t.embed_row(emb, bounded(id, cfg_.src_vocab)));

    Var final_fwd{};
    for (int layer = 0; layer < cfg_.layers; ++layer) {
      if (layer > 0) inputs = apply_dropout(t, inputs);
      Var wf = t.param(params_.at(lname("enc_fwd", layer, "w")));
      Var bf = t.param(params_.at(lname("enc_fwd", layer, "b")));
      Var wb = t.param(params_.at(lname("enc_bwd", layer, "w")));
      Var bb = t.param(params_.at(lname("enc_bwd", layer, "b")));
      std::vector<Var> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n));
      LstmVars s = zero_state(t);
      for (int i = 0; i < n; ++i) {
        s = lstm_cell(t, wf, bf, s, inputs[static_cast<std::size_t>(i)]);
        fwd[static_cast<std::size_t>(i)] = s.hidden;
      }
      if (layer == cfg_.layers - 1) final_fwd = s.hidden;
      s = zero_state(t);
      for (int i = n - 1; i >= 0; --i) {
        s = lstm_cell(t, wb, bb, s, inputs[static_cast<std::size_t>(i)]);
        bwd[static_cast<std::size_t>(i)] = s.hidden;
      }
      for (int i = 0; i < n; ++i)
        inputs[static_cast<std::size_t>(i)] =
            t.concat(fwd[static_cast<std::size_t>(i)], bwd[static_cast<std::size_t>(i)]);
    }
    return {inputs, final_fwd};
  }

  DecoderState init_decoder(Tape& t, const EncoderStates& enc) {
    DecoderState st;
    st.layers.reserve(static_cast<std::size_t>(cfg_.layers));
    for (int layer = 0; layer < cfg_.layers; ++layer) {
      Var w = t.param(params_.at(lname("dec_init", layer, "w")));
      Var b = t.param(params_.at(lname("dec_init", layer, "b")));
      Var h = t.tanh(t.add(t.matvec(w, enc.final_forward), b));
      st.layers.push_back({h, t.leaf(Tensor({cfg_.hidden_dim}))});
    }
    st.feed = t.leaf(Tensor({cfg_.hidden_dim}));
    return st;
  }

  // One teacher-forced / inference step. `features` supplies the 3-bit
  // per-source-position entry features for +F variants (ignored otherwise).
  FusionStepState decode_step(Tape& t, DecoderState& state, int y_prev,
                              const EncoderStates& enc,
                              const std::vector<Tensor>* features = nullptr) {
    Var emb = t.embed_row(t.param(params_.at("tgt_embed")), bounded(y_prev, cfg_.tgt_vocab));
    Var x = t.concat(emb, state.feed);
    for (int layer = 0; layer < cfg_.layers; ++layer) {
      if (layer > 0) x = apply_dropout(t, x);
      Var w = t.param(params_.at(lname("dec", layer, "w")));
      Var b = t.param(params_.at(lname("dec", layer, "b")));
      state.layers[static_cast<std::size_t>(layer)] =
          lstm_cell(t, w, b, state.layers[static_cast<std::size_t>(layer)], x);
      x = state.layers[static_cast<std::size_t>(layer)].hidden;
    }
    FusionStepState step;
    step.h_dec = x;

    // score_ti = V . tanh(W h_dec + U h_enc_i)
    step.alpha = attention_weights(t, "attn", step.h_dec, enc);
    step.context = t.weighted_sum(step.alpha, enc.states);
    step.h_hat = t.tanh(
        t.matvec(t.param(params_.at("combine_w")), t.concat(step.context, step.h_dec)));
    state.feed = step.h_hat;
    step.p_dec = t.softmax(
        t.affine(t.param(params_.at("out_w")), step.h_hat, t.param(params_.at("out_b"))));

    if (uses_sigmoid_gen(cfg_.variant)) {
      Var z = t.add(t.dot(t.param(params_.at("gen_w")), step.context),
                    t.param(params_.at("gen_b")));
      step.p_gen = t.sigmoid(z);
      step.has_p_gen = true;
    }
    if (uses_beta(cfg_.variant)) {
      step.beta = attention_weights(t, "ptr", step.h_dec, enc);
      step.has_beta = true;
    }
    if (uses_pc(cfg_.variant)) {
      if (features == nullptr ||
          features->size() != enc.states.size())
        throw std::invalid_argument("entry features required for +F variants");
      // p_gen' = V_gen . tanh(W_gen h_hat + b_gen); PC'_i from Eq-style affine
      Var gen_score = t.dot(
          t.param(params_.at("pcgen_v")),
          t.tanh(t.affine(t.param(params_.at("pcgen_w")), step.h_hat,
                          t.param(params_.at("pcgen_b")))));
      Var w_pc = t.param(params_.at("pc_w"));
      Var u_pc = t.param(params_.at("pc_u"));
      Var o_pc = t.param(params_.at("pc_o"));
      Var v_pc = t.param(params_.at("pc_v"));
      Var wh = t.matvec(w_pc, step.h_hat);
      std::vector<Var> scores{gen_score};
      for (std::size_t i = 0; i < enc.states.size(); ++i) {
        Var f = t.leaf((*features)[i]);
        Var pre = t.add(t.add(wh, t.matvec(u_pc, enc.states[i])), t.matvec(o_pc, f));
        scores.push_back(t.dot(v_pc, t.tanh(pre)));
      }
      Var joint = t.softmax(t.concat(scores));
      step.p_gen = t.pick(joint, 0);
      step.pc = t.slice(joint, 1, static_cast<int>(enc.states.size()));
      step.has_p_gen = true;
      step.has_pc = true;
    }
    return step;
  }

  // Eq. 2 as a standalone operation: attention weights and context vector.
  std::pair<Var, Var> attend(Tape& t, Var h_dec, const EncoderStates& enc) {
    Var a = attention_weights(t, "attn", h_dec, enc);
    return {a, t.weighted_sum(a, enc.states)};
  }

  // The tanh arguments of the PC' scores (pre-activation), one vector per
  // source position; the feature contribution is linear at this stage.
  std::vector<std::vector<double>> pc_score_arguments(Tape& t, Var h_hat,
                                                      const EncoderStates& enc,
                                                      const std::vector<Tensor>& features) {
    Var wh = t.matvec(t.param(params_.at("pc_w")), h_hat);
    Var o_pc = t.param(params_.at("pc_o"));
    Var u_pc = t.param(params_.at("pc_u"));
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < enc.states.size(); ++i) {
      Var pre =
          t.add(t.add(wh, t.matvec(u_pc, enc.states[i])), t.matvec(o_pc, t.leaf(features[i])));
      out.push_back(t.value(pre).data);
    }
    return out;
  }

 private:
  static std::string lname(const char* base, int layer, const char* part) {
    return std::string(base) + "_l" + std::to_string(layer) + "_" + part;
  }

  static int bounded(int id, int vocab) {
    if (id < 0 || id >= vocab) throw std::out_of_range("token id outside vocabulary");
    return id;
  }

  LstmVars zero_state(Tape& t) {
    return {t.leaf(Tensor({cfg_.hidden_dim})), t.leaf(Tensor({cfg_.hidden_dim}))};
  }

  Var attention_weights(Tape& t, const std::string& prefix, Var h_dec,
                        const EncoderStates& enc) {
    Var w = t.param(params_.at(prefix + "_w"));
    Var u = t.param(params_.at(prefix + "_u"));
    Var v = t.param(params_.at(prefix + "_v"));
    Var wh = t.matvec(w, h_dec);
    std::vector<Var> scores;
    scores.reserve(enc.states.size());
    for (const Var& e : enc.states) scores.push_back(t.dot(v, t.tanh(t.add(wh, t.matvec(u, e)))));
    return t.softmax(t.concat(scores));
  }

  std::vector<Var> apply_dropout(Tape& t, const std::vector<Var>& xs) {
    std::vector<Var> out;
    out.reserve(xs.size());
    for (const Var& x : xs) out.push_back(apply_dropout(t, x));
    return out;
  }

  Var apply_dropout(Tape& t, Var x) {
    if (!train_ || cfg_.dropout <= 0.0) return x;
    const Tensor& v = t.value(x);
    Tensor mask(v.shape);
    std::bernoulli_distribution keep(1.0 - cfg_.dropout);
    const double scale = 1.0 / (1.0 - cfg_.dropout);
    for (double& m : mask.data) m = keep(dropout_rng_) ? scale : 0.0;
    return t.mul(x, t.leaf(std::move(mask)));
  }

  void allocate() {
    const int e = cfg_.embedding_dim;
    const int h = cfg_.hidden_dim;
    params_.create_glorot("src_embed", {cfg_.src_vocab, e}, init_rng_);
    params_.create_glorot("tgt_embed", {cfg_.tgt_vocab, e}, init_rng_);
    for (int layer = 0; layer < cfg_.layers; ++layer) {
      const int enc_in = layer == 0 ? e : 2 * h;
      for (const char* dir : {"enc_fwd", "enc_bwd"}) {
        params_.create_glorot(lname(dir, layer, "w"), {4 * h, enc_in + h}, init_rng_);
        forget_bias(params_.create(lname(dir, layer, "b"), {4 * h}));
      }
      const int dec_in = layer == 0 ? e + h : h;
      params_.create_glorot(lname("dec", layer, "w"), {4 * h, dec_in + h}, init_rng_);
      forget_bias(params_.create(lname("dec", layer, "b"), {4 * h}));
      params_.create_glorot(lname("dec_init", layer, "w"), {h, h}, init_rng_);
      params_.create(lname("dec_init", layer, "b"), {h});
    }
    params_.create_glorot("attn_w", {h, h}, init_rng_);
    params_.create_glorot("attn_u", {h, 2 * h}, init_rng_);
    params_.create_glorot("attn_v", {h}, init_rng_);
    params_.create_glorot("combine_w", {h, 3 * h}, init_rng_);
    params_.create_glorot("out_w", {cfg_.tgt_vocab, h}, init_rng_);
    params_.create("out_b", {cfg_.tgt_vocab});
    if (uses_sigmoid_gen(cfg_.variant)) {
      params_.create_glorot("gen_w", {2 * h}, init_rng_);
      params_.create("gen_b", {1});
    }
    if (uses_beta(cfg_.variant)) {
      params_.create_glorot("ptr_w", {h, h}, init_rng_);
      params_.create_glorot("ptr_u", {h, 2 * h}, init_rng_);
      params_.create_glorot("ptr_v", {h}, init_rng_);
    }
    if (uses_pc(cfg_.variant)) {
      params_.create_glorot("pc_w", {h, h}, init_rng_);
      params_.create_glorot("pc_u", {h, 2 * h}, init_rng_);
      params_.create_glorot("pc_o", {h, 3}, init_rng_);
      params_.create_glorot("pc_v", {h}, init_rng_);
      params_.create_glorot("pcgen_w", {h, h}, init_rng_);
      params_.create("pcgen_b", {h});
      params_.create_glorot("pcgen_v", {h}, init_rng_);
    }
  }

  void forget_bias(Parameter& b) {
    const int h = static_cast<int>(b.value.numel()) / 4;
    for (int i = h; i < 2 * h; ++i) b.value.data[static_cast<std::size_t>(i)] = 1.0;
  }

  ModelConfig cfg_;
  ParamStore params_;
  std::mt19937_64 init_rng_;
  std::mt19937_64 dropout_rng_{0x9e3779b97f4a7c15ull};
  bool train_ = false;
};

}  // namespace lexfuse
