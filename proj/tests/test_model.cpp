#include "lexfuse/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lexfuse;

namespace {

ModelConfig tiny_config(Variant v = Variant::kBaseline, int layers = 1) {
  ModelConfig cfg;
  cfg.embedding_dim = 2;
  cfg.hidden_dim = 2;
  cfg.layers = layers;
  cfg.variant = v;
  cfg.dropout = 0.0;
  cfg.seed = 7;
  cfg.src_vocab = 6;
  cfg.tgt_vocab = 6;
  return cfg;
}

// Independent plain-double re-implementations used as oracles.
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Vec matvec_ref(const Mat& w, const Vec& x) {
  Vec y(w.size(), 0.0);
  for (std::size_t r = 0; r < w.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c) y[r] += w[r][c] * x[c];
  return y;
}

Vec softmax_ref(const Vec& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  Vec y(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (y[i] = std::exp(z[i] - mx));
  for (double& v : y) v /= s;
  return y;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM step with the i,f,g,o row layout over [x; h_prev].
void lstm_ref(const Mat& w, const Vec& b, Vec& h, Vec& c, const Vec& x) {
  Vec in = x;
  in.insert(in.end(), h.begin(), h.end());
  Vec z = matvec_ref(w, in);
  const std::size_t hd = h.size();
  for (std::size_t k = 0; k < z.size(); ++k) z[k] += b[k];
  Vec nc(hd), nh(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    const double ig = sigmoid_ref(z[j]);
    const double fg = sigmoid_ref(z[hd + j]);
    const double gg = std::tanh(z[2 * hd + j]);
    const double og = sigmoid_ref(z[3 * hd + j]);
    nc[j] = fg * c[j] + ig * gg;
    nh[j] = og * std::tanh(nc[j]);
  }
  h = nh;
  c = nc;
}

Mat param_matrix(const Parameter& p) {
  Mat m(static_cast<std::size_t>(p.value.shape[0]),
        Vec(static_cast<std::size_t>(p.value.shape[1])));
  for (int r = 0; r < p.value.shape[0]; ++r)
    for (int c = 0; c < p.value.shape[1]; ++c)
      m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
          p.value.at2(r, c);
  return m;
}

Vec param_vector(const Parameter& p) { return p.value.data; }

}  // namespace

TEST(Encode, LengthPreserved) {
  TranslationModel model(tiny_config(Variant::kBaseline, 2));
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5, 4, 1, 2});
  EXPECT_EQ(enc.states.size(), 5u);
  for (const Var& s : enc.states) EXPECT_EQ(t.value(s).numel(), 4);  // 2*hidden
  EXPECT_THROW(model.encode(t, {}), std::invalid_argument);
}

TEST(Encode, PalindromeWithTiedDirectionsIsSymmetric) {
  TranslationModel model(tiny_config());
  // Tie backward weights to forward weights.
  model.params().at("enc_bwd_l0_w").value = model.params().at("enc_fwd_l0_w").value;
  model.params().at("enc_bwd_l0_b").value = model.params().at("enc_fwd_l0_b").value;
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5, 4});  // palindromic ids
  const int h = 2;
  for (int i = 0; i < 3; ++i) {
    const Tensor& a = t.value(enc.states[static_cast<std::size_t>(i)]);
    const Tensor& b = t.value(enc.states[static_cast<std::size_t>(2 - i)]);
    for (int k = 0; k < h; ++k) {
      EXPECT_DOUBLE_EQ(a.data[static_cast<std::size_t>(k)],
                       b.data[static_cast<std::size_t>(h + k)]);
    }
  }
}

TEST(Encode, MatchesHandEvaluationOneDim) {
  ModelConfig cfg = tiny_config();
  cfg.embedding_dim = 1;
  cfg.hidden_dim = 1;
  TranslationModel model(cfg);
  auto& P = model.params();
  P.at("src_embed").value.data = {0.0, 0.0, 0.0, 0.0, 0.8, -0.4};  // ids 4,5 used
  P.at("enc_fwd_l0_w").value.data = {0.5, -0.3, 0.4, 0.2, -0.6, 0.7, 0.3, 0.1};
  P.at("enc_fwd_l0_b").value.data = {0.1, 1.0, -0.2, 0.05};
  P.at("enc_bwd_l0_w").value.data = {0.2, 0.6, -0.1, 0.3, 0.7, -0.5, 0.4, -0.2};
  P.at("enc_bwd_l0_b").value.data = {0.0, 0.5, 0.1, -0.3};

  Tape t;
  EncoderStates enc = model.encode(t, {4, 5});

  // Hand evaluation with the scalar recurrences.
  Mat wf = param_matrix(P.at("enc_fwd_l0_w")), wb = param_matrix(P.at("enc_bwd_l0_w"));
  Vec bf = param_vector(P.at("enc_fwd_l0_b")), bb = param_vector(P.at("enc_bwd_l0_b"));
  Vec hf{0.0}, cf{0.0}, hb{0.0}, cb{0.0};
  Vec x0{0.8}, x1{-0.4};
  lstm_ref(wf, bf, hf, cf, x0);
  const double f0 = hf[0];
  lstm_ref(wf, bf, hf, cf, x1);
  const double f1 = hf[0];
  lstm_ref(wb, bb, hb, cb, x1);
  const double b1 = hb[0];
  lstm_ref(wb, bb, hb, cb, x0);
  const double b0 = hb[0];

  EXPECT_NEAR(t.value(enc.states[0]).data[0], f0, 1e-10);
  EXPECT_NEAR(t.value(enc.states[0]).data[1], b0, 1e-10);
  EXPECT_NEAR(t.value(enc.states[1]).data[0], f1, 1e-10);
  EXPECT_NEAR(t.value(enc.states[1]).data[1], b1, 1e-10);
  EXPECT_NEAR(t.value(enc.final_forward).data[0], f1, 1e-10);
}

TEST(Attend, SingleStateGetsAllMass) {
  TranslationModel model(tiny_config());
  Tape t;
  EncoderStates enc = model.encode(t, {4});
  Var h_dec = t.leaf(Tensor::vector({0.3, -0.2}));
  auto [alpha, ctx] = model.attend(t, h_dec, enc);
  ASSERT_EQ(t.value(alpha).numel(), 1);
  EXPECT_DOUBLE_EQ(t.value(alpha).data[0], 1.0);
  for (int k = 0; k < 4; ++k)
    EXPECT_DOUBLE_EQ(t.value(ctx).data[static_cast<std::size_t>(k)],
                     t.value(enc.states[0]).data[static_cast<std::size_t>(k)]);
}

TEST(Attend, IdenticalStatesGiveUniformWeights) {
  TranslationModel model(tiny_config());
  Tape t;
  EncoderStates enc = model.encode(t, {4, 4, 4});
  // Identical tokens do not guarantee identical states (recurrence), so
  // substitute three literally identical state Vars.
  Var s = t.leaf(Tensor::vector({0.1, -0.5, 0.7, 0.2}));
  enc.states = {s, s, s};
  auto [alpha, ctx] = model.attend(t, t.leaf(Tensor::vector({0.4, 0.9})), enc);
  for (double a : t.value(alpha).data) EXPECT_NEAR(a, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(t.value(ctx).data[2], 0.7, 1e-12);
}

TEST(Attend, MatchesFormulaOracle) {
  std::mt19937_64 rng(21);
  TranslationModel model(tiny_config());
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5, 1});
  Var h_dec = t.leaf(Tensor::vector({0.25, -0.8}));
  auto [alpha, ctx] = model.attend(t, h_dec, enc);

  // Independent evaluation of score_i = V . tanh(W h_dec + U h_enc_i).
  Mat W = param_matrix(model.params().at("attn_w"));
  Mat U = param_matrix(model.params().at("attn_u"));
  Vec V = param_vector(model.params().at("attn_v"));
  Vec hd{0.25, -0.8};
  Vec scores;
  for (int i = 0; i < 3; ++i) {
    Vec wh = matvec_ref(W, hd);
    Vec ue = matvec_ref(U, t.value(enc.states[static_cast<std::size_t>(i)]).data);
    double s = 0.0;
    for (std::size_t k = 0; k < V.size(); ++k) s += V[k] * std::tanh(wh[k] + ue[k]);
    scores.push_back(s);
  }
  Vec a_ref = softmax_ref(scores);
  Vec c_ref(4, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 4; ++k)
      c_ref[static_cast<std::size_t>(k)] +=
          a_ref[static_cast<std::size_t>(i)] *
          t.value(enc.states[static_cast<std::size_t>(i)]).data[static_cast<std::size_t>(k)];
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(t.value(alpha).data[static_cast<std::size_t>(i)],
                a_ref[static_cast<std::size_t>(i)], 1e-10);
  for (int k = 0; k < 4; ++k)
    EXPECT_NEAR(t.value(ctx).data[static_cast<std::size_t>(k)],
                c_ref[static_cast<std::size_t>(k)], 1e-10);
}

TEST(DecodeStep, DistributionSumsToOne) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg = tiny_config();
    cfg.seed = 100 + static_cast<std::uint64_t>(trial);
    TranslationModel model(cfg);
    Tape t;
    EncoderStates enc = model.encode(t, {4, 5});
    DecoderState st = model.init_decoder(t, enc);
    FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc);
    double sa = 0.0, sp = 0.0;
    for (double v : t.value(step.alpha).data) sa += v;
    for (double v : t.value(step.p_dec).data) sp += v;
    EXPECT_NEAR(sa, 1.0, 1e-9);
    EXPECT_NEAR(sp, 1.0, 1e-9);
  }
}

TEST(DecodeStep, ZeroOutputAffineGivesUniform) {
  TranslationModel model(tiny_config());
  model.params().at("out_w").value = Tensor({6, 2});
  model.params().at("out_b").value = Tensor({6});
  Tape t;
  EncoderStates enc = model.encode(t, {4});
  DecoderState st = model.init_decoder(t, enc);
  FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc);
  for (double v : t.value(step.p_dec).data) EXPECT_NEAR(v, 1.0 / 6.0, 1e-12);
}

TEST(DecodeStep, MatchesHandEvaluation) {
  // Full independent re-evaluation of one decoder step (Eq. 3 with input
  // feeding) on a 6-slot toy vocab.
  TranslationModel model(tiny_config());
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5});
  DecoderState st = model.init_decoder(t, enc);
  FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc);

  auto& P = model.params();
  // Decoder init: tanh(W h_fwd_final + b), zero cell, zero feed.
  Vec h = matvec_ref(param_matrix(P.at("dec_init_l0_w")), t.value(enc.final_forward).data);
  for (std::size_t k = 0; k < h.size(); ++k)
    h[k] = std::tanh(h[k] + P.at("dec_init_l0_b").value.data[k]);
  Vec c(2, 0.0);
  // Input: [embed(BOS); feed=0].
  Vec x{P.at("tgt_embed").value.at2(Vocab::kBos, 0), P.at("tgt_embed").value.at2(Vocab::kBos, 1),
        0.0, 0.0};
  lstm_ref(param_matrix(P.at("dec_l0_w")), param_vector(P.at("dec_l0_b")), h, c, x);
  // Attention.
  Mat W = param_matrix(P.at("attn_w")), U = param_matrix(P.at("attn_u"));
  Vec V = param_vector(P.at("attn_v"));
  Vec scores;
  for (int i = 0; i < 2; ++i) {
    Vec wh = matvec_ref(W, h);
    Vec ue = matvec_ref(U, t.value(enc.states[static_cast<std::size_t>(i)]).data);
    double s = 0.0;
    for (std::size_t k = 0; k < V.size(); ++k) s += V[k] * std::tanh(wh[k] + ue[k]);
    scores.push_back(s);
  }
  Vec a = softmax_ref(scores);
  Vec ctx(4, 0.0);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k)
      ctx[static_cast<std::size_t>(k)] +=
          a[static_cast<std::size_t>(i)] *
          t.value(enc.states[static_cast<std::size_t>(i)]).data[static_cast<std::size_t>(k)];
  // Combine and output softmax.
  Vec cat = ctx;
  cat.insert(cat.end(), h.begin(), h.end());
  Vec hhat = matvec_ref(param_matrix(P.at("combine_w")), cat);
  for (double& v : hhat) v = std::tanh(v);
  Vec logits = matvec_ref(param_matrix(P.at("out_w")), hhat);
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += P.at("out_b").value.data[k];
  Vec p_ref = softmax_ref(logits);

  for (int w = 0; w < 6; ++w)
    EXPECT_NEAR(t.value(step.p_dec).data[static_cast<std::size_t>(w)],
                p_ref[static_cast<std::size_t>(w)], 1e-10);
  for (int k = 0; k < 2; ++k)
    EXPECT_NEAR(t.value(step.h_hat).data[static_cast<std::size_t>(k)],
                hhat[static_cast<std::size_t>(k)], 1e-10);
}

TEST(DecodeStep, BetaMatchesFormulaOracle) {
  TranslationModel model(tiny_config(Variant::kLexPgS));
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5, 1});
  DecoderState st = model.init_decoder(t, enc);
  FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc);
  ASSERT_TRUE(step.has_beta);

  Mat W = param_matrix(model.params().at("ptr_w"));
  Mat U = param_matrix(model.params().at("ptr_u"));
  Vec V = param_vector(model.params().at("ptr_v"));
  Vec hd = t.value(step.h_dec).data;
  Vec scores;
  for (int i = 0; i < 3; ++i) {
    Vec wh = matvec_ref(W, hd);
    Vec ue = matvec_ref(U, t.value(enc.states[static_cast<std::size_t>(i)]).data);
    double s = 0.0;
    for (std::size_t k = 0; k < V.size(); ++k) s += V[k] * std::tanh(wh[k] + ue[k]);
    scores.push_back(s);
  }
  Vec b_ref = softmax_ref(scores);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(t.value(step.beta).data[static_cast<std::size_t>(i)],
                b_ref[static_cast<std::size_t>(i)], 1e-10);
    sum += t.value(step.beta).data[static_cast<std::size_t>(i)];
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(DecodeStep, SigmoidGenMatchesFormula) {
  TranslationModel model(tiny_config(Variant::kPgCopy));
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5});
  DecoderState st = model.init_decoder(t, enc);
  FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc);
  ASSERT_TRUE(step.has_p_gen);
  Vec wg = param_vector(model.params().at("gen_w"));
  double z = model.params().at("gen_b").value.data[0];
  for (std::size_t k = 0; k < wg.size(); ++k) z += wg[k] * t.value(step.context).data[k];
  EXPECT_NEAR(t.scalar_value(step.p_gen), sigmoid_ref(z), 1e-12);
  EXPECT_GE(t.scalar_value(step.p_gen), 0.0);
  EXPECT_LE(t.scalar_value(step.p_gen), 1.0);
}

TEST(DecodeStep, JointSoftmaxHeadSumsToOne) {
  TranslationModel model(tiny_config(Variant::kLexPgF));
  for (int trial = 0; trial < 10; ++trial) {
    Tape t;
    EncoderStates enc = model.encode(t, {4, 5, 1});
    DecoderState st = model.init_decoder(t, enc);
    std::vector<Tensor> feats(3, Tensor::vector({1.0, 0.0, static_cast<double>(trial % 2)}));
    FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc, &feats);
    ASSERT_TRUE(step.has_pc);
    double total = t.scalar_value(step.p_gen);
    for (double v : t.value(step.pc).data) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5});
  DecoderState st = model.init_decoder(t, enc);
  EXPECT_THROW(model.decode_step(t, st, Vocab::kBos, enc), std::invalid_argument);
}

TEST(DecodeStep, FeatureContributionIsLinearPreActivation) {
  TranslationModel model(tiny_config(Variant::kLexPgF));
  Tape t;
  EncoderStates enc = model.encode(t, {4, 5});
  DecoderState st = model.init_decoder(t, enc);
  std::vector<Tensor> zeros(2, Tensor::vector({0.0, 0.0, 0.0}));
  std::vector<Tensor> ones(2, Tensor::vector({1.0, 1.0, 1.0}));
  FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc, &zeros);
  auto arg0 = model.pc_score_arguments(t, step.h_hat, enc, zeros);
  auto arg1 = model.pc_score_arguments(t, step.h_hat, enc, ones);
  const Parameter& o = model.params().at("pc_o");
  for (std::size_t i = 0; i < arg0.size(); ++i)
    for (int r = 0; r < o.value.shape[0]; ++r) {
      const double col_sum = o.value.at2(r, 0) + o.value.at2(r, 1) + o.value.at2(r, 2);
      EXPECT_NEAR(arg1[i][static_cast<std::size_t>(r)] - arg0[i][static_cast<std::size_t>(r)],
                  col_sum, 1e-12);
    }
}

TEST(Model, PureGivenParameters) {
  auto run = [](std::vector<double>& out) {
    TranslationModel model(tiny_config(Variant::kLexPgSf, 2));
    Tape t;
    EncoderStates enc = model.encode(t, {4, 5, 1, 4});
    DecoderState st = model.init_decoder(t, enc);
    std::vector<Tensor> feats(4, Tensor::vector({1.0, 0.0, 1.0}));
    FusionStepState step = model.decode_step(t, st, Vocab::kBos, enc, &feats);
    out = t.value(step.p_dec).data;
    const auto& pc = t.value(step.pc).data;
    out.insert(out.end(), pc.begin(), pc.end());
    out.push_back(t.scalar_value(step.p_gen));
  };
  std::vector<double> a, b;
  run(a);
  run(b);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Model, FullGradientCheckThroughEq123) {
  // Teacher-forced NLL through encoder, attention, and decoder on a
  // 3-sentence toy corpus; every parameter coordinate against central FD.
  ModelConfig cfg = tiny_config();
  cfg.seed = 42;
  TranslationModel model(cfg);
  const std::vector<std::vector<int>> srcs = {{4, 5}, {5}, {4, 5, 4}};
  const std::vector<std::vector<int>> tgts = {{2, 4, 3}, {2, 5, 3}, {2, 5, 4, 3}};
  auto build = [&](Tape& t) {
    Var loss = t.scalar_leaf(0.0);
    for (std::size_t s = 0; s < srcs.size(); ++s) {
      EncoderStates enc = model.encode(t, srcs[s]);
      DecoderState st = model.init_decoder(t, enc);
      for (std::size_t k = 0; k + 1 < tgts[s].size(); ++k) {
        FusionStepState step = model.decode_step(t, st, tgts[s][k], enc);
        loss = t.add(loss, t.neg(t.log_floor(t.pick(step.p_dec, tgts[s][k + 1]))));
      }
    }
    return loss;
  };
  EXPECT_LT(grad_check(model.params(), build), 1e-4);
}

TEST(ModelConfig, Validation) {
  ModelConfig cfg = tiny_config();
  cfg.hidden_dim = 0;
  EXPECT_THROW(TranslationModel{cfg}, std::invalid_argument);
  cfg = tiny_config();
  cfg.threshold = 1.5;
  EXPECT_THROW(TranslationModel{cfg}, std::invalid_argument);
  cfg = tiny_config();
  cfg.src_vocab = 2;
  EXPECT_THROW(TranslationModel{cfg}, std::invalid_argument);
  EXPECT_EQ(variant_from_name("lexpg_sf"), Variant::kLexPgSf);
  EXPECT_STREQ(variant_name(Variant::kLexPgF), "lexpg_f");
  EXPECT_THROW(variant_from_name("bogus"), std::invalid_argument);
}

TEST(Model, VariantParameterAllocation) {
  EXPECT_THROW(TranslationModel(tiny_config()).params().at("gen_w"), std::out_of_range);
  EXPECT_NO_THROW(TranslationModel(tiny_config(Variant::kPgCopy)).params().at("gen_w"));
  EXPECT_NO_THROW(TranslationModel(tiny_config(Variant::kLexPgS)).params().at("ptr_v"));
  EXPECT_NO_THROW(TranslationModel(tiny_config(Variant::kLexPgF)).params().at("pc_o"));
  TranslationModel sf(tiny_config(Variant::kLexPgSf));
  EXPECT_NO_THROW(sf.params().at("ptr_w"));
  EXPECT_NO_THROW(sf.params().at("pcgen_v"));
  EXPECT_THROW(sf.params().at("gen_w"), std::out_of_range);
}
