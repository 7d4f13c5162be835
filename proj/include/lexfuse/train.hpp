#pragma once

#include "lexfuse/bleu.hpp"
#include "lexfuse/decode.hpp"
#include "lexfuse/fusion.hpp"
#include "lexfuse/model.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace lexfuse {

struct TrainExample {
  std::vector<int> src_ids;
  std::vector<int> tgt_ids;  // <s> ... </s>
  TokenSeq src_tokens;
  TokenSeq tgt_tokens;
};

inline TrainExample make_example(const SentencePair& p, const Vocab& src, const Vocab& tgt) {
  return {src.encode(p.source), tgt.encode_target(p.target), p.source, p.target};
}

struct LossBreakdown {
  double nll_decoder = 0.0;
  double nll_fused = 0.0;
  double gamma_term = 0.0;
  double total = 0.0;  // plain sum of the three terms
  long long tokens = 0;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    nll_decoder += o.nll_decoder;
    nll_fused += o.nll_fused;
    gamma_term += o.gamma_term;
    total += o.total;
    tokens += o.tokens;
    return *this;
  }
};

struct SentenceLoss {
  LossBreakdown breakdown;
  Var total;  // scalar node; differentiate through this
  std::vector<std::shared_ptr<MixTable>> tables;  // must outlive backward()
};

// Teacher-forced loss for one sentence pair. The decoder term always scores
// the in-vocabulary gold (UNK when the surface is out); fused variants add
// the mixed-distribution NLL of the gold surface and a gate penalty
// -log(1 - p_gen) on exactly the steps whose gold falls outside the neural
// lexicon.
inline SentenceLoss step_loss(Tape& t, TranslationModel& model, const TrainExample& ex,
                              const BilingualLexicon& lex, const Vocab& tgt) {
  if (ex.tgt_ids.size() < 2) throw std::invalid_argument("target too short");
  const Variant variant = model.config().variant;
  EncoderStates enc = model.encode(t, ex.src_ids);
  std::vector<Tensor> features;
  const std::vector<Tensor>* feat = nullptr;
  if (uses_pc(variant)) {
    features = build_entry_features(ex.src_tokens, lex, tgt);
    feat = &features;
  }
  DecoderState st = model.init_decoder(t, enc);

  SentenceLoss out;
  const bool fused = trains_fused(variant);
  Var dec_sum, fused_sum, gamma_sum;
  bool have_dec = false, have_fused = false, have_gamma = false;
  auto acc = [&t](Var& sum, bool& have, Var term) {
    sum = have ? t.add(sum, term) : term;
    have = true;
  };

  for (std::size_t k = 0; k + 1 < ex.tgt_ids.size(); ++k) {
    const int y_prev = ex.tgt_ids[k];
    const int gold = ex.tgt_ids[k + 1];
    FusionStepState step = model.decode_step(t, st, y_prev, enc, feat);
    acc(dec_sum, have_dec, t.neg(t.log_floor(t.pick(step.p_dec, gold))));
    if (!fused) continue;

    ExtendedDistribution d = fused_distribution(t, variant, step, ex.src_tokens, lex, tgt);
    out.tables.push_back(d.table);
    const std::string& surface =
        k + 2 < ex.tgt_ids.size() ? ex.tgt_tokens[k] : std::string("</s>");
    const int slot = gold != Vocab::kUnk ? gold : d.slot_of(surface);
    // A gold surface absent from the extended vocabulary cannot be produced
    // by any head; it costs the probability floor, with no gradient path.
    Var term = slot >= 0 ? t.neg(t.log_floor(t.pick(d.probs, slot)))
                         : t.scalar_leaf(-std::log(kLogFloor));
    acc(fused_sum, have_fused, term);
    if (gold == Vocab::kUnk)
      acc(gamma_sum, have_gamma, t.neg(t.log_floor(t.one_minus(step.p_gen))));
  }

  Var total = dec_sum;
  out.breakdown.nll_decoder = t.scalar_value(dec_sum);
  if (have_fused) {
    total = t.add(total, fused_sum);
    out.breakdown.nll_fused = t.scalar_value(fused_sum);
  }
  if (have_gamma) {
    total = t.add(total, gamma_sum);
    out.breakdown.gamma_term = t.scalar_value(gamma_sum);
  }
  out.total = total;
  out.breakdown.total = t.scalar_value(total);
  out.breakdown.tokens = static_cast<long long>(ex.tgt_ids.size()) - 1;
  return out;
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 5.0;  // global gradient norm
};

class Adam {
 public:
  explicit Adam(ParamStore& params, AdamOptions opt = {}) : params_(&params), opt_(opt) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params[i].value.shape);
      v_.emplace_back(params[i].value.shape);
    }
  }

  // Clips the global norm, then applies one bias-corrected update. Consumes
  // the gradients as-is; the caller zeroes them between steps.
  void step() {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < params_->size(); ++i)
      norm2 += l2_norm_squared((*params_)[i].grad);
    if (!std::isfinite(norm2)) throw std::runtime_error("non-finite gradient norm");
    const double norm = std::sqrt(norm2);
    const double scale = norm > opt_.clip && norm > 0.0 ? opt_.clip / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_->size(); ++i) {
      Parameter& p = (*params_)[i];
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::size_t k = 0; k < p.value.numel(); ++k) {
        const double g = p.grad[k] * scale;
        m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g;
        v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g * g;
        p.value[k] -= opt_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt_.eps);
      }
    }
  }

  long long updates() const { return t_; }

 private:
  ParamStore* params_;
  AdamOptions opt_;
  std::vector<Tensor> m_, v_;
  long long t_ = 0;
};

struct TrainOptions {
  int max_epochs = 30;
  int batch_size = 16;
  int patience = 5;  // epochs without a dev BLEU improvement
  int max_len = 100;
  int dev_beam = 1;
  AdamOptions adam;
  std::ostream* metrics = nullptr;  // one structured line per epoch
};

struct TrainResult {
  double best_dev_bleu = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

// Bucketed mini-batch training with dev-BLEU early stopping; the model is
// left holding the best-scoring epoch's parameters, not the last ones.
inline TrainResult train_model(TranslationModel& model, const ParallelCorpus& train_corpus,
                               const ParallelCorpus& dev_corpus, const BilingualLexicon& lex,
                               const Vocab& src_vocab, const Vocab& tgt_vocab,
                               const TrainOptions& opt = {}) {
  ParallelCorpus train = train_corpus.filtered(static_cast<std::size_t>(opt.max_len));
  if (train.pairs.empty()) throw std::invalid_argument("no training pairs under length cap");
  if (dev_corpus.pairs.empty()) throw std::invalid_argument("empty dev set");
  if (opt.batch_size < 1 || opt.max_epochs < 1 || opt.patience < 1)
    throw std::invalid_argument("bad training options");

  std::vector<TrainExample> examples;
  examples.reserve(train.pairs.size());
  for (const auto& p : train.pairs) examples.push_back(make_example(p, src_vocab, tgt_vocab));
  // Bucket by target length so batch graphs stay size-homogeneous.
  std::stable_sort(examples.begin(), examples.end(), [](const auto& a, const auto& b) {
    return a.tgt_ids.size() < b.tgt_ids.size();
  });
  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t b = 0; b < examples.size(); b += static_cast<std::size_t>(opt.batch_size))
    batches.emplace_back(b,
                         std::min(examples.size(), b + static_cast<std::size_t>(opt.batch_size)));

  std::vector<TokenSeq> dev_src = dev_corpus.source_side();
  std::vector<TokenSeq> dev_ref = dev_corpus.target_side();

  model.seed_dropout(model.config().seed);
  model.set_train(true);
  Adam adam(model.params(), opt.adam);
  std::mt19937_64 order_rng(model.config().seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result;
  std::vector<Tensor> best_values;
  int stale = 0;
  const auto started = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng);

    model.set_train(true);
    LossBreakdown epoch_loss;
    for (std::size_t bi : order) {
      Tape t;
      model.params().zero_grads();
      Var total;
      bool have = false;
      std::vector<std::shared_ptr<MixTable>> keep;
      for (std::size_t i = batches[bi].first; i < batches[bi].second; ++i) {
        SentenceLoss sl = step_loss(t, model, examples[i], lex, tgt_vocab);
        epoch_loss += sl.breakdown;
        for (auto& tb : sl.tables) keep.push_back(std::move(tb));
        total = have ? t.add(total, sl.total) : sl.total;
        have = true;
      }
      t.backward(total);
      adam.step();
    }

    std::vector<TokenSeq> dev_hyp;
    {
      TranslateOptions topt;
      topt.beam = opt.dev_beam;
      dev_hyp = translate_corpus(model, dev_src, src_vocab, tgt_vocab, lex, topt);
    }
    // Smoothed so sparse early epochs still produce a usable signal.
    const double dev_bleu = bleu(dev_hyp, dev_ref, true).bleu;

    result.epochs_run = epoch;
    const double tok = static_cast<double>(std::max<long long>(epoch_loss.tokens, 1));
    if (opt.metrics != nullptr) {
      nlohmann::json row;
      row["epoch"] = epoch;
      row["nll_decoder"] = epoch_loss.nll_decoder / tok;
      row["nll_fused"] = epoch_loss.nll_fused / tok;
      row["gamma_term"] = epoch_loss.gamma_term / tok;
      row["dev_bleu"] = dev_bleu;
      row["wall_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      (*opt.metrics) << row.dump() << '\n';
    }

    if (result.best_epoch < 0 || dev_bleu > result.best_dev_bleu) {
      result.best_dev_bleu = dev_bleu;
      result.best_epoch = epoch;
      stale = 0;
      best_values.clear();
      for (std::size_t i = 0; i < model.params().size(); ++i)
        best_values.push_back(model.params()[i].value);
    } else if (++stale >= opt.patience) {
      break;
    }
  }

  for (std::size_t i = 0; i < best_values.size(); ++i)
    model.params()[i].value = best_values[i];
  model.set_train(false);
  return result;
}

}  // namespace lexfuse
