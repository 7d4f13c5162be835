// lexfuse command-line front end: dictionary extraction, training, decoding,
// evaluation, and artifact inspection.  Every verb reads its inputs, writes
// its declared artifact, and exits 0 only once that artifact is complete.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lexfuse/align.hpp"
#include "lexfuse/bleu.hpp"
#include "lexfuse/bpe.hpp"
#include "lexfuse/checkpoint.hpp"
#include "lexfuse/config.hpp"
#include "lexfuse/decode.hpp"
#include "lexfuse/train.hpp"

namespace {

using lexfuse::TokenSeq;

std::vector<TokenSeq> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<TokenSeq> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(lexfuse::split_tokens(line));
  return lines;
}

std::vector<std::string> read_raw_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_token_lines(const std::string& path, const std::vector<TokenSeq>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& l : lines) out << lexfuse::join_tokens(l) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// align: bidirectional IBM-1 (optionally HMM-refined) word alignments.

struct AlignArgs {
  std::string src, tgt, out;
  int iterations = 5;
  bool hmm = false;
  int hmm_iterations = 3;
};

int run_align(const AlignArgs& a) {
  lexfuse::ParallelCorpus corpus = lexfuse::ParallelCorpus::load(a.src, a.tgt);
  if (corpus.pairs.empty()) throw std::runtime_error("no usable sentence pairs");
  std::vector<lexfuse::AlignmentLinks> links =
      lexfuse::align_corpus(corpus, a.iterations, a.hmm, a.hmm_iterations);
  std::ofstream out = open_out(a.out);
  for (const auto& l : links) out << lexfuse::to_pharaoh(l) << '\n';
  finish_out(out, a.out);
  std::cout << "aligned " << links.size() << " sentence pairs -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// dict-build: intersected alignment links + counts -> scored lexicon TSV.

struct DictBuildArgs {
  std::string src, tgt, links, out;
  int min_count = 2;
};

int run_dict_build(const DictBuildArgs& a) {
  lexfuse::ParallelCorpus corpus = lexfuse::ParallelCorpus::load(a.src, a.tgt);
  std::vector<std::string> lines = read_raw_lines(a.links);
  if (lines.size() != corpus.pairs.size()) {
    throw std::runtime_error("link file has " + std::to_string(lines.size()) +
                             " lines but the corpus has " + std::to_string(corpus.pairs.size()) +
                             " usable pairs");
  }
  std::vector<lexfuse::AlignmentLinks> links;
  links.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& p = corpus.pairs[i];
    links.push_back(lexfuse::from_pharaoh(lines[i], static_cast<int>(p.source.size()),
                                          static_cast<int>(p.target.size())));
  }
  lexfuse::BilingualLexicon lex = lexfuse::extract_dictionary(corpus, links, a.min_count);
  lex.save(a.out);
  std::cout << "dictionary with " << lex.source_count() << " source entries -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// dict-merge: hot-swap helper; later files win on (source, target) conflicts.

struct DictMergeArgs {
  std::string base, add, out;
};

int run_dict_merge(const DictMergeArgs& a) {
  lexfuse::BilingualLexicon base = lexfuse::BilingualLexicon::load(a.base);
  lexfuse::BilingualLexicon add = lexfuse::BilingualLexicon::load(a.add);
  lexfuse::BilingualLexicon merged = base.merged(add);
  merged.save(a.out);
  std::cout << "merged " << base.source_count() << " + " << add.source_count() << " -> "
            << merged.source_count() << " source entries (" << a.out << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bpe-learn / bpe-apply: subword segmentation round trip.

struct BpeLearnArgs {
  std::string input, out;
  int merges = 1000;
};

int run_bpe_learn(const BpeLearnArgs& a) {
  std::vector<TokenSeq> side = read_token_lines(a.input);
  lexfuse::BpeModel model = lexfuse::bpe_learn(side, a.merges);
  model.save(a.out);
  std::cout << "learned " << model.merges.size() << " merges -> " << a.out << '\n';
  return 0;
}

struct BpeApplyArgs {
  std::string model, input, output;
  bool reverse = false;
};

int run_bpe_apply(const BpeApplyArgs& a) {
  std::vector<TokenSeq> lines = read_token_lines(a.input);
  std::vector<TokenSeq> out;
  out.reserve(lines.size());
  if (a.reverse) {
    for (const auto& l : lines) out.push_back(lexfuse::bpe_merge_back(l));
  } else {
    if (a.model.empty()) throw std::runtime_error("--model is required unless --reverse is set");
    lexfuse::BpeModel model = lexfuse::BpeModel::load(a.model);
    for (const auto& l : lines) out.push_back(lexfuse::bpe_apply(l, model));
  }
  write_token_lines(a.output, out);
  std::cout << (a.reverse ? "restored " : "segmented ") << lines.size() << " lines -> " << a.output
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train: build vocabularies, fit the configured variant, save a checkpoint.

lexfuse::BilingualLexicon load_lexicon_for(const lexfuse::RunConfig& cfg) {
  if (!cfg.dict.empty()) return lexfuse::BilingualLexicon::load(cfg.dict);
  if (lexfuse::uses_dictionary(lexfuse::variant_from_name(cfg.variant))) {
    throw std::runtime_error("variant " + cfg.variant + " needs a dictionary (--dict or dict=)");
  }
  return {};
}

int run_train(const lexfuse::RunConfig& cfg) {
  if (cfg.train_src.empty() || cfg.train_tgt.empty())
    throw std::runtime_error("train_src and train_tgt are required");
  if (cfg.dev_src.empty() || cfg.dev_tgt.empty())
    throw std::runtime_error("dev_src and dev_tgt are required");
  if (cfg.checkpoint.empty()) throw std::runtime_error("checkpoint path is required");

  lexfuse::ParallelCorpus train = lexfuse::ParallelCorpus::load(cfg.train_src, cfg.train_tgt);
  lexfuse::ParallelCorpus dev = lexfuse::ParallelCorpus::load(cfg.dev_src, cfg.dev_tgt);

  std::vector<TokenSeq> src_side, tgt_side;
  src_side.reserve(train.pairs.size());
  tgt_side.reserve(train.pairs.size());
  for (const auto& p : train.pairs) {
    src_side.push_back(p.source);
    tgt_side.push_back(p.target);
  }
  lexfuse::Vocab src_vocab = lexfuse::Vocab::build(src_side, cfg.lexbar);
  lexfuse::Vocab tgt_vocab = lexfuse::Vocab::build(tgt_side, cfg.lexbar);
  lexfuse::BilingualLexicon lex = load_lexicon_for(cfg);

  lexfuse::TranslationModel model(cfg.model_config(src_vocab.size(), tgt_vocab.size()));

  lexfuse::TrainOptions topt = cfg.train_options();
  std::ofstream metrics;
  if (!cfg.metrics.empty()) {
    metrics = open_out(cfg.metrics);
    topt.metrics = &metrics;
  }

  lexfuse::TrainResult res = lexfuse::train_model(model, train, dev, lex, src_vocab, tgt_vocab, topt);
  if (topt.metrics != nullptr) finish_out(metrics, cfg.metrics);
  lexfuse::save_checkpoint(cfg.checkpoint, model, src_vocab, tgt_vocab);

  std::cout << "variant=" << cfg.variant << " src_vocab=" << src_vocab.size()
            << " tgt_vocab=" << tgt_vocab.size() << " best_dev_bleu=" << std::fixed
            << std::setprecision(2) << res.best_dev_bleu << " best_epoch=" << res.best_epoch
            << " epochs_run=" << res.epochs_run << " checkpoint=" << cfg.checkpoint << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// translate: load a checkpoint and decode a file, optionally with a swapped
// dictionary, a trace sidecar, and subword restitching.

struct TranslateArgs {
  std::string checkpoint, input, output, dict, trace;
  int beam = -1;         // -1: keep the checkpoint's configured beam of 1
  int max_steps = -1;
  double threshold = -1.0;  // <0: keep the checkpoint's threshold
  bool soft_gate = false;
  bool hard_gate = false;
  bool merge_back = false;
};

int run_translate(const TranslateArgs& a) {
  lexfuse::LoadedModel lm = lexfuse::load_checkpoint(a.checkpoint);
  if (a.threshold >= 0.0) lm.model->set_threshold(a.threshold);
  if (a.soft_gate) lm.model->set_soft_gate(true);
  if (a.hard_gate) lm.model->set_soft_gate(false);

  lexfuse::BilingualLexicon lex;
  if (!a.dict.empty()) lex = lexfuse::BilingualLexicon::load(a.dict);

  std::vector<TokenSeq> sources = read_token_lines(a.input);

  lexfuse::TranslateOptions topt;
  if (a.beam > 0) topt.beam = a.beam;
  topt.max_steps = a.max_steps;
  topt.merge_back = a.merge_back;
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace = open_out(a.trace);
    topt.trace = &trace;
  }

  std::vector<TokenSeq> out =
      lexfuse::translate_corpus(*lm.model, sources, lm.src_vocab, lm.tgt_vocab, lex, topt);
  if (topt.trace != nullptr) finish_out(trace, a.trace);
  write_token_lines(a.output, out);
  std::cout << "translated " << sources.size() << " lines -> " << a.output << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval: corpus BLEU, or dictionary coverage diagnostics with --coverage.

struct EvalArgs {
  std::string hyp, ref;
  bool smooth = false;
  bool json = false;
  bool coverage = false;
  std::string src, tgt, dict;
  long long lexbar = 2;
};

int run_eval(const EvalArgs& a) {
  if (a.coverage) {
    if (a.src.empty() || a.tgt.empty() || a.dict.empty())
      throw std::runtime_error("--coverage needs --src, --tgt, and --dict");
    lexfuse::ParallelCorpus corpus = lexfuse::ParallelCorpus::load(a.src, a.tgt);
    std::vector<TokenSeq> src_side, tgt_side;
    for (const auto& p : corpus.pairs) {
      src_side.push_back(p.source);
      tgt_side.push_back(p.target);
    }
    lexfuse::Vocab sv = lexfuse::Vocab::build(src_side, a.lexbar);
    lexfuse::Vocab tv = lexfuse::Vocab::build(tgt_side, a.lexbar);
    lexfuse::BilingualLexicon lex = lexfuse::BilingualLexicon::load(a.dict);
    lexfuse::CoverageReport r = lexfuse::coverage_report(corpus, sv, tv, lex);
    if (a.json) {
      nlohmann::json j = {{"lexbar", a.lexbar},
                          {"src_nlex_size", r.src_nlex_size},
                          {"tgt_nlex_size", r.tgt_nlex_size},
                          {"src_unk_types", r.src_unk_types},
                          {"tgt_unk_types", r.tgt_unk_types},
                          {"covered_unk_types", r.covered_unk_types},
                          {"coverage_fraction", r.coverage_fraction},
                          {"shared_types", r.shared_types}};
      std::cout << j.dump() << '\n';
    } else {
      std::cout << "lexbar " << a.lexbar << ": neural lexicons " << r.src_nlex_size << " src / "
                << r.tgt_nlex_size << " tgt; unk types " << r.src_unk_types << " src / "
                << r.tgt_unk_types << " tgt; dictionary covers " << r.covered_unk_types << "/"
                << r.src_unk_types << " src unk types (" << std::fixed << std::setprecision(3)
                << r.coverage_fraction << "); " << r.shared_types
                << " source types reappear on the target side\n";
    }
    return 0;
  }

  if (a.hyp.empty() || a.ref.empty()) throw std::runtime_error("--hyp and --ref are required");
  std::vector<TokenSeq> hyps = read_token_lines(a.hyp);
  std::vector<TokenSeq> refs = read_token_lines(a.ref);
  lexfuse::BleuReport r = lexfuse::bleu(hyps, refs, a.smooth);
  if (a.json) {
    nlohmann::json j = {{"bleu", r.bleu},
                        {"precisions", r.precisions},
                        {"brevity_penalty", r.brevity_penalty},
                        {"hyp_len", r.hyp_len},
                        {"ref_len", r.ref_len},
                        {"smooth", a.smooth}};
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "BLEU = " << std::fixed << std::setprecision(2) << r.bleu << "  (";
    for (int n = 0; n < 4; ++n)
      std::cout << std::setprecision(1) << 100.0 * r.precisions[n] << (n < 3 ? "/" : "");
    std::cout << ", BP=" << std::setprecision(3) << r.brevity_penalty << ", hyp_len=" << r.hyp_len
              << ", ref_len=" << r.ref_len << ")\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sweep-lexbar: retrain one variant across neural-lexicon sizes and tabulate
// BLEU against dictionary coverage.

struct SweepArgs {
  std::string config, out, grid;
};

std::vector<long long> parse_grid(const std::string& grid) {
  std::vector<long long> bars;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = std::stoll(item, &pos);
    if (pos != item.size() || v < 1) throw std::runtime_error("bad lexbar grid entry: " + item);
    bars.push_back(v);
  }
  if (bars.empty()) throw std::runtime_error("empty lexbar grid");
  return bars;
}

int run_sweep(const SweepArgs& a) {
  lexfuse::RunConfig cfg = lexfuse::RunConfig::resolve(a.config);
  if (cfg.train_src.empty() || cfg.train_tgt.empty() || cfg.dev_src.empty() ||
      cfg.dev_tgt.empty() || cfg.test_src.empty() || cfg.test_tgt.empty()) {
    throw std::runtime_error("sweep-lexbar needs train, dev, and test paths in the config");
  }
  std::vector<long long> bars = parse_grid(a.grid);

  lexfuse::ParallelCorpus train = lexfuse::ParallelCorpus::load(cfg.train_src, cfg.train_tgt);
  lexfuse::ParallelCorpus dev = lexfuse::ParallelCorpus::load(cfg.dev_src, cfg.dev_tgt);
  lexfuse::ParallelCorpus test = lexfuse::ParallelCorpus::load(cfg.test_src, cfg.test_tgt);
  lexfuse::BilingualLexicon lex = load_lexicon_for(cfg);

  std::vector<TokenSeq> src_side, tgt_side, test_src, test_refs;
  for (const auto& p : train.pairs) {
    src_side.push_back(p.source);
    tgt_side.push_back(p.target);
  }
  for (const auto& p : test.pairs) {
    test_src.push_back(p.source);
    test_refs.push_back(p.target);
  }

  std::ofstream out = open_out(a.out);
  out << "lexbar\tsrc_vocab\ttgt_vocab\tdev_bleu\ttest_bleu\tsrc_unk_types\tcoverage\n";
  std::cout << "lexbar  src_vocab  tgt_vocab  dev_bleu  test_bleu  unk_types  coverage\n";
  for (long long bar : bars) {
    lexfuse::Vocab sv = lexfuse::Vocab::build(src_side, bar);
    lexfuse::Vocab tv = lexfuse::Vocab::build(tgt_side, bar);
    lexfuse::TranslationModel model(cfg.model_config(sv.size(), tv.size()));
    lexfuse::TrainResult res =
        lexfuse::train_model(model, train, dev, lex, sv, tv, cfg.train_options());

    lexfuse::TranslateOptions topt;
    topt.beam = cfg.beam;
    std::vector<TokenSeq> hyps = lexfuse::translate_corpus(model, test_src, sv, tv, lex, topt);
    double test_bleu = lexfuse::bleu(hyps, test_refs, cfg.smooth_bleu).bleu;
    lexfuse::CoverageReport cov = lexfuse::coverage_report(test, sv, tv, lex);

    out << bar << '\t' << sv.size() << '\t' << tv.size() << '\t' << std::fixed
        << std::setprecision(4) << res.best_dev_bleu << '\t' << test_bleu << '\t'
        << cov.src_unk_types << '\t' << cov.coverage_fraction << '\n';
    std::cout << std::setw(6) << bar << "  " << std::setw(9) << sv.size() << "  " << std::setw(9)
              << tv.size() << "  " << std::setw(8) << std::fixed << std::setprecision(2)
              << res.best_dev_bleu << "  " << std::setw(9) << test_bleu << "  " << std::setw(9)
              << cov.src_unk_types << "  " << std::setw(8) << std::setprecision(3)
              << cov.coverage_fraction << '\n';
  }
  finish_out(out, a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// inspect: human-readable views of checkpoints, dictionaries, and traces.

struct InspectArgs {
  std::string checkpoint, dict, trace;
  bool size = false;
  bool json = false;
};

int run_inspect(const InspectArgs& a) {
  if (a.checkpoint.empty() && a.dict.empty() && a.trace.empty())
    throw std::runtime_error("nothing to inspect: pass --checkpoint, --dict, or --trace");

  if (!a.trace.empty()) {
    std::ifstream in(a.trace);
    if (!in) throw std::runtime_error("cannot open " + a.trace);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      std::cout << "line " << j.at("line").get<long long>() << ":\n";
      for (const auto& s : j.at("steps")) {
        std::cout << "  " << s.at("token").get<std::string>() << " ["
                  << s.at("provenance").get<std::string>() << "]";
        if (!s.at("p_gen").is_null()) {
          std::cout << " p_gen=" << std::fixed << std::setprecision(3)
                    << s.at("p_gen").get<double>();
        }
        long long att = s.at("attended").get<long long>();
        if (att >= 0) std::cout << " attended=" << att;
        std::cout << '\n';
      }
    }
    return 0;
  }

  std::uintmax_t ckpt_bytes = 0;
  std::size_t param_values = 0;
  lexfuse::RunConfig summary;  // reused only as a bag of printable fields
  nlohmann::json j;
  if (!a.checkpoint.empty()) {
    lexfuse::LoadedModel lm = lexfuse::load_checkpoint(a.checkpoint);
    ckpt_bytes = std::filesystem::file_size(a.checkpoint);
    param_values = lm.model->params().value_count();
    const lexfuse::ModelConfig& c = lm.model->config();
    j["checkpoint"] = {{"path", a.checkpoint},
                       {"variant", lexfuse::variant_name(c.variant)},
                       {"embedding_dim", c.embedding_dim},
                       {"hidden_dim", c.hidden_dim},
                       {"layers", c.layers},
                       {"threshold", c.threshold},
                       {"soft_gate", c.soft_gate},
                       {"dropout", c.dropout},
                       {"seed", c.seed},
                       {"src_vocab", c.src_vocab},
                       {"tgt_vocab", c.tgt_vocab},
                       {"parameters", param_values},
                       {"bytes", ckpt_bytes}};
    if (!a.json && !a.size) {
      std::cout << "checkpoint " << a.checkpoint << ": variant="
                << lexfuse::variant_name(c.variant) << " emb=" << c.embedding_dim
                << " hidden=" << c.hidden_dim << " layers=" << c.layers
                << " threshold=" << c.threshold << " soft_gate=" << (c.soft_gate ? "on" : "off")
                << " seed=" << c.seed << " src_vocab=" << c.src_vocab
                << " tgt_vocab=" << c.tgt_vocab << " parameters=" << param_values << '\n';
    }
  }
  std::uintmax_t dict_bytes = 0;
  if (!a.dict.empty()) {
    lexfuse::BilingualLexicon lex = lexfuse::BilingualLexicon::load(a.dict);
    dict_bytes = std::filesystem::file_size(a.dict);
    j["dictionary"] = {{"path", a.dict},
                       {"source_entries", lex.source_count()},
                       {"bytes", dict_bytes}};
    if (!a.json && !a.size) {
      std::cout << "dictionary " << a.dict << ": " << lex.source_count() << " source entries, "
                << dict_bytes << " bytes\n";
    }
  }
  if (a.size) {
    if (a.json) {
      std::cout << j.dump() << '\n';
    } else {
      if (!a.checkpoint.empty())
        std::cout << "checkpoint: " << param_values << " parameter values, " << ckpt_bytes
                  << " bytes\n";
      if (!a.dict.empty()) std::cout << "dictionary: " << dict_bytes << " bytes\n";
      if (!a.checkpoint.empty() && !a.dict.empty() && dict_bytes > 0) {
        std::cout << "checkpoint/dictionary byte ratio: " << std::fixed << std::setprecision(2)
                  << static_cast<double>(ckpt_bytes) / static_cast<double>(dict_bytes) << '\n';
      }
    }
  } else if (a.json) {
    std::cout << j.dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lexfuse: neural machine translation fused with a bilingual dictionary"};
  app.require_subcommand(1);

  AlignArgs al;
  CLI::App* align = app.add_subcommand("align", "word-align a parallel corpus (pharaoh output)");
  align->add_option("--src", al.src, "source side, one tokenized sentence per line")->required();
  align->add_option("--tgt", al.tgt, "target side, one tokenized sentence per line")->required();
  align->add_option("--out", al.out, "output link file; lines follow the kept non-empty pairs")
      ->required();
  align->add_option("--iterations", al.iterations, "EM iterations (default 5)");
  align->add_flag("--hmm", al.hmm, "refine with an HMM alignment pass");
  align->add_option("--hmm-iterations", al.hmm_iterations, "HMM EM iterations (default 3)");

  DictBuildArgs db;
  CLI::App* dictb = app.add_subcommand("dict-build", "turn alignment links into a dictionary");
  dictb->add_option("--src", db.src, "source side of the aligned corpus")->required();
  dictb->add_option("--tgt", db.tgt, "target side of the aligned corpus")->required();
  dictb->add_option("--links", db.links, "pharaoh link file from `lexfuse align`")->required();
  dictb->add_option("--out", db.out, "output dictionary TSV")->required();
  dictb->add_option("--min-count", db.min_count, "drop pairs linked fewer times (default 2)");

  DictMergeArgs dm;
  CLI::App* dictm = app.add_subcommand("dict-merge", "merge two dictionaries (additions win)");
  dictm->add_option("--base", dm.base, "base dictionary TSV")->required();
  dictm->add_option("--add", dm.add, "additional entries TSV")->required();
  dictm->add_option("--out", dm.out, "merged output TSV")->required();

  BpeLearnArgs bl;
  CLI::App* bpel = app.add_subcommand("bpe-learn", "learn a subword merge table");
  bpel->add_option("--input", bl.input, "tokenized text, one sentence per line")->required();
  bpel->add_option("--merges", bl.merges, "number of merges to learn (default 1000)");
  bpel->add_option("--out", bl.out, "output merge table")->required();

  BpeApplyArgs ba;
  CLI::App* bpea = app.add_subcommand("bpe-apply", "segment text with a merge table");
  bpea->add_option("--model", ba.model, "merge table from `lexfuse bpe-learn`");
  bpea->add_option("--input", ba.input, "input text")->required();
  bpea->add_option("--output", ba.output, "segmented output")->required();
  bpea->add_flag("--reverse", ba.reverse, "undo segmentation instead (no --model needed)");

  lexfuse::RunConfig tc;
  std::string train_config;
  CLI::App* train = app.add_subcommand("train", "train a translation model");
  train->add_option("--config", train_config, "config file (else $LEXFUSE_CONFIG, else defaults)");
  auto* o_train_src = train->add_option("--train-src", tc.train_src, "training source file");
  auto* o_train_tgt = train->add_option("--train-tgt", tc.train_tgt, "training target file");
  auto* o_dev_src = train->add_option("--dev-src", tc.dev_src, "dev source file");
  auto* o_dev_tgt = train->add_option("--dev-tgt", tc.dev_tgt, "dev target file");
  auto* o_dict = train->add_option("--dict", tc.dict, "dictionary TSV");
  auto* o_ckpt = train->add_option("--checkpoint", tc.checkpoint, "output checkpoint path");
  auto* o_metrics = train->add_option("--metrics", tc.metrics, "per-epoch JSONL metrics path");
  auto* o_variant = train->add_option("--variant", tc.variant,
                                      "baseline|pn_copy|lexpn|pg_copy|lexpg|lexpg_s|lexpg_f|lexpg_sf");
  auto* o_seed = train->add_option("--seed", tc.seed, "RNG seed");
  auto* o_lexbar = train->add_option("--lexbar", tc.lexbar, "neural lexicon frequency bar");
  auto* o_thresh = train->add_option("--threshold", tc.threshold, "gate threshold in [0,1]");
  auto* o_soft = train->add_flag("--soft-gate", tc.soft_gate, "decode from the mixed distribution");
  auto* o_emb = train->add_option("--embedding-dim", tc.embedding_dim, "embedding size");
  auto* o_hid = train->add_option("--hidden-dim", tc.hidden_dim, "LSTM state size");
  auto* o_layers = train->add_option("--layers", tc.layers, "encoder/decoder depth");
  auto* o_drop = train->add_option("--dropout", tc.dropout, "dropout rate");
  auto* o_batch = train->add_option("--batch-size", tc.batch_size, "sentences per batch");
  auto* o_epochs = train->add_option("--max-epochs", tc.max_epochs, "epoch cap");
  auto* o_patience = train->add_option("--patience", tc.patience, "early-stopping patience");
  auto* o_lr = train->add_option("--lr", tc.lr, "Adam learning rate");
  auto* o_maxlen = train->add_option("--max-len", tc.max_len, "training length cap");
  auto* o_dev_beam = train->add_option("--beam", tc.beam, "dev-decode beam width");

  TranslateArgs tr;
  CLI::App* trans = app.add_subcommand("translate", "decode a file with a trained checkpoint");
  trans->add_option("--checkpoint", tr.checkpoint, "model checkpoint")->required();
  trans->add_option("--input", tr.input, "tokenized source file")->required();
  trans->add_option("--output", tr.output, "output translation file")->required();
  trans->add_option("--dict", tr.dict, "dictionary TSV (hot-swappable at decode time)");
  trans->add_option("--beam", tr.beam, "beam width (default 1 = greedy)");
  trans->add_option("--max-steps", tr.max_steps, "length cap override");
  trans->add_option("--threshold", tr.threshold, "gate threshold override");
  trans->add_flag("--soft-gate", tr.soft_gate, "decode from the mixed distribution");
  trans->add_flag("--hard-gate", tr.hard_gate, "force threshold gating even if trained soft");
  trans->add_flag("--merge-back", tr.merge_back, "undo subword segmentation in the output");
  trans->add_option("--trace", tr.trace, "write per-step provenance JSONL here");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "score translations (BLEU) or dictionary coverage");
  eval->add_option("--hyp", ev.hyp, "hypothesis file");
  eval->add_option("--ref", ev.ref, "reference file");
  eval->add_flag("--smooth", ev.smooth, "add-one smoothing on all n-gram orders");
  eval->add_flag("--json", ev.json, "emit a JSON object instead of text");
  eval->add_flag("--coverage", ev.coverage, "report dictionary coverage instead of BLEU");
  eval->add_option("--src", ev.src, "corpus source side (coverage mode)");
  eval->add_option("--tgt", ev.tgt, "corpus target side (coverage mode)");
  eval->add_option("--dict", ev.dict, "dictionary TSV (coverage mode)");
  eval->add_option("--lexbar", ev.lexbar, "neural lexicon bar (coverage mode, default 2)");

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("sweep-lexbar", "retrain across neural lexicon sizes");
  sweep->add_option("--config", sw.config, "config file with train/dev/test paths");
  sweep->add_option("--out", sw.out, "output TSV table")->required();
  sweep->add_option("--grid", sw.grid, "comma-separated lexbar values")
      ->default_val("2,3,4,6,8,12,16,24,32");

  InspectArgs in;
  CLI::App* insp = app.add_subcommand("inspect", "summarize checkpoints, dictionaries, traces");
  insp->add_option("--checkpoint", in.checkpoint, "checkpoint to summarize");
  insp->add_option("--dict", in.dict, "dictionary to summarize");
  insp->add_option("--trace", in.trace, "render a provenance trace JSONL");
  insp->add_flag("--size", in.size, "report artifact sizes (for model-vs-dictionary budgets)");
  insp->add_flag("--json", in.json, "emit a JSON object instead of text");

  try {
    app.parse(argc, argv);
    if (align->parsed()) return run_align(al);
    if (dictb->parsed()) return run_dict_build(db);
    if (dictm->parsed()) return run_dict_merge(dm);
    if (bpel->parsed()) return run_bpe_learn(bl);
    if (bpea->parsed()) return run_bpe_apply(ba);
    if (train->parsed()) {
      lexfuse::RunConfig cfg = lexfuse::RunConfig::resolve(train_config);
      if (*o_train_src) cfg.train_src = tc.train_src;
      if (*o_train_tgt) cfg.train_tgt = tc.train_tgt;
      if (*o_dev_src) cfg.dev_src = tc.dev_src;
      if (*o_dev_tgt) cfg.dev_tgt = tc.dev_tgt;
      if (*o_dict) cfg.dict = tc.dict;
      if (*o_ckpt) cfg.checkpoint = tc.checkpoint;
      if (*o_metrics) cfg.metrics = tc.metrics;
      if (*o_variant) cfg.set("variant", tc.variant);  // reuse the name check
      if (*o_seed) cfg.seed = tc.seed;
      if (*o_lexbar) cfg.lexbar = tc.lexbar;
      if (*o_thresh) cfg.threshold = tc.threshold;
      if (*o_soft) cfg.soft_gate = true;
      if (*o_emb) cfg.embedding_dim = tc.embedding_dim;
      if (*o_hid) cfg.hidden_dim = tc.hidden_dim;
      if (*o_layers) cfg.layers = tc.layers;
      if (*o_drop) cfg.dropout = tc.dropout;
      if (*o_batch) cfg.batch_size = tc.batch_size;
      if (*o_epochs) cfg.max_epochs = tc.max_epochs;
      if (*o_patience) cfg.patience = tc.patience;
      if (*o_lr) cfg.lr = tc.lr;
      if (*o_maxlen) cfg.max_len = tc.max_len;
      if (*o_dev_beam) cfg.beam = tc.beam;
      return run_train(cfg);
    }
    if (trans->parsed()) return run_translate(tr);
    if (eval->parsed()) return run_eval(ev);
    if (sweep->parsed()) return run_sweep(sw);
    if (insp->parsed()) return run_inspect(in);
    throw std::runtime_error("no subcommand");
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
