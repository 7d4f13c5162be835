#pragma once

#include "lexfuse/model.hpp"
#include "lexfuse/train.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lexfuse {

inline constexpr const char* kConfigEnvVar = "LEXFUSE_CONFIG";

// Flat "key = value" run configuration shared by the CLI verbs. '#' starts a
// comment, unknown keys are rejected, later assignments win, and command-line
// flags override file values.
struct RunConfig {
  // model
  int embedding_dim = 256;
  int hidden_dim = 256;
  int layers = 2;
  std::string variant = "baseline";
  double threshold = 0.5;
  bool soft_gate = false;
  double dropout = 0.2;
  std::uint64_t seed = 1;
  long long lexbar = 2;
  // training
  int batch_size = 16;
  int max_epochs = 30;
  int patience = 5;
  int max_len = 100;
  double lr = 1e-3;
  double clip = 5.0;
  // decoding / evaluation
  int beam = 1;
  bool smooth_bleu = false;
  // dictionary pipeline
  int em_iterations = 5;
  bool hmm = false;
  int hmm_iterations = 3;
  int min_count = 2;
  // paths
  std::string train_src, train_tgt, dev_src, dev_tgt, test_src, test_tgt;
  std::string dict, checkpoint, metrics, output, trace;

  void set(const std::string& key, const std::string& value) {
    auto as_int = [&]() {
      std::size_t used = 0;
      const int v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      return v;
    };
    auto as_ll = [&]() {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      return v;
    };
    auto as_u64 = [&]() {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      return static_cast<std::uint64_t>(v);
    };
    auto as_double = [&]() {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      return v;
    };
    auto as_bool = [&]() {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw std::invalid_argument("expected a boolean");
    };
    try {
      if (key == "embedding_dim") embedding_dim = as_int();
      else if (key == "hidden_dim") hidden_dim = as_int();
      else if (key == "layers") layers = as_int();
      else if (key == "variant") variant_from_name(value), variant = value;
      else if (key == "threshold") threshold = as_double();
      else if (key == "soft_gate") soft_gate = as_bool();
      else if (key == "dropout") dropout = as_double();
      else if (key == "seed") seed = as_u64();
      else if (key == "lexbar") lexbar = as_ll();
      else if (key == "batch_size") batch_size = as_int();
      else if (key == "max_epochs") max_epochs = as_int();
      else if (key == "patience") patience = as_int();
      else if (key == "max_len") max_len = as_int();
      else if (key == "lr") lr = as_double();
      else if (key == "clip") clip = as_double();
      else if (key == "beam") beam = as_int();
      else if (key == "smooth_bleu") smooth_bleu = as_bool();
      else if (key == "em_iterations") em_iterations = as_int();
      else if (key == "hmm") hmm = as_bool();
      else if (key == "hmm_iterations") hmm_iterations = as_int();
      else if (key == "min_count") min_count = as_int();
      else if (key == "train_src") train_src = value;
      else if (key == "train_tgt") train_tgt = value;
      else if (key == "dev_src") dev_src = value;
      else if (key == "dev_tgt") dev_tgt = value;
      else if (key == "test_src") test_src = value;
      else if (key == "test_tgt") test_tgt = value;
      else if (key == "dict") dict = value;
      else if (key == "checkpoint") checkpoint = value;
      else if (key == "metrics") metrics = value;
      else if (key == "output") output = value;
      else if (key == "trace") trace = value;
      else throw std::invalid_argument("unknown configuration key: " + key);
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).rfind("unknown configuration key", 0) == 0) throw;
      throw std::invalid_argument("bad value for " + key + ": '" + value + "' (" + e.what() + ")");
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
    }
  }

  static RunConfig parse(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": expected 'key = value'");
      try {
        cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    return parse(f, path);
  }

  // Explicit path, else the environment default, else built-in defaults.
  static RunConfig resolve(const std::string& path) {
    if (!path.empty()) return load(path);
    const char* env = std::getenv(kConfigEnvVar);
    if (env != nullptr && *env != '\0') return load(env);
    return RunConfig{};
  }

  ModelConfig model_config(int src_vocab, int tgt_vocab) const {
    ModelConfig m;
    m.embedding_dim = embedding_dim;
    m.hidden_dim = hidden_dim;
    m.layers = layers;
    m.variant = variant_from_name(variant);
    m.threshold = threshold;
    m.soft_gate = soft_gate;
    m.dropout = dropout;
    m.seed = seed;
    m.src_vocab = src_vocab;
    m.tgt_vocab = tgt_vocab;
    return m;
  }

  TrainOptions train_options() const {
    TrainOptions t;
    t.max_epochs = max_epochs;
    t.batch_size = batch_size;
    t.patience = patience;
    t.max_len = max_len;
    t.adam.lr = lr;
    t.adam.clip = clip;
    return t;
  }
};

}  // namespace lexfuse
