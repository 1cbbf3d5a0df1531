// Copyright 2026 The cysec-dapt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CYSEC_CLI_CONFIG_H_
#define CYSEC_CLI_CONFIG_H_

#include <charconv>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cysec/finetune/finetune.h"
#include "cysec/model/config.h"
#include "cysec/pretrain/masking.h"
#include "cysec/pretrain/trainer.h"

namespace cysec::cli {

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* help;
};

// Every accepted "section.key" with its default. Empty path defaults are
// filled in from the output directory.
inline const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = {
      {"run.seed", "0", "seed for every stage"},
      {"run.out", "runs/default", "output directory"},
      {"run.model_name", "", "label of the evaluated model (default: checkpoint stem)"},
      {"paths.dumps", "", "comma-separated JSON Lines dumps for corpus-build"},
      {"paths.corpus", "", "domain corpus (default: <out>/corpus.jsonl)"},
      {"paths.general_corpus", "", "general corpus for base pre-training"},
      {"paths.vocab", "", "vocabulary file (default: <out>/vocab.txt)"},
      {"paths.base_checkpoint", "", "base checkpoint (default: <out>/base.ckpt)"},
      {"paths.checkpoint", "", "checkpoint to evaluate (default: <out>/dapt.ckpt)"},
      {"paths.eval_documents", "", "documents for eval-cluster"},
      {"paths.pairs", "", "word-pair file for eval-similarity"},
      {"paths.classification", "", "labelled texts for finetune-classify"},
      {"paths.tagging", "", "IOB-tagged sentences for finetune-tag"},
      {"paths.base_scores", "", "task<TAB>score table of the base model"},
      {"paths.adapted_scores", "", "task<TAB>score table of the adapted model"},
      {"tokenizer.vocab_size", "30522", "target vocabulary size"},
      {"tokenizer.min_frequency", "2", "minimum symbol frequency"},
      {"tokenizer.reserved", "yes,no", "pieces appended to the vocabulary if missing"},
      {"model.layers", "12", ""},
      {"model.hidden", "768", ""},
      {"model.heads", "12", ""},
      {"model.ffn", "3072", ""},
      {"model.max_seq", "512", ""},
      {"model.dropout", "0.1", ""},
      {"pretrain.lr", "1e-4", ""},
      {"pretrain.epochs", "40", ""},
      {"pretrain.batch_size", "256", ""},
      {"pretrain.weight_decay", "0.01", ""},
      {"pretrain.warmup_steps", "10000", ""},
      {"dapt.lr", "2e-5", ""},
      {"dapt.epochs", "30", ""},
      {"dapt.batch_size", "64", ""},
      {"dapt.weight_decay", "0.01", ""},
      {"dapt.warmup_steps", "10000", ""},
      {"dapt.perplexity", "true", "score general and domain perplexity before and after"},
      {"masking.select", "0.15", ""},
      {"masking.mask", "0.8", ""},
      {"masking.random", "0.1", ""},
      {"masking.keep", "0.1", ""},
      {"eval.k_min", "5", ""},
      {"eval.k_max", "9", ""},
      {"eval.max_seq", "128", "sequence limit of the cloze template"},
      {"finetune.lr", "2e-5", ""},
      {"finetune.epochs", "4", ""},
      {"finetune.batch_size", "16", ""},
      {"finetune.weight_decay", "0.01", ""},
      {"finetune.warmup_fraction", "0.1", ""},
      {"finetune.max_seq", "128", ""},
      {"finetune.seeds", "", "five seeds (default: run.seed .. run.seed + 4)"},
      {"finetune.classify_task", "relevance", ""},
      {"finetune.tag_task", "ner", ""},
      {"finetune.positive", "1", "positive label for binary F1"},
  };
  return keys;
}

// Flat "section.key" -> value map over the defaults, a config file and
// command-line overrides, in that order of precedence.
class Config {
 public:
  Config() {
    for (const auto& k : known_keys()) values_[k.key] = k.fallback;
  }

  // Relative paths in the file resolve against the file's directory.
  void load_file(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ValidationError("config", e.what());
    }
    const auto base = std::filesystem::absolute(path).parent_path();
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) {
        throw ValidationError("config", path + ": key '" + section + "' outside a section");
      }
      for (const auto& [key, node] : body) {
        std::string value = strip_comment(node.data());
        const std::string full = section + "." + key;
        if (is_path_key(full) && !value.empty()) value = resolve_list(value, base);
        set(full, value, path);
      }
    }
  }

  void set(const std::string& key, const std::string& value,
           const std::string& origin = "command line") {
    if (!values_.count(key)) {
      throw ValidationError("config-key", origin + ": unknown key '" + key + "'");
    }
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ContractError("config key not registered: " + key);
    return it->second;
  }

  double real(const std::string& key) const {
    const auto& s = str(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad(key, "a number");
    return v;
  }

  std::uint64_t count(const std::string& key) const {
    const auto& s = str(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      bad(key, "a non-negative integer");
    }
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    bad(key, "true or false");
    return false;
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(str(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      if (b == std::string::npos) continue;
      out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
    }
    return out;
  }

  std::filesystem::path out_dir() const { return str("run.out"); }

  // Configured path, or `fallback` inside the output directory.
  std::string path_or(const std::string& key, const std::string& fallback) const {
    const auto& v = str(key);
    return v.empty() ? (out_dir() / fallback).string() : v;
  }

  std::string required_path(const std::string& key) const {
    const auto& v = str(key);
    if (v.empty()) throw ValidationError("missing-path", "config key " + key + " is not set");
    return v;
  }

  model::ModelConfig model(std::size_t vocab_size) const {
    model::ModelConfig c;
    c.layers = count("model.layers");
    c.hidden = count("model.hidden");
    c.heads = count("model.heads");
    c.ffn = count("model.ffn");
    c.max_seq = count("model.max_seq");
    c.dropout = real("model.dropout");
    c.vocab_size = vocab_size;
    c.validate();
    return c;
  }

  pretrain::TrainConfig train(const std::string& section) const {
    pretrain::TrainConfig t;
    t.peak_lr = real(section + ".lr");
    t.epochs = count(section + ".epochs");
    t.batch_size = count(section + ".batch_size");
    t.weight_decay = real(section + ".weight_decay");
    t.warmup_steps = count(section + ".warmup_steps");
    t.seed = count("run.seed");
    t.max_seq = count("model.max_seq");
    t.validate();
    return t;
  }

  pretrain::MaskingPolicy masking() const {
    pretrain::MaskingPolicy m{real("masking.select"), real("masking.mask"),
                              real("masking.random"), real("masking.keep")};
    m.validate();
    return m;
  }

  finetune::FinetuneConfig finetune() const {
    finetune::FinetuneConfig f;
    f.peak_lr = real("finetune.lr");
    f.epochs = count("finetune.epochs");
    f.batch_size = count("finetune.batch_size");
    f.weight_decay = real("finetune.weight_decay");
    f.warmup_fraction = real("finetune.warmup_fraction");
    f.max_seq = count("finetune.max_seq");
    f.validate();
    return f;
  }

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    if (str("finetune.seeds").empty()) {
      for (std::uint64_t i = 0; i < finetune::kReportRuns; ++i) out.push_back(count("run.seed") + i);
      return out;
    }
    for (const auto& s : list("finetune.seeds")) {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) bad("finetune.seeds", "integers");
      out.push_back(v);
    }
    return out;
  }

  static bool is_path_key(const std::string& key) {
    return key.rfind("paths.", 0) == 0 || key == "run.out";
  }

 private:
  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    throw ValidationError("config-value",
                          "config key " + key + " = '" + str(key) + "' must be " + what);
  }

  // Trailing "; ..." or " # ..." comments.
  static std::string strip_comment(std::string v) {
    for (const char* marker : {";", " #", "\t#"}) {
      if (const auto p = v.find(marker); p != std::string::npos) v.erase(p);
    }
    const auto e = v.find_last_not_of(" \t");
    return e == std::string::npos ? std::string() : v.substr(0, e + 1);
  }

  static std::string resolve_list(const std::string& value, const std::filesystem::path& base) {
    std::string out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      if (b == std::string::npos) continue;
      std::filesystem::path p = item.substr(b, item.find_last_not_of(" \t") - b + 1);
      if (p.is_relative()) p = base / p;
      out += (out.empty() ? "" : ",") + p.lexically_normal().string();
    }
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace cysec::cli

#endif  // CYSEC_CLI_CONFIG_H_
