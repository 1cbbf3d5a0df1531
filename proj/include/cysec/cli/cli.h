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

#ifndef CYSEC_CLI_CLI_H_
#define CYSEC_CLI_CLI_H_

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cysec/cli/config.h"
#include "cysec/cli/report.h"
#include "cysec/corpus/pipeline.h"
#include "cysec/corpus/stats.h"
#include "cysec/evaluate/cloze.h"
#include "cysec/evaluate/clustering.h"
#include "cysec/evaluate/forgetting.h"
#include "cysec/finetune/finetune.h"
#include "cysec/model/checkpoint.h"
#include "cysec/pretrain/trainer.h"
#include "cysec/tokenizer/trainer.h"
#include "cysec/util/io.h"

namespace cysec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Training stopped on a non-finite value; the last good weights were saved.
class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  Config config;
  std::ostream& out;

  std::string output(const std::string& name) const { return (config.out_dir() / name).string(); }

  void write(const std::string& name, const std::string& content) const {
    util::write_file_atomic(output(name), content);
    out << "wrote " << output(name) << "\n";
  }
};

namespace detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError("missing-file", what + " not found: " + path);
  }
}

// Texts of a corpus file: JSON Lines records with a "text" field, or one
// document per line for any other extension.
inline std::vector<std::string> read_texts(const std::string& path) {
  require_file(path, "corpus");
  const auto content = util::read_file(path);
  std::vector<std::string> texts;
  std::istringstream in(content);
  std::string line;
  std::size_t n = 0;
  const bool jsonl = std::filesystem::path(path).extension() == ".jsonl";
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!jsonl) {
      texts.push_back(line);
      continue;
    }
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw ValidationError("bad-record",
                            path + ":" + std::to_string(n) + ": needs a string text field");
    }
    texts.push_back(j["text"].get<std::string>());
  }
  if (texts.empty()) throw ValidationError("empty-corpus", path + " holds no documents");
  return texts;
}

inline tokenizer::Vocab load_vocab(const Context& ctx) {
  const auto path = ctx.config.path_or("paths.vocab", "vocab.txt");
  require_file(path, "vocabulary");
  return tokenizer::Vocab::load(path);
}

inline std::string model_name(const Context& ctx, const std::string& checkpoint) {
  const auto& n = ctx.config.str("run.model_name");
  return n.empty() ? std::filesystem::path(checkpoint).stem().string() : n;
}

inline std::string checkpoint_path(const Context& ctx) {
  return ctx.config.path_or("paths.checkpoint", "dapt.ckpt");
}

inline model::Checkpoint load_model(const Context& ctx, const std::string& path,
                                    const tokenizer::Vocab& vocab) {
  require_file(path, "checkpoint");
  auto ck = model::load_checkpoint(path);
  if (ck.config.vocab_size != vocab.size()) {
    throw ValidationError("checkpoint-config",
                          path + ": vocabulary size " + std::to_string(ck.config.vocab_size) +
                              " differs from the vocabulary file (" +
                              std::to_string(vocab.size()) + ")");
  }
  return ck;
}

inline void finish_training(const Context& ctx, const pretrain::TrainResult& r,
                            const model::ModelConfig& config, const std::string& ckpt,
                            const std::string& log) {
  model::save_checkpoint(ctx.output(ckpt), config, r.params);
  ctx.out << "wrote " << ctx.output(ckpt) << "\n";
  ctx.write(log, r.log.to_tsv());
  if (r.status != pretrain::TrainStatus::kCompleted) {
    throw RunAborted("training aborted: " + r.abort_reason +
                     "; last good weights saved to " + ctx.output(ckpt));
  }
}

}  // namespace detail

inline void corpus_build(const Context& ctx) {
  const auto dumps = ctx.config.list("paths.dumps");
  if (dumps.empty()) throw ValidationError("missing-path", "config key paths.dumps is not set");
  for (const auto& d : dumps) detail::require_file(d, "dump");
  std::vector<corpus::Document> docs;
  std::size_t malformed = 0;
  for (const auto& d : dumps) {
    auto r = corpus::ingest(d);
    malformed += r.skipped;
    docs.insert(docs.end(), r.documents.begin(), r.documents.end());
  }
  const auto filtered = corpus::apply_filters(docs, corpus::default_filter_rules());
  const auto kept = corpus::dedupe(filtered.documents);
  std::string summary = "stage\tsource\tcount\n";
  summary += "ingested\tall\t" + std::to_string(docs.size()) + "\n";
  summary += "malformed\tall\t" + std::to_string(malformed) + "\n";
  for (auto s : corpus::kAllSources) {
    const auto it = filtered.report.dropped.find(s);
    summary += "filtered\t" + std::string(corpus::source_name(s)) + "\t" +
               std::to_string(it == filtered.report.dropped.end() ? 0 : it->second) + "\n";
  }
  summary += "duplicates\tall\t" + std::to_string(filtered.documents.size() - kept.size()) + "\n";
  summary += "kept\tall\t" + std::to_string(kept.size()) + "\n";
  ctx.write("corpus.jsonl", corpus::to_json_lines(kept));
  ctx.write("corpus_build.tsv", summary);
}

inline void corpus_stats(const Context& ctx) {
  const auto path = ctx.config.path_or("paths.corpus", "corpus.jsonl");
  detail::require_file(path, "corpus");
  const auto vocab = detail::load_vocab(ctx);
  const auto docs = corpus::ingest(path).documents;
  ctx.write("corpus_stats.tsv", corpus::format_stats(corpus::compute_stats(docs, vocab)));
}

inline void tokenizer_train(const Context& ctx) {
  std::vector<std::string> texts;
  const auto domain = ctx.config.path_or("paths.corpus", "corpus.jsonl");
  const auto general = ctx.config.str("paths.general_corpus");
  for (const auto& p : {domain, general}) {
    if (p.empty()) continue;
    const auto t = detail::read_texts(p);
    texts.insert(texts.end(), t.begin(), t.end());
  }
  const auto trained = tokenizer::train_vocab(texts, ctx.config.count("tokenizer.vocab_size"),
                                              ctx.config.count("tokenizer.min_frequency"));
  auto pieces = trained.pieces();
  for (const auto& r : ctx.config.list("tokenizer.reserved")) {
    if (!trained.find(r)) pieces.push_back(r);
  }
  ctx.write("vocab.txt", tokenizer::Vocab(pieces).serialize());
}

inline void pretrain_base(const Context& ctx) {
  const auto vocab = detail::load_vocab(ctx);
  const auto config = ctx.config.model(vocab.size());
  const auto tc = ctx.config.train("pretrain");
  const auto policy = ctx.config.masking();
  const auto texts = detail::read_texts(ctx.config.required_path("paths.general_corpus"));
  const auto corpus = pretrain::encode_corpus(texts, vocab, tc.max_seq);
  auto params = model::init_parameters<float>(config, tc.seed);
  const auto r = pretrain::train(std::move(params), config, corpus, tc, vocab, policy);
  detail::finish_training(ctx, r, config, "base.ckpt", "base_loss.tsv");
}

inline void dapt(const Context& ctx) {
  const auto vocab = detail::load_vocab(ctx);
  const auto base_cfg = ctx.config.train("pretrain");
  const auto dapt_cfg = ctx.config.train("dapt");
  const auto policy = ctx.config.masking();
  // Regimen and inputs are checked before any training.
  if (!(dapt_cfg.peak_lr < base_cfg.peak_lr)) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "regimen violated: dapt peak_lr %g must be below base peak_lr %g",
                  dapt_cfg.peak_lr, base_cfg.peak_lr);
    throw ValidationError("regimen-lr", buf);
  }
  const auto base_path = ctx.config.path_or("paths.base_checkpoint", "base.ckpt");
  const auto ck = detail::load_model(ctx, base_path, vocab);
  const auto general = pretrain::encode_corpus(
      detail::read_texts(ctx.config.required_path("paths.general_corpus")), vocab,
      dapt_cfg.max_seq);
  const auto domain = pretrain::encode_corpus(
      detail::read_texts(ctx.config.path_or("paths.corpus", "corpus.jsonl")), vocab,
      dapt_cfg.max_seq);
  const auto r = pretrain::dapt(ck.params, ck.config, base_cfg, pretrain::token_count(general),
                                domain, dapt_cfg, vocab, policy);
  detail::finish_training(ctx, r, ck.config, "dapt.ckpt", "dapt_loss.tsv");
  if (ctx.config.flag("dapt.perplexity")) {
    const auto seed = dapt_cfg.seed;
    auto ppl = [&](const model::BertParameters<float>& p, const auto& data) {
      return pretrain::perplexity(p, ck.config, data, vocab, seed, policy);
    };
    const double gb = ppl(ck.params, general), ga = ppl(r.params, general);
    const double db = ppl(ck.params, domain), da = ppl(r.params, domain);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "corpus\tbase\tadapted\trelative_change\n"
                  "general\t%.6f\t%.6f\t%+.6f\ndomain\t%.6f\t%.6f\t%+.6f\n",
                  gb, ga, ga / gb - 1.0, db, da, da / db - 1.0);
    ctx.write("dapt_perplexity.tsv", buf);
  }
}

inline void eval_cluster(const Context& ctx) {
  const auto vocab = detail::load_vocab(ctx);
  const auto path = detail::checkpoint_path(ctx);
  const auto docs = detail::read_texts(ctx.config.required_path("paths.eval_documents"));
  const auto ck = detail::load_model(ctx, path, vocab);
  const auto name = detail::model_name(ctx, path);
  const auto rows = evaluate::cluster_eval(ck.params, ck.config, vocab, docs,
                                           ctx.config.count("eval.k_min"),
                                           ctx.config.count("eval.k_max"),
                                           ctx.config.count("run.seed"));
  std::string out = "model\tk\tsilhouette\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "\t%zu\t%.6f\n", r.k, r.silhouette);
    out += name + buf;
  }
  ctx.write("cluster." + name + ".tsv", out);
}

inline void eval_similarity(const Context& ctx) {
  const auto vocab = detail::load_vocab(ctx);
  evaluate::answer_ids(vocab);
  const auto pairs_path = ctx.config.required_path("paths.pairs");
  detail::require_file(pairs_path, "pair file");
  const auto pairs = evaluate::parse_pairs(util::read_file(pairs_path), pairs_path);
  const auto path = detail::checkpoint_path(ctx);
  const auto ck = detail::load_model(ctx, path, vocab);
  const auto name = detail::model_name(ctx, path);
  const evaluate::ModelScorer scorer(ck.params, ck.config, vocab);
  const auto r = evaluate::cloze_similarity_eval(
      scorer, pairs, vocab, std::min<std::size_t>(ctx.config.count("eval.max_seq"), ck.config.max_seq));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "\t%.6f\t%zu\n", r.f1, pairs.size());
  ctx.write("similarity." + name + ".tsv", "model\tf1\tpairs\n" + name + buf);
  ctx.write("similarity_pairs." + name + ".tsv", evaluate::format_cloze(pairs, r));
}

namespace detail {

inline void write_run_report(const Context& ctx, const std::string& kind,
                             const finetune::RunReport& report) {
  const std::string stem = report.task + "." + report.model;
  ctx.write(kind + "." + stem + ".tsv", finetune::format_report_rows({report}));
  std::string seeds = finetune::format_seed_rows(report);
  for (const auto& w : report.warnings) seeds += "# warning: " + w + "\n";
  ctx.write(kind + "_seeds." + stem + ".tsv", seeds);
  for (const auto& w : report.warnings) ctx.out << "warning: " << w << "\n";
}

}  // namespace detail

inline void finetune_classify(const Context& ctx) {
  const auto vocab = detail::load_vocab(ctx);
  const auto data_path = ctx.config.required_path("paths.classification");
  detail::require_file(data_path, "classification data");
  const auto items = finetune::parse_classification(util::read_file(data_path), data_path);
  const auto splits = finetune::split(items);
  const auto fc = ctx.config.finetune();
  const auto seeds = ctx.config.seeds();
  const auto path = detail::checkpoint_path(ctx);
  const auto ck = detail::load_model(ctx, path, vocab);
  auto report = finetune::finetune_classify(ck.params, ck.config, vocab, splits, seeds, fc,
                                            ctx.config.str("finetune.positive"));
  report.task = ctx.config.str("finetune.classify_task");
  report.model = detail::model_name(ctx, path);
  detail::write_run_report(ctx, "classification", report);
}

inline void finetune_tag(const Context& ctx) {
  const auto vocab = detail::load_vocab(ctx);
  const auto data_path = ctx.config.required_path("paths.tagging");
  detail::require_file(data_path, "tagging data");
  const auto items = finetune::parse_tagging(util::read_file(data_path), data_path);
  const auto splits = finetune::split(items);
  const auto fc = ctx.config.finetune();
  const auto seeds = ctx.config.seeds();
  const auto path = detail::checkpoint_path(ctx);
  const auto ck = detail::load_model(ctx, path, vocab);
  auto report = finetune::finetune_tag(ck.params, ck.config, vocab, splits, seeds, fc);
  report.task = ctx.config.str("finetune.tag_task");
  report.model = detail::model_name(ctx, path);
  detail::write_run_report(ctx, "tagging", report);
}

inline void forgetting(const Context& ctx) {
  auto scores = [&](const std::string& key) {
    const auto p = ctx.config.required_path(key);
    detail::require_file(p, "score table");
    return evaluate::parse_scores(util::read_file(p), p);
  };
  const auto base = scores("paths.base_scores");
  const auto adapted = scores("paths.adapted_scores");
  ctx.write("forgetting.tsv",
            evaluate::format_forgetting(evaluate::forgetting_report(base, adapted)));
}

inline void report(const Context& ctx) {
  const auto md = build_report(ctx.config.out_dir());
  ctx.write("report.md", md);
}

using Command = std::function<void(const Context&)>;

inline const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"corpus-build", corpus_build},
      {"corpus-stats", corpus_stats},
      {"tokenizer-train", tokenizer_train},
      {"pretrain", pretrain_base},
      {"dapt", dapt},
      {"eval-cluster", eval_cluster},
      {"eval-similarity", eval_similarity},
      {"finetune-classify", finetune_classify},
      {"finetune-tag", finetune_tag},
      {"forgetting", forgetting},
      {"report", report},
  };
  return table;
}

inline std::string usage() {
  std::string u =
      "usage: cysec-dapt <command> [--config FILE] [--seed N] [--out DIR] "
      "[--section.key VALUE ...]\ncommands:";
  for (const auto& [name, fn] : commands()) u += " " + name;
  return u + "\n";
}

namespace detail {

// Single line: newlines in messages are flattened.
inline std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace detail

// Exit 0 on success, 1 on invalid input or configuration, 2 on a runtime
// failure. Errors go to `err` as one "error: <code>: <message>" line.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"desk-scale domain-adaptive pre-training lab", "cysec-dapt"};
  std::string command, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("command", command, "pipeline stage");
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--seed", seed, "seed for every stage");
  app.add_option("--out", out_dir, "output directory");
  app.allow_extras();
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << detail::one_line(e.what()) << "\n" << usage();
    return kExitValidation;
  }
  const auto it = commands().find(command);
  if (it == commands().end()) {
    err << "error: usage: unknown command '" << command << "'\n" << usage();
    return kExitValidation;
  }
  try {
    Context ctx{Config{}, out};
    if (!config_path.empty()) {
      detail::require_file(config_path, "config");
      ctx.config.load_file(config_path);
    }
    const auto extras = app.remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const auto& a = extras[i];
      if (a.rfind("--", 0) != 0 || a.find('.') == std::string::npos) {
        throw ValidationError("usage", "unexpected argument '" + a + "'");
      }
      std::string key = a.substr(2), value;
      if (const auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key.erase(eq);
      } else if (i + 1 < extras.size()) {
        value = extras[++i];
      } else {
        throw ValidationError("usage", "override " + a + " needs a value");
      }
      ctx.config.set(key, value);
    }
    if (seed) ctx.config.set("run.seed", std::to_string(*seed));
    if (!out_dir.empty()) ctx.config.set("run.out", out_dir);
    it->second(ctx);
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.code() << ": " << detail::one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "error: invalid-input: " << detail::one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: runtime: " << detail::one_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

}  // namespace cysec::cli

#endif  // CYSEC_CLI_CLI_H_
