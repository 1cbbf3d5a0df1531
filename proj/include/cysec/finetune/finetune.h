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

#ifndef CYSEC_FINETUNE_FINETUNE_H_
#define CYSEC_FINETUNE_FINETUNE_H_

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cysec/finetune/metrics.h"
#include "cysec/model/bert.h"
#include "cysec/numerics/optim.h"
#include "cysec/util/io.h"

namespace cysec::finetune {

struct ClassificationItem {
  std::string text;
  std::string label;
};

struct TaggedItem {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

template <typename Item>
struct Splits {
  std::vector<Item> train, dev, test;
};

// Contiguous splits in input order; the test split takes the remainder.
template <typename Item>
Splits<Item> split(const std::vector<Item>& items, double train_frac = 0.8,
                   double dev_frac = 0.1) {
  if (train_frac <= 0.0 || dev_frac <= 0.0 || train_frac + dev_frac >= 1.0) {
    throw ValidationError("split", "split fractions must be positive and sum below 1");
  }
  const auto n = items.size();
  const auto n_train = static_cast<std::size_t>(double(n) * train_frac);
  const auto n_dev = static_cast<std::size_t>(double(n) * dev_frac);
  Splits<Item> s;
  s.train.assign(items.begin(), items.begin() + n_train);
  s.dev.assign(items.begin() + n_train, items.begin() + n_train + n_dev);
  s.test.assign(items.begin() + n_train + n_dev, items.end());
  if (s.train.empty() || s.dev.empty() || s.test.empty()) {
    throw ValidationError("empty-split", std::to_string(n) +
                                             " items leave a train, dev or test "
                                             "split empty");
  }
  return s;
}

namespace detail {

template <typename F>
auto parse_jsonl(const std::string& content, const std::string& origin, F make) {
  std::vector<decltype(make(nlohmann::json{}, std::size_t{}))> out;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object()) {
      throw ValidationError("bad-record",
                            origin + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    out.push_back(make(j, line_no));
  }
  return out;
}

inline std::string field_error(const std::string& origin, std::size_t line,
                               const std::string& what) {
  return origin + ":" + std::to_string(line) + ": " + what;
}

}  // namespace detail

// One {"text": ..., "label": ...} object per line; labels may be strings or
// integers.
inline std::vector<ClassificationItem> parse_classification(
    const std::string& content, const std::string& origin = "<memory>") {
  return detail::parse_jsonl(content, origin, [&](const nlohmann::json& j, std::size_t n) {
    if (!j.contains("text") || !j["text"].is_string() || !j.contains("label") ||
        !(j["label"].is_string() || j["label"].is_number_integer())) {
      throw ValidationError("bad-record",
                            detail::field_error(origin, n, "needs string text and label"));
    }
    const auto& l = j["label"];
    return ClassificationItem{j["text"].get<std::string>(),
                              l.is_string() ? l.get<std::string>()
                                            : std::to_string(l.get<long long>())};
  });
}

// One {"tokens": [...], "tags": [...]} object per line with valid IOB tags.
inline std::vector<TaggedItem> parse_tagging(const std::string& content,
                                             const std::string& origin = "<memory>") {
  return detail::parse_jsonl(content, origin, [&](const nlohmann::json& j, std::size_t n) {
    auto strings = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_array()) {
        throw ValidationError("bad-record", detail::field_error(
                                                origin, n, std::string("missing list ") + key));
      }
      std::vector<std::string> v;
      for (const auto& e : j[key]) {
        if (!e.is_string()) {
          throw ValidationError("bad-record", detail::field_error(
                                                  origin, n, std::string(key) + " must be strings"));
        }
        v.push_back(e.get<std::string>());
      }
      return v;
    };
    TaggedItem item{strings("tokens"), strings("tags")};
    if (item.tokens.size() != item.tags.size()) {
      throw ValidationError("bad-record",
                            detail::field_error(origin, n, "tokens and tags differ in length"));
    }
    if (const auto err = iob_error(item.tags); !err.empty()) {
      throw ValidationError("invalid-iob", detail::field_error(origin, n, err));
    }
    return item;
  });
}

struct FinetuneConfig {
  double peak_lr = 2e-5;
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double weight_decay = 0.01;
  double warmup_fraction = 0.1;
  std::size_t max_seq = 128;

  void validate() const {
    if (!(peak_lr > 0.0) || epochs == 0 || batch_size == 0 || max_seq < 2 ||
        warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
      throw ValidationError("finetune-config",
                            "finetune config: lr, epochs, batch_size must be positive, "
                            "max_seq >= 2, warmup_fraction in [0, 1)");
    }
  }
};

// Result of one seeded run: test metric of the dev-best epoch.
struct SeedRun {
  std::uint64_t seed = 0;
  double dev_metric = 0.0;
  double test_metric = 0.0;
  double test_secondary = 0.0;  // token-level F1 for tagging
  std::size_t best_epoch = 0;
};

struct RunReport {
  std::string task;
  std::string model;
  std::vector<SeedRun> runs;
  Aggregate summary;
  Aggregate secondary;
  std::vector<std::string> warnings;

  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.test_metric);
    return v;
  }
};

// Header "task\tmodel\tf1", one row per report.
inline std::string format_report_rows(const std::vector<RunReport>& reports) {
  std::string out = "task\tmodel\tf1\n";
  for (const auto& r : reports) {
    out += r.task + '\t' + r.model + '\t' + format_mean_std(r.summary) + '\n';
  }
  return out;
}

// Per-seed values, so that mean and std can be recomputed.
inline std::string format_seed_rows(const RunReport& r) {
  std::string out = "seed\tdev\ttest\n";
  char buf[96];
  for (const auto& s : r.runs) {
    std::snprintf(buf, sizeof(buf), "%llu\t%.6f\t%.6f\n",
                  static_cast<unsigned long long>(s.seed), s.dev_metric, s.test_metric);
    out += buf;
  }
  return out;
}

namespace detail {

// Encoder parameters followed by a linear head [H x classes] and its bias.
inline model::BertParameters<float> with_head(const model::BertParameters<float>& encoder,
                                              std::size_t hidden, std::size_t classes,
                                              Rng& rng) {
  model::BertParameters<float> p = encoder;
  Tensor<float> w({hidden, classes});
  for (auto& v : w.values()) v = static_cast<float>(rng.truncated_normal(0.02));
  p.names.push_back("head.weight");
  p.tensors.push_back(std::move(w));
  p.names.push_back("head.bias");
  p.tensors.push_back(Tensor<float>({classes}));
  return p;
}

// Generic seeded loop. `loss` builds a scalar loss for a batch of item
// indices; `score` evaluates a split with the current parameters. Returns
// the dev-best parameters and the epoch they came from.
template <typename Loss, typename Score>
std::pair<model::BertParameters<float>, std::pair<std::size_t, double>> run_epochs(
    model::BertParameters<float> params, std::size_t n_train, const FinetuneConfig& fc,
    std::uint64_t seed, Loss loss, Score score_dev) {
  Rng order_rng = Rng::derive(seed, 11);
  Rng dropout_rng = Rng::derive(seed, 12);
  const std::size_t per_epoch = (n_train + fc.batch_size - 1) / fc.batch_size;
  const std::size_t total = per_epoch * fc.epochs;
  std::optional<LrSchedule> schedule;
  if (total >= 2) {
    const auto warmup = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(fc.warmup_fraction * double(total)));
    schedule = LrSchedule(fc.peak_lr, std::min<std::int64_t>(warmup, total - 1),
                          static_cast<std::int64_t>(total));
  }
  AdamState<float> adam(params.tensors);
  const auto decay_vec = params.decay_mask();
  const std::unique_ptr<bool[]> decay(new bool[decay_vec.size()]);
  std::copy(decay_vec.begin(), decay_vec.end(), decay.get());

  std::vector<std::size_t> order(n_train);
  model::BertParameters<float> best = params;
  std::size_t best_epoch = 0;
  double best_dev = -1.0;
  std::int64_t step = 0;
  for (std::size_t epoch = 1; epoch <= fc.epochs; ++epoch) {
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < n_train; start += fc.batch_size) {
      ++step;
      const std::vector<std::size_t> batch(
          order.begin() + start, order.begin() + std::min(n_train, start + fc.batch_size));
      Tape<float> tape;
      const auto vars = model::bind(tape, params, true);
      const auto grads = tape.backward(loss(tape, vars, batch, &dropout_rng));
      const double lr = schedule ? lr_at_step(*schedule, step) : fc.peak_lr;
      adam_step<float>(params.tensors, grads, adam, lr, fc.weight_decay,
                       std::span<const bool>(decay.get(), decay_vec.size()));
    }
    const double dev = score_dev(params);
    if (dev > best_dev) {
      best_dev = dev;
      best = params;
      best_epoch = epoch;
    }
  }
  return {std::move(best), {best_epoch, best_dev}};
}

inline std::vector<std::uint64_t> checked_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() != kReportRuns ||
      std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds", "fine-tuning needs " + std::to_string(kReportRuns) +
                                       " distinct seeds");
  }
  return seeds;
}

}  // namespace detail

// Sequence classifier: linear head on the final [CLS] vector.
class Classifier {
 public:
  Classifier(const model::ModelConfig& config, const tokenizer::Vocab& vocab,
             std::vector<std::string> labels, std::size_t max_seq)
      : config_(config), vocab_(vocab), labels_(std::move(labels)),
        max_seq_(std::min(max_seq, config.max_seq)) {}

  const std::vector<std::string>& labels() const { return labels_; }

  int label_index(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
      throw ValidationError("unknown-label", "label '" + label + "' not in the label set");
    }
    return static_cast<int>(it - labels_.begin());
  }

  template <typename T>
  Var<T> logits(Tape<T>& tape, const std::vector<Var<T>>& vars,
                const std::vector<const std::string*>& texts, Rng* dropout_rng) const {
    model::PackedBatch batch;
    std::vector<int> cls_rows;
    for (const auto* t : texts) {
      cls_rows.push_back(static_cast<int>(batch.tokens()));
      batch.add(tokenizer::encode(*t, vocab_, max_seq_).ids);
    }
    const std::size_t head = vars.size() - 2;
    const std::vector<Var<T>> encoder(vars.begin(), vars.begin() + head);
    auto hidden = model::encode_batch(tape, encoder, batch, config_,
                                      model::ForwardOptions<T>{dropout_rng, nullptr});
    Var<T> cls = gather_rows(hidden.back(), cls_rows);
    if (dropout_rng && config_.dropout > 0.0) cls = dropout(cls, config_.dropout, *dropout_rng);
    return add_bias(matmul(cls, vars[head]), vars[head + 1]);
  }

  std::vector<std::string> predict(const model::BertParameters<float>& params,
                                   const std::vector<ClassificationItem>& items,
                                   std::size_t batch_size = 32) const {
    std::vector<std::string> out;
    for (std::size_t s = 0; s < items.size(); s += batch_size) {
      std::vector<const std::string*> texts;
      for (std::size_t i = s; i < std::min(items.size(), s + batch_size); ++i) {
        texts.push_back(&items[i].text);
      }
      Tape<float> tape(false);
      const auto lg = logits(tape, model::bind(tape, params, false), texts, nullptr).value();
      for (std::size_t r = 0; r < lg.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < lg.cols(); ++c) {
          if (lg(r, c) > lg(r, best)) best = c;
        }
        out.push_back(labels_[best]);
      }
    }
    return out;
  }

  // Binary F1 for two labels, otherwise macro F1 over labels.
  double score(const std::vector<std::string>& pred,
               const std::vector<ClassificationItem>& items,
               const std::string& positive) const {
    std::vector<std::string> gold;
    for (const auto& it : items) gold.push_back(it.label);
    if (labels_.size() == 2) return f1_binary(pred, gold, positive);
    double sum = 0.0;
    for (const auto& l : labels_) sum += f1_binary(pred, gold, l);
    return sum / double(labels_.size());
  }

 private:
  model::ModelConfig config_;
  const tokenizer::Vocab& vocab_;
  std::vector<std::string> labels_;
  std::size_t max_seq_;
};

inline RunReport finetune_classify(const model::BertParameters<float>& encoder,
                                   const model::ModelConfig& config,
                                   const tokenizer::Vocab& vocab,
                                   const Splits<ClassificationItem>& data,
                                   const std::vector<std::uint64_t>& seeds,
                                   const FinetuneConfig& fc = {},
                                   std::string positive = "1") {
  fc.validate();
  detail::checked_seeds(seeds);
  if (data.train.empty() || data.dev.empty() || data.test.empty()) {
    throw ValidationError("empty-split", "classification data has an empty split");
  }
  std::set<std::string> label_set;
  for (const auto* part : {&data.train, &data.dev, &data.test}) {
    for (const auto& it : *part) label_set.insert(it.label);
  }
  if (label_set.size() < 2) label_set.insert(positive);
  const Classifier clf(config, vocab, {label_set.begin(), label_set.end()}, fc.max_seq);
  if (!label_set.count(positive)) positive = clf.labels().back();

  RunReport report;
  std::set<std::string> train_labels;
  for (const auto& it : data.train) train_labels.insert(it.label);
  if (train_labels.size() < 2) {
    report.warnings.push_back("all training items carry the label '" +
                              *train_labels.begin() + "'; the model is degenerate");
  }
  std::vector<int> train_targets;
  for (const auto& it : data.train) train_targets.push_back(clf.label_index(it.label));

  for (const auto seed : seeds) {
    Rng head_rng = Rng::derive(seed, 10);
    auto params = detail::with_head(encoder, config.hidden, clf.labels().size(), head_rng);
    auto loss = [&](Tape<float>& tape, const std::vector<Var<float>>& vars,
                    const std::vector<std::size_t>& batch, Rng* rng) {
      std::vector<const std::string*> texts;
      std::vector<int> targets;
      for (auto i : batch) {
        texts.push_back(&data.train[i].text);
        targets.push_back(train_targets[i]);
      }
      return cross_entropy_masked(clf.logits(tape, vars, texts, rng), targets);
    };
    auto dev_score = [&](const model::BertParameters<float>& p) {
      return clf.score(clf.predict(p, data.dev), data.dev, positive);
    };
    auto [best, info] = detail::run_epochs(std::move(params), data.train.size(), fc, seed,
                                           loss, dev_score);
    SeedRun run;
    run.seed = seed;
    run.best_epoch = info.first;
    run.dev_metric = info.second;
    run.test_metric = clf.score(clf.predict(best, data.test), data.test, positive);
    report.runs.push_back(run);
  }
  const auto v = report.values();
  report.summary = aggregate(v);
  return report;
}

// Token tagger: linear head on every piece; a word is labelled by its first
// piece and the other pieces carry no loss.
class Tagger {
 public:
  Tagger(const model::ModelConfig& config, const tokenizer::Vocab& vocab,
         std::vector<std::string> tags, std::size_t max_seq)
      : config_(config), vocab_(vocab), tags_(std::move(tags)),
        max_seq_(std::min(max_seq, config.max_seq)) {}

  const std::vector<std::string>& tags() const { return tags_; }

  int tag_index(const std::string& tag) const {
    const auto it = std::find(tags_.begin(), tags_.end(), tag);
    if (it == tags_.end()) {
      throw ValidationError("unknown-tag", "tag '" + tag + "' not in the tag set");
    }
    return static_cast<int>(it - tags_.begin());
  }

  struct Encoded {
    std::vector<int> ids;
    std::vector<int> first_piece;  // per word, -1 when truncated away
  };

  Encoded encode(const std::vector<std::string>& tokens) const {
    const auto enc = tokenizer::encode_words(tokens, vocab_, max_seq_);
    Encoded e{enc.ids, std::vector<int>(tokens.size(), -1)};
    for (std::size_t w = 0; w < enc.word_spans.size(); ++w) {
      const auto& span = enc.word_spans[w];
      if (span.end > span.begin) e.first_piece[w] = static_cast<int>(span.begin);
    }
    return e;
  }

  // Logits for every piece of the batch, and the packed row offset of each
  // item.
  template <typename T>
  Var<T> logits(Tape<T>& tape, const std::vector<Var<T>>& vars,
                const std::vector<Encoded>& items, std::vector<std::size_t>& offsets,
                Rng* dropout_rng) const {
    model::PackedBatch batch;
    offsets.clear();
    for (const auto& e : items) {
      offsets.push_back(batch.tokens());
      batch.add(e.ids);
    }
    const std::size_t head = vars.size() - 2;
    const std::vector<Var<T>> encoder(vars.begin(), vars.begin() + head);
    auto hidden = model::encode_batch(tape, encoder, batch, config_,
                                      model::ForwardOptions<T>{dropout_rng, nullptr})
                      .back();
    if (dropout_rng && config_.dropout > 0.0) {
      hidden = dropout(hidden, config_.dropout, *dropout_rng);
    }
    return add_bias(matmul(hidden, vars[head]), vars[head + 1]);
  }

  TagSequences predict(const model::BertParameters<float>& params,
                       const std::vector<TaggedItem>& items,
                       std::size_t batch_size = 32) const {
    TagSequences out;
    for (std::size_t s = 0; s < items.size(); s += batch_size) {
      std::vector<Encoded> enc;
      for (std::size_t i = s; i < std::min(items.size(), s + batch_size); ++i) {
        enc.push_back(encode(items[i].tokens));
      }
      std::vector<std::size_t> offsets;
      Tape<float> tape(false);
      const auto lg =
          logits(tape, model::bind(tape, params, false), enc, offsets, nullptr).value();
      for (std::size_t k = 0; k < enc.size(); ++k) {
        std::vector<std::string> tags;
        for (int piece : enc[k].first_piece) {
          if (piece < 0) {
            tags.push_back("O");
            continue;
          }
          const std::size_t row = offsets[k] + static_cast<std::size_t>(piece);
          std::size_t best = 0;
          for (std::size_t c = 1; c < lg.cols(); ++c) {
            if (lg(row, c) > lg(row, best)) best = c;
          }
          tags.push_back(tags_[best]);
        }
        out.push_back(std::move(tags));
      }
    }
    return out;
  }

 private:
  model::ModelConfig config_;
  const tokenizer::Vocab& vocab_;
  std::vector<std::string> tags_;
  std::size_t max_seq_;
};

inline TagSequences gold_tags(const std::vector<TaggedItem>& items) {
  TagSequences out;
  for (const auto& it : items) out.push_back(it.tags);
  return out;
}

inline RunReport finetune_tag(const model::BertParameters<float>& encoder,
                              const model::ModelConfig& config,
                              const tokenizer::Vocab& vocab,
                              const Splits<TaggedItem>& data,
                              const std::vector<std::uint64_t>& seeds,
                              const FinetuneConfig& fc = {}) {
  fc.validate();
  detail::checked_seeds(seeds);
  if (data.train.empty() || data.dev.empty() || data.test.empty()) {
    throw ValidationError("empty-split", "tagging data has an empty split");
  }
  std::set<std::string> tag_set{"O"};
  for (const auto* part : {&data.train, &data.dev, &data.test}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      const auto& it = (*part)[i];
      if (const auto err = iob_error(it.tags); !err.empty()) {
        throw ValidationError("invalid-iob", "item " + std::to_string(i) + ": " + err);
      }
      tag_set.insert(it.tags.begin(), it.tags.end());
    }
  }
  std::vector<std::string> tags{"O"};
  for (const auto& t : tag_set) {
    if (t != "O") tags.push_back(t);
  }
  const Tagger tagger(config, vocab, tags, fc.max_seq);

  std::vector<Tagger::Encoded> train_enc;
  std::vector<std::vector<int>> train_targets;
  for (const auto& it : data.train) {
    auto e = tagger.encode(it.tokens);
    std::vector<int> targets(e.ids.size(), kIgnoreLabel);
    for (std::size_t w = 0; w < it.tags.size(); ++w) {
      if (e.first_piece[w] >= 0) targets[e.first_piece[w]] = tagger.tag_index(it.tags[w]);
    }
    train_enc.push_back(std::move(e));
    train_targets.push_back(std::move(targets));
  }

  RunReport report;
  std::vector<double> secondary;
  for (const auto seed : seeds) {
    Rng head_rng = Rng::derive(seed, 10);
    auto params = detail::with_head(encoder, config.hidden, tags.size(), head_rng);
    auto loss = [&](Tape<float>& tape, const std::vector<Var<float>>& vars,
                    const std::vector<std::size_t>& batch, Rng* rng) {
      std::vector<Tagger::Encoded> items;
      std::vector<int> targets;
      for (auto i : batch) {
        items.push_back(train_enc[i]);
        targets.insert(targets.end(), train_targets[i].begin(), train_targets[i].end());
      }
      std::vector<std::size_t> offsets;
      return cross_entropy_masked(tagger.logits(tape, vars, items, offsets, rng), targets);
    };
    auto dev_score = [&](const model::BertParameters<float>& p) {
      return span_f1(tagger.predict(p, data.dev), gold_tags(data.dev));
    };
    auto [best, info] = detail::run_epochs(std::move(params), data.train.size(), fc, seed,
                                           loss, dev_score);
    const auto pred = tagger.predict(best, data.test);
    SeedRun run;
    run.seed = seed;
    run.best_epoch = info.first;
    run.dev_metric = info.second;
    run.test_metric = span_f1(pred, gold_tags(data.test));
    run.test_secondary = token_f1(pred, gold_tags(data.test));
    secondary.push_back(run.test_secondary);
    report.runs.push_back(run);
  }
  report.summary = aggregate(report.values());
  report.secondary = aggregate(secondary);
  return report;
}

}  // namespace cysec::finetune

#endif  // CYSEC_FINETUNE_FINETUNE_H_
