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

#ifndef CYSEC_PRETRAIN_TRAINER_H_
#define CYSEC_PRETRAIN_TRAINER_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "cysec/model/bert.h"
#include "cysec/numerics/optim.h"
#include "cysec/pretrain/masking.h"

namespace cysec::pretrain {

struct TrainConfig {
  double peak_lr = 2e-5;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double weight_decay = 0.01;
  std::size_t warmup_steps = 100;
  std::uint64_t seed = 0;
  std::size_t max_seq = 128;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw ValidationError("train-config", "train config: " + m);
    };
    if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) fail("peak_lr must be >= 0");
    if (batch_size == 0) fail("batch_size must be positive");
    if (warmup_steps == 0) fail("warmup_steps must be positive");
    if (max_seq < 2) fail("max_seq must be at least 2");
    if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  }
};

struct LossLog {
  struct Entry {
    std::int64_t step;
    double loss;
  };
  std::vector<Entry> entries;
  std::vector<std::int64_t> epoch_ends;  // last step of each epoch

  std::string to_tsv() const {
    std::string out = "step\tloss\n";
    char buf[64];
    for (const auto& e : entries) {
      std::snprintf(buf, sizeof(buf), "%lld\t%.6f\n", static_cast<long long>(e.step),
                    e.loss);
      out += buf;
    }
    return out;
  }
};

// Least-squares slope of loss against step.
inline double loss_slope(const LossLog& log) {
  const double n = double(log.entries.size());
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& e : log.entries) {
    sx += double(e.step);
    sy += e.loss;
    sxx += double(e.step) * double(e.step);
    sxy += double(e.step) * e.loss;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Token ids of each document, truncated to max_seq with [CLS]/[SEP].
inline std::vector<std::vector<int>> encode_corpus(std::span<const std::string> texts,
                                                   const tokenizer::Vocab& vocab,
                                                   std::size_t max_seq) {
  std::vector<std::vector<int>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenizer::encode(t, vocab, max_seq).ids);
  return out;
}

inline std::size_t token_count(const std::vector<std::vector<int>>& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.size();
  return n;
}

// Schedule for a run of `total` updates. A warmup that would not fit is
// shortened to a tenth of the run.
inline LrSchedule make_schedule(double peak, std::size_t warmup, std::size_t total) {
  std::int64_t w = static_cast<std::int64_t>(warmup);
  const auto t = static_cast<std::int64_t>(total);
  if (w >= t) w = std::max<std::int64_t>(1, t / 10);
  return LrSchedule(peak, w, t);
}

inline double schedule_lr(const LrSchedule* s, double peak, std::int64_t step) {
  return s ? lr_at_step(*s, step) : peak;
}

enum class TrainStatus { kCompleted, kAbortedNonFinite };

struct TrainResult {
  model::BertParameters<float> params;
  LossLog log;
  TrainStatus status = TrainStatus::kCompleted;
  std::size_t steps = 0;
  // Updates whose batch had no masked position and so no loss.
  std::size_t skipped_steps = 0;
  std::string abort_reason;
};

// Masked batch ready for a loss: packed input plus the rows and original
// ids of every corrupted position.
struct MlmBatch {
  model::PackedBatch packed;
  std::vector<int> rows;
  std::vector<int> labels;
};

inline MlmBatch make_mlm_batch(const std::vector<const std::vector<int>*>& seqs,
                               const tokenizer::Vocab& vocab,
                               const MaskingPolicy& policy, Rng& rng) {
  MlmBatch b;
  for (const auto* s : seqs) {
    const auto masked = apply_masking(*s, vocab, policy, rng);
    const std::size_t offset = b.packed.tokens();
    b.packed.add(masked.ids);
    for (std::size_t i = 0; i < masked.labels.size(); ++i) {
      if (masked.labels[i] != kIgnoreLabel) {
        b.rows.push_back(static_cast<int>(offset + i));
        b.labels.push_back(masked.labels[i]);
      }
    }
  }
  return b;
}

template <typename T>
Var<T> mlm_loss(Tape<T>& tape, const std::vector<Var<T>>& vars, const MlmBatch& b,
                const model::ModelConfig& config, Rng* dropout_rng) {
  auto hidden = model::encode_batch(tape, vars, b.packed, config,
                                    model::ForwardOptions<T>{dropout_rng, nullptr});
  auto logits = model::mlm_head(vars, gather_rows(hidden.back(), b.rows), config);
  return cross_entropy_masked(logits, b.labels);
}

// MLM training with AdamW and warmup/linear decay. Runs
// epochs * ceil(N / batch_size) updates; a non-finite loss or gradient
// stops the run and returns the parameters from before that update.
inline TrainResult train(model::BertParameters<float> params,
                         const model::ModelConfig& config,
                         const std::vector<std::vector<int>>& corpus,
                         const TrainConfig& tc, const tokenizer::Vocab& vocab,
                         const MaskingPolicy& policy = {}) {
  tc.validate();
  policy.validate();
  config.validate();
  if (corpus.empty()) throw ValidationError("empty-corpus", "training corpus is empty");
  if (vocab.size() != config.vocab_size) {
    throw ValidationError("vocab-mismatch",
                          "vocabulary has " + std::to_string(vocab.size()) +
                              " pieces, model expects " +
                              std::to_string(config.vocab_size));
  }
  const std::size_t per_epoch = (corpus.size() + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total = tc.epochs * per_epoch;
  std::optional<LrSchedule> schedule;
  if (total >= 2) schedule = make_schedule(tc.peak_lr, tc.warmup_steps, total);

  Rng order_rng = Rng::derive(tc.seed, 1);
  Rng mask_rng = Rng::derive(tc.seed, 2);
  Rng dropout_rng = Rng::derive(tc.seed, 3);
  AdamState<float> adam(params.tensors);
  const auto decay_vec = params.decay_mask();
  const std::unique_ptr<bool[]> decay(new bool[decay_vec.size()]);
  std::copy(decay_vec.begin(), decay_vec.end(), decay.get());

  TrainResult result;
  std::vector<std::size_t> order(corpus.size());
  std::int64_t step = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      ++step;
      std::vector<const std::vector<int>*> seqs;
      for (std::size_t i = start; i < std::min(order.size(), start + tc.batch_size); ++i) {
        seqs.push_back(&corpus[order[i]]);
      }
      const MlmBatch batch = make_mlm_batch(seqs, vocab, policy, mask_rng);
      if (batch.rows.empty()) {
        ++result.skipped_steps;
        continue;
      }
      try {
        Tape<float> tape;
        const auto vars = model::bind(tape, params, true);
        const Var<float> loss = mlm_loss(tape, vars, batch, config, &dropout_rng);
        const double value = loss.value().item();
        const auto grads = tape.backward(loss);
        const double lr = schedule_lr(schedule ? &*schedule : nullptr, tc.peak_lr, step);
        adam_step<float>(params.tensors, grads, adam, lr, tc.weight_decay,
                         std::span<const bool>(decay.get(), decay_vec.size()));
        result.log.entries.push_back({step, value});
      } catch (const NumericError& e) {
        result.status = TrainStatus::kAbortedNonFinite;
        result.abort_reason = "step " + std::to_string(step) + ": " + e.what();
        result.steps = static_cast<std::size_t>(step - 1);
        result.params = std::move(params);
        return result;
      }
    }
    result.log.epoch_ends.push_back(step);
  }
  result.steps = static_cast<std::size_t>(step);
  result.params = std::move(params);
  return result;
}

// exp of the mean masked cross-entropy under corruption drawn from `seed`,
// identical for every model scored with the same seed.
inline double perplexity(const model::BertParameters<float>& params,
                         const model::ModelConfig& config,
                         const std::vector<std::vector<int>>& corpus,
                         const tokenizer::Vocab& vocab, std::uint64_t seed,
                         const MaskingPolicy& policy = {},
                         std::size_t batch_size = 32) {
  if (corpus.empty()) throw ValidationError("empty-corpus", "held-out corpus is empty");
  Rng rng = Rng::derive(seed, 4);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    std::vector<const std::vector<int>*> seqs;
    for (std::size_t i = start; i < std::min(corpus.size(), start + batch_size); ++i) {
      seqs.push_back(&corpus[i]);
    }
    const MlmBatch batch = make_mlm_batch(seqs, vocab, policy, rng);
    if (batch.rows.empty()) continue;
    Tape<float> tape(false);
    const auto vars = model::bind(tape, params, false);
    const double mean = mlm_loss(tape, vars, batch, config, nullptr).value().item();
    total += mean * double(batch.rows.size());
    count += batch.rows.size();
  }
  if (count == 0) {
    throw ValidationError("empty-corpus", "held-out corpus has no maskable pieces");
  }
  return std::exp(total / double(count));
}

// Continued pre-training from base weights. The regimen requires a lower
// peak learning rate than the base run and a smaller corpus (in tokens).
inline TrainResult dapt(const model::BertParameters<float>& base,
                        const model::ModelConfig& config,
                        const TrainConfig& base_config, std::size_t base_tokens,
                        const std::vector<std::vector<int>>& domain,
                        const TrainConfig& dapt_config, const tokenizer::Vocab& vocab,
                        const MaskingPolicy& policy = {}) {
  if (!(dapt_config.peak_lr < base_config.peak_lr)) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "regimen violated: dapt peak_lr %g must be below base peak_lr %g",
                  dapt_config.peak_lr, base_config.peak_lr);
    throw ValidationError("regimen-lr", buf);
  }
  const std::size_t domain_tokens = token_count(domain);
  if (!(domain_tokens < base_tokens)) {
    throw ValidationError("regimen-data",
                          "regimen violated: domain corpus has " +
                              std::to_string(domain_tokens) +
                              " tokens, base corpus only " +
                              std::to_string(base_tokens));
  }
  if (dapt_config.epochs == 0) {
    dapt_config.validate();
    return TrainResult{base, {}, TrainStatus::kCompleted, 0, 0, {}};
  }
  return train(base, config, domain, dapt_config, vocab, policy);
}

}  // namespace cysec::pretrain

#endif  // CYSEC_PRETRAIN_TRAINER_H_
