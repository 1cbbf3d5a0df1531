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

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cysec/pretrain/trainer.h"
#include "support/synthetic.h"

namespace cysec::pretrain {
namespace {

using model::BertParameters;
using model::ModelConfig;

ModelConfig desk_config(const tokenizer::Vocab& vocab, std::size_t max_seq = 16) {
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.max_seq = max_seq;
  return c;
}

TEST(Masking, LabelsOnlyAtSelectedPositions) {
  const auto vocab = testing::general_and_security_vocab();
  Rng rng(1);
  std::vector<int> ids{vocab.cls_id()};
  for (int i = 0; i < 40; ++i) ids.push_back(10 + i);
  ids.push_back(vocab.sep_id());
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = apply_masking(ids, vocab, {}, rng);
    ASSERT_EQ(m.ids.size(), ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (m.labels[i] == kIgnoreLabel) {
        EXPECT_EQ(m.ids[i], ids[i]);
      } else {
        EXPECT_EQ(m.labels[i], ids[i]);
      }
    }
    EXPECT_EQ(m.ids.front(), vocab.cls_id());
    EXPECT_EQ(m.ids.back(), vocab.sep_id());
  }
}

TEST(Masking, RatesMatchPolicy) {
  const auto vocab = testing::general_and_security_vocab();
  Rng rng(2);
  std::vector<int> ids{vocab.cls_id()};
  for (int i = 0; i < 200; ++i) ids.push_back(5 + i % int(vocab.size() - 5));
  ids.push_back(vocab.sep_id());
  for (int i = 0; i < 6; ++i) ids.push_back(vocab.pad_id());
  std::size_t candidates = 0, selected = 0, masked = 0, replaced = 0, kept = 0;
  std::size_t special_hits = 0;
  while (candidates < 120000) {
    const auto m = apply_masking(ids, vocab, {}, rng);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (vocab.is_special(ids[i])) {
        special_hits += m.ids[i] != ids[i] || m.labels[i] != kIgnoreLabel;
        continue;
      }
      ++candidates;
      if (m.labels[i] == kIgnoreLabel) continue;
      ++selected;
      if (m.ids[i] == vocab.mask_id()) {
        ++masked;
      } else if (m.ids[i] == ids[i]) {
        ++kept;
      } else {
        ++replaced;
        EXPECT_FALSE(vocab.is_special(m.ids[i]));
      }
    }
  }
  EXPECT_EQ(special_hits, 0u);
  EXPECT_NEAR(double(selected) / double(candidates), 0.15, 0.01);
  // A random replacement can draw the original id; count it as kept.
  EXPECT_NEAR(double(masked) / double(selected), 0.80, 0.02);
  EXPECT_NEAR(double(replaced) / double(selected), 0.10, 0.02);
  EXPECT_NEAR(double(kept) / double(selected), 0.10, 0.02);
}

TEST(Masking, EmptySelectionIsResampledOnce) {
  const auto vocab = testing::general_and_security_vocab();
  Rng rng(3);
  const std::vector<int> ids{vocab.cls_id(), 12, vocab.sep_id()};
  const int trials = 40000;
  int hits = 0;
  for (int t = 0; t < trials; ++t) hits += apply_masking(ids, vocab, {}, rng).selected();
  // One candidate and two attempts: 1 - 0.85^2.
  EXPECT_NEAR(double(hits) / trials, 1.0 - 0.85 * 0.85, 0.01);
}

TEST(Masking, SeededAndValidated) {
  const auto vocab = testing::general_and_security_vocab();
  std::vector<int> ids(60, 20);
  Rng a(9), b(9), c(10);
  const auto ma = apply_masking(ids, vocab, {}, a);
  EXPECT_EQ(ma.ids, apply_masking(ids, vocab, {}, b).ids);
  EXPECT_NE(ma.labels, apply_masking(ids, vocab, {}, c).labels);
  EXPECT_THROW((MaskingPolicy{0.15, 0.8, 0.1, 0.2}.validate()), ValidationError);
  EXPECT_THROW((MaskingPolicy{0.0, 0.8, 0.1, 0.1}.validate()), ValidationError);
}

TEST(Schedule, ShortRunsShrinkWarmup) {
  const auto s = make_schedule(1e-3, 100, 50);
  EXPECT_EQ(s.warmup_steps, 5);
  EXPECT_EQ(make_schedule(1e-3, 100, 5).warmup_steps, 1);
  EXPECT_EQ(make_schedule(1e-3, 10, 50).warmup_steps, 10);
}

TrainConfig patterned_run(std::uint64_t seed) {
  TrainConfig tc;
  tc.peak_lr = 1e-3;
  tc.epochs = 30;
  tc.batch_size = 16;
  tc.warmup_steps = 30;
  tc.seed = seed;
  tc.max_seq = 16;
  return tc;
}

double epoch_mean(const LossLog& log, std::size_t epoch) {
  const std::int64_t lo = epoch == 0 ? 0 : log.epoch_ends[epoch - 1];
  const std::int64_t hi = log.epoch_ends[epoch];
  double s = 0.0;
  int n = 0;
  for (const auto& e : log.entries) {
    if (e.step > lo && e.step <= hi) {
      s += e.loss;
      ++n;
    }
  }
  return s / n;
}

double initial_loss(const BertParameters<float>& p, const ModelConfig& c,
                    const std::vector<std::vector<int>>& corpus,
                    const tokenizer::Vocab& vocab) {
  return std::log(perplexity(p, c, corpus, vocab, 77));
}

TEST(Train, PatternedCorpusIsLearned) {
  const testing::PatternedCorpus pc;
  const auto vocab = pc.vocab();
  const auto c = desk_config(vocab);
  const auto corpus = encode_corpus(pc.sentences(200, 1), vocab, 16);
  const auto fresh = model::init_parameters<float>(c, 1);
  const double lnv = std::log(double(vocab.size()));
  EXPECT_NEAR(initial_loss(fresh, c, corpus, vocab), lnv, 0.1 * lnv);

  const auto tc = patterned_run(1);
  const auto r = train(fresh, c, corpus, tc, vocab);
  ASSERT_EQ(r.status, TrainStatus::kCompleted);
  EXPECT_EQ(r.steps, 30u * 13u);
  EXPECT_EQ(r.log.entries.size() + r.skipped_steps, r.steps);
  EXPECT_EQ(r.log.epoch_ends.size(), 30u);
  for (std::size_t i = 1; i < r.log.entries.size(); ++i) {
    EXPECT_LT(r.log.entries[i - 1].step, r.log.entries[i].step);
  }
  EXPECT_NEAR(r.log.entries.front().loss, lnv, 0.1 * lnv);
  EXPECT_LT(epoch_mean(r.log, 29), 0.5 * r.log.entries.front().loss);
  EXPECT_LT(loss_slope(r.log), 0.0);

  // Held-out sentences: the object is recoverable from the subject.
  int correct = 0, total = 0;
  for (const auto& s : pc.sentences(100, 2)) {
    auto ids = tokenizer::encode(s, vocab, 16).ids;
    for (int pos : {1, 3}) {
      auto masked = ids;
      masked[pos] = vocab.mask_id();
      const auto h = model::forward<float>(masked, model::full_mask(masked.size()), c,
                                           r.params);
      const auto logits = model::mlm_logits(h.back(), c, r.params);
      std::size_t best = 0;
      for (std::size_t v = 1; v < c.vocab_size; ++v) {
        if (logits(pos, v) > logits(pos, best)) best = v;
      }
      correct += int(best) == ids[pos];
      ++total;
    }
  }
  EXPECT_GT(double(correct) / total, 0.9);
}

TEST(Train, DeterministicAndSeedIsolated) {
  const testing::PatternedCorpus pc;
  const auto vocab = pc.vocab();
  const auto c = desk_config(vocab);
  const auto corpus = encode_corpus(pc.sentences(200, 1), vocab, 16);
  const auto fresh = model::init_parameters<float>(c, 1);
  auto tc = patterned_run(5);
  tc.epochs = 12;
  const auto a = train(fresh, c, corpus, tc, vocab);
  const auto b = train(fresh, c, corpus, tc, vocab);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.log.to_tsv(), b.log.to_tsv());
  tc.seed = 6;
  const auto other = train(fresh, c, corpus, tc, vocab);
  EXPECT_NE(a.log.to_tsv(), other.log.to_tsv());
  const double la = epoch_mean(a.log, 11), lb = epoch_mean(other.log, 11);
  EXPECT_LT(std::abs(la - lb), 0.15 * std::max(la, lb));
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const testing::PatternedCorpus pc;
  const auto vocab = pc.vocab();
  const auto c = desk_config(vocab);
  const auto corpus = encode_corpus(pc.sentences(64, 3), vocab, 16);
  const auto fresh = model::init_parameters<float>(c, 2);
  auto tc = patterned_run(1);
  tc.peak_lr = 0.0;
  tc.epochs = 6;
  const auto r = train(fresh, c, corpus, tc, vocab);
  EXPECT_EQ(r.params, fresh);
  EXPECT_EQ(r.steps, 6u * 4u);
  EXPECT_NEAR(epoch_mean(r.log, 5), epoch_mean(r.log, 0), 0.1 * epoch_mean(r.log, 0));
}

TEST(Train, OneStepLowersLossOnItsBatch) {
  const auto vocab = testing::general_and_security_vocab();
  const auto c = desk_config(vocab, 32);
  auto params = model::init_parameters<float>(c, 4);
  const auto [docs, labels] = testing::general_topics().generate(8, 8, 12, 5);
  const auto corpus = encode_corpus(docs, vocab, 32);
  std::vector<const std::vector<int>*> seqs;
  for (const auto& s : corpus) seqs.push_back(&s);
  Rng rng(6);
  const auto batch = make_mlm_batch(seqs, vocab, {}, rng);
  auto loss_of = [&](const BertParameters<float>& p) {
    Tape<float> tape(false);
    return mlm_loss(tape, model::bind(tape, p, false), batch, c, nullptr).value().item();
  };
  const double before = loss_of(params);
  Tape<float> tape;
  const auto vars = model::bind(tape, params, true);
  const auto grads = tape.backward(mlm_loss(tape, vars, batch, c, nullptr));
  AdamState<float> adam(params.tensors);
  adam_step<float>(params.tensors, grads, adam, 1e-4, 0.0);
  EXPECT_LT(loss_of(params), before);
}

TEST(Train, NonFiniteLossAbortsWithLastGoodParameters) {
  const testing::PatternedCorpus pc;
  const auto vocab = pc.vocab();
  const auto c = desk_config(vocab);
  const auto corpus = encode_corpus(pc.sentences(32, 3), vocab, 16);
  auto params = model::init_parameters<float>(c, 2);
  params[model::slot::mlm(c, model::slot::kOutputBias)][7] =
      std::numeric_limits<float>::infinity();
  auto tc = patterned_run(1);
  tc.epochs = 2;
  const auto r = train(params, c, corpus, tc, vocab);
  EXPECT_EQ(r.status, TrainStatus::kAbortedNonFinite);
  EXPECT_EQ(r.steps, 0u);
  EXPECT_FALSE(r.abort_reason.empty());
  EXPECT_EQ(r.params.names, params.names);
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(r.params[i].shape(), params[i].shape());
  }
}

TEST(Train, RejectsBadInputs) {
  const testing::PatternedCorpus pc;
  const auto vocab = pc.vocab();
  const auto c = desk_config(vocab);
  const auto p = model::init_parameters<float>(c, 1);
  EXPECT_THROW(train(p, c, {}, patterned_run(1), vocab), ValidationError);
  auto other = c;
  other.vocab_size += 1;
  EXPECT_THROW(train(model::init_parameters<float>(other, 1), other, {{2, 6, 3}},
                     patterned_run(1), vocab),
               ValidationError);
  auto tc = patterned_run(1);
  tc.batch_size = 0;
  EXPECT_THROW(train(p, c, {{2, 6, 3}}, tc, vocab), ValidationError);
}

TEST(Perplexity, FreshModelIsNearVocabSize) {
  const auto vocab = testing::general_and_security_vocab();
  const auto c = desk_config(vocab, 32);
  const auto p = model::init_parameters<float>(c, 8);
  const auto [docs, labels] = testing::general_topics().generate(200, 8, 14, 9);
  const auto corpus = encode_corpus(docs, vocab, 32);
  const double ppl = perplexity(p, c, corpus, vocab, 3);
  EXPECT_NEAR(ppl, double(vocab.size()), 0.2 * double(vocab.size()));
  EXPECT_EQ(ppl, perplexity(p, c, corpus, vocab, 3));
  EXPECT_THROW(perplexity(p, c, {}, vocab, 3), ValidationError);
}

TEST(Perplexity, OverfitModelIsConfident) {
  // Three sentences with no shared words: every piece is determined by
  // its neighbours.
  const auto vocab = testing::general_and_security_vocab();
  const auto c = desk_config(vocab, 16);
  const std::vector<std::string> docs{"bread soup cheese apple dinner",
                                      "malware trojan payload dropper worm",
                                      "rain cloud storm sunny wind"};
  const auto corpus = encode_corpus(docs, vocab, 16);
  std::vector<std::vector<int>> repeated;
  for (int i = 0; i < 20; ++i) repeated.insert(repeated.end(), corpus.begin(), corpus.end());
  TrainConfig tc;
  tc.peak_lr = 1e-3;
  tc.epochs = 60;
  tc.batch_size = 12;
  tc.warmup_steps = 10;
  tc.seed = 3;
  const auto r = train(model::init_parameters<float>(c, 3), c, repeated, tc, vocab);
  EXPECT_LT(perplexity(r.params, c, repeated, vocab, 4), 2.0);

  auto ids = corpus[1];
  const int gold = ids[3];
  ids[3] = vocab.mask_id();
  const auto h = model::forward<float>(ids, model::full_mask(ids.size()), c, r.params);
  const auto logits = model::mlm_logits(h.back(), c, r.params);
  std::size_t best = 0;
  for (std::size_t v = 1; v < c.vocab_size; ++v) {
    if (logits(3, v) > logits(3, best)) best = v;
  }
  EXPECT_EQ(int(best), gold);
}

TEST(Dapt, RegimenIsEnforced) {
  const testing::PatternedCorpus pc;
  const auto vocab = pc.vocab();
  const auto c = desk_config(vocab);
  const auto base = model::init_parameters<float>(c, 1);
  const auto domain = encode_corpus(pc.sentences(20, 4), vocab, 16);
  TrainConfig base_cfg = patterned_run(1);
  base_cfg.peak_lr = 1e-4;
  TrainConfig dapt_cfg = patterned_run(2);
  dapt_cfg.peak_lr = 1e-4;
  try {
    dapt(base, c, base_cfg, 10000, domain, dapt_cfg, vocab);
    FAIL() << "equal learning rates accepted";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "regimen-lr");
    EXPECT_NE(std::string(e.what()).find("below base peak_lr"), std::string::npos);
  }
  dapt_cfg.peak_lr = 2e-5;
  EXPECT_THROW(dapt(base, c, base_cfg, token_count(domain), domain, dapt_cfg, vocab),
               ValidationError);
  dapt_cfg.epochs = 0;
  const auto same = dapt(base, c, base_cfg, 10000, domain, dapt_cfg, vocab);
  EXPECT_EQ(same.params, base);
  EXPECT_TRUE(same.log.entries.empty());
  dapt_cfg.epochs = 1;
  const auto moved = dapt(base, c, base_cfg, 10000, domain, dapt_cfg, vocab);
  EXPECT_FALSE(moved.params == base);
}

TEST(LossLog, TwoColumnTable) {
  LossLog log;
  log.entries = {{1, 3.25}, {2, 3.0}};
  EXPECT_EQ(log.to_tsv(), "step\tloss\n1\t3.250000\n2\t3.000000\n");
  EXPECT_LT(loss_slope(log), 0.0);
}

}  // namespace
}  // namespace cysec::pretrain
