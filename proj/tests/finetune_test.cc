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
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "cysec/finetune/finetune.h"
#include "support/synthetic.h"

namespace cysec::finetune {
namespace {

using Tags = std::vector<std::string>;

TEST(F1Binary, HandExamples) {
  const std::vector<int> gold{1, 1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(f1_binary(gold, gold, 1), 1.0);
  // TP=2, FP=1, FN=1.
  EXPECT_NEAR(f1_binary(std::vector<int>{1, 1, 0, 1, 0}, gold, 1), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(f1_binary(std::vector<int>{0, 0, 0, 0, 0}, gold, 1), 0.0);
  EXPECT_EQ(f1_binary(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 1), 0.0);
  EXPECT_THROW(f1_binary(std::vector<int>{1}, gold, 1), DimensionError);
}

TEST(F1Binary, MatchesConfusionMatrixOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<int> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(3));
      gold[i] = static_cast<int>(rng.below(3));
    }
    int m[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) ++m[pred[i] == 2][gold[i] == 2];
    const double p = m[1][1] + m[1][0] ? double(m[1][1]) / (m[1][1] + m[1][0]) : 0.0;
    const double r = m[1][1] + m[0][1] ? double(m[1][1]) / (m[1][1] + m[0][1]) : 0.0;
    const double oracle = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    ASSERT_NEAR(f1_binary(pred, gold, 2), oracle, 1e-12);
  }
}

TEST(SpanF1, HandExamples) {
  const Tags gold{"O", "B-SV", "I-SV", "O", "B-SN"};
  EXPECT_DOUBLE_EQ(span_f1({gold}, {gold}), 1.0);
  const Tags partial{"O", "B-SV", "I-SV", "O", "O"};
  EXPECT_NEAR(span_f1({partial}, {gold}), 2.0 / 3.0, 1e-12);
  const Tags leading_i{"O", "I-SV", "I-SV", "O", "O"};
  const auto spans = extract_spans(leading_i);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (Span{1, 2, "SV"}));
  EXPECT_NEAR(span_f1({leading_i}, {gold}), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(span_f1({Tags(5, "O")}, {gold}), 0.0);
  EXPECT_THROW(span_f1({Tags(4, "O")}, {gold}), DimensionError);
  // Type switch inside an I run opens a new span.
  EXPECT_EQ(extract_spans(Tags{"B-SV", "I-SN"}).size(), 2u);
}

TEST(Iob, Validation) {
  EXPECT_TRUE(iob_error(Tags{"B-SV", "I-SV", "O", "B-AC"}).empty());
  EXPECT_FALSE(iob_error(Tags{"O", "I-SV"}).empty());
  EXPECT_FALSE(iob_error(Tags{"B-SV", "I-SN"}).empty());
  EXPECT_FALSE(iob_error(Tags{"X-SV"}).empty());
}

// Brute force: (i, j, X) is a span iff position i starts an X entity, every
// position in (i, j] continues it and j + 1 does not.
std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::string>> oracle_spans(
    const std::vector<Tags>& seqs) {
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::string>> out;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& t = seqs[s];
    auto type = [&](std::size_t k) { return t[k] == "O" ? std::string() : t[k].substr(2); };
    auto continues = [&](std::size_t k, const std::string& x) {
      return t[k] == "I-" + x && k > 0 && type(k - 1) == x;
    };
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == "O") continue;
      const std::string x = type(i);
      if (continues(i, x)) continue;
      for (std::size_t j = i; j < t.size(); ++j) {
        bool inside = true;
        for (std::size_t k = i + 1; k <= j; ++k) inside = inside && continues(k, x);
        const bool closed = j + 1 == t.size() || !continues(j + 1, x);
        if (inside && closed) out.insert({s, i, j, x});
      }
    }
  }
  return out;
}

TEST(SpanF1, MatchesSpanSetOracle) {
  Rng rng(2);
  const std::vector<std::string> alphabet{"O", "B-SV", "I-SV", "B-SN", "I-SN"};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t items = 1 + rng.below(4);
    std::vector<Tags> pred, gold;
    for (std::size_t s = 0; s < items; ++s) {
      const std::size_t n = 1 + rng.below(10);
      Tags p, g;
      for (std::size_t k = 0; k < n; ++k) {
        p.push_back(alphabet[rng.below(alphabet.size())]);
        g.push_back(alphabet[rng.below(alphabet.size())]);
      }
      pred.push_back(p);
      gold.push_back(g);
    }
    const auto ps = oracle_spans(pred), gs = oracle_spans(gold);
    double tp = 0;
    for (const auto& s : ps) tp += gs.count(s);
    const double prec = ps.empty() ? 0.0 : tp / double(ps.size());
    const double rec = gs.empty() ? 0.0 : tp / double(gs.size());
    const double oracle = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    ASSERT_NEAR(span_f1(pred, gold), oracle, 1e-12);
    ASSERT_NEAR(span_f1(gold, pred), oracle, 1e-12);
  }
}

TEST(SpanF1, CorrectItemNeverLowersScore) {
  Rng rng(3);
  const std::vector<std::string> alphabet{"O", "B-SV", "I-SV"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tags> pred, gold;
    for (int s = 0; s < 3; ++s) {
      Tags p, g;
      for (int k = 0; k < 6; ++k) {
        p.push_back(alphabet[rng.below(3)]);
        g.push_back(alphabet[rng.below(3)]);
      }
      pred.push_back(p);
      gold.push_back(g);
    }
    const double before = span_f1(pred, gold);
    pred.push_back({"B-SV", "O"});
    gold.push_back({"B-SV", "O"});
    EXPECT_GE(span_f1(pred, gold) + 1e-12, before);
  }
}

TEST(TokenF1, CountsNonOTags) {
  // TP=1 (B-SV), FP: pred B-SN at gold O, FN: gold I-SV predicted O.
  const double f = token_f1({{"B-SV", "O", "B-SN"}}, {{"B-SV", "I-SV", "O"}});
  EXPECT_NEAR(f, 2.0 / 4.0, 1e-12);
}

TEST(Aggregate, MeanAndSampleStd) {
  const std::vector<double> same(5, 0.7);
  EXPECT_DOUBLE_EQ(aggregate(same).mean, 0.7);
  EXPECT_NEAR(aggregate(same).std, 0.0, 1e-15);
  const std::vector<double> v{0.8, 0.9, 0.9, 0.9, 1.0};
  const auto a = aggregate(v);
  EXPECT_NEAR(a.mean, 0.9, 1e-12);
  EXPECT_NEAR(a.std, std::sqrt(0.02 / 4.0), 1e-12);
  EXPECT_THROW(aggregate(std::vector<double>{0.5, 0.6}), ValidationError);
  EXPECT_EQ(format_mean_std({0.8869, 0.0026}), "0.8869 (0.0026)");
}

TEST(Data, ParsingAndSplits) {
  const auto items = parse_classification(
      "{\"text\": \"a\", \"label\": 1}\n\n{\"text\": \"b\", \"label\": \"neg\"}\n");
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].label, "1");
  EXPECT_EQ(items[1].label, "neg");
  EXPECT_THROW(parse_classification("{\"text\": 3, \"label\": 1}\n"), ValidationError);
  try {
    parse_tagging("{\"tokens\": [\"a\"], \"tags\": [\"O\"]}\n"
                  "{\"tokens\": [\"a\", \"b\"], \"tags\": [\"O\", \"I-SV\"]}\n",
                  "ner.jsonl");
    FAIL() << "invalid IOB accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ner.jsonl:2"), std::string::npos);
  }
  std::vector<int> numbers(20);
  for (int i = 0; i < 20; ++i) numbers[i] = i;
  const auto s = split(numbers);
  EXPECT_EQ(s.train.size(), 16u);
  EXPECT_EQ(s.dev, (std::vector<int>{16, 17}));
  EXPECT_EQ(s.test, (std::vector<int>{18, 19}));
  EXPECT_THROW(split(std::vector<int>{1, 2, 3}), ValidationError);
}

model::ModelConfig small_config(const tokenizer::Vocab& vocab) {
  model::ModelConfig c;
  c.layers = 2;
  c.vocab_size = vocab.size();
  c.max_seq = 32;
  return c;
}

FinetuneConfig fast_config() {
  FinetuneConfig fc;
  fc.peak_lr = 5e-4;
  fc.epochs = 4;
  fc.max_seq = 32;
  return fc;
}

Splits<ClassificationItem> separable(std::size_t n) {
  std::vector<ClassificationItem> items;
  for (const auto& it : testing::separable_classification(n, 5)) {
    items.push_back({it.text, std::to_string(it.label)});
  }
  return split(items);
}

TEST(Classify, SeparableTaskIsLearnedAndDeterministic) {
  const auto vocab = testing::general_and_security_vocab();
  const auto c = small_config(vocab);
  const auto encoder = model::init_parameters<float>(c, 1);
  const auto data = separable(400);
  const auto r = finetune_classify(encoder, c, vocab, data, {1, 2, 3, 4, 5}, fast_config());
  ASSERT_EQ(r.runs.size(), 5u);
  EXPECT_GE(r.summary.mean, 0.9);
  for (const auto& run : r.runs) EXPECT_GE(run.best_epoch, 1u);
  const auto again = finetune_classify(encoder, c, vocab, data, {1, 2, 3, 4, 5}, fast_config());
  EXPECT_EQ(r.values(), again.values());
  EXPECT_EQ(aggregate(r.values()).mean, r.summary.mean);
}

TEST(Classify, InputErrorsAndDegenerateLabels) {
  const auto vocab = testing::general_and_security_vocab();
  const auto c = small_config(vocab);
  const auto encoder = model::init_parameters<float>(c, 1);
  auto data = separable(60);
  EXPECT_THROW(finetune_classify(encoder, c, vocab, data, {1, 2, 3}), ValidationError);
  EXPECT_THROW(finetune_classify(encoder, c, vocab, data, {1, 1, 2, 3, 4}), ValidationError);
  auto empty = data;
  empty.dev.clear();
  EXPECT_THROW(finetune_classify(encoder, c, vocab, empty, {1, 2, 3, 4, 5}), ValidationError);
  for (auto& it : data.train) it.label = "0";
  auto fc = fast_config();
  fc.epochs = 1;
  const auto r = finetune_classify(encoder, c, vocab, data, {1, 2, 3, 4, 5}, fc);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.runs.size(), 5u);
}

TEST(Tag, VersionPatternIsLearned) {
  const auto vocab = testing::tagging_vocab();
  const auto c = small_config(vocab);
  const auto encoder = model::init_parameters<float>(c, 1);
  std::vector<TaggedItem> items;
  for (const auto& it : testing::version_tagging(400, 6)) items.push_back({it.tokens, it.tags});
  const auto r = finetune_tag(encoder, c, vocab, split(items), {1, 2, 3, 4, 5}, fast_config());
  for (const auto& run : r.runs) EXPECT_GE(run.test_metric, 0.9);
  EXPECT_GE(r.secondary.mean, 0.9);
}

TEST(Tag, AllOutsidePredictorScoresZero) {
  const std::vector<Tags> gold{{"B-SV", "O"}, {"O", "B-SN"}};
  const std::vector<Tags> pred{{"O", "O"}, {"O", "O"}};
  EXPECT_EQ(span_f1(pred, gold), 0.0);
  EXPECT_EQ(token_f1(pred, gold), 0.0);
}

TEST(Report, RowsUseMeanStdFormat) {
  RunReport r;
  r.task = "relevance";
  r.model = "dapt";
  r.summary = {0.8869, 0.0026};
  EXPECT_EQ(format_report_rows({r}), "task\tmodel\tf1\nrelevance\tdapt\t0.8869 (0.0026)\n");
}

}  // namespace
}  // namespace cysec::finetune
