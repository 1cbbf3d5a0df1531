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

#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "cysec/corpus/pipeline.h"
#include "cysec/corpus/stats.h"
#include "cysec/numerics/rng.h"

namespace cysec::corpus {
namespace {

Document doc(std::string id, Source s, std::string text) {
  return {std::move(id), s, std::move(text)};
}

std::string line(const std::string& id, const std::string& src,
                 const std::string& text) {
  return to_json_line({id, *parse_source(src), text}) + "\n";
}

TEST(Ingest, ValidRecordsInFileOrder) {
  const std::string dump = line("a", "blog", "one") + line("b", "nvd", "two") +
                           line("c", "twitter", "three");
  const auto r = ingest_text(dump);
  ASSERT_EQ(r.documents.size(), 3u);
  EXPECT_EQ(r.documents[0].id, "a");
  EXPECT_EQ(r.documents[2].source, Source::kTwitter);
  EXPECT_EQ(r.skipped, 0u);
}

TEST(Ingest, MalformedLineIsCountedNotDropped) {
  std::string dump;
  for (int i = 0; i < 9; ++i) dump += line("d" + std::to_string(i), "nvd", "x");
  dump += "{not json\n";
  const auto r = ingest_text(dump);
  EXPECT_EQ(r.documents.size(), 9u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.skipped_lines, std::vector<std::size_t>{10});
}

TEST(Ingest, CorruptDumpIsRejected) {
  std::string dump = line("a", "nvd", "x") + line("b", "nvd", "y");
  dump += R"({"id":"c","source":"forum","text":"z"})" "\n";
  EXPECT_THROW(ingest_text(dump), ValidationError);
}

TEST(Ingest, EmptyAndMissingFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "cysec_corpus_test";
  std::filesystem::create_directories(dir);
  const auto empty = (dir / "empty.jsonl").string();
  std::ofstream(empty).close();
  const auto r = ingest(empty);
  EXPECT_TRUE(r.documents.empty());
  EXPECT_EQ(r.skipped, 0u);
  EXPECT_EQ(compute_stats(r.documents, tokenizer::Vocab({"[PAD]", "[UNK]", "[CLS]",
                                                         "[SEP]", "[MASK]"}))
                .total.entries,
            0);
  EXPECT_THROW(ingest((dir / "missing.jsonl").string()), ValidationError);
}

TEST(Filters, LengthBoundariesAreInclusiveKeep) {
  const auto rules = default_filter_rules();
  const std::vector<Document> docs{
      doc("b299", Source::kBlog, std::string(299, 'x')),
      doc("b300", Source::kBlog, std::string(300, 'x')),
      doc("a2999", Source::kArxiv, std::string(2999, 'x')),
      doc("a3000", Source::kArxiv, std::string(3000, 'x')),
      doc("nvd", Source::kNvd, "short cve text"),
  };
  const auto r = apply_filters(docs, rules);
  std::vector<std::string> ids;
  for (const auto& d : r.documents) ids.push_back(d.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"b300", "a3000", "nvd"}));
  EXPECT_EQ(r.report.dropped.at(Source::kBlog), 1u);
  EXPECT_EQ(r.report.dropped.at(Source::kArxiv), 1u);
}

TEST(Filters, CharLengthCountsCodePoints) {
  // 150 two-byte characters are 300 bytes but only 150 characters.
  std::string umlauts;
  for (int i = 0; i < 150; ++i) umlauts += "\xC3\xA4";
  EXPECT_EQ(doc("u", Source::kBlog, umlauts).char_len(), 150u);
  EXPECT_TRUE(apply_filters({doc("u", Source::kBlog, umlauts)},
                            default_filter_rules())
                  .documents.empty());
}

TEST(Filters, TwitterKeywordsMatchWholeTokens) {
  const auto rules = default_filter_rules();
  const std::vector<Document> docs{
      doc("t1", Source::kTwitter, "patch your systems"),
      doc("t2", Source::kTwitter, "new security advisory"),
      doc("t3", Source::kTwitter, "Great social media tips"),
      doc("t4", Source::kTwitter, "#InfoSec folks: read this"),
      doc("t5", Source::kTwitter, "the SOC is busy"),
  };
  std::vector<std::string> ids;
  for (const auto& d : apply_filters(docs, rules).documents) ids.push_back(d.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"t2", "t4", "t5"}));
  EXPECT_EQ(twitter_keywords().size(), 14u);
}

TEST(Filters, SourceWithoutRuleIsKept) {
  const std::vector<FilterRule> rules{{Source::kBlog, 300, {}}};
  const auto r = apply_filters({doc("t", Source::kTwitter, "anything")}, rules);
  EXPECT_EQ(r.documents.size(), 1u);
  EXPECT_THROW(apply_filters({}, {{Source::kBlog, 1, {}}, {Source::kBlog, 2, {}}}),
               ValidationError);
}

TEST(Filters, MonotoneUnderAddition) {
  Rng rng(4);
  const auto rules = default_filter_rules();
  std::vector<Document> docs;
  for (int i = 0; i < 200; ++i) {
    const Source s = kAllSources[rng.below(4)];
    const std::size_t len = rng.below(4000);
    std::string text(len, 'a');
    if (rng.below(2)) text += " threat";
    docs.push_back(doc("d" + std::to_string(i), s, text));
  }
  const auto base = apply_filters(docs, rules).documents;
  docs.push_back(doc("extra", Source::kBlog, std::string(500, 'b')));
  const auto more = apply_filters(docs, rules).documents;
  for (const auto& d : base) {
    EXPECT_NE(std::find(more.begin(), more.end(), d), more.end());
  }
}

TEST(Dedupe, ExactTextFirstOccurrence) {
  const auto a = doc("1", Source::kNvd, "A");
  const auto b = doc("2", Source::kNvd, "B");
  const auto a2 = doc("3", Source::kNvd, "A");
  EXPECT_EQ(dedupe({a, b, a2}), (std::vector<Document>{a, b}));
  EXPECT_EQ(dedupe({a, b}), (std::vector<Document>{a, b}));
  const auto a_space = doc("4", Source::kNvd, "A ");
  EXPECT_EQ(dedupe({a, a_space}).size(), 2u);
}

TEST(Dedupe, Idempotent) {
  Rng rng(8);
  std::vector<Document> docs;
  for (int i = 0; i < 300; ++i) {
    docs.push_back(doc(std::to_string(i), Source::kBlog,
                       "t" + std::to_string(rng.below(50))));
  }
  const auto once = dedupe(docs);
  EXPECT_EQ(dedupe(once), once);
  EXPECT_EQ(once.size(), 50u);
}

tokenizer::Vocab letters_vocab() {
  std::vector<std::string> pieces{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (char c = 'a'; c <= 'z'; ++c) pieces.emplace_back(1, c);
  return tokenizer::Vocab(pieces);
}

TEST(Stats, DirectArithmetic) {
  const auto vocab = letters_vocab();
  // Piece counts 2, 3, 5 (one piece per single-letter word).
  const std::vector<Document> docs{doc("1", Source::kNvd, "a b"),
                                   doc("2", Source::kNvd, "a b c"),
                                   doc("3", Source::kNvd, "a b c d e")};
  const auto s = compute_stats(docs, vocab).per_source.at(Source::kNvd);
  EXPECT_EQ(s.min, 2);
  EXPECT_EQ(s.max, 5);
  EXPECT_EQ(s.sum, 10);
  EXPECT_EQ(s.median, 3);
  EXPECT_DOUBLE_EQ(s.mean, 10.0 / 3.0);
  EXPECT_EQ(s.entries, 3);
}

TEST(Stats, SingletonAndEvenMedian) {
  const auto vocab = letters_vocab();
  const auto one = compute_stats({doc("1", Source::kBlog, "a b c d")}, vocab)
                       .per_source.at(Source::kBlog);
  EXPECT_EQ(one.min, one.max);
  EXPECT_EQ(one.median, one.min);
  EXPECT_DOUBLE_EQ(one.mean, double(one.min));
  EXPECT_EQ(summarize({4, 1, 3, 2}).median, 2);
}

TEST(Stats, TotalsAggregateSources) {
  Rng rng(21);
  const auto vocab = letters_vocab();
  std::vector<Document> docs;
  for (int i = 0; i < 60; ++i) {
    std::string text;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t k = 0; k < n; ++k) text += "x ";
    docs.push_back(doc(std::to_string(i), kAllSources[rng.below(3)], text));
  }
  const auto stats = compute_stats(docs, vocab);
  std::int64_t sum = 0, entries = 0, mn = INT64_MAX, mx = 0;
  for (const auto& [src, s] : stats.per_source) {
    sum += s.sum;
    entries += s.entries;
    if (s.entries) {
      mn = std::min(mn, s.min);
      mx = std::max(mx, s.max);
      EXPECT_LE(s.min, s.median);
      EXPECT_LE(s.median, s.max);
    }
  }
  EXPECT_EQ(stats.total.sum, sum);
  EXPECT_EQ(stats.total.entries, entries);
  EXPECT_EQ(stats.total.min, mn);
  EXPECT_EQ(stats.total.max, mx);
  EXPECT_EQ(stats.per_source.at(Source::kTwitter).entries, 0);
}

TEST(Stats, TableHasTheStatisticsColumns) {
  const auto vocab = letters_vocab();
  const auto text = format_stats(compute_stats({doc("1", Source::kNvd, "a b")}, vocab));
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "Source\tMin\tMax\tSum\tMedian\tMean\tEntries");
  EXPECT_NE(text.find("nvd\t2\t2\t2\t2\t2.00\t1\n"), std::string::npos);
  EXPECT_NE(text.find("total\t2\t2\t2\t2\t2.00\t1\n"), std::string::npos);
}

}  // namespace
}  // namespace cysec::corpus
