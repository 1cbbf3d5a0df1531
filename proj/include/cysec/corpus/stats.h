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

#ifndef CYSEC_CORPUS_STATS_H_
#define CYSEC_CORPUS_STATS_H_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "cysec/corpus/document.h"
#include "cysec/tokenizer/wordpiece.h"

namespace cysec::corpus {

// Token-count summary for one row of the statistics table.
struct TokenStats {
  std::int64_t min = 0;
  std::int64_t max = 0;
  std::int64_t sum = 0;
  std::int64_t median = 0;  // lower middle for even counts
  double mean = 0.0;
  std::int64_t entries = 0;
};

struct CorpusStats {
  std::map<Source, TokenStats> per_source;  // every source present, maybe zero
  TokenStats total;
};

inline TokenStats summarize(std::vector<std::int64_t> counts) {
  TokenStats s;
  if (counts.empty()) return s;
  std::sort(counts.begin(), counts.end());
  s.entries = static_cast<std::int64_t>(counts.size());
  s.min = counts.front();
  s.max = counts.back();
  for (auto c : counts) s.sum += c;
  s.median = counts[(counts.size() - 1) / 2];
  s.mean = double(s.sum) / double(s.entries);
  return s;
}

// Token count per document is its number of WordPiece pieces, without
// [CLS]/[SEP] and without truncation.
inline CorpusStats compute_stats(const std::vector<Document>& docs,
                                 const tokenizer::Vocab& vocab) {
  std::map<Source, std::vector<std::int64_t>> counts;
  std::vector<std::int64_t> all;
  for (const auto& d : docs) {
    const auto n = static_cast<std::int64_t>(tokenizer::count_pieces(d.text, vocab));
    counts[d.source].push_back(n);
    all.push_back(n);
  }
  CorpusStats stats;
  for (Source s : kAllSources) stats.per_source[s] = summarize(counts[s]);
  stats.total = summarize(std::move(all));
  return stats;
}

// Tab-separated table: Source, Min, Max, Sum, Median, Mean, Entries.
inline std::string format_stats(const CorpusStats& stats) {
  std::string out = "Source\tMin\tMax\tSum\tMedian\tMean\tEntries\n";
  auto row = [&](std::string_view name, const TokenStats& s) {
    char mean[64];
    std::snprintf(mean, sizeof(mean), "%.2f", s.mean);
    out += std::string(name) + '\t' + std::to_string(s.min) + '\t' +
           std::to_string(s.max) + '\t' + std::to_string(s.sum) + '\t' +
           std::to_string(s.median) + '\t' + mean + '\t' +
           std::to_string(s.entries) + '\n';
  };
  for (Source s : kAllSources) row(source_name(s), stats.per_source.at(s));
  row("total", stats.total);
  return out;
}

}  // namespace cysec::corpus

#endif  // CYSEC_CORPUS_STATS_H_
