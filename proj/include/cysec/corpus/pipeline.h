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

#ifndef CYSEC_CORPUS_PIPELINE_H_
#define CYSEC_CORPUS_PIPELINE_H_

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cysec/corpus/document.h"

namespace cysec::corpus {

struct IngestResult {
  std::vector<Document> documents;
  std::size_t skipped = 0;
  // 1-based line numbers of skipped records.
  std::vector<std::size_t> skipped_lines;
};

// Share of malformed lines above which a dump is rejected as corrupt.
inline constexpr double kMaxMalformedFraction = 0.10;

// Parses a JSON Lines dump. Blank lines are ignored; lines that are not a
// JSON object with string fields id/source/text, use an unknown source, or
// repeat an earlier id are counted in `skipped`.
inline IngestResult ingest_text(const std::string& content,
                                const std::string& origin = "<memory>") {
  IngestResult result;
  std::set<std::string> seen_ids;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0, records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++records;
    auto j = nlohmann::json::parse(line, nullptr, false);
    bool ok = j.is_object() && j.contains("id") && j.contains("source") &&
              j.contains("text") && j["id"].is_string() &&
              j["source"].is_string() && j["text"].is_string();
    std::optional<Source> source;
    if (ok) source = parse_source(j["source"].get<std::string>());
    if (ok && source && seen_ids.insert(j["id"].get<std::string>()).second) {
      result.documents.push_back(
          {j["id"].get<std::string>(), *source, j["text"].get<std::string>()});
    } else {
      ++result.skipped;
      result.skipped_lines.push_back(line_no);
    }
  }
  if (records > 0 &&
      double(result.skipped) > kMaxMalformedFraction * double(records)) {
    throw ValidationError(
        "corrupt-dump", origin + ": " + std::to_string(result.skipped) + " of " +
                            std::to_string(records) + " lines malformed");
  }
  return result;
}

inline IngestResult ingest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("unreadable-file", "cannot read dump " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_text(buf.str(), path);
}

// Keeps a document of `source` iff char_len >= min_chars and, when keywords
// are given, at least one whole lowercase token is a keyword.
struct FilterRule {
  Source source = Source::kBlog;
  std::size_t min_chars = 0;
  std::set<std::string> keywords;
};

inline const std::set<std::string>& twitter_keywords() {
  static const std::set<std::string> kKeywords = {
      "infosec", "security", "threat", "vulnerability", "cyber",
      "cybersec", "infrasec", "netsec", "hacking", "siem",
      "soc", "offsec", "osing", "bugbounty"};
  return kKeywords;
}

inline std::vector<FilterRule> default_filter_rules() {
  return {
      {Source::kBlog, 300, {}},
      {Source::kArxiv, 3000, {}},
      {Source::kTwitter, 0, twitter_keywords()},
  };
}

// Lowercase alphanumeric runs of the text.
inline std::vector<std::string> keyword_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : tokenizer::lowercase(text)) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur += c;
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline bool passes(const FilterRule& rule, const Document& doc) {
  if (doc.char_len() < rule.min_chars) return false;
  if (rule.keywords.empty()) return true;
  for (const auto& tok : keyword_tokens(doc.text)) {
    if (rule.keywords.count(tok)) return true;
  }
  return false;
}

struct FilterReport {
  std::map<Source, std::size_t> dropped;
  std::map<Source, std::size_t> kept;
};

struct FilterResult {
  std::vector<Document> documents;
  FilterReport report;
};

inline FilterResult apply_filters(const std::vector<Document>& docs,
                                  const std::vector<FilterRule>& rules) {
  std::map<Source, const FilterRule*> by_source;
  for (const auto& r : rules) {
    if (!by_source.emplace(r.source, &r).second) {
      throw ValidationError("filter-rules", "more than one filter rule for " +
                                                std::string(source_name(r.source)));
    }
  }
  FilterResult result;
  for (const auto& doc : docs) {
    auto it = by_source.find(doc.source);
    if (it == by_source.end() || passes(*it->second, doc)) {
      result.documents.push_back(doc);
      ++result.report.kept[doc.source];
    } else {
      ++result.report.dropped[doc.source];
    }
  }
  return result;
}

// Exact byte-equality deduplication on text; first occurrence wins.
inline std::vector<Document> dedupe(const std::vector<Document>& docs) {
  std::unordered_set<std::string> seen;
  std::vector<Document> out;
  for (const auto& d : docs) {
    if (seen.insert(d.text).second) out.push_back(d);
  }
  return out;
}

}  // namespace cysec::corpus

#endif  // CYSEC_CORPUS_PIPELINE_H_
