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

#ifndef CYSEC_CORPUS_DOCUMENT_H_
#define CYSEC_CORPUS_DOCUMENT_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cysec/numerics/errors.h"
#include "cysec/tokenizer/wordpiece.h"

namespace cysec::corpus {

enum class Source { kBlog, kArxiv, kNvd, kTwitter };

inline constexpr std::array<Source, 4> kAllSources = {
    Source::kBlog, Source::kArxiv, Source::kNvd, Source::kTwitter};

inline std::string_view source_name(Source s) {
  switch (s) {
    case Source::kBlog: return "blog";
    case Source::kArxiv: return "arxiv";
    case Source::kNvd: return "nvd";
    case Source::kTwitter: return "twitter";
  }
  return "?";
}

inline std::optional<Source> parse_source(std::string_view name) {
  for (Source s : kAllSources) {
    if (source_name(s) == name) return s;
  }
  return std::nullopt;
}

struct Document {
  std::string id;
  Source source = Source::kBlog;
  std::string text;

  // Length in Unicode code points.
  std::size_t char_len() const { return tokenizer::utf8_length(text); }

  friend bool operator==(const Document&, const Document&) = default;
};

// One JSON Lines record with fields id, source, text.
inline std::string to_json_line(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["source"] = std::string(source_name(doc.source));
  j["text"] = doc.text;
  return j.dump();
}

inline std::string to_json_lines(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    out += to_json_line(d);
    out += '\n';
  }
  return out;
}

}  // namespace cysec::corpus

#endif  // CYSEC_CORPUS_DOCUMENT_H_
