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

#ifndef CYSEC_TOKENIZER_WORDPIECE_H_
#define CYSEC_TOKENIZER_WORDPIECE_H_

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cysec/tokenizer/vocab.h"

namespace cysec::tokenizer {

inline constexpr std::size_t kMaxWordChars = 100;

// Pieces [begin, end) of the encoding that came from one word.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Encoding {
  std::vector<int> ids;
  std::vector<std::string> pieces;
  std::vector<std::uint8_t> attention_mask;
  std::vector<WordSpan> word_spans;

  std::size_t size() const { return ids.size(); }
};

// Splits UTF-8 text into code points; invalid bytes become one-byte units.
inline std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// ASCII lowercasing; multi-byte sequences pass through unchanged.
inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Lowercases, splits on whitespace, and makes every ASCII punctuation
// character its own word.
inline std::vector<std::string> basic_tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char c : lowercase(text)) {
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, c);
    } else {
      current += c;
    }
  }
  flush();
  return words;
}

// Greedy longest-match-first decomposition of one (already lowercased)
// word. Returns {"[UNK]"} when some suffix cannot be matched or the word is
// longer than kMaxWordChars.
inline std::vector<std::string> wordpiece(const std::string& word,
                                          const Vocab& vocab) {
  const auto chars = utf8_chars(word);
  if (chars.size() > kMaxWordChars) return {std::string(kUnk)};
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::size_t end = chars.size();
    std::string match;
    while (start < end) {
      std::string candidate = start > 0 ? std::string(kContinuation) : "";
      for (std::size_t k = start; k < end; ++k) candidate += chars[k];
      if (vocab.contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return {std::string(kUnk)};
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

namespace detail {

inline Encoding assemble(const std::vector<std::vector<std::string>>& words,
                         const Vocab& vocab, std::size_t max_seq) {
  if (max_seq < 2) {
    throw ContractError("encode: max_seq must be >= 2, got " +
                        std::to_string(max_seq));
  }
  Encoding enc;
  auto push = [&](const std::string& piece) {
    enc.ids.push_back(*vocab.find(piece));
    enc.pieces.push_back(piece);
    enc.attention_mask.push_back(1);
  };
  push(std::string(kCls));
  const std::size_t budget = max_seq - 2;
  for (const auto& word_pieces : words) {
    const std::size_t begin = enc.ids.size();
    for (const auto& p : word_pieces) {
      if (enc.ids.size() - 1 >= budget) break;
      push(p);
    }
    if (enc.ids.size() == begin && !word_pieces.empty()) break;
    enc.word_spans.push_back({begin, enc.ids.size()});
  }
  push(std::string(kSep));
  return enc;
}

}  // namespace detail

// [CLS] pieces... [SEP], truncated from the tail to at most max_seq pieces.
inline Encoding encode(std::string_view text, const Vocab& vocab,
                       std::size_t max_seq) {
  std::vector<std::vector<std::string>> words;
  for (const auto& w : basic_tokenize(text)) words.push_back(wordpiece(w, vocab));
  return detail::assemble(words, vocab, max_seq);
}

// Encodes pre-split words; each input word owns one span covering all of
// its pieces (a word may split further at punctuation).
inline Encoding encode_words(std::span<const std::string> words,
                             const Vocab& vocab, std::size_t max_seq) {
  std::vector<std::vector<std::string>> pieces;
  for (const auto& word : words) {
    std::vector<std::string> word_pieces;
    for (const auto& sub : basic_tokenize(word)) {
      for (auto& p : wordpiece(sub, vocab)) word_pieces.push_back(std::move(p));
    }
    pieces.push_back(std::move(word_pieces));
  }
  return detail::assemble(pieces, vocab, max_seq);
}

// Number of non-special pieces of `text` without truncation.
inline std::size_t count_pieces(std::string_view text, const Vocab& vocab) {
  std::size_t n = 0;
  for (const auto& w : basic_tokenize(text)) n += wordpiece(w, vocab).size();
  return n;
}

inline void pad_to(Encoding& enc, std::size_t length, const Vocab& vocab) {
  while (enc.ids.size() < length) {
    enc.ids.push_back(vocab.pad_id());
    enc.pieces.emplace_back(kPad);
    enc.attention_mask.push_back(0);
  }
}

// Joins pieces, fusing "##" continuations and dropping special pieces.
inline std::string decode(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    const std::string& piece = vocab.piece(id);
    if (vocab.is_special(id)) continue;
    if (is_continuation(piece)) {
      out += piece.substr(kContinuation.size());
    } else {
      if (!out.empty()) out += ' ';
      out += piece;
    }
  }
  return out;
}

}  // namespace cysec::tokenizer

#endif  // CYSEC_TOKENIZER_WORDPIECE_H_
