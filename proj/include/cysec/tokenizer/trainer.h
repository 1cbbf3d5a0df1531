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

#ifndef CYSEC_TOKENIZER_TRAINER_H_
#define CYSEC_TOKENIZER_TRAINER_H_

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cysec/tokenizer/wordpiece.h"

namespace cysec::tokenizer {

// Learns a WordPiece vocabulary by repeatedly merging the most frequent
// adjacent symbol pair inside words. Symbols after the first character of a
// word carry the "##" prefix, so merges produce valid continuation pieces.
// Ties in pair frequency go to the lexicographically smallest pair, which
// makes the result a pure function of the input.
inline Vocab train_vocab(std::span<const std::string> documents,
                         std::size_t target_size, std::size_t min_frequency = 1) {
  std::map<std::string, std::int64_t> word_counts;
  for (const auto& doc : documents) {
    for (auto& w : basic_tokenize(doc)) ++word_counts[w];
  }
  if (word_counts.empty()) {
    throw ValidationError("empty-corpus", "train_vocab: corpus has no words");
  }

  std::map<std::string, std::int64_t> char_counts;
  for (const auto& [word, count] : word_counts) {
    for (const auto& c : utf8_chars(word)) char_counts[c] += count;
  }
  const std::int64_t threshold = static_cast<std::int64_t>(std::max<std::size_t>(min_frequency, 1));

  struct Word {
    std::vector<std::string> symbols;
    std::int64_t count;
  };
  std::vector<Word> words;
  std::set<std::string> alphabet;
  for (const auto& [word, count] : word_counts) {
    const auto chars = utf8_chars(word);
    if (chars.size() > kMaxWordChars) continue;
    bool representable = true;
    for (const auto& c : chars) representable &= char_counts[c] >= threshold;
    if (!representable) continue;
    Word w{{}, count};
    for (std::size_t i = 0; i < chars.size(); ++i) {
      w.symbols.push_back(i == 0 ? chars[i] : std::string(kContinuation) + chars[i]);
    }
    words.push_back(std::move(w));
  }
  // Every frequent character is representable both word-initially and as a
  // continuation.
  for (const auto& [c, count] : char_counts) {
    if (count < threshold) continue;
    alphabet.insert(c);
    alphabet.insert(std::string(kContinuation) + c);
  }

  const std::size_t base = kSpecialPieces.size() + alphabet.size();
  if (target_size <= base) {
    throw ValidationError(
        "vocab-size", "train_vocab: target size " + std::to_string(target_size) +
                          " must exceed specials + alphabet = " +
                          std::to_string(base));
  }

  std::vector<std::string> pieces(kSpecialPieces.begin(), kSpecialPieces.end());
  pieces.insert(pieces.end(), alphabet.begin(), alphabet.end());
  std::set<std::string> known(pieces.begin(), pieces.end());

  while (pieces.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_counts;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
        pair_counts[{w.symbols[i], w.symbols[i + 1]}] += w.count;
      }
    }
    const std::pair<std::string, std::string>* best = nullptr;
    std::int64_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr || best_count < threshold) break;
    const std::string left = best->first, right = best->second;
    const std::string merged = left + right.substr(kContinuation.size());
    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left &&
            w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(w.symbols[i]));
        }
      }
      w.symbols = std::move(next);
    }
    if (known.insert(merged).second) pieces.push_back(merged);
  }
  return Vocab(std::move(pieces));
}

}  // namespace cysec::tokenizer

#endif  // CYSEC_TOKENIZER_TRAINER_H_
