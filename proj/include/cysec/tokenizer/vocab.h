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

#ifndef CYSEC_TOKENIZER_VOCAB_H_
#define CYSEC_TOKENIZER_VOCAB_H_

#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cysec/numerics/errors.h"
#include "cysec/util/io.h"

namespace cysec::tokenizer {

inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kContinuation = "##";
inline constexpr std::array<std::string_view, 5> kSpecialPieces = {
    kPad, kUnk, kCls, kSep, kMask};

inline bool is_continuation(std::string_view piece) {
  return piece.size() > kContinuation.size() &&
         piece.substr(0, kContinuation.size()) == kContinuation;
}

// WordPiece vocabulary; the id of a piece is its position in the list.
class Vocab {
 public:
  Vocab() = default;

  explicit Vocab(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
    index_.reserve(pieces_.size());
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const std::string& p = pieces_[i];
      if (p.empty()) {
        throw ValidationError("vocab", "vocab line " + std::to_string(i + 1) +
                                           ": empty piece");
      }
      if (!index_.emplace(p, static_cast<int>(i)).second) {
        throw ValidationError("vocab", "vocab line " + std::to_string(i + 1) +
                                           ": duplicate piece '" + p + "'");
      }
    }
    for (std::size_t s = 0; s < kSpecialPieces.size(); ++s) {
      auto it = index_.find(std::string(kSpecialPieces[s]));
      if (it == index_.end()) {
        throw ValidationError("vocab", "vocab is missing special piece " +
                                           std::string(kSpecialPieces[s]));
      }
      special_ids_[s] = it->second;
    }
    is_special_.assign(pieces_.size(), false);
    for (int id : special_ids_) is_special_[id] = true;
  }

  static Vocab parse(std::string_view text) {
    std::vector<std::string> pieces;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      pieces.push_back(line);
    }
    return Vocab(std::move(pieces));
  }

  static Vocab load(const std::string& path) {
    return parse(util::read_file(path));
  }

  // One piece per line; line number (0-based) is the id.
  std::string serialize() const {
    std::string out;
    for (const auto& p : pieces_) {
      out += p;
      out += '\n';
    }
    return out;
  }

  void save(const std::string& path) const {
    util::write_file_atomic(path, serialize());
  }

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  const std::string& piece(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) {
      throw ContractError("vocab id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(pieces_.size()) + ")");
    }
    return pieces_[id];
  }

  std::optional<int> find(const std::string& piece) const {
    auto it = index_.find(piece);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& piece) const { return index_.count(piece) > 0; }

  int pad_id() const { return special_ids_[0]; }
  int unk_id() const { return special_ids_[1]; }
  int cls_id() const { return special_ids_[2]; }
  int sep_id() const { return special_ids_[3]; }
  int mask_id() const { return special_ids_[4]; }

  bool is_special(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < is_special_.size() &&
           is_special_[id];
  }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  std::array<int, 5> special_ids_{};
  std::vector<bool> is_special_;
};

}  // namespace cysec::tokenizer

#endif  // CYSEC_TOKENIZER_VOCAB_H_
