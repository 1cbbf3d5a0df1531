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

#ifndef CYSEC_EVALUATE_CLOZE_H_
#define CYSEC_EVALUATE_CLOZE_H_

#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cysec/finetune/metrics.h"
#include "cysec/model/bert.h"

namespace cysec::evaluate {

struct SimilarityPair {
  std::string word1;
  std::string word2;
  bool similar = false;

  friend bool operator==(const SimilarityPair&, const SimilarityPair&) = default;
};

// One {"word1", "word2", "label"} object per line; label is "similar" /
// "dissimilar", a boolean, or 1 / 0.
inline std::vector<SimilarityPair> parse_pairs(const std::string& content,
                                               const std::string& origin = "<memory>") {
  std::vector<SimilarityPair> out;
  std::istringstream in(content);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    auto fail = [&](const std::string& m) {
      throw ValidationError("bad-record", origin + ":" + std::to_string(n) + ": " + m);
    };
    if (!j.is_object() || !j.contains("word1") || !j.contains("word2") ||
        !j.contains("label") || !j["word1"].is_string() || !j["word2"].is_string()) {
      fail("needs string word1, word2 and a label");
    }
    SimilarityPair p{j["word1"].get<std::string>(), j["word2"].get<std::string>(), false};
    const auto& l = j["label"];
    if (l.is_boolean()) {
      p.similar = l.get<bool>();
    } else if (l.is_number_integer() && (l.get<int>() == 0 || l.get<int>() == 1)) {
      p.similar = l.get<int>() == 1;
    } else if (l.is_string() && (l == "similar" || l == "dissimilar")) {
      p.similar = l == "similar";
    } else {
      fail("label must be similar/dissimilar, true/false or 1/0");
    }
    if (p.word1 == p.word2) fail("word1 equals word2");
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string to_json_lines(const std::vector<SimilarityPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["word1"] = p.word1;
    j["word2"] = p.word2;
    j["label"] = p.similar ? "similar" : "dissimilar";
    out += j.dump() + '\n';
  }
  return out;
}

// All positives followed by as many negatives drawn uniformly, without
// replacement, from pairs of words that come from different positive pairs
// and are not themselves listed as similar.
inline std::vector<SimilarityPair> build_pairs(
    const std::vector<std::pair<std::string, std::string>>& positives, Rng& rng) {
  if (positives.size() < 2) {
    throw ValidationError("too-few-pairs", "build_pairs needs at least two positive pairs");
  }
  std::vector<std::string> words;
  std::set<std::pair<std::string, std::string>> listed;
  auto key = [](const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  };
  for (const auto& [a, b] : positives) {
    for (const auto* w : {&a, &b}) {
      if (std::find(words.begin(), words.end(), *w) == words.end()) words.push_back(*w);
    }
    listed.insert(key(a, b));
  }
  std::vector<std::pair<std::string, std::string>> candidates;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (!listed.count(key(words[i], words[j]))) candidates.emplace_back(words[i], words[j]);
    }
  }
  if (candidates.size() < positives.size()) {
    throw ValidationError("too-few-negatives",
                          "only " + std::to_string(candidates.size()) +
                              " negative combinations for " +
                              std::to_string(positives.size()) + " positive pairs");
  }
  rng.shuffle(candidates);
  std::vector<SimilarityPair> out;
  for (const auto& [a, b] : positives) out.push_back({a, b, true});
  for (std::size_t i = 0; i < positives.size(); ++i) {
    out.push_back({candidates[i].first, candidates[i].second, false});
  }
  return out;
}

// Template input: "are w1 and w2 similar ? [MASK]" between [CLS] and [SEP].
struct ClozeInput {
  std::vector<int> ids;
  std::vector<std::string> pieces;
  std::vector<std::uint8_t> attention_mask;
  std::size_t mask_position = 0;
};

inline ClozeInput cloze_input(const std::string& word1, const std::string& word2,
                              const tokenizer::Vocab& vocab, std::size_t max_seq) {
  if (max_seq < 3) throw ContractError("cloze_input: max_seq must be >= 3");
  const auto enc = tokenizer::encode("are " + word1 + " and " + word2 + " similar ?",
                                     vocab, max_seq - 1);
  ClozeInput in{enc.ids, enc.pieces, enc.attention_mask, enc.ids.size() - 1};
  in.ids.insert(in.ids.end() - 1, vocab.mask_id());
  in.pieces.insert(in.pieces.end() - 1, std::string(tokenizer::kMask));
  in.attention_mask.push_back(1);
  return in;
}

struct AnswerIds {
  int yes;
  int no;
};

inline AnswerIds answer_ids(const tokenizer::Vocab& vocab) {
  const auto yes = vocab.find("yes");
  const auto no = vocab.find("no");
  if (!yes || !no) {
    throw ValidationError("cloze-vocab",
                          "vocabulary lacks single-piece \"yes\" and \"no\" answers");
  }
  return {*yes, *no};
}

// Logits of "yes" and "no" at the mask position.
class YesNoScorer {
 public:
  virtual ~YesNoScorer() = default;
  virtual std::pair<double, double> score(const ClozeInput& input) const = 0;
};

class ModelScorer : public YesNoScorer {
 public:
  ModelScorer(const model::BertParameters<float>& params, const model::ModelConfig& config,
              const tokenizer::Vocab& vocab)
      : params_(params), config_(config), answers_(answer_ids(vocab)) {}

  std::pair<double, double> score(const ClozeInput& in) const override {
    const auto hidden =
        model::forward<float>(in.ids, in.attention_mask, config_, params_);
    const auto logits = model::mlm_logits(hidden.back(), config_, params_);
    return {logits(in.mask_position, answers_.yes), logits(in.mask_position, answers_.no)};
  }

 private:
  const model::BertParameters<float>& params_;
  model::ModelConfig config_;
  AnswerIds answers_;
};

struct ClozeResult {
  double f1 = 0.0;
  std::vector<bool> predicted_similar;
  std::vector<std::pair<double, double>> logits;
};

// Predicts "similar" iff logit(yes) >= logit(no); F1 treats similar as the
// positive class.
inline ClozeResult cloze_similarity_eval(const YesNoScorer& scorer,
                                         const std::vector<SimilarityPair>& pairs,
                                         const tokenizer::Vocab& vocab,
                                         std::size_t max_seq = 128) {
  answer_ids(vocab);
  ClozeResult r;
  std::vector<int> pred, gold;
  for (const auto& p : pairs) {
    const auto s = scorer.score(cloze_input(p.word1, p.word2, vocab, max_seq));
    const bool similar = s.first >= s.second;
    r.logits.push_back(s);
    r.predicted_similar.push_back(similar);
    pred.push_back(similar);
    gold.push_back(p.similar);
  }
  r.f1 = finetune::f1_binary(pred, gold, 1);
  return r;
}

inline std::string format_cloze(const std::vector<SimilarityPair>& pairs,
                                const ClozeResult& r) {
  std::string out = "word1\tword2\tlabel\tpredicted\tlogit_yes\tlogit_no\n";
  char buf[96];
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\n", r.logits[i].first, r.logits[i].second);
    out += pairs[i].word1 + '\t' + pairs[i].word2 + '\t' +
           (pairs[i].similar ? "similar" : "dissimilar") + '\t' +
           (r.predicted_similar[i] ? "similar" : "dissimilar") + buf;
  }
  return out;
}

}  // namespace cysec::evaluate

#endif  // CYSEC_EVALUATE_CLOZE_H_
