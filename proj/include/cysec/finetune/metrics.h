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

#ifndef CYSEC_FINETUNE_METRICS_H_
#define CYSEC_FINETUNE_METRICS_H_

#include <cmath>
#include <cstdio>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cysec/numerics/errors.h"

namespace cysec::finetune {

inline double f1_from_counts(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

template <typename L>
double f1_binary(std::span<const L> predictions, std::span<const L> gold,
                 const L& positive) {
  if (predictions.size() != gold.size()) {
    throw DimensionError("f1_binary: " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(gold.size()) +
                         " gold labels");
  }
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] == positive, g = gold[i] == positive;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  return f1_from_counts(tp, fp, fn);
}

template <typename L>
double f1_binary(const std::vector<L>& predictions, const std::vector<L>& gold,
                 const L& positive) {
  return f1_binary(std::span<const L>(predictions), std::span<const L>(gold), positive);
}

// Inclusive word range with an entity type.
struct Span {
  std::size_t start;
  std::size_t end;
  std::string type;

  friend auto operator<=>(const Span&, const Span&) = default;
};

inline std::string tag_type(const std::string& tag) {
  return tag.size() > 2 ? tag.substr(2) : std::string();
}

inline bool is_valid_tag(const std::string& tag) {
  return tag == "O" ||
         (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-');
}

// Empty when the sequence is valid IOB, else a description of the first
// offending position.
inline std::string iob_error(std::span<const std::string> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!is_valid_tag(tags[i])) return "position " + std::to_string(i) + ": bad tag '" + tags[i] + "'";
    if (tags[i][0] == 'I') {
      const bool continues = i > 0 && tags[i - 1] != "O" &&
                             tag_type(tags[i - 1]) == tag_type(tags[i]);
      if (!continues) {
        return "position " + std::to_string(i) + ": " + tags[i] +
               " does not continue an entity";
      }
    }
  }
  return {};
}

// Spans of a tag sequence. An I-X that does not continue an X entity opens
// a new one, as if it were B-X. Unknown tags count as O.
inline std::vector<Span> extract_spans(std::span<const std::string> tags) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (!is_valid_tag(t) || t == "O") {
      open = false;
      continue;
    }
    const std::string type = tag_type(t);
    if (t[0] == 'I' && open && spans.back().type == type) {
      spans.back().end = i;
    } else {
      spans.push_back({i, i, type});
      open = true;
    }
  }
  return spans;
}

using TagSequences = std::vector<std::vector<std::string>>;

inline void check_aligned(const TagSequences& pred, const TagSequences& gold,
                          const char* what) {
  if (pred.size() != gold.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(pred.size()) +
                         " predicted sequences for " + std::to_string(gold.size()) +
                         " gold sequences");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i].size() != gold[i].size()) {
      throw DimensionError(std::string(what) + ": sequence " + std::to_string(i) +
                           " has " + std::to_string(pred[i].size()) +
                           " predicted tags for " + std::to_string(gold[i].size()) +
                           " words");
    }
  }
}

// Exact-match micro F1 over (item, start, end, type) spans.
inline double span_f1(const TagSequences& pred, const TagSequences& gold) {
  check_aligned(pred, gold, "span_f1");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto ps = extract_spans(pred[i]);
    const auto gs = extract_spans(gold[i]);
    const std::set<Span> g(gs.begin(), gs.end());
    const std::set<Span> p(ps.begin(), ps.end());
    for (const auto& s : p) (g.count(s) ? tp : fp) += 1;
    for (const auto& s : g) fn += !p.count(s);
  }
  return f1_from_counts(tp, fp, fn);
}

// Micro F1 over word tags with O as the negative class.
inline double token_f1(const TagSequences& pred, const TagSequences& gold) {
  check_aligned(pred, gold, "token_f1");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < gold[i].size(); ++j) {
      const auto& p = pred[i][j];
      const auto& g = gold[i][j];
      if (p == g) {
        tp += g != "O";
      } else {
        fp += p != "O";
        fn += g != "O";
      }
    }
  }
  return f1_from_counts(tp, fp, fn);
}

inline constexpr std::size_t kReportRuns = 5;

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
};

inline Aggregate aggregate(std::span<const double> values) {
  if (values.size() != kReportRuns) {
    throw ValidationError("run-count", "aggregate expects " +
                                           std::to_string(kReportRuns) +
                                           " values, got " +
                                           std::to_string(values.size()));
  }
  Aggregate a;
  for (double v : values) a.mean += v;
  a.mean /= double(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / double(values.size() - 1));
  return a;
}

// "0.8869 (0.0026)"
inline std::string format_mean_std(const Aggregate& a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f (%.4f)", a.mean, a.std);
  return buf;
}

}  // namespace cysec::finetune

#endif  // CYSEC_FINETUNE_METRICS_H_
