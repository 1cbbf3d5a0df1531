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

#ifndef CYSEC_EVALUATE_FORGETTING_H_
#define CYSEC_EVALUATE_FORGETTING_H_

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cysec/numerics/errors.h"

namespace cysec::evaluate {

using TaskScores = std::map<std::string, double>;

struct ForgettingRow {
  std::string task;
  double base;
  double adapted;
  double delta;
  bool improved;
};

struct ForgettingReport {
  std::vector<ForgettingRow> rows;  // sorted by task name
  double mean_delta = 0.0;
};

inline ForgettingReport forgetting_report(const TaskScores& base, const TaskScores& adapted) {
  std::string only_base, only_adapted;
  for (const auto& [t, v] : base) {
    if (!adapted.count(t)) only_base += (only_base.empty() ? "" : ", ") + t;
  }
  for (const auto& [t, v] : adapted) {
    if (!base.count(t)) only_adapted += (only_adapted.empty() ? "" : ", ") + t;
  }
  if (!only_base.empty() || !only_adapted.empty()) {
    throw ValidationError("task-mismatch", "task sets differ; only in base: [" + only_base +
                                               "], only in adapted: [" + only_adapted + "]");
  }
  if (base.empty()) throw ValidationError("task-mismatch", "no tasks to compare");
  ForgettingReport r;
  for (const auto& [t, b] : base) {
    const double a = adapted.at(t);
    r.rows.push_back({t, b, a, a - b, a > b});
    r.mean_delta += a - b;
  }
  r.mean_delta /= double(r.rows.size());
  return r;
}

// Two-column "task\tscore" table.
inline TaskScores parse_scores(const std::string& content, const std::string& origin = "<memory>") {
  TaskScores scores;
  std::istringstream in(content);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string task = line.substr(0, tab);
    if (n == 1 && task == "task") continue;
    double v = 0.0;
    std::size_t used = 0;
    try {
      if (tab == std::string::npos) throw std::invalid_argument("");
      v = std::stod(line.substr(tab + 1), &used);
    } catch (const std::exception&) {
      throw ValidationError("bad-record", origin + ":" + std::to_string(n) +
                                              ": expected task<TAB>score");
    }
    if (!scores.emplace(task, v).second) {
      throw ValidationError("bad-record", origin + ":" + std::to_string(n) +
                                              ": duplicate task " + task);
    }
  }
  return scores;
}

inline std::string format_forgetting(const ForgettingReport& r) {
  std::string out = "task\tbase\tadapted\tdelta\timproved\n";
  char buf[128];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\t%+.6f\t%s\n", row.base, row.adapted,
                  row.delta, row.improved ? "yes" : "no");
    out += row.task + buf;
  }
  std::snprintf(buf, sizeof(buf), "mean\t\t\t%+.6f\t\n", r.mean_delta);
  return out + buf;
}

}  // namespace cysec::evaluate

#endif  // CYSEC_EVALUATE_FORGETTING_H_
