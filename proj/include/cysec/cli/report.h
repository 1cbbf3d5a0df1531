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

#ifndef CYSEC_CLI_REPORT_H_
#define CYSEC_CLI_REPORT_H_

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cysec/numerics/errors.h"
#include "cysec/util/io.h"

namespace cysec::cli {

// Result files the report understands, by name prefix:
//   cluster.*.tsv         model  k     silhouette
//   similarity.*.tsv      model  f1    pairs
//   classification.*.tsv  task   model f1 "mean (std)"
//   tagging.*.tsv         task   model f1 "mean (std)"
//   forgetting*.tsv       copied verbatim
struct Cell {
  std::string text;
  double value = 0.0;
};

struct ResultTable {
  std::string title;
  std::string row_header;
  std::string value_header;
  // row -> model -> cell; insertion order is irrelevant, rows sort by key
  std::map<std::string, std::map<std::string, Cell>> rows;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_tsv(const std::string& content) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    out.push_back(std::move(cells));
  }
  return out;
}

inline double leading_number(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ValidationError("bad-report", where + ": '" + s + "' is not a number");
  return v;
}

// Natural order for numeric row keys such as k values.
inline bool row_less(const std::string& a, const std::string& b) {
  char* ea = nullptr;
  char* eb = nullptr;
  const double x = std::strtod(a.c_str(), &ea);
  const double y = std::strtod(b.c_str(), &eb);
  if (*ea == '\0' && *eb == '\0' && ea != a.c_str() && eb != b.c_str()) return x < y;
  return a < b;
}

}  // namespace detail

class ReportBuilder {
 public:
  ReportBuilder() {
    tables_["cluster"] = {"Clustering (silhouette)", "k", "silhouette", {}};
    tables_["similarity"] = {"Word similarity (cloze F1)", "metric", "f1", {}};
    tables_["tagging"] = {"Named entity recognition (span F1)", "task", "f1", {}};
    tables_["classification"] = {"Classification (F1)", "task", "f1", {}};
  }

  // Returns false for files that are not result files.
  bool add_file(const std::filesystem::path& file) {
    const std::string name = file.filename().string();
    if (file.extension() != ".tsv") return false;
    const auto content = util::read_file(file.string());
    if (name.rfind("forgetting", 0) == 0) {
      forgetting_.emplace_back(name, content);
      return true;
    }
    const auto kind = name.substr(0, name.find('.'));
    if (!tables_.count(kind)) return false;
    const auto rows = detail::read_tsv(content);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const std::string where = name + ":" + std::to_string(i + 1);
      if (r.size() < 3) throw ValidationError("bad-report", where + ": expected 3 columns");
      if (kind == "cluster") {
        put(kind, r[1], r[0], r[2], where);
      } else if (kind == "similarity") {
        put(kind, "f1", r[0], r[1], where);
      } else {
        put(kind, r[0], r[1], r[2], where);
      }
    }
    return true;
  }

  bool empty() const {
    if (!forgetting_.empty()) return false;
    for (const auto& [k, t] : tables_) {
      if (!t.rows.empty()) return false;
    }
    return true;
  }

  std::string markdown() const {
    if (!conflicts_.empty()) {
      std::string m = "conflicting duplicate rows:";
      for (const auto& c : conflicts_) m += " [" + c + "]";
      throw ValidationError("duplicate-rows", m);
    }
    std::string out = "# Results\n";
    for (const char* kind : {"cluster", "similarity", "tagging", "classification"}) {
      const auto& t = tables_.at(kind);
      if (!t.rows.empty()) out += "\n" + render(t);
    }
    for (const auto& [name, content] : forgetting_) {
      out += "\n## Forgetting (" + name + ")\n\n";
      const auto rows = detail::read_tsv(content);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        out += "|";
        for (const auto& c : rows[i]) out += " " + c + " |";
        out += "\n";
        if (i == 0) {
          out += "|";
          for (std::size_t j = 0; j < rows[i].size(); ++j) out += " --- |";
          out += "\n";
        }
      }
    }
    return out;
  }

 private:
  void put(const std::string& kind, const std::string& row, const std::string& model,
           const std::string& text, const std::string& where) {
    const double v = detail::leading_number(text, where);
    auto& cells = tables_.at(kind).rows[row];
    const auto it = cells.find(model);
    if (it == cells.end()) {
      cells.emplace(model, Cell{text, v});
    } else if (it->second.text != text) {
      conflicts_.push_back(kind + " " + row + "/" + model + ": " + it->second.text + " vs " +
                           text + " at " + where);
    }
  }

  // Best value of a row in bold when more than one model reports it.
  static std::string render(const ResultTable& t) {
    std::vector<std::string> models;
    for (const auto& [row, cells] : t.rows) {
      for (const auto& [m, c] : cells) {
        if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
      }
    }
    std::sort(models.begin(), models.end());
    std::vector<std::string> keys;
    for (const auto& [row, cells] : t.rows) keys.push_back(row);
    std::sort(keys.begin(), keys.end(), detail::row_less);

    std::string out = "## " + t.title + "\n\n| " + t.row_header + " |";
    for (const auto& m : models) out += " " + m + " |";
    out += "\n| --- |";
    for (std::size_t i = 0; i < models.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& key : keys) {
      const auto& cells = t.rows.at(key);
      double best = -1e300;
      for (const auto& [m, c] : cells) best = std::max(best, c.value);
      out += "| " + key + " |";
      for (const auto& m : models) {
        const auto it = cells.find(m);
        if (it == cells.end()) {
          out += " - |";
        } else if (cells.size() > 1 && it->second.value == best) {
          out += " **" + it->second.text + "** |";
        } else {
          out += " " + it->second.text + " |";
        }
      }
      out += "\n";
    }
    return out;
  }

  std::map<std::string, ResultTable> tables_;
  std::vector<std::pair<std::string, std::string>> forgetting_;
  std::vector<std::string> conflicts_;
};

// Merges every result file of `directory` (sorted by name) into markdown.
inline std::string build_report(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw ValidationError("empty-run", directory.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(directory)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ReportBuilder b;
  for (const auto& f : files) b.add_file(f);
  if (b.empty()) {
    throw ValidationError("empty-run", directory.string() + " holds no result files");
  }
  return b.markdown();
}

}  // namespace cysec::cli

#endif  // CYSEC_CLI_REPORT_H_
