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

#ifndef CYSEC_EVALUATE_CLUSTERING_H_
#define CYSEC_EVALUATE_CLUSTERING_H_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cysec/model/bert.h"
#include "cysec/numerics/errors.h"
#include "cysec/numerics/rng.h"

namespace cysec::evaluate {

using Point = std::vector<double>;

inline double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<Point> centroids;
  // Sum of squared distances after each assignment step.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

namespace detail {

inline void check_points(const std::vector<Point>& points) {
  for (const auto& p : points) {
    if (p.size() != points.front().size()) {
      throw DimensionError("points differ in dimension: " + std::to_string(p.size()) +
                           " vs " + std::to_string(points.front().size()));
    }
  }
}

// Nearest centroid; the lowest index wins ties.
inline std::size_t nearest(const Point& p, const std::vector<Point>& centroids,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = squared_distance(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline std::vector<Point> kmeans_pp(const std::vector<Point>& points, std::size_t k,
                                    Rng& rng) {
  std::vector<Point> centroids{points[rng.below(points.size())]};
  std::vector<bool> chosen(points.size(), false);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest(points[i], centroids, &d2[i]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (d2[i] > 0.0 && u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
      while (d2[pick] == 0.0) --pick;
    } else {
      // Every point coincides with a centroid: take the first unused index.
      for (const auto& c : centroids) {
        for (std::size_t i = 0; i < points.size(); ++i) {
          if (!chosen[i] && points[i] == c) {
            chosen[i] = true;
            break;
          }
        }
      }
      while (pick < points.size() && chosen[pick]) ++pick;
      if (pick == points.size()) pick = 0;
    }
    chosen[pick] = true;
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace detail

// k-means++ seeding followed by Lloyd iterations until the assignments stop
// changing. An emptied cluster is reseeded with the point farthest from its
// centroid.
inline KMeansResult kmeans(const std::vector<Point>& points, std::size_t k,
                           std::uint64_t seed, std::size_t max_iter = 300) {
  if (k == 0 || points.size() < k) {
    throw ValidationError("too-few-points", "kmeans: " + std::to_string(points.size()) +
                                                " points for k = " + std::to_string(k));
  }
  detail::check_points(points);
  Rng rng(seed);
  KMeansResult r;
  r.centroids = detail::kmeans_pp(points, k, rng);
  r.assignments.assign(points.size(), k);
  const std::size_t dim = points.front().size();
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    std::vector<double> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = detail::nearest(points[i], r.centroids, &dist[i]);
      changed |= c != r.assignments[i];
      r.assignments[i] = c;
    }
    // Reseed empty clusters.
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : r.assignments) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = points.size();
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (sizes[r.assignments[i]] > 1 && (far == points.size() || dist[i] > dist[far])) {
          far = i;
        }
      }
      if (far == points.size()) break;
      --sizes[r.assignments[far]];
      r.assignments[far] = c;
      sizes[c] = 1;
      r.centroids[c] = points[far];
      dist[far] = 0.0;
      changed = true;
    }
    double inertia = 0.0;
    for (double d : dist) inertia += d;
    r.inertia_history.push_back(inertia);
    r.iterations = iter + 1;
    if (!changed) break;
    std::vector<Point> sums(k, Point(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) sums[r.assignments[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] /= double(sizes[c]);
      r.centroids[c] = std::move(sums[c]);
    }
  }
  return r;
}

// Mean silhouette with Euclidean distance. Points alone in their cluster
// score 0.
inline double silhouette(const std::vector<Point>& points,
                         const std::vector<std::size_t>& assignments) {
  if (points.size() != assignments.size()) {
    throw DimensionError("silhouette: " + std::to_string(points.size()) + " points, " +
                         std::to_string(assignments.size()) + " assignments");
  }
  detail::check_points(points);
  std::map<std::size_t, std::size_t> index;
  for (auto a : assignments) index.emplace(a, index.size());
  if (index.size() < 2) {
    throw ValidationError("single-cluster", "silhouette needs at least two clusters");
  }
  const std::size_t k = index.size(), n = points.size();
  std::vector<std::size_t> label(n), size(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    label[i] = index[assignments[i]];
    ++size[label[i]];
  }
  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[label[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    const std::size_t own = label[i];
    if (size[own] == 1) continue;
    const double a = sums[own] / double(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums[c] / double(size[c]));
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / double(n);
}

struct ClusterScore {
  std::size_t k;
  double silhouette;
};

// Embeds each document, then clusters for every k in [k_min, k_max].
inline std::vector<ClusterScore> cluster_eval(const model::BertParameters<float>& params,
                                              const model::ModelConfig& config,
                                              const tokenizer::Vocab& vocab,
                                              const std::vector<std::string>& documents,
                                              std::size_t k_min, std::size_t k_max,
                                              std::uint64_t seed) {
  if (k_min < 2 || k_max < k_min) {
    throw ValidationError("k-range", "k range must satisfy 2 <= k_min <= k_max");
  }
  if (documents.size() < k_max) {
    throw ValidationError("too-few-points", std::to_string(documents.size()) +
                                                " documents for k up to " +
                                                std::to_string(k_max));
  }
  std::vector<Point> points;
  points.reserve(documents.size());
  for (const auto& d : documents) {
    points.push_back(model::embed_document(d, vocab, config, params));
  }
  std::vector<ClusterScore> out;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const auto km = kmeans(points, k, seed);
    out.push_back({k, silhouette(points, km.assignments)});
  }
  return out;
}

inline std::string format_cluster_scores(const std::vector<ClusterScore>& scores) {
  std::string out = "k\tsilhouette\n";
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\n", s.k, s.silhouette);
    out += buf;
  }
  return out;
}

}  // namespace cysec::evaluate

#endif  // CYSEC_EVALUATE_CLUSTERING_H_
