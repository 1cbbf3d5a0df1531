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

#ifndef CYSEC_NUMERICS_KERNELS_H_
#define CYSEC_NUMERICS_KERNELS_H_

// Eager tensor primitives. The differentiable versions in autodiff.h call
// into these for their forward values.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "cysec/numerics/tensor.h"

namespace cysec {

inline constexpr int kIgnoreLabel = -100;

namespace detail {

inline void require_matrix(const Shape& s, const char* what) {
  if (s.size() != 2) {
    throw DimensionError(std::string(what) + " expects a rank-2 tensor, got " +
                         shape_str(s));
  }
}

}  // namespace detail

// a [m x k] times b [k x n], or b^T when transpose_b is set (b is [n x k]).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b,
                 bool transpose_b = false) {
  detail::require_matrix(a.shape(), "matmul");
  detail::require_matrix(b.shape(), "matmul");
  const std::size_t inner_b = transpose_b ? b.dim(1) : b.dim(0);
  if (a.dim(1) != inner_b) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) +
                         (transpose_b ? "^T" : ""));
  }
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  Tensor<T> out(Shape{a.dim(0), n});
  if (transpose_b) {
    as_matrix(out).noalias() = as_matrix(a) * as_matrix(b).transpose();
  } else {
    as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  }
  return out;
}

// Softmax along `axis`, with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax axis " + std::to_string(axis) +
                         " invalid for shape " + shape_str(x.shape()));
  }
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor<T> out(s);
  std::vector<double> buf(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        mx = std::max(mx, static_cast<double>(x[base + j * inner]));
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        buf[j] = std::exp(static_cast<double>(x[base + j * inner]) - mx);
        sum += buf[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        out[base + j * inner] = static_cast<T>(buf[j] / sum);
      }
    }
  }
  return out;
}

// Normalized activations and per-row inverse standard deviation, kept for
// the backward pass.
template <typename T>
struct LayerNormCache {
  Tensor<T> normalized;
  std::vector<T> inv_std;
};

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps,
                     LayerNormCache<T>* cache = nullptr) {
  if (x.rank() == 0 || x.cols() == 0) {
    throw DimensionError("layer_norm over zero-length axis, shape " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw DimensionError("layer_norm parameters " + shape_str(gamma.shape()) +
                         "/" + shape_str(beta.shape()) +
                         " do not match normalized axis of " +
                         shape_str(x.shape()));
  }
  Tensor<T> out(x.shape());
  Tensor<T> normalized(x.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<T>(inv);
    for (std::size_t c = 0; c < cols; ++c) {
      const T xhat = static_cast<T>((row[c] - mean) * inv);
      normalized[r * cols + c] = xhat;
      out[r * cols + c] = gamma[c] * xhat + beta[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
T gelu_scalar(T x) {
  return static_cast<T>(0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)));
}

template <typename T>
T gelu_derivative(T x) {
  const double xd = x;
  const double cdf = 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * std::numbers::pi);
  return static_cast<T>(cdf + xd * pdf);
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = gelu_scalar(x[i]);
  return out;
}

// Sum of negative log-likelihoods over non-ignored rows and the count of
// such rows. Row probabilities are written to `probs` when given.
template <typename T>
std::pair<double, std::size_t> cross_entropy_sum(const Tensor<T>& logits,
                                                 std::span<const int> labels,
                                                 Tensor<T>* probs = nullptr) {
  detail::require_matrix(logits.shape(), "cross_entropy");
  const std::size_t rows = logits.dim(0), v = logits.dim(1);
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " positions");
  }
  if (probs) *probs = Tensor<T>(logits.shape());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = labels[r];
    if (label == kIgnoreLabel) continue;
    if (label < 0 || static_cast<std::size_t>(label) >= v) {
      throw ContractError("cross_entropy: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(v) + ")");
    }
    const T* row = logits.data() + r * v;
    double mx = -INFINITY;
    for (std::size_t c = 0; c < v; ++c) mx = std::max(mx, double(row[c]));
    double sum = 0.0;
    for (std::size_t c = 0; c < v; ++c) sum += std::exp(double(row[c]) - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - row[label];
    ++count;
    if (probs) {
      T* p = probs->data() + r * v;
      for (std::size_t c = 0; c < v; ++c) {
        p[c] = static_cast<T>(std::exp(double(row[c]) - log_z));
      }
    }
  }
  return {total, count};
}

// Mean masked cross-entropy; throws when every position is ignored.
template <typename T>
double cross_entropy_masked(const Tensor<T>& logits,
                            std::span<const int> labels) {
  const auto [total, count] = cross_entropy_sum(logits, labels);
  if (count == 0) {
    throw ContractError("cross_entropy_masked: all positions are ignored");
  }
  return total / static_cast<double>(count);
}

}  // namespace cysec

#endif  // CYSEC_NUMERICS_KERNELS_H_
