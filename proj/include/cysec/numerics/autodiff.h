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

#ifndef CYSEC_NUMERICS_AUTODIFF_H_
#define CYSEC_NUMERICS_AUTODIFF_H_

// Reverse-mode differentiation over a linear tape of primitive operations.
//
// Every primitive computes its value eagerly and, when the tape records and
// any input requires a gradient, appends an adjoint closure. backward()
// replays the closures in reverse order, accumulating into per-node
// gradient buffers that are allocated on first use.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cysec/numerics/kernels.h"
#include "cysec/numerics/rng.h"
#include "cysec/numerics/tensor.h"

namespace cysec {

template <typename T>
class Tape;

template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  // A non-recording tape evaluates values only; backward() is unavailable.
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<T> constant(Tensor<T> value) {
    return push(std::move(value), false, nullptr);
  }

  // Registers a leaf whose gradient is returned by backward().
  Var<T> parameter(Tensor<T> value) {
    Var<T> v = push(std::move(value), record_, nullptr);
    parameters_.push_back(v.id);
    return v;
  }

  Var<T> push(Tensor<T> value, bool requires_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad && record_;
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>{this, nodes_.size() - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }

  // Gradient buffer of a node, zero-initialized on first access.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.numel() != n.value.numel() || n.grad.shape() != n.value.shape()) {
      n.grad = Tensor<T>(n.value.shape());
    }
    return n.grad;
  }
  Tensor<T>& grad(Var<T> v) { return grad(v.id); }

  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return parameters_.size(); }

  // Gradients of `loss` with respect to every registered parameter, in
  // registration order. Parameters that do not influence the loss receive
  // zero gradients of their own shape.
  std::vector<Tensor<T>> backward(Var<T> loss) {
    if (loss.tape != this) {
      throw ContractError("backward: loss was not produced on this tape");
    }
    if (!record_) throw ContractError("backward on a non-recording tape");
    if (value(loss).numel() != 1) {
      throw ContractError("backward: loss must be a scalar, got shape " +
                          shape_str(value(loss).shape()));
    }
    grad(loss.id)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.numel() == 0) continue;
      n.backward(*this);
    }
    std::vector<Tensor<T>> out;
    out.reserve(parameters_.size());
    for (std::size_t id : parameters_) {
      if (nodes_[id].grad.numel() == nodes_[id].value.numel() &&
          nodes_[id].grad.numel() > 0) {
        out.push_back(nodes_[id].grad);
      } else {
        out.emplace_back(nodes_[id].value.shape());
      }
    }
    return out;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> parameters_;
};

template <typename T>
std::vector<Tensor<T>> backward(Tape<T>& tape, Var<T> loss) {
  return tape.backward(loss);
}

namespace detail {

template <typename T>
bool any_grad(std::initializer_list<Var<T>> vars) {
  for (const auto& v : vars) {
    if (v.tape->requires_grad(v)) return true;
  }
  return false;
}

template <typename T>
Var<T> emit(Tape<T>& tape, Tensor<T> value, const char* op,
            std::initializer_list<Var<T>> inputs,
            typename Tape<T>::Backward backward) {
  require_finite(value, op);
  const bool needs = tape.recording() && any_grad<T>(inputs);
  return tape.push(std::move(value), needs, needs ? std::move(backward) : nullptr);
}

}  // namespace detail

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_b = false) {
  Tape<T>& tape = *a.tape;
  Tensor<T> out = matmul(a.value(), b.value(), transpose_b);
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "matmul", {a, b},
                      [a, b, self, transpose_b](Tape<T>& t) {
    const auto dy = as_matrix(t.grad(self));
    if (t.requires_grad(a)) {
      if (transpose_b) {
        as_matrix(t.grad(a)).noalias() += dy * as_matrix(b.value());
      } else {
        as_matrix(t.grad(a)).noalias() += dy * as_matrix(b.value()).transpose();
      }
    }
    if (t.requires_grad(b)) {
      if (transpose_b) {
        as_matrix(t.grad(b)).noalias() += dy.transpose() * as_matrix(a.value());
      } else {
        as_matrix(t.grad(b)).noalias() += as_matrix(a.value()).transpose() * dy;
      }
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tape<T>& tape = *a.tape;
  Tensor<T> out = a.value();
  as_matrix(out) += as_matrix(b.value());
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "add", {a, b},
                      [a, b, self](Tape<T>& t) {
    const auto dy = as_matrix(t.grad(self));
    if (t.requires_grad(a)) as_matrix(t.grad(a)) += dy;
    if (t.requires_grad(b)) as_matrix(t.grad(b)) += dy;
  });
}

// x [m x n] + bias [n] broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  if (bias.value().numel() != x.value().cols()) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match " + shape_str(x.shape()));
  }
  Tape<T>& tape = *x.tape;
  Tensor<T> out = x.value();
  as_matrix(out).rowwise() += as_matrix(bias.value()).row(0);
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "add_bias", {x, bias},
                      [x, bias, self](Tape<T>& t) {
    const auto dy = as_matrix(t.grad(self));
    if (t.requires_grad(x)) as_matrix(t.grad(x)) += dy;
    if (t.requires_grad(bias)) as_matrix(t.grad(bias)).row(0) += dy.colwise().sum();
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Tape<T>& tape = *x.tape;
  Tensor<T> out = x.value();
  as_matrix(out) *= factor;
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "scale", {x},
                      [x, self, factor](Tape<T>& t) {
    as_matrix(t.grad(x)) += factor * as_matrix(t.grad(self));
  });
}

template <typename T>
Var<T> gelu(Var<T> x) {
  Tape<T>& tape = *x.tape;
  Tensor<T> out = gelu(x.value());
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "gelu", {x}, [x, self](Tape<T>& t) {
    const Tensor<T>& in = x.value();
    const Tensor<T>& dy = t.grad(self);
    Tensor<T>& dx = t.grad(x);
    for (std::size_t i = 0; i < in.numel(); ++i) {
      dx[i] += dy[i] * gelu_derivative(in[i]);
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps) {
  Tape<T>& tape = *x.tape;
  auto cache = std::make_shared<LayerNormCache<T>>();
  Tensor<T> out = layer_norm(x.value(), gamma.value(), beta.value(), eps,
                             cache.get());
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "layer_norm", {x, gamma, beta},
                      [x, gamma, beta, self, cache](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(self);
    const Tensor<T>& xhat = cache->normalized;
    const Tensor<T>& g = gamma.value();
    const std::size_t rows = xhat.rows(), cols = xhat.cols();
    if (t.requires_grad(gamma) || t.requires_grad(beta)) {
      Tensor<T>& dg = t.grad(gamma);
      Tensor<T>& db = t.grad(beta);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          dg[c] += dy[r * cols + c] * xhat[r * cols + c];
          db[c] += dy[r * cols + c];
        }
      }
    }
    if (t.requires_grad(x)) {
      Tensor<T>& dx = t.grad(x);
      const double n = static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double d = double(dy[r * cols + c]) * g[c];
          mean_d += d;
          mean_dx += d * xhat[r * cols + c];
        }
        mean_d /= n;
        mean_dx /= n;
        const double inv = cache->inv_std[r];
        for (std::size_t c = 0; c < cols; ++c) {
          const double d = double(dy[r * cols + c]) * g[c];
          dx[r * cols + c] += static_cast<T>(
              inv * (d - mean_d - xhat[r * cols + c] * mean_dx));
        }
      }
    }
  });
}

template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  Tape<T>& tape = *x.tape;
  Tensor<T> out = softmax(x.value(), axis);
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "softmax", {x},
                      [x, self, axis](Tape<T>& t) {
    const Tensor<T>& y = t.value(Var<T>{&t, self});
    const Tensor<T>& dy = t.grad(self);
    Tensor<T>& dx = t.grad(x);
    const auto& s = y.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dot += double(dy[base + j * inner]) * y[base + j * inner];
        }
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = base + j * inner;
          dx[k] += static_cast<T>(y[k] * (dy[k] - dot));
        }
      }
    }
  });
}

// Inverted dropout: kept entries are scaled by 1 / (1 - p).
template <typename T>
Var<T> dropout(Var<T> x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  Tape<T>& tape = *x.tape;
  auto mask = std::make_shared<std::vector<T>>(x.value().numel());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (auto& m : *mask) m = rng.uniform() < p ? T{0} : keep_scale;
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= (*mask)[i];
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "dropout", {x},
                      [x, self, mask](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(self);
    Tensor<T>& dx = t.grad(x);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] += dy[i] * (*mask)[i];
  });
}

// Selects rows of `table` ([n x d]); used for embedding lookup as well.
template <typename T>
Var<T> gather_rows(Var<T> table, std::vector<int> rows) {
  const Tensor<T>& src = table.value();
  if (src.rank() != 2) {
    throw DimensionError("gather_rows expects a matrix, got " +
                         shape_str(src.shape()));
  }
  const std::size_t d = src.dim(1);
  Tensor<T> out(Shape{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= src.dim(0)) {
      throw ContractError("gather_rows: index " + std::to_string(rows[i]) +
                          " out of range for " + std::to_string(src.dim(0)) +
                          " rows");
    }
    std::copy_n(src.data() + rows[i] * d, d, out.data() + i * d);
  }
  Tape<T>& tape = *table.tape;
  std::size_t self = tape.size();
  return detail::emit(tape, std::move(out), "gather_rows", {table},
                      [table, self, rows = std::move(rows), d](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(self);
    Tensor<T>& dt = t.grad(table);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      T* dst = dt.data() + rows[i] * d;
      const T* g = dy.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  Tape<T>& tape = *x.tape;
  double s = 0.0;
  for (T v : x.value().values()) s += v;
  std::size_t self = tape.size();
  return detail::emit(tape, Tensor<T>::scalar(static_cast<T>(s)), "sum", {x},
                      [x, self](Tape<T>& t) {
    const T g = t.grad(self)[0];
    for (T& v : t.grad(x).values()) v += g;
  });
}

template <typename T>
Var<T> dot(Var<T> a, Var<T> b) {
  if (a.value().numel() != b.value().numel()) {
    throw DimensionError("dot shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tape<T>& tape = *a.tape;
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().numel(); ++i) {
    s += double(a.value()[i]) * b.value()[i];
  }
  std::size_t self = tape.size();
  return detail::emit(tape, Tensor<T>::scalar(static_cast<T>(s)), "dot", {a, b},
                      [a, b, self](Tape<T>& t) {
    const T g = t.grad(self)[0];
    if (t.requires_grad(a)) {
      Tensor<T>& da = t.grad(a);
      for (std::size_t i = 0; i < da.numel(); ++i) da[i] += g * b.value()[i];
    }
    if (t.requires_grad(b)) {
      Tensor<T>& db = t.grad(b);
      for (std::size_t i = 0; i < db.numel(); ++i) db[i] += g * a.value()[i];
    }
  });
}

// Mean negative log-likelihood over rows whose label is not kIgnoreLabel.
template <typename T>
Var<T> cross_entropy_masked(Var<T> logits, std::vector<int> labels) {
  Tape<T>& tape = *logits.tape;
  auto probs = std::make_shared<Tensor<T>>();
  const auto [total, count] = cross_entropy_sum(logits.value(), labels,
                                                probs.get());
  if (count == 0) {
    throw ContractError("cross_entropy_masked: all positions are ignored");
  }
  const double loss = total / static_cast<double>(count);
  std::size_t self = tape.size();
  return detail::emit(
      tape, Tensor<T>::scalar(static_cast<T>(loss)), "cross_entropy_masked",
      {logits},
      [logits, self, probs, labels = std::move(labels), count](Tape<T>& t) {
        const double g = double(t.grad(self)[0]) / static_cast<double>(count);
        Tensor<T>& dl = t.grad(logits);
        const std::size_t v = dl.cols();
        for (std::size_t r = 0; r < labels.size(); ++r) {
          if (labels[r] == kIgnoreLabel) continue;
          const T* p = probs->data() + r * v;
          T* d = dl.data() + r * v;
          for (std::size_t c = 0; c < v; ++c) d[c] += static_cast<T>(g * p[c]);
          d[labels[r]] -= static_cast<T>(g);
        }
      });
}

}  // namespace cysec

#endif  // CYSEC_NUMERICS_AUTODIFF_H_
