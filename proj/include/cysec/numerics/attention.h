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

#ifndef CYSEC_NUMERICS_ATTENTION_H_
#define CYSEC_NUMERICS_ATTENTION_H_

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "cysec/numerics/autodiff.h"

namespace cysec {

// Rows [offset, offset + length) of a packed batch form one sequence.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Packing of several sequences into one [tokens x hidden] matrix. Attention
// is block-diagonal over segments; keys with key_valid == 0 (padding)
// receive exactly zero weight.
struct AttentionLayout {
  std::vector<Segment> segments;
  std::vector<std::uint8_t> key_valid;
  std::size_t heads = 1;
};

// Scaled dot-product multi-head self-attention over already projected
// q, k, v ([tokens x hidden]). When `probe` is non-null the attention
// weights are appended to it, one [length x length] tensor per
// (segment, head).
template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v,
                            std::shared_ptr<const AttentionLayout> layout,
                            std::vector<Tensor<T>>* probe = nullptr) {
  const Shape& s = q.shape();
  if (s.size() != 2 || k.shape() != s || v.shape() != s) {
    throw DimensionError("attention expects equal [tokens x hidden] q/k/v, got " +
                         shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                         ", " + shape_str(v.shape()));
  }
  const std::size_t hidden = s[1];
  const std::size_t heads = layout->heads;
  if (heads == 0 || hidden % heads != 0) {
    throw DimensionError("attention: hidden " + std::to_string(hidden) +
                         " not divisible by heads " + std::to_string(heads));
  }
  if (layout->key_valid.size() != s[0]) {
    throw DimensionError("attention: key mask length does not match tokens");
  }
  const std::size_t d = hidden / heads;
  const T scale_factor = static_cast<T>(1.0 / std::sqrt(double(d)));

  Tensor<T> out(s);
  auto probs = std::make_shared<std::vector<RowMatrix<T>>>();
  probs->reserve(layout->segments.size() * heads);
  const auto qm = as_matrix(q.value());
  const auto km = as_matrix(k.value());
  const auto vm = as_matrix(v.value());
  auto om = as_matrix(out);
  for (const Segment& seg : layout->segments) {
    const auto off = static_cast<Eigen::Index>(seg.offset);
    const auto len = static_cast<Eigen::Index>(seg.length);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h * d);
      const auto dd = static_cast<Eigen::Index>(d);
      RowMatrix<T> p = (qm.block(off, col, len, dd) *
                        km.block(off, col, len, dd).transpose()) *
                       scale_factor;
      for (Eigen::Index i = 0; i < len; ++i) {
        T mx = -INFINITY;
        for (Eigen::Index j = 0; j < len; ++j) {
          if (layout->key_valid[seg.offset + j]) mx = std::max(mx, p(i, j));
        }
        double total = 0.0;
        for (Eigen::Index j = 0; j < len; ++j) {
          if (layout->key_valid[seg.offset + j]) {
            p(i, j) = std::exp(p(i, j) - mx);
            total += p(i, j);
          } else {
            p(i, j) = T{0};
          }
        }
        if (total > 0.0) {
          const T inv = static_cast<T>(1.0 / total);
          p.row(i) *= inv;
        }
      }
      om.block(off, col, len, dd).noalias() = p * vm.block(off, col, len, dd);
      if (probe) probe->emplace_back(Shape{seg.length, seg.length},
                                     std::vector<T>(p.data(), p.data() + p.size()));
      probs->push_back(std::move(p));
    }
  }

  Tape<T>& tape = *q.tape;
  std::size_t self = tape.size();
  return detail::emit(
      tape, std::move(out), "attention", {q, k, v},
      [q, k, v, self, layout, probs, d, scale_factor](Tape<T>& t) {
        const auto dy = as_matrix(t.grad(self));
        auto dq = as_matrix(t.grad(q));
        auto dk = as_matrix(t.grad(k));
        auto dv = as_matrix(t.grad(v));
        const auto qm = as_matrix(q.value());
        const auto km = as_matrix(k.value());
        const auto vm = as_matrix(v.value());
        std::size_t idx = 0;
        for (const Segment& seg : layout->segments) {
          const auto off = static_cast<Eigen::Index>(seg.offset);
          const auto len = static_cast<Eigen::Index>(seg.length);
          for (std::size_t h = 0; h < layout->heads; ++h, ++idx) {
            const RowMatrix<T>& p = (*probs)[idx];
            const auto col = static_cast<Eigen::Index>(h * d);
            const auto dd = static_cast<Eigen::Index>(d);
            const auto dy_h = dy.block(off, col, len, dd);
            dv.block(off, col, len, dd).noalias() += p.transpose() * dy_h;
            RowMatrix<T> dp = dy_h * vm.block(off, col, len, dd).transpose();
            for (Eigen::Index i = 0; i < len; ++i) {
              const T row_dot = (dp.row(i).array() * p.row(i).array()).sum();
              dp.row(i) = p.row(i).array() * (dp.row(i).array() - row_dot);
            }
            dp *= scale_factor;
            dq.block(off, col, len, dd).noalias() +=
                dp * km.block(off, col, len, dd);
            dk.block(off, col, len, dd).noalias() +=
                dp.transpose() * qm.block(off, col, len, dd);
          }
        }
      });
}

}  // namespace cysec

#endif  // CYSEC_NUMERICS_ATTENTION_H_
