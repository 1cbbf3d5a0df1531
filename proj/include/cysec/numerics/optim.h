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

#ifndef CYSEC_NUMERICS_OPTIM_H_
#define CYSEC_NUMERICS_OPTIM_H_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cysec/numerics/tensor.h"

namespace cysec {

// Per-parameter moment estimates. m and v start at zero; `step` counts
// completed updates.
template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  AdamState() = default;

  explicit AdamState(const std::vector<Tensor<T>>& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
      m.emplace_back(p.shape());
      v.emplace_back(p.shape());
    }
  }
};

class PoisonedStateError : public NumericError {
 public:
  using NumericError::NumericError;
};

// One Adam update with bias correction. Weight decay is decoupled: each
// parameter selected by `decay_mask` (all, when empty) first shrinks by
// lr * weight_decay * param. Non-finite gradients reject the whole step and
// leave params and state untouched.
template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, double lr, double weight_decay,
               std::span<const bool> decay_mask = {}) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) +
                         " params, " + std::to_string(grads.size()) +
                         " grads, " + std::to_string(state.m.size()) +
                         " moment slots");
  }
  if (!decay_mask.empty() && decay_mask.size() != params.size()) {
    throw DimensionError("adam_step: decay mask length mismatch");
  }
  if (lr < 0.0) throw ContractError("adam_step: negative learning rate");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) {
      throw DimensionError("adam_step: gradient " + shape_str(grads[i].shape()) +
                           " for parameter " + shape_str(params[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw PoisonedStateError("adam_step: non-finite gradient for parameter " +
                               std::to_string(i) + "; step rejected");
    }
  }
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double wd = (decay_mask.empty() || decay_mask[i]) ? weight_decay : 0.0;
    T* p = params[i].data();
    const T* g = grads[i].data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (std::size_t j = 0; j < params[i].numel(); ++j) {
      double pj = p[j];
      pj -= lr * wd * pj;
      const double mj = b1 * m[j] + (1.0 - b1) * g[j];
      const double vj = b2 * v[j] + (1.0 - b2) * double(g[j]) * g[j];
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      pj -= lr * (mj / c1) / (std::sqrt(vj / c2) + state.epsilon);
      p[j] = static_cast<T>(pj);
    }
  }
}

// Linear warmup from 0 to peak_lr, then linear decay to 0 at total_steps.
struct LrSchedule {
  double peak_lr = 2e-5;
  std::int64_t warmup_steps = 10000;
  std::int64_t total_steps = 0;

  LrSchedule() = default;
  LrSchedule(double peak, std::int64_t warmup, std::int64_t total)
      : peak_lr(peak), warmup_steps(warmup), total_steps(total) {
    if (peak < 0.0 || warmup <= 0 || total <= 0 || warmup >= total) {
      throw ContractError("LrSchedule: need peak >= 0 and 0 < warmup (" +
                          std::to_string(warmup) + ") < total (" +
                          std::to_string(total) + ")");
    }
  }
};

inline double lr_at_step(const LrSchedule& s, std::int64_t step) {
  if (step < 0 || step > s.total_steps) {
    throw ContractError("lr_at_step: step " + std::to_string(step) +
                        " outside [0, " + std::to_string(s.total_steps) + "]");
  }
  if (step <= s.warmup_steps) {
    return s.peak_lr * double(step) / double(s.warmup_steps);
  }
  return s.peak_lr * double(s.total_steps - step) /
         double(s.total_steps - s.warmup_steps);
}

}  // namespace cysec

#endif  // CYSEC_NUMERICS_OPTIM_H_
