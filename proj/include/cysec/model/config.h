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

#ifndef CYSEC_MODEL_CONFIG_H_
#define CYSEC_MODEL_CONFIG_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cysec/numerics/errors.h"
#include "cysec/numerics/rng.h"
#include "cysec/numerics/tensor.h"

namespace cysec::model {

// Architecture hyperparameters. Defaults are the desk-scale configuration.
struct ModelConfig {
  std::size_t layers = 4;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t vocab_size = 0;
  std::size_t max_seq = 128;
  std::size_t type_vocab = 2;
  double dropout = 0.1;
  double layer_norm_eps = 1e-12;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw ValidationError("model-config", "model config: " + m);
    };
    if (!layers || !hidden || !heads || !ffn || !vocab_size || !max_seq ||
        !type_vocab) {
      fail("all extents must be positive");
    }
    if (hidden % heads != 0) {
      fail("hidden " + std::to_string(hidden) + " not divisible by heads " +
           std::to_string(heads));
    }
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
    if (layer_norm_eps <= 0.0) fail("layer_norm_eps must be positive");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Fixed parameter ordering. Dense weights are stored [in x out].
namespace slot {
inline constexpr std::size_t kWordEmbedding = 0;
inline constexpr std::size_t kPositionEmbedding = 1;
inline constexpr std::size_t kSegmentEmbedding = 2;
inline constexpr std::size_t kEmbeddingLnGamma = 3;
inline constexpr std::size_t kEmbeddingLnBeta = 4;
inline constexpr std::size_t kFirstLayer = 5;

enum Layer : std::size_t {
  kQueryW, kQueryB, kKeyW, kKeyB, kValueW, kValueB, kAttnOutW, kAttnOutB,
  kAttnLnGamma, kAttnLnBeta, kFfnInW, kFfnInB, kFfnOutW, kFfnOutB,
  kFfnLnGamma, kFfnLnBeta, kPerLayer
};

enum Mlm : std::size_t {
  kTransformW, kTransformB, kMlmLnGamma, kMlmLnBeta, kOutputBias, kMlmCount
};

inline std::size_t layer(std::size_t l, Layer s) {
  return kFirstLayer + l * kPerLayer + s;
}
inline std::size_t mlm(const ModelConfig& c, Mlm s) {
  return kFirstLayer + c.layers * kPerLayer + s;
}
inline std::size_t count(const ModelConfig& c) {
  return kFirstLayer + c.layers * kPerLayer + kMlmCount;
}
}  // namespace slot

// Name and shape of every tensor, in slot order.
inline std::vector<std::pair<std::string, Shape>> parameter_specs(
    const ModelConfig& c) {
  const std::size_t H = c.hidden, F = c.ffn;
  std::vector<std::pair<std::string, Shape>> specs = {
      {"embeddings.word", {c.vocab_size, H}},
      {"embeddings.position", {c.max_seq, H}},
      {"embeddings.segment", {c.type_vocab, H}},
      {"embeddings.ln.gamma", {H}},
      {"embeddings.ln.beta", {H}},
  };
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    specs.insert(specs.end(), {
        {p + "attention.query.weight", {H, H}},
        {p + "attention.query.bias", {H}},
        {p + "attention.key.weight", {H, H}},
        {p + "attention.key.bias", {H}},
        {p + "attention.value.weight", {H, H}},
        {p + "attention.value.bias", {H}},
        {p + "attention.output.weight", {H, H}},
        {p + "attention.output.bias", {H}},
        {p + "attention.ln.gamma", {H}},
        {p + "attention.ln.beta", {H}},
        {p + "ffn.intermediate.weight", {H, F}},
        {p + "ffn.intermediate.bias", {F}},
        {p + "ffn.output.weight", {F, H}},
        {p + "ffn.output.bias", {H}},
        {p + "ffn.ln.gamma", {H}},
        {p + "ffn.ln.beta", {H}},
    });
  }
  specs.insert(specs.end(), {
      {"mlm.transform.weight", {H, H}},
      {"mlm.transform.bias", {H}},
      {"mlm.ln.gamma", {H}},
      {"mlm.ln.beta", {H}},
      {"mlm.output_bias", {c.vocab_size}},
  });
  return specs;
}

// Closed form of the number of scalar parameters. The MLM output
// projection reuses the word embedding table and adds nothing.
inline std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t H = c.hidden, F = c.ffn, V = c.vocab_size;
  const std::size_t embeddings = (V + c.max_seq + c.type_vocab) * H + 2 * H;
  const std::size_t per_layer = 4 * (H * H + H) + 2 * H + (H * F + F) +
                                (F * H + H) + 2 * H;
  const std::size_t head = H * H + H + 2 * H + V;
  return embeddings + c.layers * per_layer + head;
}

// Biases and layer-norm parameters are excluded from weight decay.
inline bool decays(const std::string& name) {
  const auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return !(ends_with("bias") || ends_with(".gamma") || ends_with(".beta"));
}

template <typename T>
struct BertParameters {
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;

  Tensor<T>& operator[](std::size_t i) { return tensors[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.numel();
    return n;
  }

  std::vector<bool> decay_mask() const {
    std::vector<bool> mask;
    for (const auto& n : names) mask.push_back(decays(n));
    return mask;
  }

  template <typename U>
  BertParameters<U> cast() const {
    BertParameters<U> out;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }

  friend bool operator==(const BertParameters&, const BertParameters&) = default;
};

// Truncated normal (std 0.02) weights and embeddings, zero biases, unit
// layer-norm scales.
template <typename T>
BertParameters<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  BertParameters<T> p;
  for (auto& [name, shape] : parameter_specs(config)) {
    Tensor<T> t(shape);
    const bool is_gamma = name.ends_with(".gamma");
    const bool is_zero = name.ends_with("bias") || name.ends_with(".beta");
    if (is_gamma) {
      t.fill(T{1});
    } else if (!is_zero) {
      for (auto& v : t.values()) v = static_cast<T>(rng.truncated_normal(0.02));
    }
    p.names.push_back(name);
    p.tensors.push_back(std::move(t));
  }
  return p;
}

}  // namespace cysec::model

#endif  // CYSEC_MODEL_CONFIG_H_
