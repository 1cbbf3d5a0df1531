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

#ifndef CYSEC_MODEL_BERT_H_
#define CYSEC_MODEL_BERT_H_

// Post-layer-norm BERT encoder with learned absolute positions and a
// tied-embedding masked-language-model head.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cysec/model/config.h"
#include "cysec/numerics/attention.h"
#include "cysec/numerics/autodiff.h"
#include "cysec/tokenizer/wordpiece.h"

namespace cysec::model {

template <typename T>
using HiddenStates = std::vector<Tensor<T>>;

// Several sequences packed row-wise into one [tokens x hidden] activation.
struct PackedBatch {
  std::vector<int> ids;
  std::vector<int> positions;
  std::shared_ptr<AttentionLayout> layout = std::make_shared<AttentionLayout>();

  std::size_t tokens() const { return ids.size(); }
  const std::vector<Segment>& segments() const { return layout->segments; }

  void add(std::span<const int> seq, std::span<const std::uint8_t> mask = {}) {
    if (!mask.empty() && mask.size() != seq.size()) {
      throw DimensionError("attention mask length " + std::to_string(mask.size()) +
                           " does not match " + std::to_string(seq.size()) +
                           " ids");
    }
    layout->segments.push_back({ids.size(), seq.size()});
    for (std::size_t i = 0; i < seq.size(); ++i) {
      ids.push_back(seq[i]);
      positions.push_back(static_cast<int>(i));
      layout->key_valid.push_back(mask.empty() ? 1 : mask[i]);
    }
  }
};

inline void validate_batch(const PackedBatch& batch, const ModelConfig& config) {
  for (const Segment& s : batch.segments()) {
    if (s.length > config.max_seq) {
      throw ContractError("sequence of " + std::to_string(s.length) +
                          " pieces exceeds max_seq " +
                          std::to_string(config.max_seq));
    }
  }
  for (int id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw ContractError("token id " + std::to_string(id) +
                          " outside vocabulary of " +
                          std::to_string(config.vocab_size));
    }
  }
}

// Parameters registered on a tape, in slot order.
template <typename T>
std::vector<Var<T>> bind(Tape<T>& tape, const BertParameters<T>& params,
                         bool trainable) {
  std::vector<Var<T>> vars;
  vars.reserve(params.size());
  for (const auto& t : params.tensors) {
    vars.push_back(trainable ? tape.parameter(t) : tape.constant(t));
  }
  return vars;
}

template <typename T>
struct ForwardOptions {
  // Dropout is active iff rng is non-null.
  Rng* dropout_rng = nullptr;
  std::vector<Tensor<T>>* attention_probe = nullptr;
};

// Embedding output followed by every layer output: L + 1 entries.
template <typename T>
std::vector<Var<T>> encode_batch(Tape<T>& tape, const std::vector<Var<T>>& p,
                                 const PackedBatch& batch,
                                 const ModelConfig& config,
                                 ForwardOptions<T> options = {}) {
  validate_batch(batch, config);
  const double drop = options.dropout_rng ? config.dropout : 0.0;
  auto maybe_dropout = [&](Var<T> x) {
    return drop > 0.0 ? dropout(x, drop, *options.dropout_rng) : x;
  };
  batch.layout->heads = config.heads;

  Var<T> x = add(gather_rows(p[slot::kWordEmbedding], batch.ids),
                 gather_rows(p[slot::kPositionEmbedding], batch.positions));
  x = add(x, gather_rows(p[slot::kSegmentEmbedding],
                         std::vector<int>(batch.tokens(), 0)));
  x = layer_norm(x, p[slot::kEmbeddingLnGamma], p[slot::kEmbeddingLnBeta],
                 config.layer_norm_eps);
  x = maybe_dropout(x);

  std::vector<Var<T>> hidden{x};
  for (std::size_t l = 0; l < config.layers; ++l) {
    auto w = [&](slot::Layer s) { return p[slot::layer(l, s)]; };
    auto dense = [&](Var<T> in, slot::Layer weight, slot::Layer bias) {
      return add_bias(matmul(in, w(weight)), w(bias));
    };
    Var<T> q = dense(x, slot::kQueryW, slot::kQueryB);
    Var<T> k = dense(x, slot::kKeyW, slot::kKeyB);
    Var<T> v = dense(x, slot::kValueW, slot::kValueB);
    Var<T> attended = multi_head_attention(q, k, v, batch.layout,
                                           options.attention_probe);
    Var<T> projected = maybe_dropout(dense(attended, slot::kAttnOutW, slot::kAttnOutB));
    x = layer_norm(add(x, projected), w(slot::kAttnLnGamma), w(slot::kAttnLnBeta),
                   config.layer_norm_eps);
    Var<T> inner = gelu(dense(x, slot::kFfnInW, slot::kFfnInB));
    Var<T> out = maybe_dropout(dense(inner, slot::kFfnOutW, slot::kFfnOutB));
    x = layer_norm(add(x, out), w(slot::kFfnLnGamma), w(slot::kFfnLnBeta),
                   config.layer_norm_eps);
    hidden.push_back(x);
  }
  return hidden;
}

// Dense + GELU + layer norm, then projection onto the (shared) word
// embedding table plus an output bias.
template <typename T>
Var<T> mlm_head(const std::vector<Var<T>>& p, Var<T> hidden_rows,
                const ModelConfig& config) {
  using slot::mlm;
  Var<T> t = gelu(add_bias(matmul(hidden_rows, p[mlm(config, slot::kTransformW)]),
                           p[mlm(config, slot::kTransformB)]));
  t = layer_norm(t, p[mlm(config, slot::kMlmLnGamma)],
                 p[mlm(config, slot::kMlmLnBeta)], config.layer_norm_eps);
  return add_bias(matmul(t, p[slot::kWordEmbedding], /*transpose_b=*/true),
                  p[mlm(config, slot::kOutputBias)]);
}

// Hidden states for a single sequence. Positions with mask 0 are padding
// and never influence the other positions.
template <typename T>
HiddenStates<T> forward(std::span<const int> ids,
                        std::span<const std::uint8_t> attention_mask,
                        const ModelConfig& config, const BertParameters<T>& params,
                        bool train_mode = false, std::uint64_t seed = 0) {
  PackedBatch batch;
  batch.add(ids, attention_mask);
  Tape<T> tape(false);
  auto vars = bind(tape, params, false);
  Rng rng(seed);
  ForwardOptions<T> options;
  if (train_mode) options.dropout_rng = &rng;
  HiddenStates<T> out;
  for (const auto& h : encode_batch(tape, vars, batch, config, options)) {
    out.push_back(h.value());
  }
  return out;
}

template <typename T>
Tensor<T> mlm_logits(const Tensor<T>& hidden_last, const ModelConfig& config,
                     const BertParameters<T>& params) {
  if (hidden_last.rank() != 2 || hidden_last.dim(1) != config.hidden) {
    throw DimensionError("mlm_logits expects [seq x " + std::to_string(config.hidden) +
                         "], got " + shape_str(hidden_last.shape()));
  }
  Tape<T> tape(false);
  auto vars = bind(tape, params, false);
  return mlm_head(vars, tape.constant(hidden_last), config).value();
}

inline std::vector<std::uint8_t> full_mask(std::size_t n) {
  return std::vector<std::uint8_t>(n, 1);
}

// Mean over content pieces of the concatenated last four layer outputs
// (length 4 * hidden).
template <typename T>
std::vector<double> embed_document(std::string_view text,
                                   const tokenizer::Vocab& vocab,
                                   const ModelConfig& config,
                                   const BertParameters<T>& params) {
  if (config.layers < 4) {
    throw ContractError("embed_document needs at least 4 layers, model has " +
                        std::to_string(config.layers));
  }
  const auto enc = tokenizer::encode(text, vocab, config.max_seq);
  std::vector<std::size_t> content;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (!vocab.is_special(enc.ids[i])) content.push_back(i);
  }
  if (content.empty()) {
    throw ValidationError("empty-document",
                          "embed_document: text has no content pieces");
  }
  const auto hidden = forward(std::span<const int>(enc.ids),
                              std::span<const std::uint8_t>(enc.attention_mask),
                              config, params);
  const std::size_t H = config.hidden;
  std::vector<double> out(4 * H, 0.0);
  for (std::size_t pos : content) {
    for (std::size_t k = 0; k < 4; ++k) {
      const Tensor<T>& layer = hidden[hidden.size() - 4 + k];
      for (std::size_t c = 0; c < H; ++c) out[k * H + c] += layer(pos, c);
    }
  }
  for (double& v : out) v /= double(content.size());
  return out;
}

}  // namespace cysec::model

#endif  // CYSEC_MODEL_BERT_H_
