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

#ifndef CYSEC_MODEL_CHECKPOINT_H_
#define CYSEC_MODEL_CHECKPOINT_H_

// Binary checkpoint: little-endian, float32 values.
//
//   "CYSECBRT" u32 version
//   u32 layers hidden heads ffn vocab max_seq type_vocab, f64 dropout ln_eps
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u64 extents..., f32 values...

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cysec/model/config.h"
#include "cysec/util/io.h"

namespace cysec::model {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'Y', 'S', 'E', 'C', 'B', 'R', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  BertParameters<float> params;
};

namespace detail {

class Writer {
 public:
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(U));
  }
  void bytes(std::string_view s) { buf_.append(s); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("bad-checkpoint", path_ + ": " + msg);
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("truncated file");
  }
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const ModelConfig& config,
                                        const BertParameters<float>& params) {
  const auto specs = parameter_specs(config);
  if (specs.size() != params.size()) {
    throw ContractError("parameter set does not match the model config");
  }
  detail::Writer w;
  w.bytes(std::string_view(kCheckpointMagic, 8));
  w.put(kCheckpointVersion);
  for (std::size_t v : {config.layers, config.hidden, config.heads, config.ffn,
                        config.vocab_size, config.max_seq, config.type_vocab}) {
    w.put(static_cast<std::uint32_t>(v));
  }
  w.put(config.dropout);
  w.put(config.layer_norm_eps);
  w.put(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    w.put(static_cast<std::uint32_t>(params.names[i].size()));
    w.bytes(params.names[i]);
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put(static_cast<std::uint64_t>(d));
    for (float v : t.values()) w.put(v);
  }
  return w.take();
}

inline void save_checkpoint(const std::string& path, const ModelConfig& config,
                            const BertParameters<float>& params) {
  util::write_file_atomic(path, serialize_checkpoint(config, params));
}

inline Checkpoint parse_checkpoint(const std::string& buf,
                                   const std::string& path = "<memory>") {
  detail::Reader r(buf, path);
  if (r.bytes(8) != std::string_view(kCheckpointMagic, 8)) r.fail("not a checkpoint");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(v));
  }
  Checkpoint ck;
  ModelConfig& c = ck.config;
  for (std::size_t* f : {&c.layers, &c.hidden, &c.heads, &c.ffn, &c.vocab_size,
                         &c.max_seq, &c.type_vocab}) {
    *f = r.get<std::uint32_t>();
  }
  c.dropout = r.get<double>();
  c.layer_norm_eps = r.get<double>();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  const auto specs = parameter_specs(c);
  const auto count = r.get<std::uint32_t>();
  if (count != specs.size()) {
    r.fail("holds " + std::to_string(count) + " tensors, config implies " +
           std::to_string(specs.size()));
  }
  for (const auto& [name, shape] : specs) {
    const std::string got = r.bytes(r.get<std::uint32_t>());
    if (got != name) r.fail("expected tensor " + name + ", found " + got);
    Shape s(r.get<std::uint32_t>());
    for (auto& d : s) d = r.get<std::uint64_t>();
    if (s != shape) {
      r.fail("tensor " + name + " has shape " + shape_str(s) + ", expected " +
             shape_str(shape));
    }
    Tensor<float> t(shape);
    for (auto& v : t.values()) v = r.get<float>();
    ck.params.names.push_back(name);
    ck.params.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) r.fail("trailing bytes after last tensor");
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(util::read_file(path), path);
}

// Loads and checks that the stored architecture equals `expected`.
inline BertParameters<float> load_checkpoint(const std::string& path,
                                             const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.config == expected)) {
    throw ValidationError(
        "checkpoint-config",
        path + ": stored architecture (layers " + std::to_string(ck.config.layers) +
            ", hidden " + std::to_string(ck.config.hidden) + ", vocab " +
            std::to_string(ck.config.vocab_size) +
            ") differs from the requested one (layers " +
            std::to_string(expected.layers) + ", hidden " +
            std::to_string(expected.hidden) + ", vocab " +
            std::to_string(expected.vocab_size) + ")");
  }
  return std::move(ck.params);
}

}  // namespace cysec::model

#endif  // CYSEC_MODEL_CHECKPOINT_H_
