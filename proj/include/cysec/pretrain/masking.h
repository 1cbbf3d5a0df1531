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

#ifndef CYSEC_PRETRAIN_MASKING_H_
#define CYSEC_PRETRAIN_MASKING_H_

#include <cmath>
#include <span>
#include <vector>

#include "cysec/numerics/errors.h"
#include "cysec/numerics/kernels.h"
#include "cysec/numerics/rng.h"
#include "cysec/tokenizer/vocab.h"

namespace cysec::pretrain {

struct MaskingPolicy {
  double select_prob = 0.15;
  double mask_frac = 0.8;
  double random_frac = 0.1;
  double keep_frac = 0.1;

  void validate() const {
    if (select_prob <= 0.0 || select_prob > 1.0 || mask_frac < 0.0 ||
        random_frac < 0.0 || keep_frac < 0.0 ||
        std::abs(mask_frac + random_frac + keep_frac - 1.0) > 1e-9) {
      throw ValidationError("masking-policy",
                            "masking policy: select_prob must lie in (0, 1] and "
                            "mask/random/keep fractions must sum to 1");
    }
  }
};

// Corrupted input and targets. labels[i] is the original id at selected
// positions and kIgnoreLabel elsewhere.
struct MaskedSequence {
  std::vector<int> ids;
  std::vector<int> labels;

  std::size_t selected() const {
    std::size_t n = 0;
    for (int l : labels) n += l != kIgnoreLabel;
    return n;
  }
};

// Uniform over non-special vocabulary ids.
inline int random_content_id(const tokenizer::Vocab& vocab, Rng& rng) {
  for (;;) {
    const int id = static_cast<int>(rng.below(vocab.size()));
    if (!vocab.is_special(id)) return id;
  }
}

// Selects each non-special position independently; a sequence with no
// selection is drawn once more and otherwise left without targets.
inline MaskedSequence apply_masking(std::span<const int> ids,
                                    const tokenizer::Vocab& vocab,
                                    const MaskingPolicy& policy, Rng& rng) {
  MaskedSequence out{{ids.begin(), ids.end()},
                     std::vector<int>(ids.size(), kIgnoreLabel)};
  if (vocab.size() <= tokenizer::kSpecialPieces.size()) {
    throw ContractError("masking needs at least one non-special piece");
  }
  for (int attempt = 0; attempt < 2 && out.selected() == 0; ++attempt) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (vocab.is_special(ids[i])) continue;
      if (rng.uniform() >= policy.select_prob) continue;
      out.labels[i] = ids[i];
      const double u = rng.uniform();
      if (u < policy.mask_frac) {
        out.ids[i] = vocab.mask_id();
      } else if (u < policy.mask_frac + policy.random_frac) {
        out.ids[i] = random_content_id(vocab, rng);
      }
    }
  }
  return out;
}

}  // namespace cysec::pretrain

#endif  // CYSEC_PRETRAIN_MASKING_H_
