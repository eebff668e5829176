// Copyright 2026 The VCMR Authors.
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

// Embedding-level augmentation: token shuffling, token cutoff, feature
// cutoff and element dropout, gated per stream.

#ifndef VCMR_AUGMENTATION_HPP_
#define VCMR_AUGMENTATION_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "vcmr/autograd.hpp"

namespace vcmr {

using ag::Matrix;
using ag::Var;

enum class AugmentOp {
  kShuffle,
  kTokenCutoff,
  kFeatureCutoff,
  kDropout,
  kUnchanged,
  kGatedOff,
};

std::string_view to_string(AugmentOp op);

struct AugmentationPolicy {
  double gate_prob = 0.5;
  // Conditional on the gate firing: shuffle, token cutoff, feature cutoff,
  // dropout, unchanged.
  std::array<double, 5> weights = {0.40, 0.15, 0.15, 0.15, 0.15};
  double cutoff_ratio = 0.1;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AugmentationRecord {
  AugmentOp op = AugmentOp::kGatedOff;
  // Permutation for shuffle, erased rows or columns for cutoffs, flat
  // row-major indices of zeroed elements for dropout.
  std::vector<int> affected;
};

// A sampled transform, reusable on a plain matrix or a graph node.
struct AugmentationPlan {
  AugmentationRecord record;
  std::vector<int> permutation;  // shuffle only
  Matrix mask;                   // cutoffs and dropout only

  Matrix apply(const Matrix& m) const;
  Var apply(const Var& v) const;
};

// Rewrites a shuffle plan so rows only move inside [cuts[k], cuts[k+1]).
// cuts must be ascending, start at 0 and end at the row count. Other ops
// are left untouched.
void confine_shuffle(AugmentationPlan& plan, const std::vector<int>& cuts,
                     std::mt19937_64& rng);

AugmentOp sample_op(const AugmentationPolicy& policy, std::mt19937_64& rng);

AugmentationPlan make_plan(Eigen::Index rows, Eigen::Index cols, AugmentOp op,
                           const AugmentationPolicy& policy,
                           std::mt19937_64& rng);

struct AugmentedEmbeddings {
  Matrix embeddings;
  AugmentationRecord record;
};

AugmentedEmbeddings apply(const Matrix& embeddings, AugmentOp op,
                          const AugmentationPolicy& policy,
                          std::mt19937_64& rng);

enum class Mode { kTrain, kEval };

struct BatchPlans {
  AugmentationPlan video;
  AugmentationPlan subtitles;
  AugmentationPlan query;

  std::array<AugmentationRecord, 3> records() const {
    return {video.record, subtitles.record, query.record};
  }
};

// One independent sample_op + plan per stream. Throws in eval mode.
BatchPlans plan_batch(Eigen::Index video_rows, Eigen::Index subtitle_rows,
                      Eigen::Index query_rows, Eigen::Index dim,
                      const AugmentationPolicy& policy, std::mt19937_64& rng,
                      Mode mode);

struct AugmentedBatch {
  Matrix video;
  Matrix subtitles;
  Matrix query;
  std::array<AugmentationRecord, 3> records;
};

AugmentedBatch augment_batch(const Matrix& video_emb, const Matrix& subtitle_emb,
                             const Matrix& query_emb,
                             const AugmentationPolicy& policy,
                             std::mt19937_64& rng, Mode mode);

// Independent stream for one batch item, derived from (seed, epoch, item).
std::mt19937_64 item_stream(std::uint64_t seed, std::uint64_t epoch,
                            std::uint64_t item);

}  // namespace vcmr

#endif  // VCMR_AUGMENTATION_HPP_
