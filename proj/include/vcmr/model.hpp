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

#ifndef VCMR_MODEL_HPP_
#define VCMR_MODEL_HPP_

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "vcmr/encoders.hpp"
#include "vcmr/fusion.hpp"
#include "vcmr/nn.hpp"
#include "vcmr/retrieval.hpp"

namespace vcmr {

// Encoders plus both localization heads over one parameter store. Both
// heads always exist so checkpoints have a fixed layout; config().head
// selects the one used.
class VcmrModel {
 public:
  explicit VcmrModel(const ModelConfig& config);

  VcmrModel(const VcmrModel&) = delete;
  VcmrModel& operator=(const VcmrModel&) = delete;

  const ModelConfig& config() const { return config_; }
  void set_l_max_span(int l_max);

  nn::ParameterStore& parameters() { return *store_; }
  const nn::ParameterStore& parameters() const { return *store_; }
  const HierarchicalEncoder& encoder() const { return encoder_; }
  const BoundaryHead& boundary() const { return boundary_; }
  const FusionHead& fusion() const { return fusion_; }

  // Tokens the fusion branch attends over.
  const Var& cqa_tokens(const QueryEncoding& query) const {
    return config_.cqa_over_cross ? query.w_cross : query.w_emb;
  }

  // Per-frame start/end logits for one (video, query) pair.
  SpanScores localize(const ContextualizedVideo& video,
                      const QueryEncoding& query, LocalizationHead head) const;

  // Training loss of the configured head on a positive pair.
  Var localization_loss(const ContextualizedVideo& video,
                        const QueryEncoding& query,
                        const SpanLabels& labels,
                        double highlight_weight = 1.0) const;

 private:
  ModelConfig config_;
  std::unique_ptr<nn::ParameterStore> store_;
  HierarchicalEncoder encoder_;
  BoundaryHead boundary_;
  FusionHead fusion_;
};

// Archive: "VCMK", u32 LE header length, JSON header (model config and the
// ordered parameter names), then one VCMF blob per parameter.
void save_checkpoint(std::ostream& out, const VcmrModel& model);
void save_checkpoint(const std::filesystem::path& path, const VcmrModel& model);
std::unique_ptr<VcmrModel> load_checkpoint(std::istream& in,
                                           const std::string& source);
std::unique_ptr<VcmrModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace vcmr

#endif  // VCMR_MODEL_HPP_
