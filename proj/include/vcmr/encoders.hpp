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

// Hierarchical video/query encoding: frame and token embedders, the
// cross-modal encoder run per subtitle sentence, the temporal encoder over
// the whole video, and the two query poolers.

#ifndef VCMR_ENCODERS_HPP_
#define VCMR_ENCODERS_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vcmr/autograd.hpp"
#include "vcmr/corpus.hpp"
#include "vcmr/nn.hpp"

namespace vcmr {

using ag::Matrix;
using ag::Var;

// Which branch localizes moments: the similarity-only conv head or the
// context-query fusion branch.
enum class LocalizationHead { kConv, kFusion };

struct ModelConfig {
  int input_dim = 16;  // raw feature width D_in
  int d = 64;
  int n_heads = 2;
  int n_layers_cross = 1;
  int n_layers_temp = 1;
  int vocab_size = 64;
  int max_positions = 512;
  int l_max_span = 16;
  std::uint64_t seed = 0;
  int ffn_dim = 128;
  // q_c pools W^cross instead of W^emb.
  bool pool_qc_from_cross = false;
  // Context-query attention attends over W^cross instead of W^emb.
  bool cqa_over_cross = false;
  LocalizationHead head = LocalizationHead::kFusion;

  void validate() const;
};

// Per-frame output of the two video encoders.
struct ContextualizedVideo {
  Var v_cross;  // N_v x d
  Var v_temp;   // N_v x d
};

struct QueryEncoding {
  Var w_emb;    // N_q x d, token embeddings
  Var w_cross;  // N_q x d, query path of the cross-modal encoder
  Var q;        // 1 x d
  Var q_c;      // 1 x d
};

// Debug captures. Only filled when a trace is passed in.
struct EncoderTrace {
  nn::AttentionTrace cross;
  nn::AttentionTrace temporal;
  Matrix temporal_input;  // what f_temp received, before its positions
  Matrix q_weights;
  Matrix q_c_weights;
};

// Post-embedding hook, used for training-time augmentation.
using EmbeddingTransform = std::function<Var(const Var&)>;

struct VideoTransforms {
  EmbeddingTransform frames;
  EmbeddingTransform subtitles;  // applied to all sentences stacked by row
};

class HierarchicalEncoder {
 public:
  HierarchicalEncoder(nn::ParameterStore& store, const ModelConfig& config);

  // Affine projection to width d plus a learned per-frame position.
  Var embed_frames(const FeatureMatrix& features) const;
  // Table lookup plus a learned per-token position.
  Var embed_tokens(std::span<const int> tokens) const;

  // Multimodal self-attention over [frames; tokens]. `frames` may have zero
  // rows (query path). Returns outputs split back per modality.
  std::pair<Var, Var> cross_modal_encode(const Var& frames, const Var& tokens,
                                         nn::AttentionTrace* trace = nullptr) const;

  ContextualizedVideo temporal_encode(const Var& v_emb, const Var& v_cross,
                                      EncoderTrace* trace = nullptr) const;

  QueryEncoding encode_query(std::span<const int> tokens,
                             const EmbeddingTransform* transform = nullptr,
                             EncoderTrace* trace = nullptr) const;

  ContextualizedVideo encode_video(const VideoRecord& video,
                                   const FeatureMatrix& features,
                                   const VideoTransforms* transforms = nullptr,
                                   EncoderTrace* trace = nullptr) const;

  const ModelConfig& config() const { return config_; }

  nn::Linear frame_proj;
  Var frame_positions;     // max_positions x d
  Var token_table;         // vocab x d
  Var token_positions;     // max_positions x d
  Var modality_types;      // 2 x d: row 0 frames, row 1 tokens
  Var temporal_positions;  // max_positions x d
  std::vector<nn::TransformerLayer> cross_layers;
  std::vector<nn::TransformerLayer> temporal_layers;
  nn::AdditivePooler query_pooler;
  nn::AdditivePooler sentence_pooler;

 private:
  ModelConfig config_;
};

}  // namespace vcmr

#endif  // VCMR_ENCODERS_HPP_
