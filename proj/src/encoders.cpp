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

#include "vcmr/encoders.hpp"

#include <stdexcept>
#include <string>

namespace vcmr {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) {
      throw std::invalid_argument(std::string("model config: ") + name +
                                  " must be >= 1");
    }
  };
  positive(input_dim, "input_dim");
  positive(d, "d");
  positive(n_heads, "n_heads");
  positive(n_layers_cross, "n_layers_cross");
  positive(n_layers_temp, "n_layers_temp");
  positive(vocab_size, "vocab_size");
  positive(max_positions, "max_positions");
  positive(l_max_span, "l_max_span");
  positive(ffn_dim, "ffn_dim");
  if (d % n_heads != 0) {
    throw std::invalid_argument("model config: d must be divisible by n_heads");
  }
}

HierarchicalEncoder::HierarchicalEncoder(nn::ParameterStore& store,
                                         const ModelConfig& config)
    : config_(config) {
  config.validate();
  const Eigen::Index d = config.d;
  frame_proj = nn::Linear(store, "encoder.frame_proj", config.input_dim, d);
  frame_positions =
      store.create("encoder.frame_positions", config.max_positions, d,
                   config.max_positions);
  token_table = store.create("encoder.token_table", config.vocab_size, d, d);
  token_positions =
      store.create("encoder.token_positions", config.max_positions, d,
                   config.max_positions);
  modality_types =
      store.create("encoder.modality_types", 2, d, config.max_positions);
  temporal_positions =
      store.create("encoder.temporal_positions", config.max_positions, d,
                   config.max_positions);
  for (int l = 0; l < config.n_layers_cross; ++l) {
    cross_layers.emplace_back(store, "encoder.cross." + std::to_string(l), d,
                              config.n_heads, config.ffn_dim);
  }
  for (int l = 0; l < config.n_layers_temp; ++l) {
    temporal_layers.emplace_back(store, "encoder.temporal." + std::to_string(l),
                                 d, config.n_heads, config.ffn_dim);
  }
  query_pooler = nn::AdditivePooler(store, "encoder.query_pooler", d);
  sentence_pooler = nn::AdditivePooler(store, "encoder.sentence_pooler", d);
}

Var HierarchicalEncoder::embed_frames(const FeatureMatrix& features) const {
  if (features.cols() != config_.input_dim) {
    throw std::invalid_argument(
        "embed_frames: feature dim " + std::to_string(features.cols()) +
        " != configured input_dim " + std::to_string(config_.input_dim));
  }
  if (features.rows() > config_.max_positions) {
    throw std::invalid_argument("embed_frames: more frames than max_positions");
  }
  Var x = ag::constant(features.cast<double>());
  return ag::add(frame_proj(x),
                 ag::slice_rows(frame_positions, 0, features.rows()));
}

Var HierarchicalEncoder::embed_tokens(std::span<const int> tokens) const {
  if (static_cast<int>(tokens.size()) > config_.max_positions) {
    throw std::invalid_argument("embed_tokens: more tokens than max_positions");
  }
  for (int t : tokens) {
    if (t < 0 || t >= config_.vocab_size) {
      throw std::out_of_range("embed_tokens: token id " + std::to_string(t) +
                              " outside vocabulary of size " +
                              std::to_string(config_.vocab_size));
    }
  }
  const auto n = static_cast<Eigen::Index>(tokens.size());
  return ag::add(ag::gather_rows(token_table, tokens),
                 ag::slice_rows(token_positions, 0, n));
}

std::pair<Var, Var> HierarchicalEncoder::cross_modal_encode(
    const Var& frames, const Var& tokens, nn::AttentionTrace* trace) const {
  if (frames.cols() != config_.d || tokens.cols() != config_.d) {
    throw std::invalid_argument("cross_modal_encode: inputs must have width d");
  }
  const Eigen::Index n_frames = frames.rows();
  const Eigen::Index n_tokens = tokens.rows();
  if (n_frames + n_tokens == 0) {
    throw std::invalid_argument("cross_modal_encode: empty input");
  }
  std::vector<Var> parts;
  if (n_frames > 0) {
    parts.push_back(ag::add_row(frames, ag::slice_rows(modality_types, 0, 1)));
  }
  if (n_tokens > 0) {
    parts.push_back(ag::add_row(tokens, ag::slice_rows(modality_types, 1, 1)));
  }
  Var x = ag::concat_rows(parts);
  for (const auto& layer : cross_layers) x = layer(x, trace);
  Var frame_out = n_frames > 0 ? ag::slice_rows(x, 0, n_frames)
                               : ag::constant(Matrix::Zero(0, config_.d));
  Var token_out = n_tokens > 0 ? ag::slice_rows(x, n_frames, n_tokens)
                               : ag::constant(Matrix::Zero(0, config_.d));
  return {frame_out, token_out};
}

ContextualizedVideo HierarchicalEncoder::temporal_encode(
    const Var& v_emb, const Var& v_cross, EncoderTrace* trace) const {
  if (v_emb.rows() != v_cross.rows() || v_emb.cols() != v_cross.cols()) {
    throw std::invalid_argument("temporal_encode: v_emb and v_cross differ in shape");
  }
  if (v_emb.cols() != config_.d || v_emb.rows() < 1) {
    throw std::invalid_argument("temporal_encode: expected N_v >= 1 rows of width d");
  }
  if (v_emb.rows() > config_.max_positions) {
    throw std::invalid_argument("temporal_encode: more frames than max_positions");
  }
  Var x = ag::add(v_emb, v_cross);
  if (trace) trace->temporal_input = x.value();
  x = ag::add(x, ag::slice_rows(temporal_positions, 0, x.rows()));
  for (const auto& layer : temporal_layers) {
    x = layer(x, trace ? &trace->temporal : nullptr);
  }
  return {v_cross, x};
}

QueryEncoding HierarchicalEncoder::encode_query(
    std::span<const int> tokens, const EmbeddingTransform* transform,
    EncoderTrace* trace) const {
  if (tokens.empty()) throw std::invalid_argument("encode_query: empty query");
  QueryEncoding out;
  out.w_emb = embed_tokens(tokens);
  if (transform && *transform) out.w_emb = (*transform)(out.w_emb);
  const Var no_frames = ag::constant(Matrix::Zero(0, config_.d));
  out.w_cross = cross_modal_encode(no_frames, out.w_emb,
                                   trace ? &trace->cross : nullptr)
                    .second;
  out.q = query_pooler(out.w_cross, trace ? &trace->q_weights : nullptr);
  const Var& sentence_in = config_.pool_qc_from_cross ? out.w_cross : out.w_emb;
  out.q_c = sentence_pooler(sentence_in, trace ? &trace->q_c_weights : nullptr);
  return out;
}

ContextualizedVideo HierarchicalEncoder::encode_video(
    const VideoRecord& video, const FeatureMatrix& features,
    const VideoTransforms* transforms, EncoderTrace* trace) const {
  if (features.rows() != video.n_frames) {
    throw std::invalid_argument("encode_video: feature rows != n_frames for " +
                                video.video_id);
  }
  Var v_emb = embed_frames(features);
  if (transforms && transforms->frames) v_emb = transforms->frames(v_emb);

  std::vector<Var> sentences;
  sentences.reserve(video.subtitles.size());
  for (const auto& s : video.subtitles) sentences.push_back(embed_tokens(s.tokens));
  if (transforms && transforms->subtitles && !sentences.empty()) {
    Var stacked = transforms->subtitles(ag::concat_rows(sentences));
    Eigen::Index at = 0;
    for (auto& s : sentences) {
      const Eigen::Index n = s.rows();
      s = ag::slice_rows(stacked, at, n);
      at += n;
    }
  }

  std::vector<Var> cross_frames;
  cross_frames.reserve(video.subtitles.size());
  for (std::size_t i = 0; i < video.subtitles.size(); ++i) {
    const auto& s = video.subtitles[i];
    Var group = ag::slice_rows(v_emb, s.start_frame, s.frame_count());
    cross_frames.push_back(
        cross_modal_encode(group, sentences[i], trace ? &trace->cross : nullptr)
            .first);
  }
  Var v_cross = cross_frames.empty() ? ag::constant(Matrix::Zero(v_emb.rows(), config_.d))
                                     : ag::concat_rows(cross_frames);
  return temporal_encode(v_emb, v_cross, trace);
}

}  // namespace vcmr
