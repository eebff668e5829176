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

// Fine-grained moment localization for one (video, query) pair:
// context-query attention, fused features, per-frame highlight gating, and
// a conditioned start/end recurrent scorer.

#ifndef VCMR_FUSION_HPP_
#define VCMR_FUSION_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vcmr/autograd.hpp"
#include "vcmr/corpus.hpp"
#include "vcmr/nn.hpp"

namespace vcmr {

using ag::Matrix;
using ag::Var;

struct CQAMatrices {
  Var s;    // N_v x N_q trilinear similarity
  Var s_r;  // row softmax
  Var s_c;  // column softmax
  Var a;    // N_v x d, context-to-query
  Var b;    // N_v x d, query-to-context
};

struct FusedMomentFeatures {
  Var v_q;        // N_v x d
  Var s_h;        // N_v x 1, in (0, 1)
  Var v_q_tilde;  // N_v x d, diag(s_h) * v_q
};

struct SpanScores {
  Var s_st;  // N_v x 1 logits
  Var s_ed;  // N_v x 1 logits
};

struct SpanLabels {
  int y_st = 0;
  int y_ed = 0;
  Eigen::VectorXd y_h;  // 1 inside [y_st, y_ed], 0 elsewhere

  static SpanLabels from_moment(const FrameSpan& moment, int n_frames);
};

struct SpanPrediction {
  int start = 0;
  int end = 0;
  double probability = 0.0;
  double log_probability = 0.0;
};

class FusionHead {
 public:
  static constexpr int kHighlightWidth = 5;

  FusionHead() = default;
  FusionHead(nn::ParameterStore& store, Eigen::Index d);

  CQAMatrices cqa_attention(const Var& v_temp, const Var& query_tokens) const;
  Var fuse(const Var& v_temp, const CQAMatrices& cqa) const;
  // Returns N_v x 1 highlight scores for [v_q; q_c] rows.
  Var highlight(const Var& v_q, const Var& q_c) const;
  SpanScores span_scores(const Var& v_q_tilde) const;

  struct Output {
    CQAMatrices cqa;
    FusedMomentFeatures fused;
    SpanScores scores;
  };
  Output forward(const Var& v_temp, const Var& query_tokens,
                 const Var& q_c) const;

  // Trilinear similarity weights, each d x 1: frame, token, frame*token.
  Var w_frame;
  Var w_token;
  Var w_joint;
  nn::Linear fuse_fc;  // 4d -> d
  nn::Conv1d highlight_conv;  // width 5 over 2d channels, tap-major [v_q; q_c]
  nn::Lstm start_lstm1;
  nn::Lstm start_lstm2;
  nn::Lstm end_lstm1;
  nn::Lstm end_lstm2;
  nn::Linear start_fc;  // 2d -> 1
  nn::Linear end_fc;    // 2d -> 1
};

FusedMomentFeatures apply_highlight(const Var& v_q, const Var& s_h);

// 0.5 * (CE(s_st, y_st) + CE(s_ed, y_ed)) + w_h * mean |s_h - y_h|.
Var moment_loss(const SpanScores& scores, const Var& s_h,
                const SpanLabels& labels, double highlight_weight = 1.0);

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const auto x = logits.reshaped().eval();
  const Scalar m = x.maxCoeff();
  const Scalar lse = m + std::log((x.array() - m).exp().sum());
  return (x.array() - lse).matrix();
}

// argmax of P_st[i] * P_ed[j] over i <= j <= i + l_max - 1, with P the
// softmax over frames. Ties go to the smallest i, then the smallest j.
template <typename DerivedS, typename DerivedE>
SpanPrediction predict_span(const Eigen::MatrixBase<DerivedS>& start_logits,
                            const Eigen::MatrixBase<DerivedE>& end_logits,
                            int l_max) {
  if (l_max < 1) throw std::invalid_argument("predict_span: l_max must be >= 1");
  const Eigen::Index n = start_logits.size();
  if (n < 1 || end_logits.size() != n) {
    throw std::invalid_argument("predict_span: logits must be non-empty and equal length");
  }
  // The softmax normalizers are shared by every span, so the product is
  // ranked by the raw logit sum; equal sums stay exact ties.
  const Eigen::VectorXd s = start_logits.reshaped().template cast<double>();
  const Eigen::VectorXd e = end_logits.reshaped().template cast<double>();
  SpanPrediction best;
  double best_sum = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index last = std::min<Eigen::Index>(n - 1, i + l_max - 1);
    for (Eigen::Index j = i; j <= last; ++j) {
      const double sum = s(i) + e(j);
      if (!found || sum > best_sum) {
        best.start = static_cast<int>(i);
        best.end = static_cast<int>(j);
        best_sum = sum;
        found = true;
      }
    }
  }
  const Eigen::VectorXd ls = log_softmax(s);
  const Eigen::VectorXd le = log_softmax(e);
  best.log_probability = ls(best.start) + le(best.end);
  best.probability = std::exp(best.log_probability);
  return best;
}

}  // namespace vcmr

#endif  // VCMR_FUSION_HPP_
