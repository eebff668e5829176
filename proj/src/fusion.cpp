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

#include "vcmr/fusion.hpp"

#include <string>

#include "vcmr/retrieval.hpp"

namespace vcmr {

SpanLabels SpanLabels::from_moment(const FrameSpan& moment, int n_frames) {
  if (moment.start < 0 || moment.start > moment.end) {
    throw std::invalid_argument("span labels: need 0 <= start <= end");
  }
  if (moment.end >= n_frames) {
    throw std::out_of_range("span labels: end frame " + std::to_string(moment.end) +
                            " outside video of " + std::to_string(n_frames) +
                            " frames");
  }
  SpanLabels labels;
  labels.y_st = moment.start;
  labels.y_ed = moment.end;
  labels.y_h = Eigen::VectorXd::Zero(n_frames);
  labels.y_h.segment(moment.start, moment.length()).setOnes();
  return labels;
}

FusionHead::FusionHead(nn::ParameterStore& store, Eigen::Index d)
    : w_frame(store.create("fusion.cqa.w_frame", d, 1, 3 * d)),
      w_token(store.create("fusion.cqa.w_token", d, 1, 3 * d)),
      w_joint(store.create("fusion.cqa.w_joint", d, 1, 3 * d)),
      fuse_fc(store, "fusion.fuse_fc", 4 * d, d),
      highlight_conv(store, "fusion.highlight", kHighlightWidth, 2 * d, 1),
      start_lstm1(store, "fusion.start_lstm1", d, d),
      start_lstm2(store, "fusion.start_lstm2", d, d),
      end_lstm1(store, "fusion.end_lstm1", d, d),
      end_lstm2(store, "fusion.end_lstm2", d, d),
      start_fc(store, "fusion.start_fc", 2 * d, 1),
      end_fc(store, "fusion.end_fc", 2 * d, 1) {}

CQAMatrices FusionHead::cqa_attention(const Var& v_temp,
                                      const Var& query_tokens) const {
  const Eigen::Index n_v = v_temp.rows();
  const Eigen::Index n_q = query_tokens.rows();
  if (n_v < 1) throw std::invalid_argument("cqa_attention: empty video");
  if (n_q < 1) throw std::invalid_argument("cqa_attention: empty query");
  if (v_temp.cols() != query_tokens.cols() || v_temp.cols() != w_frame.rows()) {
    throw std::invalid_argument("cqa_attention: dimension mismatch");
  }
  Var frame_term = ag::matmul(ag::matmul(v_temp, w_frame),
                              ag::constant(Matrix::Ones(1, n_q)));
  Var token_term =
      ag::repeat_rows(ag::transpose(ag::matmul(query_tokens, w_token)), n_v);
  Var joint_term =
      ag::matmul_nt(ag::mul_row(v_temp, ag::transpose(w_joint)), query_tokens);

  CQAMatrices out;
  out.s = ag::add(ag::add(frame_term, token_term), joint_term);
  out.s_r = ag::softmax_rows(out.s);
  out.s_c = ag::softmax_cols(out.s);
  out.a = ag::matmul(out.s_r, query_tokens);
  out.b = ag::matmul(ag::matmul_nt(out.s_r, out.s_c), v_temp);
  return out;
}

Var FusionHead::fuse(const Var& v_temp, const CQAMatrices& cqa) const {
  const Var parts[] = {v_temp, cqa.a, ag::mul(v_temp, cqa.a),
                       ag::mul(v_temp, cqa.b)};
  return fuse_fc(ag::concat_cols(parts));
}

Var FusionHead::highlight(const Var& v_q, const Var& q_c) const {
  if (q_c.rows() != 1 || q_c.cols() != v_q.cols()) {
    throw std::invalid_argument("highlight: q_c must be 1 x d");
  }
  const Var parts[] = {v_q, ag::repeat_rows(q_c, v_q.rows())};
  return ag::sigmoid(highlight_conv(ag::concat_cols(parts)));
}

FusedMomentFeatures apply_highlight(const Var& v_q, const Var& s_h) {
  if (s_h.cols() != 1 || s_h.rows() != v_q.rows()) {
    throw std::invalid_argument("apply_highlight: s_h must be N_v x 1");
  }
  return {v_q, s_h, ag::mul_col(v_q, s_h)};
}

SpanScores FusionHead::span_scores(const Var& v_q_tilde) const {
  if (v_q_tilde.rows() < 1) throw std::invalid_argument("span_scores: N_v must be >= 1");
  Var h_start = start_lstm2(start_lstm1(v_q_tilde));
  Var h_end = end_lstm2(end_lstm1(h_start));
  const Var start_in[] = {h_start, v_q_tilde};
  const Var end_in[] = {h_end, v_q_tilde};
  return {start_fc(ag::concat_cols(start_in)), end_fc(ag::concat_cols(end_in))};
}

FusionHead::Output FusionHead::forward(const Var& v_temp,
                                       const Var& query_tokens,
                                       const Var& q_c) const {
  Output out;
  out.cqa = cqa_attention(v_temp, query_tokens);
  Var v_q = fuse(v_temp, out.cqa);
  out.fused = apply_highlight(v_q, highlight(v_q, q_c));
  out.scores = span_scores(out.fused.v_q_tilde);
  return out;
}

Var moment_loss(const SpanScores& scores, const Var& s_h,
                const SpanLabels& labels, double highlight_weight) {
  const Eigen::Index n = scores.s_st.rows();
  if (labels.y_st > labels.y_ed) {
    throw std::invalid_argument("moment_loss: y_st > y_ed");
  }
  if (labels.y_ed >= n) {
    throw std::out_of_range("moment_loss: y_ed " + std::to_string(labels.y_ed) +
                            " >= N_v " + std::to_string(n));
  }
  if (s_h.rows() != n || labels.y_h.size() != n) {
    throw std::invalid_argument("moment_loss: length mismatch");
  }
  Var ce = ag::scale(ag::add(frame_cross_entropy(scores.s_st, labels.y_st),
                             frame_cross_entropy(scores.s_ed, labels.y_ed)),
                     0.5);
  return ag::add(ce, ag::scale(ag::mean_abs_diff(s_h, Matrix(labels.y_h)),
                               highlight_weight));
}

}  // namespace vcmr
