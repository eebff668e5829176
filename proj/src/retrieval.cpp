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

#include "vcmr/retrieval.hpp"

#include <numeric>

namespace vcmr {

std::vector<RankedVideo> top_k(std::span<const double> scores, int k) {
  if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(n),
                    order.end(), [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<RankedVideo> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({order[i], scores[order[i]]});
  return out;
}

std::vector<RankedVideo> rank_videos(
    std::span<const ContextualizedVideo> corpus, const QueryEncoding& query,
    int k) {
  if (corpus.empty()) throw std::invalid_argument("rank_videos: empty corpus");
  if (k < 1) throw std::invalid_argument("rank_videos: k must be >= 1");
  std::vector<double> scores;
  scores.reserve(corpus.size());
  for (const auto& video : corpus) {
    scores.push_back(global_similarity(video.v_temp.value(), query.q.value()));
  }
  return top_k(scores, k);
}

Var global_similarity(const Var& v_temp, const Var& q) {
  if (v_temp.rows() < 1) {
    throw std::invalid_argument("global_similarity: video has no frames");
  }
  Var cosines = ag::matmul_nt(ag::l2_normalize_rows(v_temp),
                              ag::l2_normalize_rows(q));
  return ag::max_element(cosines);
}

Var local_similarity(const Var& v_temp, const Var& q) {
  return ag::matmul_nt(v_temp, q);
}

BoundaryHead::BoundaryHead(nn::ParameterStore& store)
    : start(store, "boundary.start", kWidth, 1, 1),
      end(store, "boundary.end", kWidth, 1, 1) {}

BoundaryLogits BoundaryHead::logits(const Var& local) const {
  if (local.rows() < 1 || local.cols() != 1) {
    throw std::invalid_argument("boundary head expects an N_v x 1 score column");
  }
  return {start(local), end(local)};
}

BoundaryProbabilities BoundaryHead::boundary_probabilities(
    const Eigen::VectorXd& local) const {
  ag::NoGradGuard no_grad;
  const BoundaryLogits l = logits(ag::constant(Matrix(local)));
  return {ag::softmax_cols(l.start).value().col(0),
          ag::softmax_cols(l.end).value().col(0)};
}

Var frame_cross_entropy(const Var& logits, int label) {
  if (label < 0 || label >= logits.rows()) {
    throw std::out_of_range("frame_cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(logits.rows()) + ")");
  }
  Var log_probs = ag::log_softmax_rows(ag::transpose(logits));
  return ag::scale(ag::element(log_probs, 0, label), -1.0);
}

Var BoundaryHead::loss(const BoundaryLogits& l, int y_st, int y_ed) const {
  return ag::scale(ag::add(frame_cross_entropy(l.start, y_st),
                           frame_cross_entropy(l.end, y_ed)),
                   0.5);
}

}  // namespace vcmr
