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

// Late-fusion scoring: max-pooled frame/query cosine for whole videos, raw
// dot products per frame, and the convolutional start/end head on top of
// them.

#ifndef VCMR_RETRIEVAL_HPP_
#define VCMR_RETRIEVAL_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "vcmr/autograd.hpp"
#include "vcmr/encoders.hpp"
#include "vcmr/nn.hpp"

namespace vcmr {

// Max over frames of cos(v_temp[i], q). `q` is any vector of length d.
template <typename DerivedV, typename DerivedQ>
typename DerivedV::Scalar global_similarity(
    const Eigen::MatrixBase<DerivedV>& v_temp,
    const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedV::Scalar;
  if (v_temp.rows() < 1) {
    throw std::invalid_argument("global_similarity: video has no frames");
  }
  if (v_temp.cols() != q.size()) {
    throw std::invalid_argument("global_similarity: dimension mismatch");
  }
  const auto qv = q.reshaped().template cast<Scalar>().eval();
  const Scalar qn = qv.norm();
  if (!(qn > Scalar(0))) {
    throw std::domain_error("global_similarity: zero-norm query vector");
  }
  const auto norms = v_temp.rowwise().norm().eval();
  if (!(norms.minCoeff() > Scalar(0))) {
    throw std::domain_error("global_similarity: zero-norm frame embedding");
  }
  const auto cosines = ((v_temp * qv).array() / (norms.array() * qn)).eval();
  return cosines.maxCoeff();
}

// S_local[i] = <v_temp[i], q>, unnormalized.
template <typename DerivedV, typename DerivedQ>
Eigen::Matrix<typename DerivedV::Scalar, Eigen::Dynamic, 1> local_similarity(
    const Eigen::MatrixBase<DerivedV>& v_temp,
    const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedV::Scalar;
  if (v_temp.cols() != q.size()) {
    throw std::invalid_argument("local_similarity: dimension mismatch");
  }
  return v_temp * q.reshaped().template cast<Scalar>();
}

struct RankedVideo {
  int index = 0;
  double score = 0.0;
};

// Stable top-k: descending score, ties by ascending index.
std::vector<RankedVideo> top_k(std::span<const double> scores, int k);

// Ranks every video of the corpus by global similarity to the query.
std::vector<RankedVideo> rank_videos(
    std::span<const ContextualizedVideo> corpus, const QueryEncoding& query,
    int k);

// Differentiable counterparts used during training.
Var global_similarity(const Var& v_temp, const Var& q);
Var local_similarity(const Var& v_temp, const Var& q);

struct BoundaryProbabilities {
  Eigen::VectorXd p_st;
  Eigen::VectorXd p_ed;
};

struct BoundaryLogits {
  Var start;  // N_v x 1
  Var end;    // N_v x 1
};

// Two width-5 same-padded convolutions over the local score sequence.
class BoundaryHead {
 public:
  static constexpr int kWidth = 5;

  BoundaryHead() = default;
  explicit BoundaryHead(nn::ParameterStore& store);

  BoundaryLogits logits(const Var& local) const;
  BoundaryProbabilities boundary_probabilities(const Eigen::VectorXd& local) const;
  // 0.5 * (CE(start, y_st) + CE(end, y_ed)), softmax over frames.
  Var loss(const BoundaryLogits& logits, int y_st, int y_ed) const;

  nn::Conv1d start;
  nn::Conv1d end;
};

// Cross-entropy of a column of per-frame logits against a frame label.
Var frame_cross_entropy(const Var& logits, int label);

}  // namespace vcmr

#endif  // VCMR_RETRIEVAL_HPP_
