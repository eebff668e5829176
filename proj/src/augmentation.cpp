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

#include "vcmr/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vcmr {
namespace {

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// k distinct indices from [0, n), ascending.
std::vector<int> choose(int n, int k, std::mt19937_64& rng) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

int cutoff_count(double ratio, Eigen::Index n) {
  const auto k = static_cast<int>(std::ceil(ratio * static_cast<double>(n) - 1e-12));
  return std::clamp(k, 0, static_cast<int>(n));
}

}  // namespace

std::string_view to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::kShuffle: return "shuffle";
    case AugmentOp::kTokenCutoff: return "token_cutoff";
    case AugmentOp::kFeatureCutoff: return "feature_cutoff";
    case AugmentOp::kDropout: return "dropout";
    case AugmentOp::kUnchanged: return "unchanged";
    case AugmentOp::kGatedOff: return "gated_off";
  }
  return "unknown";
}

void AugmentationPolicy::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(gate_prob) || !in_unit(cutoff_ratio) || !in_unit(dropout_rate)) {
    throw std::invalid_argument("augmentation policy: probabilities must lie in [0, 1]");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!in_unit(w)) {
      throw std::invalid_argument("augmentation policy: weights must lie in [0, 1]");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("augmentation policy: weights must sum to 1");
  }
}

AugmentOp sample_op(const AugmentationPolicy& policy, std::mt19937_64& rng) {
  if (!(uniform01(rng) < policy.gate_prob)) return AugmentOp::kGatedOff;
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < policy.weights.size(); ++i) {
    acc += policy.weights[i];
    if (u < acc) return static_cast<AugmentOp>(i);
  }
  // Rounding left u above the cumulative total: take the last nonzero op.
  for (std::size_t i = policy.weights.size(); i-- > 0;) {
    if (policy.weights[i] > 0.0) return static_cast<AugmentOp>(i);
  }
  return AugmentOp::kUnchanged;
}

AugmentationPlan make_plan(Eigen::Index rows, Eigen::Index cols, AugmentOp op,
                           const AugmentationPolicy& policy,
                           std::mt19937_64& rng) {
  AugmentationPlan plan;
  plan.record.op = op;
  switch (op) {
    case AugmentOp::kShuffle: {
      plan.permutation.resize(static_cast<std::size_t>(rows));
      std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
      std::shuffle(plan.permutation.begin(), plan.permutation.end(), rng);
      plan.record.affected = plan.permutation;
      break;
    }
    case AugmentOp::kTokenCutoff: {
      plan.record.affected = choose(static_cast<int>(rows),
                                    cutoff_count(policy.cutoff_ratio, rows), rng);
      plan.mask = Matrix::Ones(rows, cols);
      for (int r : plan.record.affected) plan.mask.row(r).setZero();
      break;
    }
    case AugmentOp::kFeatureCutoff: {
      plan.record.affected = choose(static_cast<int>(cols),
                                    cutoff_count(policy.cutoff_ratio, cols), rng);
      plan.mask = Matrix::Ones(rows, cols);
      for (int c : plan.record.affected) plan.mask.col(c).setZero();
      break;
    }
    case AugmentOp::kDropout: {
      plan.mask = Matrix::Ones(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          if (uniform01(rng) < policy.dropout_rate) {
            plan.mask(i, j) = 0.0;
            plan.record.affected.push_back(static_cast<int>(i * cols + j));
          }
        }
      }
      break;
    }
    case AugmentOp::kUnchanged:
    case AugmentOp::kGatedOff:
      break;
  }
  return plan;
}

Matrix AugmentationPlan::apply(const Matrix& m) const {
  if (!permutation.empty()) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < permutation.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = m.row(permutation[i]);
    }
    return out;
  }
  if (mask.size() != 0) return m.cwiseProduct(mask);
  return m;
}

Var AugmentationPlan::apply(const Var& v) const {
  if (!permutation.empty()) return ag::gather_rows(v, permutation);
  if (mask.size() != 0) return ag::mul_const(v, mask);
  return v;
}

AugmentedEmbeddings apply(const Matrix& embeddings, AugmentOp op,
                          const AugmentationPolicy& policy,
                          std::mt19937_64& rng) {
  if (embeddings.size() == 0) {
    throw std::invalid_argument("augmentation: empty embeddings");
  }
  AugmentationPlan plan =
      make_plan(embeddings.rows(), embeddings.cols(), op, policy, rng);
  return {plan.apply(embeddings), std::move(plan.record)};
}

BatchPlans plan_batch(Eigen::Index video_rows, Eigen::Index subtitle_rows,
                      Eigen::Index query_rows, Eigen::Index dim,
                      const AugmentationPolicy& policy, std::mt19937_64& rng,
                      Mode mode) {
  if (mode != Mode::kTrain) {
    throw std::logic_error("augmentation requested outside training mode");
  }
  BatchPlans plans;
  const AugmentOp video_op = sample_op(policy, rng);
  plans.video = make_plan(video_rows, dim, video_op, policy, rng);
  const AugmentOp subtitle_op = sample_op(policy, rng);
  plans.subtitles = make_plan(subtitle_rows, dim, subtitle_op, policy, rng);
  const AugmentOp query_op = sample_op(policy, rng);
  plans.query = make_plan(query_rows, dim, query_op, policy, rng);
  return plans;
}

AugmentedBatch augment_batch(const Matrix& video_emb, const Matrix& subtitle_emb,
                             const Matrix& query_emb,
                             const AugmentationPolicy& policy,
                             std::mt19937_64& rng, Mode mode) {
  if (video_emb.cols() != subtitle_emb.cols() ||
      video_emb.cols() != query_emb.cols()) {
    throw std::invalid_argument("augment_batch: streams differ in width");
  }
  const BatchPlans plans =
      plan_batch(video_emb.rows(), subtitle_emb.rows(), query_emb.rows(),
                 video_emb.cols(), policy, rng, mode);
  return {plans.video.apply(video_emb), plans.subtitles.apply(subtitle_emb),
          plans.query.apply(query_emb), plans.records()};
}

void confine_shuffle(AugmentationPlan& plan, const std::vector<int>& cuts,
                     std::mt19937_64& rng) {
  if (plan.record.op != AugmentOp::kShuffle) return;
  const int rows = static_cast<int>(plan.permutation.size());
  if (cuts.size() < 2 || cuts.front() != 0 || cuts.back() != rows ||
      !std::is_sorted(cuts.begin(), cuts.end())) {
    throw std::invalid_argument("confine_shuffle: cuts must run from 0 to the row count");
  }
  std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    std::shuffle(plan.permutation.begin() + cuts[k],
                 plan.permutation.begin() + cuts[k + 1], rng);
  }
  plan.record.affected = plan.permutation;
}

std::mt19937_64 item_stream(std::uint64_t seed, std::uint64_t epoch,
                            std::uint64_t item) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(item),
                    static_cast<std::uint32_t>(item >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace vcmr
