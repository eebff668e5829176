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

// Training, two-stage inference and recall evaluation.

#ifndef VCMR_PIPELINE_HPP_
#define VCMR_PIPELINE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcmr/augmentation.hpp"
#include "vcmr/corpus.hpp"
#include "vcmr/model.hpp"

namespace vcmr {

enum class Task { kVR, kVCMR };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 0.05;
  Optimizer optimizer = Optimizer::kSgd;
  double margin = 0.1;
  double alpha = 1.0;
  double tiou_threshold = 0.7;
  int k_videos = 10;
  std::vector<int> recall_ks = {1, 5, 10};
  double moment_loss_weight = 1.0;
  double highlight_loss_weight = 1.0;  // weight of the L1 highlight term
  double clip_norm = 5.0;  // global gradient norm cap; <= 0 disables
  bool augment = true;
  // Extra randomly drawn videos per batch, scored as negatives only.
  int extra_negatives = 0;
  // Score each positive pair over its annotated moment frames only.
  bool moment_positives = true;
  std::uint64_t seed = 0;

  void validate() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, int batch, const std::string& what)
      : std::runtime_error(what), epoch(epoch), batch(batch) {}
  int epoch;
  int batch;
};

// Bidirectional hinge over in-batch negatives. scores(i, c) is query i
// against video c; positives[i] is the column of query i's own video.
// Query->video terms pair each query with every other column; video->query
// terms pair positive video p_i with every query j whose positive differs.
// Returns 0.5 * (mean of the first set + mean of the second), an empty set
// contributing zero.
Var retrieval_loss(const Var& scores, std::span<const int> positives,
                   double margin);
double retrieval_loss(const Eigen::MatrixXd& scores,
                      std::span<const int> positives, double margin);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double retrieval_loss = 0.0;
  double moment_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int l_max_span = 0;
};

struct TrainingBatch {
  std::vector<int> queries;       // manifest query indices
  std::vector<int> extra_videos;  // corpus video indices, negatives only
};

struct BatchLoss {
  Var total;  // retrieval + moment_loss_weight * moment
  Var retrieval;
  Var moment;  // mean over the batch
};

// Forward pass of one training step. With a policy, item b draws its plans
// from item_stream(policy->seed, epoch, batch.queries[b]).
BatchLoss batch_loss(const VcmrModel& model, const LoadedCorpus& corpus,
                     const TrainingBatch& batch, const TrainConfig& config,
                     const AugmentationPolicy* policy = nullptr, int epoch = 0);

using EpochCallback = std::function<void(const EpochLog&)>;

// SGD over the "train" split. Sets the model's l_max_span to the longest
// training moment.
TrainResult train(VcmrModel& model, const LoadedCorpus& corpus,
                  const TrainConfig& config, const AugmentationPolicy& policy,
                  const EpochCallback& on_epoch = {});

// Eval-mode encodings of every video in manifest order.
std::vector<ContextualizedVideo> encode_corpus(const VcmrModel& model,
                                               const LoadedCorpus& corpus);

struct MomentPrediction {
  std::string video_id;
  FrameSpan span;
  double score = 0.0;
};

// Stage 1 ranks videos by global similarity; stage 2 localizes inside each
// of the top-k. Candidate score: alpha * global + log P_st[i] + log P_ed[j].
std::vector<MomentPrediction> two_stage_inference(
    const VcmrModel& model, const CorpusManifest& manifest,
    std::span<const ContextualizedVideo> encodings, const QueryRecord& query,
    int k, double alpha, int l_max, LocalizationHead head);

// Whole-video predictions in stage-1 order.
std::vector<MomentPrediction> video_retrieval(
    const VcmrModel& model, const CorpusManifest& manifest,
    std::span<const ContextualizedVideo> encodings, const QueryRecord& query,
    int k);

// |intersection| / |union| of inclusive frame intervals.
double temporal_iou(const FrameSpan& a, const FrameSpan& b);

// Fraction of queries with a hit among their first K predictions.
double recall_at_k(std::span<const std::vector<MomentPrediction>> predictions,
                   std::span<const QueryRecord> truth, int k, double tiou,
                   Task task);

struct EvalReport {
  Task task = Task::kVCMR;
  std::map<int, double> recall_at;
  double aver = 0.0;
  double tiou = 0.0;
  std::size_t n_queries = 0;
};

EvalReport make_report(std::span<const std::vector<MomentPrediction>> predictions,
                       std::span<const QueryRecord> truth,
                       std::span<const int> ks, double tiou, Task task);

struct EvalOptions {
  std::string split = "val";
  Task task = Task::kVCMR;
  bool baseline = false;  // localize with the conv head
};

EvalReport evaluate(const VcmrModel& model, const LoadedCorpus& corpus,
                    const TrainConfig& config, const EvalOptions& options);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace vcmr

#endif  // VCMR_PIPELINE_HPP_
