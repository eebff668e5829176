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

#include "vcmr/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "json.hpp"
#include "vcmr/retrieval.hpp"

namespace vcmr {
namespace {

void check_positives(Eigen::Index n_queries, Eigen::Index n_videos,
                     std::span<const int> positives) {
  if (static_cast<Eigen::Index>(positives.size()) != n_queries) {
    throw std::invalid_argument("retrieval_loss: every query needs one positive");
  }
  for (int p : positives) {
    if (p < 0 || p >= n_videos) {
      throw std::invalid_argument("retrieval_loss: positive index " +
                                  std::to_string(p) + " outside the score matrix");
    }
  }
}

}  // namespace

std::string_view to_string(Task task) {
  return task == Task::kVR ? "VR" : "VCMR";
}

Task parse_task(std::string_view name) {
  if (name == "vr" || name == "VR") return Task::kVR;
  if (name == "vcmr" || name == "VCMR") return Task::kVCMR;
  throw std::invalid_argument("unknown task \"" + std::string(name) + "\"");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("train config: learning_rate must be > 0");
  }
  if (!(margin > 0.0)) throw std::invalid_argument("train config: margin must be > 0");
  if (!(tiou_threshold > 0.0 && tiou_threshold <= 1.0)) {
    throw std::invalid_argument("train config: tiou_threshold must lie in (0, 1]");
  }
  if (recall_ks.empty()) throw std::invalid_argument("train config: recall_ks is empty");
  for (int k : recall_ks) {
    if (k < 1) throw std::invalid_argument("train config: recall K must be >= 1");
  }
  const int max_k = *std::max_element(recall_ks.begin(), recall_ks.end());
  if (k_videos < max_k) {
    throw std::invalid_argument("train config: k_videos must be >= max(recall_ks)");
  }
  if (extra_negatives < 0) {
    throw std::invalid_argument("train config: extra_negatives must be >= 0");
  }
}

Var retrieval_loss(const Var& scores, std::span<const int> positives,
                   double margin) {
  const Eigen::Index nq = scores.rows();
  const Eigen::Index nv = scores.cols();
  check_positives(nq, nv, positives);

  Matrix pick = Matrix::Zero(nq, nv);
  Matrix video_neg = Matrix::Zero(nq, nv);
  Matrix query_neg = Matrix::Zero(nq, nq);
  for (Eigen::Index i = 0; i < nq; ++i) {
    pick(i, positives[i]) = 1.0;
    for (Eigen::Index c = 0; c < nv; ++c) video_neg(i, c) = c != positives[i];
    for (Eigen::Index j = 0; j < nq; ++j) {
      query_neg(i, j) = positives[j] != positives[i];
    }
  }
  // s_pos(i) = scores(i, p_i), as an nq x 1 column.
  Var s_pos = ag::matmul(ag::mul_const(scores, pick),
                         ag::constant(Matrix::Ones(nv, 1)));

  Var total = ag::constant(Matrix::Zero(1, 1));
  const double n_video_neg = video_neg.sum();
  if (n_video_neg > 0) {
    Var base = ag::matmul(s_pos, ag::constant(Matrix::Ones(1, nv)));
    Var hinge = ag::relu(ag::add_scalar(ag::sub(scores, base), margin));
    total = ag::add(total, ag::scale(ag::sum(ag::mul_const(hinge, video_neg)),
                                     0.5 / n_video_neg));
  }
  const double n_query_neg = query_neg.sum();
  if (n_query_neg > 0) {
    // other(i, j) = scores(j, p_i).
    Var other = ag::gather_rows(ag::transpose(scores), positives);
    Var base = ag::matmul(s_pos, ag::constant(Matrix::Ones(1, nq)));
    Var hinge = ag::relu(ag::add_scalar(ag::sub(other, base), margin));
    total = ag::add(total, ag::scale(ag::sum(ag::mul_const(hinge, query_neg)),
                                     0.5 / n_query_neg));
  }
  return total;
}

double retrieval_loss(const Eigen::MatrixXd& scores,
                      std::span<const int> positives, double margin) {
  ag::NoGradGuard no_grad;
  return retrieval_loss(ag::constant(scores), positives, margin).scalar();
}

BatchLoss batch_loss(const VcmrModel& model, const LoadedCorpus& corpus,
                     const TrainingBatch& batch, const TrainConfig& config,
                     const AugmentationPolicy* policy, int epoch) {
  const CorpusManifest& manifest = corpus.manifest;
  if (batch.queries.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const HierarchicalEncoder& encoder = model.encoder();
  const Eigen::Index d = model.config().d;
  const std::size_t n_items = batch.queries.size();

  std::vector<const QueryRecord*> items;
  std::vector<int> videos;  // corpus indices, batch column order
  std::vector<int> positives;
  for (int qi : batch.queries) {
    if (qi < 0 || qi >= static_cast<int>(manifest.queries.size())) {
      throw std::out_of_range("batch_loss: query index " + std::to_string(qi));
    }
    const QueryRecord& q = manifest.queries[static_cast<std::size_t>(qi)];
    const int v = manifest.video_index(q.target_video_id);
    if (v < 0) throw std::invalid_argument("batch_loss: unknown video " + q.target_video_id);
    items.push_back(&q);
    auto it = std::find(videos.begin(), videos.end(), v);
    if (it == videos.end()) {
      positives.push_back(static_cast<int>(videos.size()));
      videos.push_back(v);
    } else {
      positives.push_back(static_cast<int>(it - videos.begin()));
    }
  }
  for (int v : batch.extra_videos) {
    if (v < 0 || v >= static_cast<int>(manifest.videos.size())) {
      throw std::out_of_range("batch_loss: video index " + std::to_string(v));
    }
    if (std::find(videos.begin(), videos.end(), v) == videos.end()) videos.push_back(v);
  }

  std::vector<std::optional<BatchPlans>> video_plans(videos.size());
  std::vector<std::optional<AugmentationPlan>> query_plans(n_items);
  if (policy) {
    for (std::size_t b = 0; b < n_items; ++b) {
      const VideoRecord& video =
          manifest.videos[static_cast<std::size_t>(videos[static_cast<std::size_t>(positives[b])])];
      Eigen::Index sub_rows = 0;
      for (const auto& s : video.subtitles) {
        sub_rows += static_cast<Eigen::Index>(s.tokens.size());
      }
      auto stream = item_stream(policy->seed, static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(batch.queries[b]));
      BatchPlans plans = plan_batch(video.n_frames, sub_rows,
                                    static_cast<Eigen::Index>(items[b]->tokens.size()),
                                    d, *policy, stream, Mode::kTrain);
      query_plans[b] = plans.query;
      auto& slot = video_plans[static_cast<std::size_t>(positives[b])];
      if (!slot) slot = std::move(plans);
    }
    // Shuffles keep every annotated moment and every subtitle sentence intact.
    for (std::size_t j = 0; j < videos.size(); ++j) {
      if (!video_plans[j]) continue;
      const VideoRecord& video = manifest.videos[static_cast<std::size_t>(videos[j])];
      std::vector<int> frame_cuts = {0, video.n_frames};
      for (std::size_t b = 0; b < n_items; ++b) {
        if (positives[b] != static_cast<int>(j)) continue;
        frame_cuts.push_back(items[b]->moment.start);
        frame_cuts.push_back(items[b]->moment.end + 1);
      }
      std::vector<int> token_cuts = {0};
      for (const auto& sub : video.subtitles) {
        frame_cuts.push_back(sub.start_frame);
        frame_cuts.push_back(sub.end_frame);
        token_cuts.push_back(token_cuts.back() + static_cast<int>(sub.tokens.size()));
      }
      std::sort(frame_cuts.begin(), frame_cuts.end());
      frame_cuts.erase(std::unique(frame_cuts.begin(), frame_cuts.end()), frame_cuts.end());
      auto stream = item_stream(policy->seed ^ 0x9e3779b97f4a7c15ULL,
                                static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(videos[j]));
      confine_shuffle(video_plans[j]->video, frame_cuts, stream);
      confine_shuffle(video_plans[j]->subtitles, token_cuts, stream);
    }
  }

  std::vector<ContextualizedVideo> encoded;
  encoded.reserve(videos.size());
  for (std::size_t j = 0; j < videos.size(); ++j) {
    const auto vi = static_cast<std::size_t>(videos[j]);
    if (video_plans[j]) {
      const BatchPlans& plans = *video_plans[j];
      VideoTransforms transforms{
          [&plans](const Var& v) { return plans.video.apply(v); },
          [&plans](const Var& v) { return plans.subtitles.apply(v); }};
      encoded.push_back(encoder.encode_video(manifest.videos[vi],
                                             corpus.features[vi], &transforms));
    } else {
      encoded.push_back(encoder.encode_video(manifest.videos[vi], corpus.features[vi]));
    }
  }

  std::vector<QueryEncoding> queries;
  std::vector<Var> query_rows;
  for (std::size_t b = 0; b < n_items; ++b) {
    const auto& plan = query_plans[b];
    if (plan) {
      EmbeddingTransform t = [&plan](const Var& v) { return plan->apply(v); };
      queries.push_back(encoder.encode_query(items[b]->tokens, &t));
    } else {
      queries.push_back(encoder.encode_query(items[b]->tokens));
    }
    query_rows.push_back(ag::l2_normalize_rows(queries.back().q));
  }
  Var query_matrix = ag::concat_rows(query_rows);
  std::vector<Var> columns;
  columns.reserve(encoded.size());
  for (std::size_t j = 0; j < encoded.size(); ++j) {
    Var cosines =
        ag::matmul_nt(ag::l2_normalize_rows(encoded[j].v_temp), query_matrix);
    if (config.moment_positives) {
      // A query's own video is scored over its annotated moment only.
      Matrix mask = Matrix::Zero(cosines.rows(), cosines.cols());
      for (std::size_t b = 0; b < n_items; ++b) {
        if (positives[b] != static_cast<int>(j)) continue;
        const FrameSpan& m = items[b]->moment;
        for (Eigen::Index f = 0; f < mask.rows(); ++f) {
          if (f < m.start || f > m.end) mask(f, static_cast<Eigen::Index>(b)) = -4.0;
        }
      }
      cosines = ag::add(cosines, ag::constant(mask));
    }
    columns.push_back(ag::transpose(ag::column_max(cosines)));
  }
  Var scores = ag::concat_cols(columns);

  BatchLoss out;
  out.retrieval = retrieval_loss(scores, positives, config.margin);
  out.moment = ag::constant(Matrix::Zero(1, 1));
  for (std::size_t b = 0; b < n_items; ++b) {
    const auto& video = encoded[static_cast<std::size_t>(positives[b])];
    const SpanLabels labels =
        SpanLabels::from_moment(items[b]->moment, static_cast<int>(video.v_temp.rows()));
    out.moment = ag::add(out.moment, model.localization_loss(video, queries[b], labels,
                                                             config.highlight_loss_weight));
  }
  out.moment = ag::scale(out.moment, 1.0 / static_cast<double>(n_items));
  out.total = ag::add(out.retrieval, ag::scale(out.moment, config.moment_loss_weight));
  return out;
}

TrainResult train(VcmrModel& model, const LoadedCorpus& corpus,
                  const TrainConfig& config, const AugmentationPolicy& policy,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (config.augment) policy.validate();
  const CorpusManifest& manifest = corpus.manifest;
  if (corpus.features.size() != manifest.videos.size()) {
    throw std::invalid_argument("train: features do not match the manifest");
  }

  std::vector<int> items;
  int l_max = 1;
  for (std::size_t i = 0; i < manifest.queries.size(); ++i) {
    const QueryRecord& q = manifest.queries[i];
    if (q.split != "train") continue;
    const int v = manifest.video_index(q.target_video_id);
    if (v < 0) throw std::invalid_argument("train: unknown video " + q.target_video_id);
    SpanLabels::from_moment(q.moment, manifest.videos[static_cast<std::size_t>(v)].n_frames);
    items.push_back(static_cast<int>(i));
    l_max = std::max(l_max, q.moment.length());
  }
  if (items.empty()) throw std::invalid_argument("train: corpus has no train split");
  model.set_l_max_span(l_max);

  nn::ParameterStore& params = model.parameters();
  params.zero_grad();

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.l_max_span = l_max;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double retrieval_sum = 0.0;
    double moment_sum = 0.0;
    int n_batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      TrainingBatch batch;
      std::vector<int> taken;
      for (std::size_t b = begin; b < end; ++b) {
        const int qi = items[order[b]];
        batch.queries.push_back(qi);
        const int v = manifest.video_index(manifest.queries[static_cast<std::size_t>(qi)].target_video_id);
        if (std::find(taken.begin(), taken.end(), v) == taken.end()) taken.push_back(v);
      }
      const int n_corpus = static_cast<int>(manifest.videos.size());
      for (int e = 0; e < config.extra_negatives &&
                      static_cast<int>(taken.size()) < n_corpus;) {
        const int v = std::uniform_int_distribution<int>(0, n_corpus - 1)(rng);
        if (std::find(taken.begin(), taken.end(), v) != taken.end()) continue;
        taken.push_back(v);
        batch.extra_videos.push_back(v);
        ++e;
      }

      const BatchLoss parts = batch_loss(model, corpus, batch, config,
                                         config.augment ? &policy : nullptr, epoch);
      const Var& loss = parts.total;
      const Var& r_loss = parts.retrieval;
      const Var& m_loss = parts.moment;
      if (!std::isfinite(loss.scalar())) {
        throw TrainingDiverged(epoch, n_batches,
                               "training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(n_batches));
      }
      ag::backward(loss);
      if (config.optimizer == Optimizer::kAdam) {
        params.adam_step(config.learning_rate, config.clip_norm);
      } else {
        params.sgd_step(config.learning_rate, config.clip_norm);
      }
      params.zero_grad();

      loss_sum += loss.scalar();
      retrieval_sum += r_loss.scalar();
      moment_sum += m_loss.scalar();
      ++n_batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / n_batches;
    log.retrieval_loss = retrieval_sum / n_batches;
    log.moment_loss = moment_sum / n_batches;
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::vector<ContextualizedVideo> encode_corpus(const VcmrModel& model,
                                               const LoadedCorpus& corpus) {
  ag::NoGradGuard no_grad;
  std::vector<ContextualizedVideo> out;
  out.reserve(corpus.manifest.videos.size());
  for (std::size_t i = 0; i < corpus.manifest.videos.size(); ++i) {
    out.push_back(model.encoder().encode_video(corpus.manifest.videos[i],
                                               corpus.features[i]));
  }
  return out;
}

std::vector<MomentPrediction> two_stage_inference(
    const VcmrModel& model, const CorpusManifest& manifest,
    std::span<const ContextualizedVideo> encodings, const QueryRecord& query,
    int k, double alpha, int l_max, LocalizationHead head) {
  if (encodings.empty()) throw std::invalid_argument("two_stage_inference: empty corpus");
  if (k < 1) throw std::invalid_argument("two_stage_inference: k must be >= 1");
  ag::NoGradGuard no_grad;
  const QueryEncoding q = model.encoder().encode_query(query.tokens);
  const std::vector<RankedVideo> ranked = rank_videos(encodings, q, k);
  std::vector<MomentPrediction> out;
  out.reserve(ranked.size());
  for (const RankedVideo& r : ranked) {
    const SpanScores s =
        model.localize(encodings[static_cast<std::size_t>(r.index)], q, head);
    const SpanPrediction span =
        predict_span(s.s_st.value().col(0), s.s_ed.value().col(0), l_max);
    out.push_back({manifest.videos[static_cast<std::size_t>(r.index)].video_id,
                   {span.start, span.end},
                   alpha * r.score + span.log_probability});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MomentPrediction& a, const MomentPrediction& b) {
                     return a.score > b.score;
                   });
  return out;
}

std::vector<MomentPrediction> video_retrieval(
    const VcmrModel& model, const CorpusManifest& manifest,
    std::span<const ContextualizedVideo> encodings, const QueryRecord& query,
    int k) {
  ag::NoGradGuard no_grad;
  const QueryEncoding q = model.encoder().encode_query(query.tokens);
  std::vector<MomentPrediction> out;
  for (const RankedVideo& r : rank_videos(encodings, q, k)) {
    const VideoRecord& v = manifest.videos[static_cast<std::size_t>(r.index)];
    out.push_back({v.video_id, {0, v.n_frames - 1}, r.score});
  }
  return out;
}

double temporal_iou(const FrameSpan& a, const FrameSpan& b) {
  const int inter = std::min(a.end, b.end) - std::max(a.start, b.start) + 1;
  if (inter <= 0) return 0.0;
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double recall_at_k(std::span<const std::vector<MomentPrediction>> predictions,
                   std::span<const QueryRecord> truth, int k, double tiou,
                   Task task) {
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("recall_at_k: predictions and truth differ in length");
  }
  if (k < 1) throw std::invalid_argument("recall_at_k: K must be >= 1");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& preds = predictions[i];
    const std::size_t n = std::min(preds.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < n; ++r) {
      if (preds[r].video_id != truth[i].target_video_id) continue;
      if (task == Task::kVR || temporal_iou(preds[r].span, truth[i].moment) >= tiou) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

EvalReport make_report(std::span<const std::vector<MomentPrediction>> predictions,
                       std::span<const QueryRecord> truth,
                       std::span<const int> ks, double tiou, Task task) {
  if (ks.empty()) throw std::invalid_argument("make_report: no K values");
  EvalReport report;
  report.task = task;
  report.tiou = tiou;
  report.n_queries = truth.size();
  double total = 0.0;
  for (int k : ks) {
    const double r = recall_at_k(predictions, truth, k, tiou, task);
    report.recall_at[k] = r;
    total += r;
  }
  report.aver = total / static_cast<double>(ks.size());
  return report;
}

EvalReport evaluate(const VcmrModel& model, const LoadedCorpus& corpus,
                    const TrainConfig& config, const EvalOptions& options) {
  config.validate();
  std::vector<QueryRecord> truth;
  for (const auto* q : corpus.manifest.split(options.split)) truth.push_back(*q);
  if (truth.empty()) {
    throw std::invalid_argument("evaluate: split \"" + options.split + "\" is empty");
  }
  const std::vector<ContextualizedVideo> encodings = encode_corpus(model, corpus);
  const int max_k = *std::max_element(config.recall_ks.begin(), config.recall_ks.end());
  const LocalizationHead head =
      options.baseline ? LocalizationHead::kConv : model.config().head;

  std::vector<std::vector<MomentPrediction>> predictions;
  predictions.reserve(truth.size());
  for (const QueryRecord& q : truth) {
    if (options.task == Task::kVR) {
      predictions.push_back(video_retrieval(model, corpus.manifest, encodings, q,
                                            std::max(max_k, config.k_videos)));
    } else {
      predictions.push_back(two_stage_inference(model, corpus.manifest, encodings,
                                                q, config.k_videos, config.alpha,
                                                model.config().l_max_span, head));
    }
  }
  return make_report(predictions, truth, config.recall_ks, config.tiou_threshold,
                     options.task);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["task"] = std::string(to_string(report.task));
  j["tiou"] = report.tiou;
  j["n_queries"] = report.n_queries;
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  j["recall"] = std::move(recall);
  j["aver"] = report.aver;
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[64];
  out << "task   ";
  for (const auto& [k, v] : report.recall_at) {
    std::snprintf(buf, sizeof(buf), "%8s", ("R@" + std::to_string(k)).c_str());
    out << buf;
  }
  out << "    AveR\n";
  std::snprintf(buf, sizeof(buf), "%-7s", std::string(to_string(report.task)).c_str());
  out << buf;
  for (const auto& [k, v] : report.recall_at) {
    std::snprintf(buf, sizeof(buf), "%8.4f", v);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%8.4f", report.aver);
  out << buf << '\n';
  return out.str();
}

}  // namespace vcmr
