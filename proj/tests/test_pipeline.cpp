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

#include "doctest.h"
#include "test_util.hpp"
#include "vcmr/config.hpp"
#include "vcmr/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <random>
#include <sstream>
#include <vector>

using namespace vcmr;
using vcmr::testing::check_gradients;
using vcmr::testing::micro_corpus;

namespace {

ModelConfig micro_config(LocalizationHead head = LocalizationHead::kFusion) {
  ModelConfig c;
  c.input_dim = 4;
  c.d = 8;
  c.n_heads = 2;
  c.vocab_size = 8;
  c.max_positions = 16;
  c.ffn_dim = 8;
  c.l_max_span = 6;
  c.seed = 5;
  c.head = head;
  return c;
}

MomentPrediction pred(const std::string& video, int start, int end) {
  return {video, {start, end}, 0.0};
}

QueryRecord truth(const std::string& video, int start, int end) {
  QueryRecord q;
  q.query_id = "q";
  q.target_video_id = video;
  q.moment = {start, end};
  return q;
}

double cosine_max(const Matrix& v, const Matrix& q) {
  double best = -2.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    best = std::max(best, v.row(i).dot(q.row(0)) / (v.row(i).norm() * q.row(0).norm()));
  }
  return best;
}

}  // namespace

TEST_CASE("retrieval loss examples") {
  const std::vector<int> pos = {0, 1};
  Eigen::MatrixXd separated(2, 2);
  separated << 0.9, 0.1, 0.2, 0.8;
  CHECK(retrieval_loss(separated, pos, 0.2) == 0.0);
  const Eigen::MatrixXd equal = Eigen::MatrixXd::Constant(2, 2, 0.4);
  CHECK(retrieval_loss(equal, pos, 0.2) == doctest::Approx(0.2));
  CHECK(retrieval_loss(ag::constant(equal), pos, 0.2).scalar() == doctest::Approx(0.2));

  Eigen::MatrixXd s(2, 3);
  s << 0.5, 0.7, 0.1, 0.3, 0.2, 0.6;
  const double q2v = (std::max(0.0, 0.1 - 0.5 + 0.7) + std::max(0.0, 0.1 - 0.5 + 0.1) +
                      std::max(0.0, 0.1 - 0.2 + 0.3) + std::max(0.0, 0.1 - 0.2 + 0.6)) / 4.0;
  const double v2q = (std::max(0.0, 0.1 - 0.5 + 0.3) + std::max(0.0, 0.1 - 0.2 + 0.7)) / 2.0;
  CHECK(retrieval_loss(s, std::vector<int>{0, 1}, 0.1) ==
        doctest::Approx(0.5 * (q2v + v2q)).epsilon(1e-14));
  CHECK_THROWS_AS(retrieval_loss(s, std::vector<int>{0, 3}, 0.1), std::invalid_argument);
}

TEST_CASE("temporal IoU") {
  CHECK(temporal_iou({0, 9}, {5, 14}) == doctest::Approx(1.0 / 3.0));
  CHECK(temporal_iou({3, 7}, {3, 7}) == 1.0);
  CHECK(temporal_iou({0, 2}, {3, 5}) == 0.0);
  CHECK(temporal_iou({0, 2}, {2, 5}) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("recall at K") {
  const std::vector<std::vector<MomentPrediction>> preds = {
      {pred("a", 0, 3), pred("b", 2, 5), pred("c", 0, 1)}};
  const std::vector<QueryRecord> t = {truth("b", 2, 5)};
  CHECK(recall_at_k(preds, t, 1, 0.7, Task::kVCMR) == 0.0);
  CHECK(recall_at_k(preds, t, 5, 0.7, Task::kVCMR) == 1.0);
  CHECK(recall_at_k(preds, t, 5, 0.7, Task::kVR) == 1.0);

  const std::vector<std::vector<MomentPrediction>> loose = {{pred("b", 0, 5)}};
  CHECK(recall_at_k(loose, t, 1, 0.7, Task::kVCMR) == 0.0);
  CHECK(recall_at_k(loose, t, 1, 0.5, Task::kVCMR) == 1.0);
  CHECK(recall_at_k(loose, t, 1, 4.0 / 6.0, Task::kVCMR) == 1.0);
  CHECK(recall_at_k(loose, t, 1, 0.7, Task::kVR) == 1.0);
  CHECK_THROWS_AS(recall_at_k(loose, t, 0, 0.7, Task::kVR), std::invalid_argument);

  const std::vector<int> ks = {1, 5, 10};
  const EvalReport oracle = make_report(loose, t, ks, 0.5, Task::kVCMR);
  CHECK(oracle.aver == 1.0);
  CHECK(oracle.recall_at.at(10) == 1.0);
}

TEST_CASE("training is deterministic and lowers the loss") {
  const LoadedCorpus corpus = micro_corpus();
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 2;
  cfg.optimizer = Optimizer::kAdam;
  cfg.learning_rate = 0.01;
  cfg.augment = false;
  AugmentationPolicy policy;
  VcmrModel a(micro_config());
  VcmrModel b(micro_config());
  const TrainResult ra = train(a, corpus, cfg, policy);
  const TrainResult rb = train(b, corpus, cfg, policy);
  REQUIRE(ra.epochs.size() == 12);
  for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
    CHECK(ra.epochs[e].loss == rb.epochs[e].loss);
  }
  CHECK(ra.epochs[4].loss < ra.epochs[0].loss);
  CHECK(ra.epochs.back().loss < ra.epochs[0].loss);
  CHECK(ra.l_max_span == 3);
  CHECK(a.config().l_max_span == 3);

  cfg.augment = true;
  VcmrModel c(micro_config());
  VcmrModel d(micro_config());
  const TrainResult rc = train(c, corpus, cfg, policy);
  const TrainResult rd = train(d, corpus, cfg, policy);
  for (std::size_t e = 0; e < rc.epochs.size(); ++e) {
    CHECK(rc.epochs[e].loss == rd.epochs[e].loss);
  }
}

TEST_CASE("two-stage inference matches brute force") {
  SyntheticCorpusOptions opts;
  opts.n_videos = 10;
  opts.frames_per_video = 12;
  opts.dim = 4;
  opts.vocab_size = 16;
  opts.queries_per_video = 1;
  opts.queries_per_moment = 1;
  opts.n_concepts = 6;
  opts.background_concepts = 2;
  opts.seed = 11;
  const SyntheticCorpus gen = generate_synthetic_corpus(opts);
  const LoadedCorpus corpus{gen.manifest, gen.features};
  ModelConfig mc = micro_config();
  mc.vocab_size = 16;
  mc.l_max_span = 4;
  const VcmrModel model(mc);
  const auto enc = encode_corpus(model, corpus);

  for (const QueryRecord& q : corpus.manifest.queries) {
    const QueryEncoding qe = model.encoder().encode_query(q.tokens);
    std::vector<std::pair<double, int>> global;
    for (std::size_t v = 0; v < enc.size(); ++v) {
      global.push_back({cosine_max(enc[v].v_temp.value(), qe.q.value()), static_cast<int>(v)});
    }
    std::stable_sort(global.begin(), global.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (int k : {1, 3, 10}) {
      const auto got = two_stage_inference(model, corpus.manifest, enc, q, k, 1.0, 4,
                                           LocalizationHead::kFusion);
      REQUIRE(got.size() == static_cast<std::size_t>(k));
      std::vector<MomentPrediction> want;
      for (int r = 0; r < k; ++r) {
        const int v = global[static_cast<std::size_t>(r)].second;
        const SpanScores s = model.localize(enc[static_cast<std::size_t>(v)], qe,
                                            LocalizationHead::kFusion);
        const Eigen::VectorXd ls = log_softmax(s.s_st.value());
        const Eigen::VectorXd le = log_softmax(s.s_ed.value());
        MomentPrediction best{corpus.manifest.videos[static_cast<std::size_t>(v)].video_id,
                              {0, 0}, -1e300};
        for (int i = 0; i < ls.size(); ++i) {
          for (int j = i; j < std::min<int>(static_cast<int>(le.size()), i + 4); ++j) {
            const double score = global[static_cast<std::size_t>(r)].first + ls(i) + le(j);
            if (score > best.score + 1e-12) best = {best.video_id, {i, j}, score};
          }
        }
        want.push_back(best);
      }
      std::stable_sort(want.begin(), want.end(),
                       [](const auto& x, const auto& y) { return x.score > y.score; });
      for (int r = 0; r < k; ++r) {
        CHECK(got[r].video_id == want[r].video_id);
        CHECK(got[r].span == want[r].span);
        CHECK(got[r].score == doctest::Approx(want[r].score).epsilon(1e-10));
      }
      if (k == 1) CHECK(got[0].video_id ==
                        corpus.manifest.videos[static_cast<std::size_t>(global[0].second)].video_id);
    }
  }
}

TEST_CASE("oracle predictions score perfect recall") {
  const LoadedCorpus corpus = micro_corpus();
  std::vector<std::vector<MomentPrediction>> preds;
  std::vector<QueryRecord> t;
  for (const auto& q : corpus.manifest.queries) {
    preds.push_back({{q.target_video_id, q.moment, 1.0}});
    t.push_back(q);
  }
  const std::vector<int> ks = {1, 5, 10};
  CHECK(make_report(preds, t, ks, 0.7, Task::kVCMR).aver == 1.0);
  CHECK(make_report(preds, t, ks, 0.7, Task::kVR).aver == 1.0);
}

TEST_CASE("full training loss gradients on a two-video micro-batch") {
  const LoadedCorpus corpus = micro_corpus();
  for (LocalizationHead head : {LocalizationHead::kFusion, LocalizationHead::kConv}) {
    VcmrModel model(micro_config(head));
    TrainConfig cfg;
    cfg.augment = false;
    const TrainingBatch batch{{0, 1}, {}};
    std::vector<Var> params;
    for (const auto& e : model.parameters().entries()) params.push_back(e.var);
    const auto report = check_gradients(
        [&] { return batch_loss(model, corpus, batch, cfg).total; }, params);
    MESSAGE("coordinates " << report.coordinates << ", tight "
                           << report.fraction_tight() << ", worst " << report.worst);
    CHECK(report.fraction_tight() >= 0.95);
    CHECK(report.worst <= 1e-2);
  }
}

TEST_CASE("batch loss validates its inputs") {
  const LoadedCorpus corpus = micro_corpus();
  VcmrModel model(micro_config());
  TrainConfig cfg;
  CHECK_THROWS(batch_loss(model, corpus, {{5}, {}}, cfg));
  CHECK_THROWS(batch_loss(model, corpus, {{}, {}}, cfg));
  CHECK_THROWS(batch_loss(model, corpus, {{0}, {9}}, cfg));
  const BatchLoss l = batch_loss(model, corpus, {{0, 1}, {}}, cfg);
  CHECK(l.total.scalar() ==
        doctest::Approx(l.retrieval.scalar() + cfg.moment_loss_weight * l.moment.scalar()));
}

TEST_CASE("run config parsing") {
  const RunConfig c = run_config_from_json(nlohmann::json::parse(
      R"({"d": 32, "seed": 4, "optimizer": "adam", "augment": false,
          "weights": {"shuffle": 0.2, "unchanged": 0.35}})"));
  CHECK(c.model.d == 32);
  CHECK(c.model.seed == 4);
  CHECK(c.train.seed == 4);
  CHECK(c.policy.seed == 4);
  CHECK(c.train.optimizer == Optimizer::kAdam);
  CHECK_FALSE(c.train.augment);
  CHECK(c.policy.weights[0] == 0.2);
  CHECK(c.train.alpha == 1.0);
  CHECK(c.train.moment_loss_weight == 1.0);
  CHECK(run_config_from_json(to_json(c)).model.d == 32);

  for (const char* bad : {R"({"bogus": 1})", R"({"optimizer": "rmsprop"})",
                          R"({"d": 30, "n_heads": 4})", R"({"weights": {"shuffle": 0.9}})",
                          R"({"epochs": -1})", R"([1, 2])"}) {
    INFO(std::string(bad));
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(bad)), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  VcmrModel model(micro_config());
  std::stringstream first;
  save_checkpoint(first, model);
  const auto loaded = load_checkpoint(first, "memory");
  CHECK(loaded->config().d == 8);
  const auto& a = model.parameters().entries();
  const auto& b = loaded->parameters().entries();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    const Matrix rounded = a[i].var.value().cast<float>().cast<double>();
    CHECK(std::memcmp(rounded.data(), b[i].var.value().data(),
                      sizeof(double) * static_cast<std::size_t>(rounded.size())) == 0);
  }
  std::stringstream second;
  save_checkpoint(second, *loaded);
  const std::string bytes = second.str();
  const auto again = load_checkpoint(second, "memory");
  std::stringstream third;
  save_checkpoint(third, *again);
  CHECK(bytes == third.str());

  std::string broken = bytes;
  broken[0] = 'X';
  std::stringstream bad(broken);
  CHECK_THROWS(load_checkpoint(bad, "memory"));
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS(load_checkpoint(truncated, "memory"));
}
