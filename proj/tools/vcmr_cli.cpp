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

// vcmr: generate corpora, train, evaluate and query from the command line.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vcmr/config.hpp"
#include "vcmr/corpus.hpp"
#include "vcmr/model.hpp"
#include "vcmr/pipeline.hpp"

namespace {

using nlohmann::json;

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    ks.push_back(std::stoi(item));
  }
  if (ks.empty()) throw std::invalid_argument("--ks needs at least one value");
  return ks;
}

int corpus_vocab(const vcmr::CorpusManifest& m) {
  if (m.recipe) return m.recipe->n_concepts * m.recipe->tokens_per_concept;
  int top = 0;
  for (const auto& v : m.videos) {
    for (const auto& s : v.subtitles) {
      for (int t : s.tokens) top = std::max(top, t);
    }
  }
  for (const auto& q : m.queries) {
    for (int t : q.tokens) top = std::max(top, t);
  }
  return top + 1;
}

int run_gen(const std::string& out, const vcmr::SyntheticCorpusOptions& opts) {
  const vcmr::SyntheticCorpus corpus = vcmr::generate_synthetic_corpus(opts);
  vcmr::save_corpus(out, corpus);
  std::printf("wrote %zu videos, %zu queries to %s\n", corpus.manifest.videos.size(),
              corpus.manifest.queries.size(), out.c_str());
  return 0;
}

int run_train(const std::string& data, const std::string& config_path,
              const std::string& out) {
  const vcmr::LoadedCorpus corpus = vcmr::load_corpus(data);
  json j;
  {
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config " + config_path);
    j = json::parse(in);
  }
  if (!j.contains("input_dim") && !corpus.features.empty()) {
    j["input_dim"] = corpus.features.front().cols();
  }
  if (!j.contains("vocab_size")) j["vocab_size"] = corpus_vocab(corpus.manifest);
  const vcmr::RunConfig config = vcmr::run_config_from_json(j);

  vcmr::VcmrModel model(config.model);
  const vcmr::TrainResult result = vcmr::train(
      model, corpus, config.train, config.policy, [](const vcmr::EpochLog& log) {
        std::printf("epoch %3d  loss %.6f  retrieval %.6f  moment %.6f\n", log.epoch,
                    log.loss, log.retrieval_loss, log.moment_loss);
        std::fflush(stdout);
      });
  vcmr::save_checkpoint(std::filesystem::path(out), model);
  std::printf("l_max_span %d\ncheckpoint %s\n", result.l_max_span, out.c_str());
  return 0;
}

int run_eval(const std::string& data, const std::string& ckpt,
             vcmr::TrainConfig config, const vcmr::EvalOptions& options,
             bool as_json) {
  const vcmr::LoadedCorpus corpus = vcmr::load_corpus(data);
  const auto model = vcmr::load_checkpoint(std::filesystem::path(ckpt));
  const vcmr::EvalReport report = vcmr::evaluate(*model, corpus, config, options);
  if (as_json) {
    std::printf("%s\n", vcmr::report_to_json(report).c_str());
  } else {
    std::printf("%s", vcmr::report_to_table(report).c_str());
  }
  return 0;
}

int run_retrieve(const std::string& data, const std::string& ckpt,
                 const std::string& query_id, int k, double alpha, bool baseline) {
  const vcmr::LoadedCorpus corpus = vcmr::load_corpus(data);
  const auto model = vcmr::load_checkpoint(std::filesystem::path(ckpt));
  const vcmr::QueryRecord* query = nullptr;
  for (const auto& q : corpus.manifest.queries) {
    if (q.query_id == query_id) query = &q;
  }
  if (!query) throw std::invalid_argument("unknown query id " + query_id);
  const auto encodings = vcmr::encode_corpus(*model, corpus);
  const auto head =
      baseline ? vcmr::LocalizationHead::kConv : model->config().head;
  const auto preds = vcmr::two_stage_inference(*model, corpus.manifest, encodings,
                                               *query, k, alpha,
                                               model->config().l_max_span, head);
  std::printf("query %s  target %s [%d, %d]\n", query->query_id.c_str(),
              query->target_video_id.c_str(), query->moment.start, query->moment.end);
  std::printf("rank  video     start  end   score\n");
  for (std::size_t r = 0; r < preds.size(); ++r) {
    std::printf("%4zu  %-8s  %5d  %4d  %.6f\n", r + 1, preds[r].video_id.c_str(),
                preds[r].span.start, preds[r].span.end, preds[r].score);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video corpus moment retrieval"};
  app.require_subcommand(1);

  vcmr::SyntheticCorpusOptions gen_opts;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--videos", gen_opts.n_videos, "Number of videos");
  gen->add_option("--frames", gen_opts.frames_per_video, "Frames per video");
  gen->add_option("--dim", gen_opts.dim, "Feature dimension");
  gen->add_option("--vocab", gen_opts.vocab_size, "Vocabulary size");
  gen->add_option("--seed", gen_opts.seed, "Generator seed");
  gen->add_option("--queries-per-video", gen_opts.queries_per_video,
                  "Planted moments per video");
  gen->add_option("--queries-per-moment", gen_opts.queries_per_moment,
                  "Queries describing each planted moment");
  gen->add_option("--noise", gen_opts.noise_sigma, "Feature noise amplitude");
  gen->add_option("--concepts", gen_opts.n_concepts, "Query concepts (0 = vocab/4)");
  gen->add_option("--background-concepts", gen_opts.background_concepts,
                  "Concepts used only outside planted moments");

  std::string data, config_path, out, ckpt, split = "val", task = "vcmr",
                                            ks = "1,5,10", query_id;
  double tiou = 0.7;
  double alpha = 1.0;
  int k = 10;
  bool baseline = false;
  bool as_json = false;

  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--data", data, "Corpus directory")->required();
  trn->add_option("--config", config_path, "JSON run config")->required();
  trn->add_option("--out", out, "Checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", data, "Corpus directory")->required();
  ev->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  ev->add_option("--split", split, "Query split")
      ->check(CLI::IsMember({"train", "val"}));
  ev->add_option("--ks", ks, "Comma-separated recall cutoffs");
  ev->add_option("--tiou", tiou, "Temporal IoU threshold");
  ev->add_option("--task", task, "vr or vcmr")->check(CLI::IsMember({"vr", "vcmr"}));
  ev->add_option("--k", k, "Videos localized in stage 2");
  ev->add_option("--alpha", alpha, "Weight of the global score");
  ev->add_flag("--baseline", baseline, "Localize with the conv boundary head");
  ev->add_flag("--json", as_json, "Print the report as JSON");

  auto* ret = app.add_subcommand("retrieve", "Run one query");
  ret->add_option("--data", data, "Corpus directory")->required();
  ret->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  ret->add_option("--query-id", query_id, "Query id")->required();
  ret->add_option("--k", k, "Videos localized in stage 2");
  ret->add_option("--alpha", alpha, "Weight of the global score");
  ret->add_flag("--baseline", baseline, "Localize with the conv boundary head");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(gen_out, gen_opts);
    if (trn->parsed()) return run_train(data, config_path, out);
    if (ev->parsed()) {
      vcmr::TrainConfig config;
      config.recall_ks = parse_ks(ks);
      config.tiou_threshold = tiou;
      config.alpha = alpha;
      config.k_videos =
          std::max(k, *std::max_element(config.recall_ks.begin(), config.recall_ks.end()));
      vcmr::EvalOptions options;
      options.split = split;
      options.task = vcmr::parse_task(task);
      options.baseline = baseline;
      return run_eval(data, ckpt, config, options, as_json);
    }
    if (ret->parsed()) return run_retrieve(data, ckpt, query_id, k, alpha, baseline);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
