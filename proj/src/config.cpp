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

#include "vcmr/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace vcmr {
namespace {

using json = nlohmann::json;

std::string head_name(LocalizationHead h) {
  return h == LocalizationHead::kFusion ? "fusion" : "conv";
}

LocalizationHead parse_head(const std::string& s) {
  if (s == "fusion") return LocalizationHead::kFusion;
  if (s == "conv") return LocalizationHead::kConv;
  throw std::invalid_argument("unknown localization head \"" + s +
                              "\" (expected fusion or conv)");
}

template <typename T>
void read(const json& j, const char* key, T& dst, std::set<std::string>& used) {
  if (!j.contains(key)) return;
  used.insert(key);
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value for \"") + key +
                                "\": " + e.what());
  }
}

void read_model(const json& j, ModelConfig& m, std::set<std::string>& used) {
  read(j, "input_dim", m.input_dim, used);
  read(j, "d", m.d, used);
  read(j, "n_heads", m.n_heads, used);
  read(j, "n_layers_cross", m.n_layers_cross, used);
  read(j, "n_layers_temp", m.n_layers_temp, used);
  read(j, "vocab_size", m.vocab_size, used);
  read(j, "max_positions", m.max_positions, used);
  read(j, "l_max_span", m.l_max_span, used);
  read(j, "ffn_dim", m.ffn_dim, used);
  read(j, "model_seed", m.seed, used);
  read(j, "pool_qc_from_cross", m.pool_qc_from_cross, used);
  read(j, "cqa_over_cross", m.cqa_over_cross, used);
  std::string head = head_name(m.head);
  read(j, "head", head, used);
  m.head = parse_head(head);
}

}  // namespace

json to_json(const ModelConfig& m) {
  return json{{"input_dim", m.input_dim},
              {"d", m.d},
              {"n_heads", m.n_heads},
              {"n_layers_cross", m.n_layers_cross},
              {"n_layers_temp", m.n_layers_temp},
              {"vocab_size", m.vocab_size},
              {"max_positions", m.max_positions},
              {"l_max_span", m.l_max_span},
              {"ffn_dim", m.ffn_dim},
              {"model_seed", m.seed},
              {"pool_qc_from_cross", m.pool_qc_from_cross},
              {"cqa_over_cross", m.cqa_over_cross},
              {"head", head_name(m.head)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  std::set<std::string> used;
  read_model(j, m, used);
  m.validate();
  return m;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  RunConfig c;
  std::set<std::string> used;
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read(j, "seed", seed, used);
    c.model.seed = seed;
    c.train.seed = seed;
    c.policy.seed = seed;
  }
  read_model(j, c.model, used);

  TrainConfig& t = c.train;
  read(j, "epochs", t.epochs, used);
  read(j, "batch_size", t.batch_size, used);
  read(j, "learning_rate", t.learning_rate, used);
  std::string optimizer = t.optimizer == Optimizer::kAdam ? "adam" : "sgd";
  read(j, "optimizer", optimizer, used);
  if (optimizer == "sgd") {
    t.optimizer = Optimizer::kSgd;
  } else if (optimizer == "adam") {
    t.optimizer = Optimizer::kAdam;
  } else {
    throw std::invalid_argument("config: unknown optimizer \"" + optimizer +
                                "\" (expected sgd or adam)");
  }
  read(j, "margin", t.margin, used);
  read(j, "alpha", t.alpha, used);
  read(j, "tiou_threshold", t.tiou_threshold, used);
  read(j, "k_videos", t.k_videos, used);
  read(j, "recall_ks", t.recall_ks, used);
  read(j, "moment_loss_weight", t.moment_loss_weight, used);
  read(j, "highlight_loss_weight", t.highlight_loss_weight, used);
  read(j, "clip_norm", t.clip_norm, used);
  read(j, "augment", t.augment, used);
  read(j, "extra_negatives", t.extra_negatives, used);
  read(j, "moment_positives", t.moment_positives, used);
  read(j, "train_seed", t.seed, used);

  AugmentationPolicy& p = c.policy;
  read(j, "gate_prob", p.gate_prob, used);
  if (j.contains("weights")) {
    used.insert("weights");
    const json& w = j.at("weights");
    const char* names[] = {"shuffle", "token_cutoff", "feature_cutoff",
                           "dropout", "unchanged"};
    if (!w.is_object()) {
      throw std::invalid_argument("config: \"weights\" must be an object");
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < 5; ++i) {
      if (w.contains(names[i])) {
        p.weights[i] = w.at(names[i]).get<double>();
        seen.insert(names[i]);
      }
    }
    for (const auto& [key, value] : w.items()) {
      if (!seen.count(key)) {
        throw std::invalid_argument("config: unknown augmentation weight \"" + key + "\"");
      }
    }
  }
  read(j, "cutoff_ratio", p.cutoff_ratio, used);
  read(j, "dropout_rate", p.dropout_rate, used);
  read(j, "augment_seed", p.seed, used);

  for (const auto& [key, value] : j.items()) {
    if (!used.count(key)) {
      throw std::invalid_argument("config: unknown key \"" + key + "\"");
    }
  }
  c.model.validate();
  c.train.validate();
  c.policy.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const RunConfig& c) {
  json j = to_json(c.model);
  const TrainConfig& t = c.train;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["optimizer"] = t.optimizer == Optimizer::kAdam ? "adam" : "sgd";
  j["margin"] = t.margin;
  j["alpha"] = t.alpha;
  j["tiou_threshold"] = t.tiou_threshold;
  j["k_videos"] = t.k_videos;
  j["recall_ks"] = t.recall_ks;
  j["moment_loss_weight"] = t.moment_loss_weight;
  j["highlight_loss_weight"] = t.highlight_loss_weight;
  j["clip_norm"] = t.clip_norm;
  j["augment"] = t.augment;
  j["extra_negatives"] = t.extra_negatives;
  j["moment_positives"] = t.moment_positives;
  j["train_seed"] = t.seed;
  const AugmentationPolicy& p = c.policy;
  j["gate_prob"] = p.gate_prob;
  j["weights"] = {{"shuffle", p.weights[0]},
                  {"token_cutoff", p.weights[1]},
                  {"feature_cutoff", p.weights[2]},
                  {"dropout", p.weights[3]},
                  {"unchanged", p.weights[4]}};
  j["cutoff_ratio"] = p.cutoff_ratio;
  j["dropout_rate"] = p.dropout_rate;
  j["augment_seed"] = p.seed;
  return j;
}

}  // namespace vcmr
