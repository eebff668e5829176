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

#include "vcmr/model.hpp"

#include <fstream>
#include <sstream>

#include "vcmr/config.hpp"

namespace vcmr {
namespace {

using json = nlohmann::json;

constexpr char kCheckpointMagic[4] = {'V', 'C', 'M', 'K'};

}  // namespace

VcmrModel::VcmrModel(const ModelConfig& config)
    : config_(config),
      store_(std::make_unique<nn::ParameterStore>(config.seed)),
      encoder_(*store_, config_),
      boundary_(*store_),
      fusion_(*store_, config_.d) {}

void VcmrModel::set_l_max_span(int l_max) {
  if (l_max < 1) throw std::invalid_argument("l_max_span must be >= 1");
  config_.l_max_span = l_max;
}

SpanScores VcmrModel::localize(const ContextualizedVideo& video,
                               const QueryEncoding& query,
                               LocalizationHead head) const {
  if (head == LocalizationHead::kConv) {
    const BoundaryLogits l =
        boundary_.logits(local_similarity(video.v_temp, query.q));
    return {l.start, l.end};
  }
  return fusion_.forward(video.v_temp, cqa_tokens(query), query.q_c).scores;
}

Var VcmrModel::localization_loss(const ContextualizedVideo& video,
                                 const QueryEncoding& query,
                                 const SpanLabels& labels,
                                 double highlight_weight) const {
  if (config_.head == LocalizationHead::kConv) {
    const BoundaryLogits l =
        boundary_.logits(local_similarity(video.v_temp, query.q));
    return boundary_.loss(l, labels.y_st, labels.y_ed);
  }
  const FusionHead::Output out =
      fusion_.forward(video.v_temp, cqa_tokens(query), query.q_c);
  return moment_loss(out.scores, out.fused.s_h, labels, highlight_weight);
}

void save_checkpoint(std::ostream& out, const VcmrModel& model) {
  json header;
  header["format"] = "vcmr-checkpoint";
  header["version"] = 1;
  header["model"] = to_json(model.config());
  json params = json::array();
  for (const auto& e : model.parameters().entries()) {
    params.push_back({{"name", e.name},
                      {"rows", e.var.rows()},
                      {"cols", e.var.cols()}});
  }
  header["parameters"] = std::move(params);
  const std::string text = header.dump();

  out.write(kCheckpointMagic, 4);
  const auto len = static_cast<std::uint32_t>(text.size());
  const char len_bytes[4] = {static_cast<char>(len & 0xff),
                             static_cast<char>((len >> 8) & 0xff),
                             static_cast<char>((len >> 16) & 0xff),
                             static_cast<char>((len >> 24) & 0xff)};
  out.write(len_bytes, 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : model.parameters().entries()) {
    write_features(out, e.var.value().cast<float>());
  }
}

void save_checkpoint(const std::filesystem::path& path, const VcmrModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  save_checkpoint(out, model);
  if (!out) throw FormatError("write failed: " + path.string());
}

std::unique_ptr<VcmrModel> load_checkpoint(std::istream& in,
                                           const std::string& source) {
  char magic[4] = {};
  unsigned char len_bytes[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw FormatError(source + ": not a checkpoint (bad magic)");
  }
  in.read(reinterpret_cast<char*>(len_bytes), 4);
  if (in.gcount() != 4) throw FormatError(source + ": truncated checkpoint header");
  const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                            (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                            (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (static_cast<std::uint32_t>(in.gcount()) != len) {
    throw FormatError(source + ": truncated checkpoint header");
  }
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source + ": bad checkpoint header: " + e.what());
  }
  if (header.value("format", "") != "vcmr-checkpoint") {
    throw FormatError(source + ": unexpected checkpoint format");
  }
  auto model = std::make_unique<VcmrModel>(model_config_from_json(header.at("model")));
  const auto& entries = model->parameters().entries();
  const json& params = header.at("parameters");
  if (params.size() != entries.size()) {
    throw FormatError(source + ": checkpoint has " + std::to_string(params.size()) +
                      " parameters, model expects " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string name = params[i].at("name").get<std::string>();
    if (name != e.name) {
      throw FormatError(source + ": parameter " + std::to_string(i) + " is \"" +
                        name + "\", expected \"" + e.name + "\"");
    }
    const FeatureMatrix blob = read_features(in, source + ":" + name);
    if (blob.rows() != e.var.rows() || blob.cols() != e.var.cols()) {
      throw FormatError(source + ": shape mismatch for " + name);
    }
    Var v = e.var;
    v.mutable_value() = blob.cast<double>();
  }
  return model;
}

std::unique_ptr<VcmrModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return load_checkpoint(in, path.string());
}

}  // namespace vcmr
