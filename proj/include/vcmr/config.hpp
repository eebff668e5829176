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

#ifndef VCMR_CONFIG_HPP_
#define VCMR_CONFIG_HPP_

#include <filesystem>

#include "json.hpp"
#include "vcmr/augmentation.hpp"
#include "vcmr/encoders.hpp"
#include "vcmr/pipeline.hpp"

namespace vcmr {

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Everything a training run needs, read from one flat JSON object.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  AugmentationPolicy policy;
};

// Unknown keys are an error. A "seed" key seeds the model, the training
// order and the augmentation streams alike.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace vcmr

#endif  // VCMR_CONFIG_HPP_
