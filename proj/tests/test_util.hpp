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

#ifndef VCMR_TESTS_TEST_UTIL_HPP_
#define VCMR_TESTS_TEST_UTIL_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <functional>
#include <random>
#include <vector>

#include "vcmr/autograd.hpp"
#include "vcmr/corpus.hpp"

namespace vcmr::testing {

struct GradientReport {
  int coordinates = 0;
  int within_tight = 0;
  double worst = 0.0;

  double fraction_tight() const {
    return coordinates == 0 ? 1.0 : static_cast<double>(within_tight) / coordinates;
  }
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Central differences of `loss` against every coordinate of `params`.
GradientReport check_gradients(const std::function<ag::Var()>& loss,
                               const std::vector<ag::Var>& params,
                               double step = 1e-3, double tight = 1e-3);

ag::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols,
                         std::mt19937_64& rng, double scale = 1.0);

// Two videos of six frames, two subtitle sentences each, one train query
// per video.
LoadedCorpus micro_corpus(int dim = 4, std::uint64_t seed = 3);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace vcmr::testing

#endif  // VCMR_TESTS_TEST_UTIL_HPP_
