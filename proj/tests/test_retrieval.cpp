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
#include "vcmr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace vcmr;
using vcmr::testing::random_matrix;

namespace {

ContextualizedVideo video_of(const Matrix& v_temp) {
  return {ag::constant(v_temp), ag::constant(v_temp)};
}

QueryEncoding query_of(const Matrix& q) {
  QueryEncoding e;
  e.q = ag::constant(q);
  e.q_c = ag::constant(q);
  return e;
}

double brute_cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a(i) * b(i);
    na += a(i) * a(i);
    nb += b(i) * b(i);
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("global similarity examples") {
  const Eigen::RowVectorXd q = (Eigen::RowVectorXd(3) << 1.0, 2.0, -1.0).finished();
  CHECK(global_similarity(Matrix(q), q) == doctest::Approx(1.0));
  Matrix orth(2, 3);
  orth << 2.0, 0.0, 2.0, 0.0, 1.0, 2.0;
  CHECK(std::abs(global_similarity(orth, q)) < 1e-15);

  std::mt19937_64 rng(1);
  const Matrix v = random_matrix(5, 3, rng);
  double best = -2.0;
  for (Eigen::Index i = 0; i < 5; ++i) best = std::max(best, brute_cosine(v.row(i), q));
  CHECK(global_similarity(v, q) == doctest::Approx(best).epsilon(1e-14));
  CHECK(global_similarity(v, 7.5 * q) == doctest::Approx(best).epsilon(1e-14));
  CHECK(global_similarity(Matrix(v.cast<float>().cast<double>()), q) ==
        doctest::Approx(global_similarity(Eigen::MatrixXf(v.cast<float>()), q.cast<float>()))
            .epsilon(1e-6));
}

TEST_CASE("global similarity rejects degenerate inputs") {
  const Eigen::RowVectorXd q = Eigen::RowVectorXd::Ones(3);
  CHECK_THROWS_AS(global_similarity(Matrix::Zero(2, 3), q), std::domain_error);
  CHECK_THROWS_AS(global_similarity(Matrix::Ones(2, 3), Eigen::RowVectorXd::Zero(3)),
                  std::domain_error);
  CHECK_THROWS_AS(global_similarity(Matrix::Ones(0, 3), q), std::invalid_argument);
  CHECK_THROWS_AS(global_similarity(Matrix::Ones(2, 4), q), std::invalid_argument);
}

TEST_CASE("local similarity is an unnormalized dot product") {
  std::mt19937_64 rng(2);
  const Matrix v = random_matrix(4, 3, rng);
  const Eigen::RowVectorXd q = random_matrix(1, 3, rng);
  const Eigen::VectorXd s = local_similarity(v, q);
  for (Eigen::Index i = 0; i < 4; ++i) {
    double dot = 0.0;
    for (Eigen::Index k = 0; k < 3; ++k) dot += v(i, k) * q(k);
    CHECK(s(i) == doctest::Approx(dot).epsilon(1e-14));
  }
  CHECK(local_similarity(v, Eigen::RowVectorXd::Zero(3)).isZero(0.0));
  CHECK((local_similarity(v, Eigen::RowVectorXd(2.0 * q)) - 2.0 * s).cwiseAbs().maxCoeff() < 1e-14);
  const Matrix var_version = local_similarity(ag::constant(v), ag::constant(q)).value();
  CHECK((var_version.col(0) - s).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("boundary probabilities are distributions") {
  nn::ParameterStore store(3);
  BoundaryHead head(store);
  const auto one = head.boundary_probabilities(Eigen::VectorXd::Constant(1, 0.3));
  CHECK(one.p_st(0) == doctest::Approx(1.0));
  CHECK(one.p_ed(0) == doctest::Approx(1.0));
  std::mt19937_64 rng(4);
  for (int n = 1; n <= 12; ++n) {
    const auto p = head.boundary_probabilities(random_matrix(n, 1, rng, 4.0).col(0));
    CHECK(std::abs(p.p_st.sum() - 1.0) < 1e-6);
    CHECK(std::abs(p.p_ed.sum() - 1.0) < 1e-6);
    CHECK(p.p_st.minCoeff() >= 0.0);
  }
}

TEST_CASE("identity kernel makes the start head a plain softmax") {
  nn::ParameterStore store(3);
  BoundaryHead head(store);
  Var w = head.start.weight;
  w.mutable_value().setZero();
  w.mutable_value()(BoundaryHead::kWidth / 2, 0) = 1.0;
  Var b = head.start.bias;
  b.mutable_value().setZero();
  std::mt19937_64 rng(5);
  const Eigen::VectorXd local = random_matrix(7, 1, rng).col(0);
  const auto p = head.boundary_probabilities(local);
  const Eigen::VectorXd expect = local.array().exp() / local.array().exp().sum();
  CHECK((p.p_st - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv head gradients match central differences") {
  nn::ParameterStore store(6);
  BoundaryHead head(store);
  std::mt19937_64 rng(7);
  Var local = ag::parameter(random_matrix(6, 1, rng));
  std::vector<Var> params = {local};
  for (const auto& e : store.entries()) params.push_back(e.var);
  const auto report = vcmr::testing::check_gradients(
      [&] { return head.loss(head.logits(local), 1, 4); }, params);
  CHECK(report.fraction_tight() == 1.0);
  CHECK(report.worst < 1e-3);
}

TEST_CASE("rank_videos examples") {
  const Eigen::RowVectorXd q = (Eigen::RowVectorXd(2) << 1.0, 0.0).finished();
  std::vector<ContextualizedVideo> one = {video_of(Matrix::Ones(3, 2))};
  const auto r1 = rank_videos(one, query_of(q), 5);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].index == 0);

  Matrix high(1, 2), low(1, 2);
  high << 0.9, std::sqrt(1.0 - 0.81);
  low << 0.2, std::sqrt(1.0 - 0.04);
  std::vector<ContextualizedVideo> two = {video_of(low), video_of(high)};
  const auto r2 = rank_videos(two, query_of(q), 1);
  REQUIRE(r2.size() == 1);
  CHECK(r2[0].index == 1);
  CHECK(r2[0].score == doctest::Approx(0.9));

  std::vector<ContextualizedVideo> none;
  CHECK_THROWS_AS(rank_videos(none, query_of(q), 1), std::invalid_argument);
  CHECK_THROWS_AS(rank_videos(one, query_of(q), 0), std::invalid_argument);
}

TEST_CASE("ties rank by ascending index") {
  const std::vector<double> scores = {0.5, 0.7, 0.5, 0.7, 0.1};
  const auto r = top_k(scores, 5);
  const std::vector<int> expect = {1, 3, 0, 2, 4};
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(r[i].index == expect[i]);
}

TEST_CASE("rank_videos equals a full sort of brute-force scores") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ContextualizedVideo> corpus;
    std::vector<double> brute;
    const Eigen::RowVectorXd q = random_matrix(1, 4, rng);
    for (int v = 0; v < 20; ++v) {
      const Matrix frames = random_matrix(1 + v % 5, 4, rng);
      corpus.push_back(video_of(frames));
      double best = -2.0;
      for (Eigen::Index i = 0; i < frames.rows(); ++i) {
        best = std::max(best, brute_cosine(frames.row(i), q));
      }
      brute.push_back(best);
    }
    std::vector<int> order(20);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return brute[a] > brute[b]; });
    const auto ranked = rank_videos(corpus, query_of(q), 20);
    const auto ranked_scaled = rank_videos(corpus, query_of(3.0 * q), 7);
    for (int i = 0; i < 20; ++i) CHECK(ranked[i].index == order[i]);
    for (int i = 0; i < 7; ++i) CHECK(ranked_scaled[i].index == order[i]);
  }
}
