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
#include "vcmr/autograd.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace ag = vcmr::ag;
using ag::Matrix;
using ag::Var;
using vcmr::testing::check_gradients;
using vcmr::testing::random_matrix;

namespace {

// Reduces any output to a scalar through fixed random weights so every
// output coordinate feeds the gradient.
Var weighted_sum(const Var& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ag::sum(ag::mul_const(out, random_matrix(out.rows(), out.cols(), rng)));
}

void expect_gradients(const std::function<Var(const std::vector<Var>&)>& f,
                      std::vector<Var> inputs) {
  const auto report = check_gradients(
      [&] { return weighted_sum(f(inputs), 99); }, inputs, 1e-5, 1e-6);
  CHECK(report.worst < 1e-5);
}

}  // namespace

TEST_CASE("elementwise and matrix ops match central differences") {
  std::mt19937_64 rng(1);
  auto p = [&](Eigen::Index r, Eigen::Index c) {
    return ag::parameter(random_matrix(r, c, rng));
  };
  expect_gradients([](const auto& x) { return ag::matmul(x[0], x[1]); }, {p(3, 4), p(4, 2)});
  expect_gradients([](const auto& x) { return ag::matmul_nt(x[0], x[1]); }, {p(3, 4), p(5, 4)});
  expect_gradients([](const auto& x) { return ag::transpose(x[0]); }, {p(3, 2)});
  expect_gradients([](const auto& x) { return ag::sub(ag::mul(x[0], x[1]), x[0]); },
                   {p(2, 3), p(2, 3)});
  expect_gradients([](const auto& x) { return ag::add_scalar(ag::scale(x[0], -2.5), 1.0); },
                   {p(2, 3)});
  expect_gradients([](const auto& x) { return ag::add_row(x[0], x[1]); }, {p(4, 3), p(1, 3)});
  expect_gradients([](const auto& x) { return ag::mul_row(x[0], x[1]); }, {p(4, 3), p(1, 3)});
  expect_gradients([](const auto& x) { return ag::mul_col(x[0], x[1]); }, {p(4, 3), p(4, 1)});
  expect_gradients([](const auto& x) { return ag::repeat_rows(x[0], 3); }, {p(1, 4)});
}

TEST_CASE("structural ops route gradients to the right coordinates") {
  std::mt19937_64 rng(2);
  auto p = [&](Eigen::Index r, Eigen::Index c) {
    return ag::parameter(random_matrix(r, c, rng));
  };
  expect_gradients([](const auto& x) {
    const Var parts[] = {x[0], x[1]};
    return ag::concat_cols(parts);
  }, {p(3, 2), p(3, 4)});
  expect_gradients([](const auto& x) {
    const Var parts[] = {x[0], x[1]};
    return ag::concat_rows(parts);
  }, {p(2, 3), p(4, 3)});
  expect_gradients([](const auto& x) { return ag::slice_rows(x[0], 1, 2); }, {p(4, 3)});
  expect_gradients([](const auto& x) { return ag::slice_cols(x[0], 2, 2); }, {p(3, 5)});
  expect_gradients([](const auto& x) {
    const int index[] = {2, 0, 2, 1};
    return ag::gather_rows(x[0], index);
  }, {p(3, 2)});
  expect_gradients([](const auto& x) { return ag::shift_rows(x[0], 2); }, {p(5, 2)});
  expect_gradients([](const auto& x) { return ag::shift_rows(x[0], -1); }, {p(5, 2)});
}

TEST_CASE("nonlinearities and normalizations match central differences") {
  std::mt19937_64 rng(3);
  auto p = [&](Eigen::Index r, Eigen::Index c) {
    return ag::parameter(random_matrix(r, c, rng));
  };
  expect_gradients([](const auto& x) { return ag::tanh(x[0]); }, {p(3, 3)});
  expect_gradients([](const auto& x) { return ag::sigmoid(x[0]); }, {p(3, 3)});
  expect_gradients([](const auto& x) { return ag::gelu(x[0]); }, {p(3, 3)});
  expect_gradients([](const auto& x) { return ag::softmax_rows(x[0]); }, {p(3, 4)});
  expect_gradients([](const auto& x) { return ag::softmax_cols(x[0]); }, {p(3, 4)});
  expect_gradients([](const auto& x) { return ag::log_softmax_rows(x[0]); }, {p(3, 4)});
  expect_gradients([](const auto& x) { return ag::layer_norm_rows(x[0], x[1], x[2]); },
                   {p(3, 5), p(1, 5), p(1, 5)});
  expect_gradients([](const auto& x) { return ag::l2_normalize_rows(x[0]); }, {p(3, 4)});
  expect_gradients([](const auto& x) { return ag::mean(x[0]); }, {p(3, 4)});
  expect_gradients([](const auto& x) { return ag::element(x[0], 1, 2); }, {p(3, 4)});
  expect_gradients([](const auto& x) { return ag::column_max(x[0]); }, {p(4, 3)});
  expect_gradients([](const auto& x) { return ag::max_element(x[0]); }, {p(4, 3)});
}

TEST_CASE("relu and mean_abs_diff away from their kinks") {
  Var x = ag::parameter((Matrix(2, 2) << 0.5, -0.7, 1.2, -0.1).finished());
  expect_gradients([](const auto& v) { return ag::relu(v[0]); }, {x});
  Matrix target = (Matrix(2, 2) << 0.0, 1.0, 1.0, 0.0).finished();
  expect_gradients([&](const auto& v) { return ag::mean_abs_diff(v[0], target); }, {x});
}

TEST_CASE("softmax rows and columns are normalized") {
  std::mt19937_64 rng(4);
  Var s = ag::constant(random_matrix(5, 7, rng, 3.0));
  const Matrix r = ag::softmax_rows(s).value();
  const Matrix c = ag::softmax_cols(s).value();
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(r.row(i).sum() - 1.0) < 1e-12);
  for (Eigen::Index j = 0; j < 7; ++j) CHECK(std::abs(c.col(j).sum() - 1.0) < 1e-12);
}

TEST_CASE("softmax is stable for large logits") {
  Var s = ag::constant((Matrix(1, 3) << 1000.0, 999.0, -1000.0).finished());
  const Matrix r = ag::softmax_rows(s).value();
  CHECK(r.allFinite());
  CHECK(r(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(ag::log_softmax_rows(s).value().allFinite());
}

TEST_CASE("gradients accumulate over shared uses") {
  Var x = ag::parameter(Matrix::Constant(1, 1, 3.0));
  ag::backward(ag::add(ag::mul(x, x), x));  // d/dx (x^2 + x) = 2x + 1
  CHECK(x.grad()(0, 0) == doctest::Approx(7.0));
  x.zero_grad();
  CHECK(x.grad().size() == 0);
}

TEST_CASE("no-grad mode records nothing") {
  Var x = ag::parameter(Matrix::Constant(2, 2, 1.0));
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    Var y = ag::scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(ag::grad_enabled());
}

TEST_CASE("shape errors are rejected") {
  Var a = ag::constant(Matrix::Zero(2, 3));
  Var b = ag::constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(ag::add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ag::matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ag::slice_rows(a, 1, 3), std::invalid_argument);
  CHECK_THROWS_AS(ag::backward(a), std::invalid_argument);
}

TEST_CASE("zero rows normalize to a domain error") {
  Var a = ag::constant(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(ag::l2_normalize_rows(a), std::domain_error);
}
