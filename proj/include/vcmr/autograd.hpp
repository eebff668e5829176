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

#ifndef VCMR_AUTOGRAD_HPP_
#define VCMR_AUTOGRAD_HPP_

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace vcmr::ag {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

// A node of the dynamic computation graph. Leaves with requires_grad set are
// trainable parameters; interior nodes carry the closure that pushes their
// gradient back to their parents.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Adds `g` into this node's gradient buffer, allocating it on first use.
  void accumulate(const Matrix& g);
};

// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording for its lifetime (evaluation mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);

// Reverse-mode sweep from a 1x1 output. Gradients accumulate into every
// reachable node with requires_grad set.
void backward(const Var& loss);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var transpose(const Var& a);

// Elementwise arithmetic. Shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var mul_const(const Var& a, const Matrix& mask);

// Broadcasting helpers: `row` is 1 x cols, `col` is rows x 1.
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
Var mul_col(const Var& a, const Var& col);
Var repeat_rows(const Var& row, Eigen::Index n);

// Structure.
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n);
Var gather_rows(const Var& a, std::span<const int> index);
// out[i] = a[i + offset], zero where i + offset falls outside [0, rows).
Var shift_rows(const Var& a, Eigen::Index offset);

// Nonlinearities.
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);
Var relu(const Var& a);

// Normalizations.
Var softmax_rows(const Var& a);
Var softmax_cols(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias,
                    double eps = 1e-5);
Var l2_normalize_rows(const Var& a, double eps = 0.0);

// Reductions to 1x1.
Var sum(const Var& a);
Var mean(const Var& a);
Var max_element(const Var& a);
// 1 x cols row of per-column maxima; the first maximum in a column wins.
Var column_max(const Var& a);
Var element(const Var& a, Eigen::Index r, Eigen::Index c);
Var mean_abs_diff(const Var& a, const Matrix& target);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace vcmr::ag

#endif  // VCMR_AUTOGRAD_HPP_
