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

#include "vcmr/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace vcmr::nn {

Var ParameterStore::create(const std::string& name, Eigen::Index rows,
                           Eigen::Index cols, Eigen::Index fan_in) {
  if (find(name).defined()) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix init(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) init(i, j) = dist(rng_);
  }
  Var v = ag::parameter(std::move(init));
  entries_.push_back({name, v});
  return v;
}

Var ParameterStore::create_constant(const std::string& name, Eigen::Index rows,
                                    Eigen::Index cols, double value) {
  if (find(name).defined()) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  Var v = ag::parameter(Matrix::Constant(rows, cols, value));
  entries_.push_back({name, v});
  return v;
}

Var ParameterStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  return {};
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

double ParameterStore::clipped_scale(double clip_norm, double* norm) const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    if (e.var.grad().size() != 0) sq += e.var.grad().squaredNorm();
  }
  *norm = std::sqrt(sq);
  if (clip_norm > 0.0 && *norm > clip_norm) return clip_norm / *norm;
  return 1.0;
}

double ParameterStore::sgd_step(double learning_rate, double clip_norm) {
  double norm = 0.0;
  const double factor = learning_rate * clipped_scale(clip_norm, &norm);
  for (auto& e : entries_) {
    if (e.var.grad().size() == 0) continue;
    e.var.mutable_value() -= factor * e.var.grad();
  }
  return norm;
}

double ParameterStore::adam_step(double learning_rate, double clip_norm,
                                 double beta1, double beta2, double eps) {
  double norm = 0.0;
  const double scale = clipped_scale(clip_norm, &norm);
  if (first_moment_.size() != entries_.size()) {
    first_moment_.clear();
    second_moment_.clear();
    for (const auto& e : entries_) {
      first_moment_.push_back(Matrix::Zero(e.var.rows(), e.var.cols()));
      second_moment_.push_back(Matrix::Zero(e.var.rows(), e.var.cols()));
    }
  }
  ++adam_steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_steps_));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    Var v = entries_[i].var;
    if (v.grad().size() == 0) continue;
    const Matrix g = scale * v.grad();
    first_moment_[i] = beta1 * first_moment_[i] + (1.0 - beta1) * g;
    second_moment_[i] = beta2 * second_moment_[i] + (1.0 - beta2) * g.cwiseProduct(g);
    v.mutable_value().array() -=
        learning_rate * (first_moment_[i].array() / c1) /
        ((second_moment_[i].array() / c2).sqrt() + eps);
  }
  return norm;
}

Linear::Linear(ParameterStore& store, const std::string& name, Eigen::Index in,
               Eigen::Index out)
    : weight(store.create(name + ".weight", in, out, in)),
      bias(store.create_constant(name + ".bias", 1, out, 0.0)) {}

Var Linear::operator()(const Var& x) const {
  return ag::add_row(ag::matmul(x, weight), bias);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name,
                     Eigen::Index dim)
    : gain(store.create_constant(name + ".gain", 1, dim, 1.0)),
      bias(store.create_constant(name + ".bias", 1, dim, 0.0)) {}

Var LayerNorm::operator()(const Var& x) const {
  return ag::layer_norm_rows(x, gain, bias);
}

Conv1d::Conv1d(ParameterStore& store, const std::string& name, int width_,
               Eigen::Index in, Eigen::Index out)
    : width(width_),
      weight(store.create(name + ".weight", width_ * in, out, width_ * in)),
      bias(store.create_constant(name + ".bias", 1, out, 0.0)) {
  if (width_ < 1 || width_ % 2 == 0) {
    throw std::invalid_argument("conv1d width must be odd and positive");
  }
}

Var Conv1d::operator()(const Var& x) const {
  const int half = width / 2;
  std::vector<Var> taps;
  taps.reserve(static_cast<std::size_t>(width));
  for (int k = -half; k <= half; ++k) taps.push_back(ag::shift_rows(x, k));
  return ag::add_row(ag::matmul(ag::concat_cols(taps), weight), bias);
}

MultiHeadSelfAttention::MultiHeadSelfAttention(ParameterStore& store,
                                               const std::string& name,
                                               Eigen::Index d, int heads)
    : n_heads(heads),
      query(store, name + ".query", d, d),
      key(store, name + ".key", d, d),
      value(store, name + ".value", d, d),
      output(store, name + ".output", d, d) {
  if (heads < 1 || d % heads != 0) {
    throw std::invalid_argument("hidden size must be divisible by n_heads");
  }
}

Var MultiHeadSelfAttention::operator()(const Var& x,
                                       AttentionTrace* trace) const {
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = query(x);
  Var k = key(x);
  Var v = value(x);
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    Var qh = ag::slice_cols(q, h * dh, dh);
    Var kh = ag::slice_cols(k, h * dh, dh);
    Var vh = ag::slice_cols(v, h * dh, dh);
    Var probs = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt));
    if (trace) trace->maps.push_back(probs.value());
    heads.push_back(ag::matmul(probs, vh));
  }
  return output(ag::concat_cols(heads));
}

TransformerLayer::TransformerLayer(ParameterStore& store,
                                   const std::string& name, Eigen::Index d,
                                   int n_heads, Eigen::Index ffn_dim)
    : attention(store, name + ".attention", d, n_heads),
      norm1(store, name + ".norm1", d),
      ffn_in(store, name + ".ffn_in", d, ffn_dim),
      ffn_out(store, name + ".ffn_out", ffn_dim, d),
      norm2(store, name + ".norm2", d) {}

Var TransformerLayer::operator()(const Var& x, AttentionTrace* trace) const {
  Var h = norm1(ag::add(x, attention(x, trace)));
  return norm2(ag::add(h, ffn_out(ag::gelu(ffn_in(h)))));
}

Lstm::Lstm(ParameterStore& store, const std::string& name, Eigen::Index in,
           Eigen::Index hidden_)
    : hidden(hidden_),
      input_weight(store.create(name + ".input_weight", in, 4 * hidden_, in)),
      recurrent_weight(store.create(name + ".recurrent_weight", hidden_,
                                    4 * hidden_, hidden_)),
      bias(store.create_constant(name + ".bias", 1, 4 * hidden_, 0.0)) {}

Var Lstm::operator()(const Var& x) const {
  const Eigen::Index steps = x.rows();
  Var projected = ag::add_row(ag::matmul(x, input_weight), bias);
  Var h = ag::constant(Matrix::Zero(1, hidden));
  Var c = ag::constant(Matrix::Zero(1, hidden));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 0; t < steps; ++t) {
    Var gates = ag::add(ag::slice_rows(projected, t, 1),
                        ag::matmul(h, recurrent_weight));
    Var in_gate = ag::sigmoid(ag::slice_cols(gates, 0, hidden));
    Var forget = ag::sigmoid(ag::slice_cols(gates, hidden, hidden));
    Var cell = ag::tanh(ag::slice_cols(gates, 2 * hidden, hidden));
    Var out_gate = ag::sigmoid(ag::slice_cols(gates, 3 * hidden, hidden));
    c = ag::add(ag::mul(forget, c), ag::mul(in_gate, cell));
    h = ag::mul(out_gate, ag::tanh(c));
    outputs.push_back(h);
  }
  if (outputs.empty()) return ag::constant(Matrix::Zero(0, hidden));
  return ag::concat_rows(outputs);
}

AdditivePooler::AdditivePooler(ParameterStore& store, const std::string& name,
                               Eigen::Index d)
    : proj(store, name + ".proj", d, d),
      score(store.create_constant(name + ".score", d, 1, 0.0)),
      out(store, name + ".out", d, d) {}

Var AdditivePooler::operator()(const Var& x, Matrix* weights) const {
  if (x.rows() == 0) throw std::invalid_argument("pooling over zero rows");
  Var logits = ag::matmul(ag::tanh(proj(x)), score);  // N x 1
  Var alpha = ag::softmax_cols(logits);
  if (weights) *weights = alpha.value();
  return out(ag::matmul(ag::transpose(alpha), x));
}

}  // namespace vcmr::nn
