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

// Trainable building blocks shared by the encoders and the heads.

#ifndef VCMR_NN_HPP_
#define VCMR_NN_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vcmr/autograd.hpp"

namespace vcmr::nn {

using ag::Matrix;
using ag::Var;

// Owns every trainable tensor of a model under a stable path name. Layers
// register into it at construction; the order of registration is the
// checkpoint order.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
             Eigen::Index fan_in);
  Var create_constant(const std::string& name, Eigen::Index rows,
                      Eigen::Index cols, double value);

  struct Entry {
    std::string name;
    Var var;
  };
  const std::vector<Entry>& entries() const { return entries_; }
  Var find(const std::string& name) const;
  std::size_t scalar_count() const;

  void zero_grad();
  // Plain SGD step; returns the global gradient norm before clipping.
  double sgd_step(double learning_rate, double clip_norm);
  // Adam with bias correction; moment buffers live in the store.
  double adam_step(double learning_rate, double clip_norm, double beta1 = 0.9,
                   double beta2 = 0.999, double eps = 1e-8);

 private:
  double clipped_scale(double clip_norm, double* norm) const;

  std::vector<Entry> entries_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  long adam_steps_ = 0;
  std::mt19937_64 rng_;
};

struct Linear {
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Eigen::Index in,
         Eigen::Index out);
  Var operator()(const Var& x) const;

  Var weight;  // in x out
  Var bias;    // 1 x out
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index dim);
  Var operator()(const Var& x) const;

  Var gain;
  Var bias;
};

// Same-padded 1-D convolution over the row (time) axis.
struct Conv1d {
  Conv1d() = default;
  Conv1d(ParameterStore& store, const std::string& name, int width,
         Eigen::Index in, Eigen::Index out);
  Var operator()(const Var& x) const;

  int width = 0;
  Var weight;  // (width * in) x out, tap-major
  Var bias;    // 1 x out
};

// Attention maps captured during a forward pass, one entry per head per
// layer in call order.
struct AttentionTrace {
  std::vector<Matrix> maps;
};

struct MultiHeadSelfAttention {
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParameterStore& store, const std::string& name,
                         Eigen::Index d, int n_heads);
  Var operator()(const Var& x, AttentionTrace* trace = nullptr) const;

  int n_heads = 1;
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

// Post-norm transformer block with a GELU feed-forward.
struct TransformerLayer {
  TransformerLayer() = default;
  TransformerLayer(ParameterStore& store, const std::string& name,
                   Eigen::Index d, int n_heads, Eigen::Index ffn_dim);
  Var operator()(const Var& x, AttentionTrace* trace = nullptr) const;

  MultiHeadSelfAttention attention;
  LayerNorm norm1;
  Linear ffn_in;
  Linear ffn_out;
  LayerNorm norm2;
};

struct Lstm {
  Lstm() = default;
  Lstm(ParameterStore& store, const std::string& name, Eigen::Index in,
       Eigen::Index hidden);
  // Unidirectional pass over the rows of `x`; returns all hidden states.
  Var operator()(const Var& x) const;

  Eigen::Index hidden = 0;
  Var input_weight;      // in x 4h, gate order i, f, g, o
  Var recurrent_weight;  // h x 4h
  Var bias;              // 1 x 4h
};

// Single-head additive attention pooling followed by an affine map.
struct AdditivePooler {
  AdditivePooler() = default;
  AdditivePooler(ParameterStore& store, const std::string& name,
                 Eigen::Index d);
  // Returns the 1 x d pooled vector. When `weights` is given, the N x 1
  // pooling distribution is written to it.
  Var operator()(const Var& x, Matrix* weights = nullptr) const;

  Linear proj;
  Var score;  // d x 1
  Linear out;
};

}  // namespace vcmr::nn

#endif  // VCMR_NN_HPP_
