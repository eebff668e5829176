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

#include "vcmr/autograd.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace vcmr::ag {
namespace {

thread_local bool g_grad_enabled = true;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("autograd: ") + what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(
        std::string("autograd: shape mismatch in ") + op + " (" +
        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
        std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

// Builds a result node. The closure is only kept when some parent is
// differentiable and recording is on.
Var make(Matrix value, std::vector<std::shared_ptr<Node>> parents,
         std::function<void(Node&)> bwd) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) any = any || p->requires_grad;
  }
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(bwd);
  }
  return Var(std::move(node));
}

inline void push(const std::shared_ptr<Node>& p, const Matrix& g) {
  if (p->requires_grad) p->accumulate(g);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  require(loss.rows() == 1 && loss.cols() == 1, "backward needs a 1x1 loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul inner dimension mismatch");
  return make(a.value() * b.value(), {a.node(), b.node()}, [](Node& n) {
    const auto& pa = n.parents[0];
    const auto& pb = n.parents[1];
    if (pa->requires_grad) pa->accumulate(n.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt inner dimension mismatch");
  return make(a.value() * b.value().transpose(), {a.node(), b.node()},
              [](Node& n) {
                const auto& pa = n.parents[0];
                const auto& pb = n.parents[1];
                if (pa->requires_grad) pa->accumulate(n.grad * pb->value);
                if (pb->requires_grad)
                  pb->accumulate(n.grad.transpose() * pa->value);
              });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a.node()}, [](Node& n) {
    push(n.parents[0], n.grad.transpose());
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
    push(n.parents[0], n.grad);
    push(n.parents[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
    push(n.parents[0], n.grad);
    push(n.parents[1], -n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a.node(), b.node()},
              [](Node& n) {
                const auto& pa = n.parents[0];
                const auto& pb = n.parents[1];
                if (pa->requires_grad)
                  pa->accumulate(n.grad.cwiseProduct(pb->value));
                if (pb->requires_grad)
                  pb->accumulate(n.grad.cwiseProduct(pa->value));
              });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.node()},
              [s](Node& n) { push(n.parents[0], n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  return make(a.value().array() + s, {a.node()},
              [](Node& n) { push(n.parents[0], n.grad); });
}

Var mul_const(const Var& a, const Matrix& mask) {
  require(a.rows() == mask.rows() && a.cols() == mask.cols(),
          "mul_const shape mismatch");
  return make(a.value().cwiseProduct(mask), {a.node()}, [mask](Node& n) {
    push(n.parents[0], n.grad.cwiseProduct(mask));
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {a.node(), row.node()}, [](Node& n) {
    push(n.parents[0], n.grad);
    push(n.parents[1], n.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "mul_row shape mismatch");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make(std::move(out), {a.node(), row.node()}, [](Node& n) {
    const auto& pa = n.parents[0];
    const auto& pr = n.parents[1];
    if (pa->requires_grad) {
      pa->accumulate(n.grad.array().rowwise() * pr->value.row(0).array());
    }
    if (pr->requires_grad) {
      pr->accumulate(n.grad.cwiseProduct(pa->value).colwise().sum());
    }
  });
}

Var mul_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), "mul_col shape mismatch");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {a.node(), col.node()}, [](Node& n) {
    const auto& pa = n.parents[0];
    const auto& pc = n.parents[1];
    if (pa->requires_grad) {
      pa->accumulate(n.grad.array().colwise() * pc->value.col(0).array());
    }
    if (pc->requires_grad) {
      pc->accumulate(n.grad.cwiseProduct(pa->value).rowwise().sum());
    }
  });
}

Var repeat_rows(const Var& row, Eigen::Index n_rows) {
  require(row.rows() == 1, "repeat_rows expects a row vector");
  Matrix out = row.value().replicate(n_rows, 1);
  return make(std::move(out), {row.node()}, [](Node& n) {
    push(n.parents[0], n.grad.colwise().sum());
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make(std::move(out), std::move(parents), [](Node& n) {
    Eigen::Index off = 0;
    for (const auto& p : n.parents) {
      const Eigen::Index c = p->value.cols();
      if (p->requires_grad) p->accumulate(n.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make(std::move(out), std::move(parents), [](Node& n) {
    Eigen::Index off = 0;
    for (const auto& p : n.parents) {
      const Eigen::Index r = p->value.rows();
      if (p->requires_grad) p->accumulate(n.grad.middleRows(off, r));
      off += r;
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n_rows) {
  require(start >= 0 && n_rows >= 0 && start + n_rows <= a.rows(),
          "slice_rows out of range");
  return make(a.value().middleRows(start, n_rows), {a.node()},
              [start](Node& n) {
                const auto& p = n.parents[0];
                if (!p->requires_grad) return;
                Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
                g.middleRows(start, n.grad.rows()) = n.grad;
                p->accumulate(g);
              });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n_cols) {
  require(start >= 0 && n_cols >= 0 && start + n_cols <= a.cols(),
          "slice_cols out of range");
  return make(a.value().middleCols(start, n_cols), {a.node()},
              [start](Node& n) {
                const auto& p = n.parents[0];
                if (!p->requires_grad) return;
                Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
                g.middleCols(start, n.grad.cols()) = n.grad;
                p->accumulate(g);
              });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), "gather_rows index");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(out), {a.node()}, [idx = std::move(idx)](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    }
    p->accumulate(g);
  });
}

Var shift_rows(const Var& a, Eigen::Index offset) {
  const Eigen::Index rows = a.rows();
  Matrix out = Matrix::Zero(rows, a.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index src = i + offset;
    if (src >= 0 && src < rows) out.row(i) = a.value().row(src);
  }
  return make(std::move(out), {a.node()}, [offset](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    const Eigen::Index r = p->value.rows();
    Matrix g = Matrix::Zero(r, p->value.cols());
    for (Eigen::Index i = 0; i < r; ++i) {
      const Eigen::Index src = i + offset;
      if (src >= 0 && src < r) g.row(src) += n.grad.row(i);
    }
    p->accumulate(g);
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  return make(out, {a.node()}, [out](Node& n) {
    push(n.parents[0],
         n.grad.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make(out, {a.node()}, [out](Node& n) {
    push(n.parents[0],
         n.grad.cwiseProduct((out.array() * (1.0 - out.array())).matrix()));
  });
}

Var gelu(const Var& a) {
  constexpr double kC = 0.044715;
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const Matrix& x = a.value();
  Matrix t = (k * (x.array() + kC * x.array().cube())).tanh().matrix();
  Matrix out = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return make(std::move(out), {a.node()}, [t, k](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    const auto x = p->value.array();
    const auto tt = t.array();
    Matrix d = (0.5 * (1.0 + tt) + 0.5 * x * (1.0 - tt.square()) * k *
                                       (1.0 + 3.0 * kC * x.square()))
                   .matrix();
    p->accumulate(n.grad.cwiseProduct(d));
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make(std::move(out), {a.node()}, [](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Matrix d = (p->value.array() > 0.0).cast<double>().matrix();
    p->accumulate(n.grad.cwiseProduct(d));
  });
}

namespace {

Matrix softmax_rows_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

Var softmax_rows(const Var& a) {
  require(a.cols() > 0, "softmax over an empty row");
  Matrix out = softmax_rows_value(a.value());
  return make(out, {a.node()}, [out](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Eigen::VectorXd dot = n.grad.cwiseProduct(out).rowwise().sum();
    Matrix g = out.cwiseProduct((n.grad.colwise() - dot));
    p->accumulate(g);
  });
}

Var softmax_cols(const Var& a) {
  require(a.rows() > 0, "softmax over an empty column");
  Matrix out = softmax_rows_value(a.value().transpose()).transpose();
  return make(out, {a.node()}, [out](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Eigen::RowVectorXd dot = n.grad.cwiseProduct(out).colwise().sum();
    Matrix g = out.cwiseProduct((n.grad.rowwise() - dot));
    p->accumulate(g);
  });
}

Var log_softmax_rows(const Var& a) {
  require(a.cols() > 0, "log_softmax over an empty row");
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  Matrix prob = out.array().exp().matrix();
  return make(std::move(out), {a.node()}, [prob](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Eigen::VectorXd total = n.grad.rowwise().sum();
    Matrix g = n.grad - (prob.array().colwise() * total.array()).matrix();
    p->accumulate(g);
  });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias,
                    double eps) {
  const Eigen::Index d = a.cols();
  require(gain.rows() == 1 && gain.cols() == d && bias.rows() == 1 &&
              bias.cols() == d,
          "layer_norm parameter shape");
  const Matrix& x = a.value();
  Matrix xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array())
                   .rowwise() +
               bias.value().row(0).array();
  return make(std::move(out), {a.node(), gain.node(), bias.node()},
              [xhat, inv_std](Node& n) {
                const auto& px = n.parents[0];
                const auto& pg = n.parents[1];
                const auto& pb = n.parents[2];
                if (pg->requires_grad)
                  pg->accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
                if (pb->requires_grad) pb->accumulate(n.grad.colwise().sum());
                if (!px->requires_grad) return;
                Matrix dxhat =
                    n.grad.array().rowwise() * pg->value.row(0).array();
                Matrix g(dxhat.rows(), dxhat.cols());
                for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                  const double m1 = dxhat.row(i).mean();
                  const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                  g.row(i) = inv_std(i) *
                             (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                }
                px->accumulate(g);
              });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > eps)) {
      throw std::domain_error("autograd: zero-norm row in l2_normalize_rows");
    }
  }
  Matrix out = x.array().colwise() / norms.array();
  return make(out, {a.node()}, [out, norms](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Eigen::VectorXd dot = n.grad.cwiseProduct(out).rowwise().sum();
    Matrix g = n.grad - (out.array().colwise() * dot.array()).matrix();
    g = g.array().colwise() / norms.array();
    p->accumulate(g);
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {a.node()}, [](Node& n) {
    const auto& p = n.parents[0];
    push(p, Matrix::Constant(p->value.rows(), p->value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean of an empty matrix");
  const double count = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / count;
  return make(std::move(out), {a.node()}, [count](Node& n) {
    const auto& p = n.parents[0];
    push(p, Matrix::Constant(p->value.rows(), p->value.cols(),
                             n.grad(0, 0) / count));
  });
}

Var max_element(const Var& a) {
  require(a.value().size() > 0, "max of an empty matrix");
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  // Column-major scan; the first maximum wins.
  double best = a.value()(0, 0);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (a.value()(i, j) > best) {
        best = a.value()(i, j);
        r = i;
        c = j;
      }
    }
  }
  return element(a, r, c);
}

Var column_max(const Var& a) {
  require(a.rows() > 0, "column_max of an empty matrix");
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(a.cols()));
  Matrix out(1, a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < a.rows(); ++i) {
      if (a.value()(i, j) > a.value()(best, j)) best = i;
    }
    arg[static_cast<std::size_t>(j)] = best;
    out(0, j) = a.value()(best, j);
  }
  return make(std::move(out), {a.node()}, [arg](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    for (std::size_t j = 0; j < arg.size(); ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      g(arg[j], c) = n.grad(0, c);
    }
    p->accumulate(g);
  });
}

Var element(const Var& a, Eigen::Index r, Eigen::Index c) {
  require(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(),
          "element out of range");
  Matrix out(1, 1);
  out(0, 0) = a.value()(r, c);
  return make(std::move(out), {a.node()}, [r, c](Node& n) {
    const auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    g(r, c) = n.grad(0, 0);
    p->accumulate(g);
  });
}

Var mean_abs_diff(const Var& a, const Matrix& target) {
  require(a.rows() == target.rows() && a.cols() == target.cols(),
          "mean_abs_diff shape mismatch");
  require(target.size() > 0, "mean_abs_diff of empty matrices");
  const double count = static_cast<double>(target.size());
  Matrix diff = a.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().sum() / count;
  Matrix sign = diff.unaryExpr([](double v) {
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  });
  return make(std::move(out), {a.node()}, [sign, count](Node& n) {
    push(n.parents[0], sign * (n.grad(0, 0) / count));
  });
}

}  // namespace vcmr::ag
