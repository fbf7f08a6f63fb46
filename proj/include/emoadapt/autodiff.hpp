// Copyright 2026 The emoadapt Authors
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

// Tape-based reverse-mode automatic differentiation over Eigen matrices.
//
// A Tape owns Nodes; every operator appends a node whose closure knows how
// to push the node's gradient back to its inputs.  Because nodes are
// appended in creation order, that order is already a topological order of
// the forward graph, so the backward pass is a single reverse sweep -- no
// explicit sorting.  Values and gradients are double precision throughout:
// the training losses here are verified against central finite differences
// at tolerances (~1e-4 relative) that float32 rounding would swamp.
//
// The op vocabulary is deliberately small.  Anything structural
// (convolution as shifted matmuls, batch norm from means and rsqrt,
// softmax cross-entropy from log-sum-exp) is composed from these
// primitives inside the model and loss builders, which keeps every
// gradient in the library attributable to one of the closures below.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

namespace emoadapt::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily, only on paths that receive gradient
  std::function<void()> backward;  // empty for leaves and constants
  bool requires_grad = false;
  bool has_grad = false;
};

// Adds `g` into the node's gradient accumulator.  No-op for constants, so
// op closures can push gradients unconditionally.
inline void accumulate(Node* n, const Matrix& g) {
  if (!n->requires_grad) return;
  if (!n->has_grad) {
    n->grad = g;
    n->has_grad = true;
  } else {
    n->grad += g;
  }
}

class Tape {
 public:
  // A differentiable input (parameter or anything we want gradients for).
  Node* leaf(Matrix value) { return emplace(std::move(value), true, {}); }

  // A value the backward pass treats as fixed.
  Node* constant(Matrix value) { return emplace(std::move(value), false, {}); }

  Node* scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  // Appends an interior node.  `backward` may be empty when no input
  // requires a gradient, in which case the node is inert on the sweep.
  Node* emplace(Matrix value, bool requires_grad,
                std::function<void()> backward) {
    nodes_.push_back(std::make_unique<Node>());
    Node* n = nodes_.back().get();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->backward = std::move(backward);
    return n;
  }

  // Reverse sweep from `root`, which is seeded with ones (for the scalar
  // losses used here that is d root / d root = 1).
  void backward(Node* root) {
    if (!root->requires_grad) {
      throw std::logic_error("backward() from a non-differentiable node");
    }
    root->grad = Matrix::Ones(root->value.rows(), root->value.cols());
    root->has_grad = true;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node* n = it->get();
      if (n->has_grad && n->backward) n->backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Gradient of a leaf after backward(); zero matrix if the sweep never
// reached it (e.g. a parameter unused under some ablation).
inline Matrix grad_of(const Node* n) {
  if (n->has_grad) return n->grad;
  return Matrix::Zero(n->value.rows(), n->value.cols());
}

namespace detail {
inline bool needs_grad(const Node* a) { return a->requires_grad; }
inline bool needs_grad(const Node* a, const Node* b) {
  return a->requires_grad || b->requires_grad;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

inline Node* add(Tape& t, Node* a, Node* b) {
  assert(a->value.rows() == b->value.rows() &&
         a->value.cols() == b->value.cols());
  Node* out = t.emplace(a->value + b->value, detail::needs_grad(a, b), {});
  out->backward = [out, a, b] {
    accumulate(a, out->grad);
    accumulate(b, out->grad);
  };
  return out;
}

inline Node* sub(Tape& t, Node* a, Node* b) {
  assert(a->value.rows() == b->value.rows() &&
         a->value.cols() == b->value.cols());
  Node* out = t.emplace(a->value - b->value, detail::needs_grad(a, b), {});
  out->backward = [out, a, b] {
    accumulate(a, out->grad);
    accumulate(b, -out->grad);
  };
  return out;
}

// Elementwise product.
inline Node* mul(Tape& t, Node* a, Node* b) {
  assert(a->value.rows() == b->value.rows() &&
         a->value.cols() == b->value.cols());
  Node* out = t.emplace(a->value.cwiseProduct(b->value),
                        detail::needs_grad(a, b), {});
  out->backward = [out, a, b] {
    accumulate(a, out->grad.cwiseProduct(b->value));
    accumulate(b, out->grad.cwiseProduct(a->value));
  };
  return out;
}

inline Node* scale(Tape& t, Node* a, double c) {
  Node* out = t.emplace(a->value * c, detail::needs_grad(a), {});
  out->backward = [out, a, c] { accumulate(a, (out->grad * c).eval()); };
  return out;
}

inline Node* add_scalar(Tape& t, Node* a, double c) {
  Node* out = t.emplace((a->value.array() + c).matrix(),
                        detail::needs_grad(a), {});
  out->backward = [out, a] { accumulate(a, out->grad); };
  return out;
}

inline Node* neg(Tape& t, Node* a) { return scale(t, a, -1.0); }

inline Node* matmul(Tape& t, Node* a, Node* b) {
  assert(a->value.cols() == b->value.rows());
  Node* out = t.emplace(a->value * b->value, detail::needs_grad(a, b), {});
  out->backward = [out, a, b] {
    accumulate(a, (out->grad * b->value.transpose()).eval());
    accumulate(b, (a->value.transpose() * out->grad).eval());
  };
  return out;
}

inline Node* transpose(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.transpose(), detail::needs_grad(a), {});
  out->backward = [out, a] { accumulate(a, out->grad.transpose().eval()); };
  return out;
}

// ---------------------------------------------------------------------------
// Row-vector broadcasting (the batch-norm / bias workhorses)
// ---------------------------------------------------------------------------

// X (n x m) + v (1 x m) broadcast over rows.
inline Node* add_rowvec(Tape& t, Node* x, Node* v) {
  assert(v->value.rows() == 1 && v->value.cols() == x->value.cols());
  Matrix y = x->value;
  y.rowwise() += v->value.row(0);
  Node* out = t.emplace(std::move(y), detail::needs_grad(x, v), {});
  out->backward = [out, x, v] {
    accumulate(x, out->grad);
    accumulate(v, out->grad.colwise().sum().eval());
  };
  return out;
}

// X (n x m) * v (1 x m) broadcast over rows.
inline Node* mul_rowvec(Tape& t, Node* x, Node* v) {
  assert(v->value.rows() == 1 && v->value.cols() == x->value.cols());
  Matrix y = x->value.array().rowwise() * v->value.row(0).array();
  Node* out = t.emplace(std::move(y), detail::needs_grad(x, v), {});
  out->backward = [out, x, v] {
    accumulate(
        x, (out->grad.array().rowwise() * v->value.row(0).array()).matrix());
    accumulate(v,
               out->grad.cwiseProduct(x->value).colwise().sum().eval());
  };
  return out;
}

// X (n x m) + u (n x 1) broadcast over columns.
inline Node* add_colvec(Tape& t, Node* x, Node* u) {
  assert(u->value.cols() == 1 && u->value.rows() == x->value.rows());
  Matrix y = x->value;
  y.colwise() += u->value.col(0);
  Node* out = t.emplace(std::move(y), detail::needs_grad(x, u), {});
  out->backward = [out, x, u] {
    accumulate(x, out->grad);
    accumulate(u, out->grad.rowwise().sum().eval());
  };
  return out;
}

// Multiplies row i of X by the fixed weight w(i).  Used for padding masks
// (w in {0,1}) where the weights must never receive gradient.
inline Node* rowscale(Tape& t, Node* x, const Eigen::VectorXd& w) {
  assert(w.size() == x->value.rows());
  Matrix y = w.asDiagonal() * x->value;
  Node* out = t.emplace(std::move(y), detail::needs_grad(x), {});
  out->backward = [out, x, w] {
    accumulate(x, (w.asDiagonal() * out->grad).eval());
  };
  return out;
}

// Elementwise product with a fixed matrix (dropout masks).
inline Node* mul_const(Tape& t, Node* x, Matrix m) {
  assert(m.rows() == x->value.rows() && m.cols() == x->value.cols());
  Node* out =
      t.emplace(x->value.cwiseProduct(m), detail::needs_grad(x), {});
  out->backward = [out, x, m = std::move(m)] {
    accumulate(x, out->grad.cwiseProduct(m));
  };
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

inline Node* relu(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.cwiseMax(0.0), detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, (out->grad.array() *
                   (a->value.array() > 0.0).cast<double>())
                      .matrix());
  };
  return out;
}

inline Node* sigmoid(Tape& t, Node* a) {
  // Branching on sign keeps exp() off large positive arguments.
  Matrix y = a->value.unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, (out->grad.array() * out->value.array() *
                   (1.0 - out->value.array()))
                      .matrix());
  };
  return out;
}

inline Node* tanh_op(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.array().tanh().matrix(),
                        detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, (out->grad.array() *
                   (1.0 - out->value.array().square()))
                      .matrix());
  };
  return out;
}

inline Node* exp_op(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.array().exp().matrix(),
                        detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, out->grad.cwiseProduct(out->value));
  };
  return out;
}

// Natural log; caller guarantees strictly positive input.
inline Node* log_op(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.array().log().matrix(),
                        detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, out->grad.cwiseQuotient(a->value));
  };
  return out;
}

inline Node* square(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.array().square().matrix(),
                        detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, (2.0 * out->grad.array() * a->value.array()).matrix());
  };
  return out;
}

// x^p for strictly positive x (used as p = -0.5 for rsqrt in batch norm).
inline Node* pow_op(Tape& t, Node* a, double p) {
  Node* out = t.emplace(a->value.array().pow(p).matrix(),
                        detail::needs_grad(a), {});
  out->backward = [out, a, p] {
    accumulate(a, (out->grad.array() * p *
                   a->value.array().pow(p - 1.0))
                      .matrix());
  };
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Node* sum(Tape& t, Node* a) {
  Matrix y(1, 1);
  y(0, 0) = a->value.sum();
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, Matrix::Constant(a->value.rows(), a->value.cols(),
                                   out->grad(0, 0)));
  };
  return out;
}

inline Node* mean(Tape& t, Node* a) {
  const double n = static_cast<double>(a->value.size());
  Matrix y(1, 1);
  y(0, 0) = a->value.sum() / n;
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, n] {
    accumulate(a, Matrix::Constant(a->value.rows(), a->value.cols(),
                                   out->grad(0, 0) / n));
  };
  return out;
}

// Row sums: (n x m) -> (n x 1).
inline Node* row_sum(Tape& t, Node* a) {
  Node* out = t.emplace(a->value.rowwise().sum(), detail::needs_grad(a), {});
  out->backward = [out, a] {
    accumulate(a, (out->grad * Matrix::Ones(1, a->value.cols())).eval());
  };
  return out;
}

// Numerically stable log(sum(exp(row))): (n x m) -> (n x 1).
inline Node* row_logsumexp(Tape& t, Node* a) {
  const Eigen::VectorXd m = a->value.rowwise().maxCoeff();
  Matrix shifted = a->value.colwise() - m;
  Matrix soft = shifted.array().exp().matrix();
  Eigen::VectorXd z = soft.rowwise().sum();
  Matrix y = (z.array().log() + m.array()).matrix();
  soft.array().colwise() /= z.array();  // now the row-softmax of a
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, soft = std::move(soft)] {
    accumulate(a, (soft.array().colwise() *
                   out->grad.col(0).array())
                      .matrix());
  };
  return out;
}

inline Node* softmax_rows(Tape& t, Node* a) {
  const Eigen::VectorXd m = a->value.rowwise().maxCoeff();
  Matrix y = (a->value.colwise() - m).array().exp().matrix();
  const Eigen::VectorXd z = y.rowwise().sum();
  y.array().colwise() /= z.array();
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a] {
    const Matrix& y = out->value;
    const Eigen::VectorXd dot =
        out->grad.cwiseProduct(y).rowwise().sum();
    accumulate(a, ((out->grad.colwise() - dot).array() * y.array()).matrix());
  };
  return out;
}

// ---------------------------------------------------------------------------
// Structure: slicing, gathering, concatenation
// ---------------------------------------------------------------------------

inline Node* slice_rows(Tape& t, Node* a, Eigen::Index first,
                        Eigen::Index count) {
  assert(first >= 0 && first + count <= a->value.rows());
  Node* out =
      t.emplace(a->value.middleRows(first, count), detail::needs_grad(a), {});
  out->backward = [out, a, first, count] {
    Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
    g.middleRows(first, count) = out->grad;
    accumulate(a, g);
  };
  return out;
}

inline Node* slice_cols(Tape& t, Node* a, Eigen::Index first,
                        Eigen::Index count) {
  assert(first >= 0 && first + count <= a->value.cols());
  Node* out =
      t.emplace(a->value.middleCols(first, count), detail::needs_grad(a), {});
  out->backward = [out, a, first, count] {
    Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
    g.middleCols(first, count) = out->grad;
    accumulate(a, g);
  };
  return out;
}

// Rows of `a` at the given indices, in order (duplicates allowed; the
// backward pass scatter-adds).
inline Node* gather_rows(Tape& t, Node* a, std::vector<Eigen::Index> rows) {
  Matrix y(static_cast<Eigen::Index>(rows.size()), a->value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    assert(rows[i] >= 0 && rows[i] < a->value.rows());
    y.row(static_cast<Eigen::Index>(i)) = a->value.row(rows[i]);
  }
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, rows = std::move(rows)] {
    Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      g.row(rows[i]) += out->grad.row(static_cast<Eigen::Index>(i));
    }
    accumulate(a, g);
  };
  return out;
}

inline Node* concat_rows(Tape& t, Node* a, Node* b) {
  assert(a->value.cols() == b->value.cols());
  Matrix y(a->value.rows() + b->value.rows(), a->value.cols());
  y.topRows(a->value.rows()) = a->value;
  y.bottomRows(b->value.rows()) = b->value;
  Node* out = t.emplace(std::move(y), detail::needs_grad(a, b), {});
  out->backward = [out, a, b] {
    accumulate(a, out->grad.topRows(a->value.rows()).eval());
    accumulate(b, out->grad.bottomRows(b->value.rows()).eval());
  };
  return out;
}

inline Node* concat_cols(Tape& t, Node* a, Node* b) {
  assert(a->value.rows() == b->value.rows());
  Matrix y(a->value.rows(), a->value.cols() + b->value.cols());
  y.leftCols(a->value.cols()) = a->value;
  y.rightCols(b->value.cols()) = b->value;
  Node* out = t.emplace(std::move(y), detail::needs_grad(a, b), {});
  out->backward = [out, a, b] {
    accumulate(a, out->grad.leftCols(a->value.cols()).eval());
    accumulate(b, out->grad.rightCols(b->value.cols()).eval());
  };
  return out;
}

// out(i, 0) = a(i, cols[i]).  The gather behind cross-entropy.
inline Node* select_per_row(Tape& t, Node* a, std::vector<Eigen::Index> cols) {
  assert(static_cast<Eigen::Index>(cols.size()) == a->value.rows());
  Matrix y(a->value.rows(), 1);
  for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
    assert(cols[static_cast<std::size_t>(i)] >= 0 &&
           cols[static_cast<std::size_t>(i)] < a->value.cols());
    y(i, 0) = a->value(i, cols[static_cast<std::size_t>(i)]);
  }
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, cols = std::move(cols)] {
    Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
    for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
      g(i, cols[static_cast<std::size_t>(i)]) += out->grad(i, 0);
    }
    accumulate(a, g);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Row-wise L2 normalisation (projection-head output)
// ---------------------------------------------------------------------------

// y_i = x_i / (||x_i|| + eps), rows independent.
inline Node* l2_normalize_rows(Tape& t, Node* a, double eps = 1e-12) {
  const Eigen::VectorXd norms = a->value.rowwise().norm();
  Matrix y = a->value.array().colwise() / (norms.array() + eps);
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, norms, eps] {
    // d/dx [x / (r + eps)] with r = ||x||:
    //   G / (r + eps)  -  x * (x . G) / (r * (r + eps)^2)
    Matrix g = out->grad.array().colwise() / (norms.array() + eps);
    const Eigen::VectorXd dots =
        a->value.cwiseProduct(out->grad).rowwise().sum();
    for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
      const double r = norms(i);
      if (r > 0.0) {
        const double d = r + eps;
        g.row(i) -= a->value.row(i) * (dots(i) / (r * d * d));
      }
    }
    accumulate(a, g);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Time-axis ops over (batch*frames) x channels layouts
// ---------------------------------------------------------------------------
//
// Sequences are stored as stacked blocks: row b*frames + t holds frame t of
// sequence b.  Rows at t >= lengths[b] are padding and are kept exactly
// zero by the model builders.

// y[b, t] = x[b, t + offset], zero where t + offset falls outside
// [0, frames).  Convolutions become sums of shift-then-matmul.
inline Node* shift_time(Tape& t, Node* a, Eigen::Index batch,
                        Eigen::Index frames, Eigen::Index offset) {
  assert(a->value.rows() == batch * frames);
  auto shifted = [batch, frames](const Matrix& src, Eigen::Index off) {
    Matrix dst = Matrix::Zero(src.rows(), src.cols());
    const Eigen::Index span = frames - std::abs(off);
    if (span <= 0) return dst;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index base = b * frames;
      if (off >= 0) {
        dst.middleRows(base, span) = src.middleRows(base + off, span);
      } else {
        dst.middleRows(base - off, span) = src.middleRows(base, span);
      }
    }
    return dst;
  };
  Node* out = t.emplace(shifted(a->value, offset), detail::needs_grad(a), {});
  out->backward = [out, a, shifted, offset] {
    accumulate(a, shifted(out->grad, -offset));
  };
  return out;
}

// Picks frame `frame` of every sequence: (batch*frames x c) -> (batch x c).
inline Node* select_time(Tape& t, Node* a, Eigen::Index batch,
                         Eigen::Index frames, Eigen::Index frame) {
  assert(frame >= 0 && frame < frames);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) rows[b] = b * frames + frame;
  return gather_rows(t, a, std::move(rows));
}

// Mean over each sequence's valid frames: (batch*frames x c) -> (batch x c).
inline Node* masked_time_mean(Tape& t, Node* a, Eigen::Index batch,
                              Eigen::Index frames,
                              const std::vector<int>& lengths) {
  assert(a->value.rows() == batch * frames);
  assert(static_cast<Eigen::Index>(lengths.size()) == batch);
  Matrix y(batch, a->value.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index len = lengths[static_cast<std::size_t>(b)];
    assert(len >= 1 && len <= frames);
    y.row(b) = a->value.middleRows(b * frames, len).colwise().sum() /
               static_cast<double>(len);
  }
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, batch, frames, lengths] {
    Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index len = lengths[static_cast<std::size_t>(b)];
      g.middleRows(b * frames, len) =
          (out->grad.row(b) / static_cast<double>(len))
              .replicate(len, 1);
    }
    accumulate(a, g);
  };
  return out;
}

// Valid length after a stride-2 window-2 time max-pool.
inline int pooled_length(int len) { return len < 2 ? 1 : len / 2; }

// Max-pool along time, window 2, stride 2.  Output frame t' of sequence b
// is the max over input frames {2t', 2t'+1} clipped to the sequence's valid
// range; output frames past the pooled valid length stay exactly zero.
// The padded frame count shrinks to max(1, frames/2), reported through
// `out_frames`; per-sequence valid lengths shrink by pooled_length().
inline Node* maxpool_time(Tape& t, Node* a, Eigen::Index batch,
                          Eigen::Index frames,
                          const std::vector<int>& lengths,
                          Eigen::Index* out_frames) {
  assert(a->value.rows() == batch * frames);
  const Eigen::Index pooled =
      std::max<Eigen::Index>(1, frames / 2);
  const Eigen::Index cols = a->value.cols();
  Matrix y = Matrix::Zero(batch * pooled, cols);
  // argmax(i, c): source row in `a` that produced y(i, c); -1 for padding.
  std::vector<Eigen::Index> argmax(
      static_cast<std::size_t>(batch * pooled * cols), -1);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int valid = pooled_length(lengths[static_cast<std::size_t>(b)]);
    for (Eigen::Index tp = 0; tp < valid; ++tp) {
      const Eigen::Index src0 = b * frames + 2 * tp;
      const Eigen::Index last =
          b * frames +
          std::min<Eigen::Index>(2 * tp + 1,
                                 lengths[static_cast<std::size_t>(b)] - 1);
      const Eigen::Index dst = b * pooled + tp;
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::Index best = src0;
        if (last > src0 && a->value(last, c) > a->value(src0, c)) best = last;
        y(dst, c) = a->value(best, c);
        argmax[static_cast<std::size_t>(dst * cols + c)] = best;
      }
    }
  }
  if (out_frames) *out_frames = pooled;
  Node* out = t.emplace(std::move(y), detail::needs_grad(a), {});
  out->backward = [out, a, argmax = std::move(argmax), cols] {
    Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
    for (Eigen::Index i = 0; i < out->grad.rows(); ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const Eigen::Index src = argmax[static_cast<std::size_t>(i * cols + c)];
        if (src >= 0) g(src, c) += out->grad(i, c);
      }
    }
    accumulate(a, g);
  };
  return out;
}

}  // namespace emoadapt::ad
