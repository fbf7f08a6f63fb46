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

// Shared helpers for the test suites: random matrices from the library's
// own deterministic RNG, and a finite-difference gradient checker.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "emoadapt/autodiff.hpp"
#include "emoadapt/rng.hpp"

namespace emoadapt::testing {

inline ad::Matrix random_matrix(Rng& rng, Eigen::Index rows,
                                Eigen::Index cols, double scale = 1.0) {
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Relative error with the denominator floored at 1 so that tiny gradients
// are compared absolutely: |a - b| / max(1, |a|, |b|).
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Checks the analytic gradient of a scalar-valued graph against central
// finite differences.  `build` receives a fresh tape and one leaf per
// input matrix and must return a 1x1 node; it is re-invoked for every
// perturbed forward evaluation, so it must be a pure function of the leaf
// values.  Returns the worst relative error over every element of every
// input.
template <typename BuildFn>
double max_gradcheck_error(BuildFn&& build,
                           std::vector<ad::Matrix> inputs,
                           double step = 1e-5) {
  auto eval = [&](const std::vector<ad::Matrix>& values,
                  std::vector<ad::Matrix>* grads) {
    ad::Tape tape;
    std::vector<ad::Node*> leaves;
    leaves.reserve(values.size());
    for (const auto& v : values) leaves.push_back(tape.leaf(v));
    ad::Node* root = build(tape, leaves);
    if (root->value.rows() != 1 || root->value.cols() != 1)
      throw std::logic_error("gradcheck root must be scalar");
    const double y = root->value(0, 0);
    if (grads) {
      tape.backward(root);
      grads->clear();
      for (ad::Node* leaf : leaves) grads->push_back(ad::grad_of(leaf));
    }
    return y;
  };

  std::vector<ad::Matrix> analytic;
  eval(inputs, &analytic);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < inputs[k].cols(); ++j) {
        const double saved = inputs[k](i, j);
        inputs[k](i, j) = saved + step;
        const double up = eval(inputs, nullptr);
        inputs[k](i, j) = saved - step;
        const double down = eval(inputs, nullptr);
        inputs[k](i, j) = saved;
        const double fd = (up - down) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[k](i, j), fd));
      }
    }
  }
  return worst;
}

}  // namespace emoadapt::testing
