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

// Adaptive-threshold pseudo-labeling of the target corpus.
//
// The confidence threshold starts at 1/n_classes and tracks an
// exponential moving average of the batch-mean top-class confidence; a
// target row earns a pseudo-label when its top-class probability reaches
// the threshold.  Everything here is detached: no gradients flow through
// threshold updates or selections.

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "emoadapt/corpus.hpp"

namespace emoadapt {

struct ThresholdState {
  double tau = 0.5;      // current confidence threshold
  double lambda = 0.999; // EMA momentum
  long t = 0;            // completed updates
  int n_classes = 2;

  static ThresholdState init(int n_classes, double lambda = 0.999) {
    if (n_classes < 2) throw std::runtime_error("need at least 2 classes");
    if (lambda <= 0.0 || lambda >= 1.0)
      throw std::runtime_error("lambda must be in (0, 1)");
    ThresholdState s;
    s.n_classes = n_classes;
    s.lambda = lambda;
    s.tau = 1.0 / static_cast<double>(n_classes);
    s.t = 0;
    return s;
  }
};

// One EMA step: tau <- lambda*tau + (1-lambda)*mean_j max(probs_j).
// An empty batch leaves the state (including the counter) untouched.
inline ThresholdState update_threshold(ThresholdState state,
                                       const Matrix& target_probs) {
  if (target_probs.rows() == 0) return state;
  const double mean_conf = target_probs.rowwise().maxCoeff().mean();
  state.tau = state.lambda * state.tau + (1.0 - state.lambda) * mean_conf;
  state.t += 1;
  return state;
}

struct PseudoLabeledSet {
  std::vector<Eigen::Index> indices;  // rows of the target batch, in order
  std::vector<int> labels;            // argmax class, ties to lowest index
  std::vector<double> confidences;    // the retained max probabilities

  std::size_t size() const { return indices.size(); }
};

// Pure filter: keeps rows whose top confidence reaches tau (>=).
inline PseudoLabeledSet select_pseudo(const Matrix& target_probs,
                                      double tau) {
  PseudoLabeledSet out;
  for (Eigen::Index i = 0; i < target_probs.rows(); ++i) {
    int best = 0;
    double conf = target_probs(i, 0);
    for (Eigen::Index j = 1; j < target_probs.cols(); ++j) {
      if (target_probs(i, j) > conf) {  // strict: ties keep the lower index
        conf = target_probs(i, j);
        best = static_cast<int>(j);
      }
    }
    if (conf >= tau) {
      out.indices.push_back(i);
      out.labels.push_back(best);
      out.confidences.push_back(conf);
    }
  }
  return out;
}

}  // namespace emoadapt
