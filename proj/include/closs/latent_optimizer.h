// Copyright 2026 The CLOSS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLOSS_LATENT_OPTIMIZER_H_
#define CLOSS_LATENT_OPTIMIZER_H_

#include <cstddef>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/model.h"

namespace closs {

struct OptimizerOptions {
  std::size_t steps = 30;  // K
  double step_size = 0.1;
  double lambda = 0.01;
};

// The optimized embedding sequence E'_1..E'_K and the unmodified origin.
struct Trajectory {
  Matrix origin;
  std::vector<Matrix> steps;
  // losses[k-1] is the objective at E'_k.
  std::vector<double> losses;
};

// Soft-thresholding, the proximal operator of threshold * |.|_1.
Matrix SoftThreshold(const Matrix& m, double threshold);

// Proximal gradient descent on
//
//   CE(M(E'), target) + lambda * sum_j |e'_j - e_j|_1
//
// starting from E'_0 = E. Each step takes a gradient step on the
// cross-entropy and soft-thresholds the displacement E' - E. All K steps
// are kept; there is no early stopping.
absl::StatusOr<Trajectory> OptimizeEmbeddings(const DifferentiableModel& model,
                                              const std::vector<TokenId>& ids,
                                              int target,
                                              const OptimizerOptions& options);

}  // namespace closs

#endif  // CLOSS_LATENT_OPTIMIZER_H_
