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

#include "closs/latent_optimizer.h"

#include <cmath>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"

namespace closs {

Matrix SoftThreshold(const Matrix& m, double threshold) {
  return m.unaryExpr([threshold](double v) {
    const double shrunk = std::abs(v) - threshold;
    return shrunk > 0 ? std::copysign(shrunk, v) : 0.0;
  });
}

absl::StatusOr<Trajectory> OptimizeEmbeddings(const DifferentiableModel& model,
                                              const std::vector<TokenId>& ids,
                                              int target,
                                              const OptimizerOptions& options) {
  if (options.steps < 1) return absl::InvalidArgumentError("K must be >= 1");
  if (!(options.step_size > 0)) {
    return absl::InvalidArgumentError("step_size must be positive");
  }
  if (!(options.lambda >= 0)) {
    return absl::InvalidArgumentError("lambda must be non-negative");
  }
  Trajectory traj;
  ASSIGN_OR_RETURN(traj.origin, model.Embed(ids));
  traj.steps.reserve(options.steps);
  traj.losses.reserve(options.steps);

  const double threshold = options.step_size * options.lambda;
  Matrix current = traj.origin;
  ASSIGN_OR_RETURN(LossAndGradient ce, model.CrossEntropyGradient(current, target));
  for (std::size_t k = 1; k <= options.steps; ++k) {
    const Matrix moved = current - options.step_size * ce.gradient;
    current = traj.origin + SoftThreshold(moved - traj.origin, threshold);

    // Loss at E'_k; its gradient drives step k + 1.
    ASSIGN_OR_RETURN(ce, model.CrossEntropyGradient(current, target));
    const double l1 = (current - traj.origin).cwiseAbs().sum();
    // lambda may be +inf, in which case the displacement is exactly zero.
    const double loss = ce.loss + (l1 == 0.0 ? 0.0 : options.lambda * l1);
    if (!std::isfinite(loss) || !current.allFinite()) {
      return absl::InternalError(absl::StrCat("optimization diverged at step ", k));
    }
    traj.steps.push_back(current);
    traj.losses.push_back(loss);
  }
  return traj;
}

}  // namespace closs
