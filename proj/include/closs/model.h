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

#ifndef CLOSS_MODEL_H_
#define CLOSS_MODEL_H_

#include <cstddef>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "closs/corpus.h"

namespace closs {

// Row t of an embedding matrix is the embedding of position t (n x d).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LmHeadKind {
  kRetrained,  // fit on the target corpus through the classifier's encoder
  kUntrained,  // random initialization; the RTL ablation
};

struct LossAndGradient {
  double loss = 0.0;
  Matrix gradient;
};

// A classifier whose score is differentiable with respect to its input
// embeddings. This is the "gradient-capable" side of a backend: the latent
// optimizer, saliency and HotFlip all run against it.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t embedding_dim() const = 0;
  // |V| x d.
  virtual const Matrix& embedding_table() const = 0;

  absl::StatusOr<Matrix> Embed(const std::vector<TokenId>& ids) const;

  // p(y = 1 | E), not clamped.
  virtual absl::StatusOr<double> Score(const Matrix& embeddings) const = 0;
  // d p(y = 1) / dE, n x d.
  virtual absl::StatusOr<Matrix> ScoreGradient(
      const Matrix& embeddings) const = 0;
  // Binary cross-entropy of the score against `target` and its gradient.
  virtual absl::StatusOr<LossAndGradient> CrossEntropyGradient(
      const Matrix& embeddings, int target) const = 0;

  virtual bool HasLmHead(LmHeadKind kind) const = 0;
  // |V| x n token logits from the encoder states of `embeddings`.
  virtual absl::StatusOr<Matrix> LmLogits(const Matrix& embeddings,
                                          LmHeadKind kind) const = 0;
};

}  // namespace closs

#endif  // CLOSS_MODEL_H_
