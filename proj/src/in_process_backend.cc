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

#include "closs/in_process_backend.h"

#include <utility>

#include "closs/candidates.h"
#include "closs/status_macros.h"

namespace closs {

InProcessBackend::InProcessBackend(
    std::shared_ptr<const DifferentiableModel> model, OptimizerOptions optimizer)
    : model_(std::move(model)), optimizer_(optimizer) {}

absl::StatusOr<std::vector<ClassScore>> InProcessBackend::DoPredictBatch(
    const std::vector<std::vector<TokenId>>& batch) {
  std::vector<ClassScore> scores;
  scores.reserve(batch.size());
  for (const auto& ids : batch) {
    ASSIGN_OR_RETURN(Matrix e, model_->Embed(ids));
    ASSIGN_OR_RETURN(double p, model_->Score(e));
    scores.push_back(ClassScore::Clamped(p));
  }
  return scores;
}

absl::StatusOr<SaliencyVector> InProcessBackend::DoSaliency(
    const std::vector<TokenId>& ids) {
  ASSIGN_OR_RETURN(Matrix e, model_->Embed(ids));
  ASSIGN_OR_RETURN(Matrix grad, model_->ScoreGradient(e));
  return SaliencyFromGradient(grad, e);
}

absl::StatusOr<CandidateProposal> InProcessBackend::DoProposeCandidates(
    const std::vector<TokenId>& ids, int target, std::size_t k,
    ProposalMode mode) {
  if (mode == ProposalMode::kOriginalEmbedding) {
    ASSIGN_OR_RETURN(Matrix e, model_->Embed(ids));
    ASSIGN_OR_RETURN(Matrix logits, model_->LmLogits(e, LmHeadKind::kRetrained));
    return TopKCandidates(logits, ids, model_->vocab_size(), k);
  }
  OptimizerOptions options = optimizer_;
  options.steps = k;
  ASSIGN_OR_RETURN(Trajectory traj, OptimizeEmbeddings(*model_, ids, target, options));
  const LmHeadKind head = mode == ProposalMode::kUntrainedHead
                              ? LmHeadKind::kUntrained
                              : LmHeadKind::kRetrained;
  return GenerateCandidates(traj, *model_, head, ids, k);
}

}  // namespace closs
