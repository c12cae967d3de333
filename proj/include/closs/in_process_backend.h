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

#ifndef CLOSS_IN_PROCESS_BACKEND_H_
#define CLOSS_IN_PROCESS_BACKEND_H_

#include <memory>
#include <vector>

#include "closs/gateway.h"
#include "closs/latent_optimizer.h"
#include "closs/model.h"

namespace closs {

// Runs every capability directly against a DifferentiableModel. `propose`
// optimizes the input embeddings for K steps and reads candidates off the
// trajectory with the model's LM head.
class InProcessBackend : public ClassifierBackend {
 public:
  InProcessBackend(std::shared_ptr<const DifferentiableModel> model,
                   OptimizerOptions optimizer = {});

  const DifferentiableModel* differentiable() const override { return model_.get(); }
  const OptimizerOptions& optimizer() const { return optimizer_; }

 protected:
  absl::StatusOr<std::vector<ClassScore>> DoPredictBatch(
      const std::vector<std::vector<TokenId>>& batch) override;
  absl::StatusOr<SaliencyVector> DoSaliency(const std::vector<TokenId>& ids) override;
  absl::StatusOr<CandidateProposal> DoProposeCandidates(
      const std::vector<TokenId>& ids, int target, std::size_t k,
      ProposalMode mode) override;

 private:
  std::shared_ptr<const DifferentiableModel> model_;
  OptimizerOptions optimizer_;
};

}  // namespace closs

#endif  // CLOSS_IN_PROCESS_BACKEND_H_
