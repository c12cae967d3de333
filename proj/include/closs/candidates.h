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

#ifndef CLOSS_CANDIDATES_H_
#define CLOSS_CANDIDATES_H_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/gateway.h"
#include "closs/latent_optimizer.h"
#include "closs/model.h"

namespace closs {

// Online masked-argmax selection over a sequence of |V| x n logit
// matrices. At step k every position t gains the highest-logit token not
// yet selected there, excluding x_t and UNK; ties go to the lowest id.
// A position stops growing once every token other than x_t and UNK has
// been selected: |V| - 2 of them, or |V| - 1 when x_t is UNK.
class CandidateSelector {
 public:
  CandidateSelector(std::vector<TokenId> original, std::size_t vocab_size);

  absl::Status AddStep(const Matrix& logits);
  const CandidateProposal& proposal() const { return proposal_; }
  std::size_t steps() const { return steps_; }

 private:
  std::vector<TokenId> original_;
  std::size_t vocab_size_;
  std::vector<std::vector<bool>> taken_;
  CandidateProposal proposal_;
  std::size_t steps_ = 0;
};

// Runs the selector over `logits` in order. Fails unless logits.size() == k.
absl::StatusOr<CandidateProposal> GenerateCandidates(
    const std::vector<Matrix>& logits, const std::vector<TokenId>& original,
    std::size_t vocab_size, std::size_t k);

// Feeds each trajectory step through the encoder and the chosen LM head.
absl::StatusOr<CandidateProposal> GenerateCandidates(
    const Trajectory& trajectory, const DifferentiableModel& model,
    LmHeadKind head, const std::vector<TokenId>& original, std::size_t k);

// Top-k masked logits of a single matrix; identical to running the
// selector on k copies of it.
absl::StatusOr<CandidateProposal> TopKCandidates(
    const Matrix& logits, const std::vector<TokenId>& original,
    std::size_t vocab_size, std::size_t k);

// JSONL debug dump: {"position": t, "candidates": [{"token": s, "step": k}]}.
absl::Status WriteCandidateDump(const std::string& path,
                                const CandidateProposal& proposal,
                                const Vocab& vocab);

}  // namespace closs

#endif  // CLOSS_CANDIDATES_H_
