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

#include "closs/gateway.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"

namespace closs {

ClassScore ClassScore::Clamped(double p) {
  return {std::clamp(p, kEpsilon, 1.0 - kEpsilon)};
}

std::string_view ProposalModeName(ProposalMode mode) {
  switch (mode) {
    case ProposalMode::kTrajectory:
      return "trajectory";
    case ProposalMode::kOriginalEmbedding:
      return "original";
    case ProposalMode::kUntrainedHead:
      return "untrained-head";
  }
  return "trajectory";
}

absl::StatusOr<ProposalMode> ParseProposalMode(std::string_view name) {
  for (ProposalMode mode : {ProposalMode::kTrajectory, ProposalMode::kOriginalEmbedding,
                            ProposalMode::kUntrainedHead}) {
    if (ProposalModeName(mode) == name) return mode;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown proposal mode '", std::string(name), "'"));
}

absl::StatusOr<ClassScore> ClassifierBackend::Predict(
    const std::vector<TokenId>& ids) {
  ASSIGN_OR_RETURN(std::vector<ClassScore> scores, PredictBatch({ids}));
  return scores.front();
}

absl::StatusOr<std::vector<ClassScore>> ClassifierBackend::PredictBatch(
    const std::vector<std::vector<TokenId>>& batch) {
  if (batch.empty()) return std::vector<ClassScore>{};
  ASSIGN_OR_RETURN(std::vector<ClassScore> scores, DoPredictBatch(batch));
  if (scores.size() != batch.size()) {
    return absl::InternalError(absl::StrCat("backend returned ", scores.size(),
                                            " scores for ", batch.size(), " inputs"));
  }
  counter_.AddForward(batch.size());
  return scores;
}

absl::StatusOr<SaliencyVector> ClassifierBackend::Saliency(
    const std::vector<TokenId>& ids) {
  ASSIGN_OR_RETURN(SaliencyVector scores, DoSaliency(ids));
  if (scores.size() != ids.size()) {
    return absl::InternalError("saliency length does not match input length");
  }
  for (double& s : scores) {
    if (!std::isfinite(s) || s < 0) {
      return absl::InternalError("saliency scores must be finite and non-negative");
    }
  }
  counter_.AddGradient(1);
  return scores;
}

absl::StatusOr<CandidateProposal> ClassifierBackend::ProposeCandidates(
    const std::vector<TokenId>& ids, int target, std::size_t k,
    ProposalMode mode) {
  if (k < 1) return absl::InvalidArgumentError("K must be >= 1");
  if (target != 0 && target != 1) {
    return absl::InvalidArgumentError("target must be 0 or 1");
  }
  ASSIGN_OR_RETURN(CandidateProposal proposal, DoProposeCandidates(ids, target, k, mode));
  if (proposal.per_position.size() != ids.size()) {
    return absl::InternalError("proposal length does not match input length");
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::vector<TokenId> sorted = proposal.per_position[t];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        std::binary_search(sorted.begin(), sorted.end(), ids[t]) ||
        std::binary_search(sorted.begin(), sorted.end(), Vocab::kUnkId)) {
      return absl::InternalError(absl::StrCat(
          "malformed proposal at position ", t,
          ": duplicates, the original token or UNK"));
    }
  }
  counter_.AddGradient(mode == ProposalMode::kOriginalEmbedding ? 0 : k);
  return proposal;
}

SaliencyVector SaliencyFromGradient(const Matrix& gradient,
                                    const Matrix& embeddings) {
  const Vector norms =
      gradient.cwiseProduct(embeddings).rowwise().squaredNorm();
  return SaliencyVector(norms.data(), norms.data() + norms.size());
}

}  // namespace closs
