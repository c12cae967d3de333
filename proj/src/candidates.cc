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

#include "closs/candidates.h"

#include <fstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"
#include "json.hpp"

namespace closs {

CandidateSelector::CandidateSelector(std::vector<TokenId> original,
                                     std::size_t vocab_size)
    : original_(std::move(original)), vocab_size_(vocab_size) {
  const std::size_t n = original_.size();
  taken_.assign(n, std::vector<bool>(vocab_size_, false));
  proposal_.per_position.resize(n);
  proposal_.steps.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    taken_[t][Vocab::kUnkId] = true;
    if (original_[t] >= 0 && static_cast<std::size_t>(original_[t]) < vocab_size_) {
      taken_[t][original_[t]] = true;
    }
  }
}

absl::Status CandidateSelector::AddStep(const Matrix& logits) {
  const std::size_t n = original_.size();
  if (static_cast<std::size_t>(logits.rows()) != vocab_size_ ||
      static_cast<std::size_t>(logits.cols()) != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "logit matrix is ", logits.rows(), "x", logits.cols(), ", expected ",
        vocab_size_, "x", n));
  }
  if (!logits.allFinite()) return absl::InvalidArgumentError("non-finite logits");
  ++steps_;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<bool>& taken = taken_[t];
    int best = -1;
    for (std::size_t s = 0; s < vocab_size_; ++s) {
      if (taken[s]) continue;
      if (best < 0 || logits(s, t) > logits(best, t)) best = static_cast<int>(s);
    }
    if (best < 0) continue;
    taken[best] = true;
    proposal_.per_position[t].push_back(best);
    proposal_.steps[t].push_back(static_cast<int>(steps_));
  }
  return absl::OkStatus();
}

absl::StatusOr<CandidateProposal> GenerateCandidates(
    const std::vector<Matrix>& logits, const std::vector<TokenId>& original,
    std::size_t vocab_size, std::size_t k) {
  if (logits.size() != k) {
    return absl::InvalidArgumentError(absl::StrCat(
        "trajectory has ", logits.size(), " steps but K = ", k));
  }
  CandidateSelector selector(original, vocab_size);
  for (const Matrix& m : logits) RETURN_IF_ERROR(selector.AddStep(m));
  return selector.proposal();
}

absl::StatusOr<CandidateProposal> GenerateCandidates(
    const Trajectory& trajectory, const DifferentiableModel& model,
    LmHeadKind head, const std::vector<TokenId>& original, std::size_t k) {
  if (trajectory.steps.size() != k) {
    return absl::InvalidArgumentError(absl::StrCat(
        "trajectory has ", trajectory.steps.size(), " steps but K = ", k));
  }
  if (!model.HasLmHead(head)) {
    return absl::UnimplementedError("unsupported capability: LM head");
  }
  CandidateSelector selector(original, model.vocab_size());
  for (const Matrix& e : trajectory.steps) {
    ASSIGN_OR_RETURN(Matrix logits, model.LmLogits(e, head));
    RETURN_IF_ERROR(selector.AddStep(logits));
  }
  return selector.proposal();
}

absl::StatusOr<CandidateProposal> TopKCandidates(
    const Matrix& logits, const std::vector<TokenId>& original,
    std::size_t vocab_size, std::size_t k) {
  CandidateSelector selector(original, vocab_size);
  for (std::size_t i = 0; i < k; ++i) RETURN_IF_ERROR(selector.AddStep(logits));
  return selector.proposal();
}

absl::Status WriteCandidateDump(const std::string& path,
                                const CandidateProposal& proposal,
                                const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (std::size_t t = 0; t < proposal.per_position.size(); ++t) {
    nlohmann::json candidates = nlohmann::json::array();
    for (std::size_t i = 0; i < proposal.per_position[t].size(); ++i) {
      nlohmann::json c = {{"token", vocab.Token(proposal.per_position[t][i])}};
      if (t < proposal.steps.size() && i < proposal.steps[t].size()) {
        c["step"] = proposal.steps[t][i];
      }
      candidates.push_back(std::move(c));
    }
    out << nlohmann::json{{"position", t}, {"candidates", candidates}}.dump() << '\n';
  }
  return absl::OkStatus();
}

}  // namespace closs
