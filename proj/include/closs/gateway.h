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

#ifndef CLOSS_GATEWAY_H_
#define CLOSS_GATEWAY_H_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/model.h"

namespace closs {

// p(y = 1 | x), clamped into [1e-12, 1 - 1e-12].
struct ClassScore {
  static constexpr double kEpsilon = 1e-12;

  double p1 = 0.5;

  static ClassScore Clamped(double p);
  int Label() const { return p1 > 0.5 ? 1 : 0; }
  double ProbabilityOf(int label) const { return label == 1 ? p1 : 1.0 - p1; }
};

// Ordered candidate replacement tokens per position. steps[t][i] records
// the optimization step that proposed per_position[t][i], when known.
struct CandidateProposal {
  std::vector<std::vector<TokenId>> per_position;
  std::vector<std::vector<int>> steps;

  std::size_t size() const { return per_position.size(); }
};

using SaliencyVector = std::vector<double>;

// How `propose` builds its logit matrices.
enum class ProposalMode {
  kTrajectory,         // K optimization steps, retrained head
  kOriginalEmbedding,  // no optimization, logits of E only (EO ablation)
  kUntrainedHead,      // K optimization steps, untrained head (RTL ablation)
};

std::string_view ProposalModeName(ProposalMode mode);
absl::StatusOr<ProposalMode> ParseProposalMode(std::string_view name);

struct QueryCounts {
  std::uint64_t forward = 0;
  std::uint64_t gradient = 0;
};

class QueryCounter {
 public:
  void AddForward(std::uint64_t n) { forward_.fetch_add(n, std::memory_order_relaxed); }
  void AddGradient(std::uint64_t n) { gradient_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t forward() const { return forward_.load(std::memory_order_relaxed); }
  std::uint64_t gradient() const { return gradient_.load(std::memory_order_relaxed); }
  QueryCounts Snapshot() const { return {forward(), gradient()}; }

 private:
  std::atomic<std::uint64_t> forward_{0};
  std::atomic<std::uint64_t> gradient_{0};
};

// The classifier interface the whole pipeline runs against. Public calls
// do the query accounting and delegate to the Do* hooks:
//   - every single-sequence classification counts one forward query;
//   - saliency counts one gradient pass, propose counts K (0 for EO).
// Implementations must be safe for concurrent calls.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;

  absl::StatusOr<ClassScore> Predict(const std::vector<TokenId>& ids);
  absl::StatusOr<std::vector<ClassScore>> PredictBatch(
      const std::vector<std::vector<TokenId>>& batch);
  absl::StatusOr<SaliencyVector> Saliency(const std::vector<TokenId>& ids);
  absl::StatusOr<CandidateProposal> ProposeCandidates(
      const std::vector<TokenId>& ids, int target, std::size_t k,
      ProposalMode mode = ProposalMode::kTrajectory);

  // Non-null when embeddings and gradients are reachable in-process.
  virtual const DifferentiableModel* differentiable() const { return nullptr; }

  const QueryCounter& counter() const { return counter_; }

 protected:
  virtual absl::StatusOr<std::vector<ClassScore>> DoPredictBatch(
      const std::vector<std::vector<TokenId>>& batch) = 0;
  virtual absl::StatusOr<SaliencyVector> DoSaliency(
      const std::vector<TokenId>& ids) = 0;
  virtual absl::StatusOr<CandidateProposal> DoProposeCandidates(
      const std::vector<TokenId>& ids, int target, std::size_t k,
      ProposalMode mode) = 0;

 private:
  QueryCounter counter_;
};

// Forwards to another backend while keeping its own counter, so one
// search can read its exact query count while other work shares the
// underlying backend.
class MeteredBackend : public ClassifierBackend {
 public:
  explicit MeteredBackend(ClassifierBackend& inner) : inner_(inner) {}
  const DifferentiableModel* differentiable() const override {
    return inner_.differentiable();
  }

 protected:
  absl::StatusOr<std::vector<ClassScore>> DoPredictBatch(
      const std::vector<std::vector<TokenId>>& batch) override {
    return inner_.PredictBatch(batch);
  }
  absl::StatusOr<SaliencyVector> DoSaliency(const std::vector<TokenId>& ids) override {
    return inner_.Saliency(ids);
  }
  absl::StatusOr<CandidateProposal> DoProposeCandidates(
      const std::vector<TokenId>& ids, int target, std::size_t k,
      ProposalMode mode) override {
    return inner_.ProposeCandidates(ids, target, k, mode);
  }

 private:
  ClassifierBackend& inner_;
};

// scores(i) = || (d score / d e_i) (.) e_i ||_2^2.
SaliencyVector SaliencyFromGradient(const Matrix& gradient,
                                    const Matrix& embeddings);

}  // namespace closs

#endif  // CLOSS_GATEWAY_H_
