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

#ifndef CLOSS_SHAPLEY_H_
#define CLOSS_SHAPLEY_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/gateway.h"

namespace closs {

// floor(x + 0.5), tolerant of products like 0.5 * 0.15 * 100 landing a
// hair below the half.
std::size_t RoundHalfUp(double x);

// max(1, round(c_max * n)) clamped to n: the number of salient locations
// kept, and also the edit budget / search depth.
std::size_t EditBudget(double c_max, std::size_t n);

// The EditBudget(c_max, n) most salient positions in descending saliency
// order; ties go to the lower position.
std::vector<std::size_t> FilterLocations(const SaliencyVector& saliency,
                                         double c_max);

// max(1, round(0.5 * c_max * n)), clamped to `filtered` locations.
std::size_t CoalitionSize(double c_max, std::size_t n, std::size_t filtered);

// Every (location, candidate) pair, following the order of `locations` and
// then proposal order.
std::vector<Substitution> SubstitutionUniverse(
    const CandidateProposal& proposal, const std::vector<std::size_t>& locations);

struct CoalitionSample {
  Coalition coalition;
  double value = 0.0;
};

// Coalition values V(L) for one input. V(L) = M(X_L) - M(X) when the
// original prediction is class 0 and M(X) - M(X_L) otherwise, so a
// positive value always moves toward the flip.
class CoalitionGame {
 public:
  CoalitionGame(std::vector<TokenId> input, ClassScore base)
      : input_(std::move(input)), base_(base) {}

  // Queries M(X) once.
  static absl::StatusOr<CoalitionGame> Create(const std::vector<TokenId>& input,
                                              ClassifierBackend& backend);

  const std::vector<TokenId>& input() const { return input_; }
  ClassScore base() const { return base_; }
  int original_label() const { return base_.Label(); }

  double ValueOf(ClassScore score) const;
  // One predict_batch call; one forward query per coalition.
  absl::StatusOr<std::vector<double>> Values(const std::vector<Coalition>& coalitions,
                                             ClassifierBackend& backend) const;

 private:
  std::vector<TokenId> input_;
  ClassScore base_;
};

enum class SamplingMode {
  kRandom,     // `budget` independent draws
  kEnumerate,  // every size-c_s coalition exactly once; budget ignored
};

struct SamplingOptions {
  std::size_t coalition_size = 1;
  std::size_t budget = 1;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::kRandom;
};

// Each random draw picks c_s distinct locations uniformly, then one
// candidate uniformly from each location's list. Issues exactly one
// forward query per draw.
absl::StatusOr<std::vector<CoalitionSample>> SampleCoalitions(
    const CoalitionGame& game, const CandidateProposal& proposal,
    const std::vector<std::size_t>& locations, const SamplingOptions& options,
    ClassifierBackend& backend);

// Number of conflict-free coalitions of size c_s over `locations`.
double CountCoalitions(const CandidateProposal& proposal,
                       const std::vector<std::size_t>& locations,
                       std::size_t coalition_size);

struct ShapleyEstimate {
  double sv = 0.0;
  std::size_t hits = 0;
  // Every sample contained this substitution; the "without" mean was taken
  // as 0.
  bool in_every_sample = false;
};

struct ShapleyTable {
  std::map<Substitution, ShapleyEstimate> estimates;
  std::size_t coalition_size = 0;
  std::vector<CoalitionSample> samples;

  // Substitutions by descending SV, then lower location, then lower token.
  std::vector<Substitution> Ranked() const;
};

// SV(s) = mean V over samples containing s - mean V over samples without
// s. Substitutions never sampled get SV = 0 and hits = 0.
absl::StatusOr<ShapleyTable> EstimateSv(std::vector<CoalitionSample> samples,
                                        const std::vector<Substitution>& universe);

inline constexpr double kOracleCoalitionLimit = 200000;

// Exact SV by enumerating every conflict-free size-c_s coalition.
absl::StatusOr<ShapleyTable> BruteForceSv(const CoalitionGame& game,
                                          const CandidateProposal& proposal,
                                          const std::vector<std::size_t>& locations,
                                          std::size_t coalition_size,
                                          ClassifierBackend& backend);

// JSONL audit lines: {"locs":[...],"tokens":[...],"value":v}.
absl::Status WriteCoalitionAudit(const std::string& path,
                                 const std::vector<CoalitionSample>& samples,
                                 const Vocab* vocab = nullptr);

// Spearman rank correlation with average ranks for ties. Returns 1 when
// both inputs are constant, 0 when exactly one is.
double SpearmanCorrelation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace closs

#endif  // CLOSS_SHAPLEY_H_
