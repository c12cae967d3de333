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

#ifndef CLOSS_AUDIT_H_
#define CLOSS_AUDIT_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/gateway.h"
#include "closs/shapley.h"

namespace closs {

// The pieces of one input's Shapley game, built the same way the search
// builds them: saliency filter, proposal, empty-list locations dropped.
struct ShapleyInstance {
  CoalitionGame game;
  CandidateProposal proposal;
  std::vector<std::size_t> locations;
  std::size_t coalition_size = 1;
  std::vector<Substitution> universe;
};

// `max_candidates` > 0 truncates every candidate list, which keeps the
// instance within reach of the oracle.
absl::StatusOr<ShapleyInstance> PrepareShapleyInstance(const TokenSequence& x,
                                                       double c_max, std::size_t k,
                                                       std::size_t max_candidates,
                                                       ClassifierBackend& backend);

struct AuditOptions {
  std::vector<std::size_t> ws = {1, 2, 5, 10, 50};
  std::size_t seeds = 100;
  std::size_t k = 30;
  double c_max = 0.15;
  std::size_t max_candidates = 0;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::kRandom;
};

struct AuditRow {
  std::size_t w = 0;
  std::size_t budget = 0;  // coalitions per run
  double mean_spearman = 0.0;
  double min_spearman = 0.0;
  double max_spearman = 0.0;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  ShapleyTable oracle;
  std::size_t locations = 0;
  std::size_t universe = 0;
};

// Sampled SV at each w against the brute-force oracle, as Spearman rank
// correlation over the substitution universe. Run r at width w uses seed
// DeriveSeed(options.seed, r). Fails when the oracle guard is exceeded.
absl::StatusOr<AuditReport> RunShapleyAudit(const TokenSequence& x,
                                            const AuditOptions& options,
                                            ClassifierBackend& backend);

// Correlation of an estimate with the oracle, over the oracle's keys.
double RankAgreement(const ShapleyTable& estimate, const ShapleyTable& oracle);

}  // namespace closs

#endif  // CLOSS_AUDIT_H_
