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

#ifndef CLOSS_SEARCH_H_
#define CLOSS_SEARCH_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/gateway.h"
#include "closs/shapley.h"

namespace closs {

enum class Strategy {
  kCloss,     // full pipeline
  kClossSv,   // saliency ordering instead of Shapley values
  kClossEo,   // candidates from the original embedding only
  kClossRtl,  // untrained LM head
  kHotflipD,  // gradient surrogate, beam 10
  kHotflipO,  // gradient surrogate, beam 100, distinct-location children
};

inline constexpr Strategy kAllStrategies[] = {
    Strategy::kCloss,    Strategy::kClossSv,  Strategy::kClossEo,
    Strategy::kClossRtl, Strategy::kHotflipD, Strategy::kHotflipO};

// "CLOSS", "CLOSS-SV", ... as used in reports.
std::string_view StrategyName(Strategy strategy);
// Accepts report names and the lowercase CLI spelling ("closs-sv").
absl::StatusOr<Strategy> ParseStrategy(std::string_view name);

inline constexpr std::size_t kUnboundedBeam = std::numeric_limits<std::size_t>::max();

struct SearchConfig {
  std::size_t k = 30;
  std::size_t w = 5;
  std::size_t beam_width = 15;
  double c_max = 0.15;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::kCloss;
  // Scale w by (universe locations / default filtered locations).
  bool scale_w_with_universe = false;
  // Skip saliency filtering: every position is a candidate location.
  bool everything_salient = false;

  absl::Status Validate() const;
};

inline constexpr std::size_t kHotflipDefaultBeam = 10;
inline constexpr std::size_t kHotflipOptimizedBeam = 100;

struct SearchResult {
  bool success = false;
  std::optional<TokenSequence> counterfactual;
  Coalition substitutions;
  int target = 1;
  double p_before = 0.5;  // p(y = 1) on the input
  double p_after = 0.5;   // p(y = 1) on the counterfactual, or best node
  std::uint64_t queries = 0;           // forward queries, base included
  std::uint64_t gradient_queries = 0;
  std::uint64_t sampling_queries = 0;  // coalition evaluations
  std::size_t nodes_expanded = 0;
  std::size_t trajectory_steps = 0;
};

struct BeamOptions {
  std::size_t beam_width = 15;
  std::size_t max_depth = 1;
};

// Breadth-first beam search over conflict-free subsets of `ranked`.
// Successors of a node add one substitution each, taken in `ranked` order,
// skipping location collisions and any subset already generated in this
// search. A level's successors are scored in one batch; the first one
// classified as the target ends the search. Otherwise the beam keeps the
// top `beam_width` by p(target) - |subset| / n.
absl::StatusOr<SearchResult> BeamSearch(const CoalitionGame& game,
                                        const std::vector<Substitution>& ranked,
                                        const BeamOptions& options,
                                        ClassifierBackend& backend);

// HotFlip baselines driven by a first-order surrogate: substitution (t, v)
// gains g_t . (emb(v) - e_t), with g_t the gradient of p(target) at the
// input, and a subset's value is the sum of its members' gains. The true
// model is only asked whether beam members flip.
absl::StatusOr<SearchResult> Hotflip(const TokenSequence& x, const SearchConfig& config,
                                     ClassifierBackend& backend);

// Runs one strategy end to end on a single input. Query counts are exact
// for this call even when `backend` is shared.
absl::StatusOr<SearchResult> RunStrategy(const TokenSequence& x,
                                         const SearchConfig& config,
                                         ClassifierBackend& backend);

}  // namespace closs

#endif  // CLOSS_SEARCH_H_
