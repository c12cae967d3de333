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

#include "closs/audit.h"

#include <algorithm>
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"
#include "closs/rng.h"
#include "closs/status_macros.h"

namespace closs {

absl::StatusOr<ShapleyInstance> PrepareShapleyInstance(const TokenSequence& x,
                                                       double c_max, std::size_t k,
                                                       std::size_t max_candidates,
                                                       ClassifierBackend& backend) {
  if (x.ids.empty()) return absl::InvalidArgumentError("empty input");
  ASSIGN_OR_RETURN(CoalitionGame game, CoalitionGame::Create(x.ids, backend));
  ASSIGN_OR_RETURN(SaliencyVector saliency, backend.Saliency(x.ids));
  std::vector<std::size_t> locations = FilterLocations(saliency, c_max);
  ASSIGN_OR_RETURN(CandidateProposal proposal,
                   backend.ProposeCandidates(x.ids, 1 - game.original_label(), k));
  if (max_candidates > 0) {
    for (std::size_t t = 0; t < proposal.size(); ++t) {
      if (proposal.per_position[t].size() > max_candidates) {
        proposal.per_position[t].resize(max_candidates);
        if (t < proposal.steps.size()) proposal.steps[t].resize(max_candidates);
      }
    }
  }
  std::erase_if(locations, [&](std::size_t loc) {
    return proposal.per_position[loc].empty();
  });
  if (locations.empty()) return absl::FailedPreconditionError("no candidate locations");
  const std::size_t c_s = CoalitionSize(c_max, x.ids.size(), locations.size());
  std::vector<Substitution> universe = SubstitutionUniverse(proposal, locations);
  return ShapleyInstance{std::move(game), std::move(proposal), std::move(locations),
                         c_s, std::move(universe)};
}

double RankAgreement(const ShapleyTable& estimate, const ShapleyTable& oracle) {
  std::vector<double> a, b;
  for (const auto& [s, exact] : oracle.estimates) {
    auto it = estimate.estimates.find(s);
    a.push_back(it == estimate.estimates.end() ? 0.0 : it->second.sv);
    b.push_back(exact.sv);
  }
  return SpearmanCorrelation(a, b);
}

absl::StatusOr<AuditReport> RunShapleyAudit(const TokenSequence& x,
                                            const AuditOptions& options,
                                            ClassifierBackend& backend) {
  if (options.ws.empty()) return absl::InvalidArgumentError("no w values");
  for (std::size_t w : options.ws) {
    if (w == 0) return absl::InvalidArgumentError("w must be positive");
  }
  if (options.seeds == 0) return absl::InvalidArgumentError("seeds must be positive");
  ASSIGN_OR_RETURN(ShapleyInstance inst,
                   PrepareShapleyInstance(x, options.c_max, options.k,
                                          options.max_candidates, backend));
  const double total =
      CountCoalitions(inst.proposal, inst.locations, inst.coalition_size);
  if (total > kOracleCoalitionLimit) {
    return absl::ResourceExhaustedError(absl::StrCat(
        "instance has ", total, " coalitions, above the oracle limit of ",
        kOracleCoalitionLimit,
        "; use a shorter input, a smaller --cmax or --max-candidates"));
  }
  AuditReport report;
  report.locations = inst.locations.size();
  report.universe = inst.universe.size();
  ASSIGN_OR_RETURN(report.oracle, BruteForceSv(inst.game, inst.proposal, inst.locations,
                                               inst.coalition_size, backend));

  for (std::size_t w : options.ws) {
    AuditRow row;
    row.w = w;
    row.budget = 2 * w * options.k;
    row.min_spearman = std::numeric_limits<double>::infinity();
    row.max_spearman = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t r = 0; r < options.seeds; ++r) {
      SamplingOptions sampling;
      sampling.coalition_size = inst.coalition_size;
      sampling.budget = row.budget;
      sampling.seed = DeriveSeed(options.seed, r);
      sampling.mode = options.mode;
      ASSIGN_OR_RETURN(std::vector<CoalitionSample> samples,
                       SampleCoalitions(inst.game, inst.proposal, inst.locations,
                                        sampling, backend));
      ASSIGN_OR_RETURN(ShapleyTable table, EstimateSv(std::move(samples), inst.universe));
      const double rho = RankAgreement(table, report.oracle);
      sum += rho;
      row.min_spearman = std::min(row.min_spearman, rho);
      row.max_spearman = std::max(row.max_spearman, rho);
    }
    row.mean_spearman = sum / static_cast<double>(options.seeds);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace closs
