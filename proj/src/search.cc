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

#include "closs/search.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <utility>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"

namespace closs {
namespace {

struct Node {
  Coalition subset;  // canonical
  double score = 0.0;
};

bool TouchesLocation(const Coalition& subset, std::size_t location) {
  return std::any_of(subset.begin(), subset.end(),
                     [&](const Substitution& s) { return s.location == location; });
}

Coalition With(const Coalition& subset, const Substitution& s) {
  Coalition out = subset;
  out.insert(std::upper_bound(out.begin(), out.end(), s), s);
  return out;
}

std::vector<TokenId> Applied(const std::vector<TokenId>& input, const Coalition& subset) {
  std::vector<TokenId> ids = input;
  for (const Substitution& s : subset) ids[s.location] = s.token;
  return ids;
}

void KeepTop(std::vector<Node>& nodes, std::size_t width) {
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const Node& a, const Node& b) { return a.score > b.score; });
  if (nodes.size() > width) nodes.resize(width);
}

TokenSequence Counterfactual(const TokenSequence& x, std::vector<TokenId> ids,
                             int target) {
  TokenSequence out;
  out.ids = std::move(ids);
  out.label = target;
  out.line = x.line;
  return out;
}

}  // namespace

std::string_view StrategyName(Strategy strategy) {
  switch (strategy) {
    case Strategy::kCloss:
      return "CLOSS";
    case Strategy::kClossSv:
      return "CLOSS-SV";
    case Strategy::kClossEo:
      return "CLOSS-EO";
    case Strategy::kClossRtl:
      return "CLOSS-RTL";
    case Strategy::kHotflipD:
      return "HotFlip-D";
    case Strategy::kHotflipO:
      return "HotFlip-O";
  }
  return "CLOSS";
}

absl::StatusOr<Strategy> ParseStrategy(std::string_view name) {
  std::string lowered;
  for (char c : name) {
    lowered.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(
                                           static_cast<unsigned char>(c))));
  }
  for (Strategy s : kAllStrategies) {
    std::string canonical;
    for (char c : StrategyName(s)) {
      canonical.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (canonical == lowered) return s;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown strategy '", std::string(name), "'"));
}

absl::Status SearchConfig::Validate() const {
  if (k < 1) return absl::InvalidArgumentError("K must be >= 1");
  if (w < 1) return absl::InvalidArgumentError("w must be >= 1");
  if (beam_width < 1) return absl::InvalidArgumentError("beam width must be >= 1");
  if (!(c_max > 0.0 && c_max <= 1.0)) {
    return absl::InvalidArgumentError("C_max must be in (0, 1]");
  }
  return absl::OkStatus();
}

absl::StatusOr<SearchResult> BeamSearch(const CoalitionGame& game,
                                        const std::vector<Substitution>& ranked,
                                        const BeamOptions& options,
                                        ClassifierBackend& backend) {
  const std::vector<TokenId>& input = game.input();
  const double n = static_cast<double>(input.size());
  SearchResult result;
  result.target = 1 - game.original_label();
  result.p_before = game.base().p1;
  result.p_after = game.base().p1;
  if (ranked.empty() || options.beam_width == 0) return result;

  std::set<Coalition> seen = {Coalition{}};
  std::vector<Node> beam = {Node{}};
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t depth = 1; depth <= options.max_depth; ++depth) {
    std::vector<Coalition> successors;
    for (const Node& node : beam) {
      std::size_t added = 0;
      for (const Substitution& s : ranked) {
        if (added == options.beam_width) break;
        if (TouchesLocation(node.subset, s.location)) continue;
        Coalition child = With(node.subset, s);
        if (!seen.insert(child).second) continue;
        successors.push_back(std::move(child));
        ++added;
      }
    }
    if (successors.empty()) break;
    result.nodes_expanded += beam.size();

    std::vector<std::vector<TokenId>> batch;
    batch.reserve(successors.size());
    for (const Coalition& c : successors) batch.push_back(Applied(input, c));
    ASSIGN_OR_RETURN(std::vector<ClassScore> scores, backend.PredictBatch(batch));

    std::vector<Node> next;
    next.reserve(successors.size());
    for (std::size_t i = 0; i < successors.size(); ++i) {
      if (scores[i].Label() == result.target) {
        result.success = true;
        result.substitutions = successors[i];
        result.p_after = scores[i].p1;
        TokenSequence cf;
        cf.ids = std::move(batch[i]);
        cf.label = result.target;
        result.counterfactual = std::move(cf);
        return result;
      }
      const double score = scores[i].ProbabilityOf(result.target) -
                           static_cast<double>(successors[i].size()) / n;
      if (score > best_score) {
        best_score = score;
        result.p_after = scores[i].p1;
      }
      next.push_back({std::move(successors[i]), score});
    }
    KeepTop(next, options.beam_width);
    beam = std::move(next);
  }
  return result;
}

absl::StatusOr<SearchResult> Hotflip(const TokenSequence& x, const SearchConfig& config,
                                     ClassifierBackend& backend) {
  RETURN_IF_ERROR(config.Validate());
  const DifferentiableModel* model = backend.differentiable();
  if (model == nullptr) {
    return absl::UnimplementedError("unsupported capability: HotFlip needs gradients");
  }
  const bool optimized = config.strategy == Strategy::kHotflipO;
  const std::size_t width = optimized ? kHotflipOptimizedBeam : kHotflipDefaultBeam;

  ASSIGN_OR_RETURN(CoalitionGame game, CoalitionGame::Create(x.ids, backend));
  SearchResult result;
  result.target = 1 - game.original_label();
  result.p_before = game.base().p1;
  result.p_after = game.base().p1;

  ASSIGN_OR_RETURN(Matrix e, model->Embed(x.ids));
  ASSIGN_OR_RETURN(Matrix grad, model->ScoreGradient(e));
  result.gradient_queries = 1;
  if (result.target == 0) grad = -grad;

  // gains(v, t) = g_t . emb(v) - g_t . e_t
  const Matrix& table = model->embedding_table();
  Matrix gains = table * grad.transpose();
  const Vector base_dot = grad.cwiseProduct(e).rowwise().sum();
  gains.rowwise() -= base_dot.transpose();

  const std::size_t n = x.ids.size();
  std::vector<std::pair<Substitution, double>> flips;
  for (std::size_t t = 0; t < n; ++t) {
    for (Eigen::Index v = 0; v < gains.rows(); ++v) {
      if (v == Vocab::kUnkId || v == x.ids[t]) continue;
      flips.push_back({{t, static_cast<TokenId>(v)}, gains(v, t)});
    }
  }
  // Flips are generated in (location, token) order; stable sort keeps it
  // as the tie-break.
  std::stable_sort(flips.begin(), flips.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const std::size_t max_depth = EditBudget(config.c_max, n);
  std::set<Coalition> seen = {Coalition{}};
  std::vector<Node> beam = {Node{}};
  for (std::size_t depth = 1; depth <= max_depth; ++depth) {
    std::vector<Node> children;
    for (const Node& parent : beam) {
      std::vector<bool> used(n, false);
      std::size_t added = 0;
      for (const auto& [s, gain] : flips) {
        if (added == width) break;
        if (TouchesLocation(parent.subset, s.location)) continue;
        if (optimized && used[s.location]) continue;
        Coalition child = With(parent.subset, s);
        if (!seen.insert(child).second) continue;
        used[s.location] = true;
        children.push_back({std::move(child), parent.score + gain});
        ++added;
      }
    }
    if (children.empty()) break;
    result.nodes_expanded += beam.size();
    KeepTop(children, width);
    beam = std::move(children);

    std::vector<std::vector<TokenId>> batch;
    batch.reserve(beam.size());
    for (const Node& node : beam) batch.push_back(Applied(x.ids, node.subset));
    ASSIGN_OR_RETURN(std::vector<ClassScore> scores, backend.PredictBatch(batch));
    for (std::size_t i = 0; i < beam.size(); ++i) {
      if (scores[i].Label() == result.target) {
        result.success = true;
        result.substitutions = beam[i].subset;
        result.p_after = scores[i].p1;
        result.counterfactual = Counterfactual(x, std::move(batch[i]), result.target);
        return result;
      }
    }
    result.p_after = scores.front().p1;
  }
  return result;
}

absl::StatusOr<SearchResult> RunStrategy(const TokenSequence& x,
                                         const SearchConfig& config,
                                         ClassifierBackend& backend) {
  RETURN_IF_ERROR(config.Validate());
  if (x.ids.empty()) return absl::InvalidArgumentError("empty input");
  MeteredBackend meter(backend);
  SearchResult result;
  if (config.strategy == Strategy::kHotflipD || config.strategy == Strategy::kHotflipO) {
    ASSIGN_OR_RETURN(result, Hotflip(x, config, meter));
    result.queries = meter.counter().forward();
    return result;
  }

  const std::size_t n = x.ids.size();
  ASSIGN_OR_RETURN(CoalitionGame game, CoalitionGame::Create(x.ids, meter));
  const int target = 1 - game.original_label();

  ASSIGN_OR_RETURN(SaliencyVector saliency, meter.Saliency(x.ids));
  std::vector<std::size_t> locations =
      FilterLocations(saliency, config.everything_salient ? 1.0 : config.c_max);

  ProposalMode mode = ProposalMode::kTrajectory;
  if (config.strategy == Strategy::kClossEo) mode = ProposalMode::kOriginalEmbedding;
  if (config.strategy == Strategy::kClossRtl) mode = ProposalMode::kUntrainedHead;
  ASSIGN_OR_RETURN(CandidateProposal proposal,
                   meter.ProposeCandidates(x.ids, target, config.k, mode));
  std::erase_if(locations, [&](std::size_t loc) {
    return proposal.per_position[loc].empty();
  });

  std::vector<Substitution> ranked;
  std::uint64_t sampling_queries = 0;
  if (config.strategy == Strategy::kClossSv) {
    ranked = SubstitutionUniverse(proposal, locations);
  } else if (!locations.empty()) {
    const std::size_t c_s = CoalitionSize(config.c_max, n, locations.size());
    double w = static_cast<double>(config.w);
    if (config.scale_w_with_universe) {
      w *= static_cast<double>(locations.size()) /
           static_cast<double>(EditBudget(config.c_max, n));
    }
    SamplingOptions sampling;
    sampling.coalition_size = c_s;
    sampling.budget = std::max<std::size_t>(
        1, RoundHalfUp(2.0 * w * static_cast<double>(config.k)));
    sampling.seed = config.seed;
    const std::uint64_t before = meter.counter().forward();
    ASSIGN_OR_RETURN(std::vector<CoalitionSample> samples,
                     SampleCoalitions(game, proposal, locations, sampling, meter));
    sampling_queries = meter.counter().forward() - before;
    ASSIGN_OR_RETURN(ShapleyTable table,
                     EstimateSv(std::move(samples),
                                SubstitutionUniverse(proposal, locations)));
    ranked = table.Ranked();
  }

  BeamOptions beam;
  beam.beam_width = config.beam_width;
  beam.max_depth = EditBudget(config.c_max, n);
  ASSIGN_OR_RETURN(result, BeamSearch(game, ranked, beam, meter));
  if (result.counterfactual) result.counterfactual->line = x.line;
  result.sampling_queries = sampling_queries;
  result.queries = meter.counter().forward();
  result.gradient_queries = meter.counter().gradient();
  result.trajectory_steps = mode == ProposalMode::kOriginalEmbedding ? 0 : config.k;
  return result;
}

}  // namespace closs
