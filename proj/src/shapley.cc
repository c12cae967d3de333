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

#include "closs/shapley.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <utility>

#include "absl/strings/str_cat.h"
#include "closs/rng.h"
#include "closs/status_macros.h"
#include "json.hpp"

namespace closs {
namespace {

constexpr std::size_t kEvalChunk = 1024;

// Calls fn(coalition) for every conflict-free coalition of `size` drawn
// from `locations`, locations in combination order and candidates in
// mixed-radix order.
void ForEachCoalition(const CandidateProposal& proposal,
                      const std::vector<std::size_t>& locations, std::size_t size,
                      const std::function<void(const Coalition&)>& fn) {
  const std::size_t m = locations.size();
  if (size == 0 || size > m) return;
  std::vector<std::size_t> pick(size);
  std::iota(pick.begin(), pick.end(), 0);
  Coalition coalition(size);
  std::vector<std::size_t> choice(size);
  while (true) {
    bool empty = false;
    for (std::size_t i = 0; i < size; ++i) {
      empty |= proposal.per_position[locations[pick[i]]].empty();
    }
    if (!empty) {
      std::fill(choice.begin(), choice.end(), 0);
      while (true) {
        for (std::size_t i = 0; i < size; ++i) {
          const std::size_t loc = locations[pick[i]];
          coalition[i] = {loc, proposal.per_position[loc][choice[i]]};
        }
        fn(Canonical(coalition));
        bool done = true;
        for (std::size_t i = size; i-- > 0;) {
          if (++choice[i] < proposal.per_position[locations[pick[i]]].size()) {
            done = false;
            break;
          }
          choice[i] = 0;
        }
        if (done) break;
      }
    }
    // Next combination.
    std::size_t i = size;
    while (i > 0 && pick[i - 1] == m - size + (i - 1)) --i;
    if (i == 0) return;
    ++pick[i - 1];
    for (std::size_t j = i; j < size; ++j) pick[j] = pick[j - 1] + 1;
  }
}

absl::Status CheckLocations(const CandidateProposal& proposal,
                            const std::vector<std::size_t>& locations) {
  std::vector<std::size_t> sorted = locations;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    return absl::InvalidArgumentError("duplicate filtered location");
  }
  for (std::size_t loc : locations) {
    if (loc >= proposal.per_position.size()) {
      return absl::OutOfRangeError(absl::StrCat("location ", loc, " out of range"));
    }
  }
  return absl::OkStatus();
}

std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::size_t RoundHalfUp(double x) {
  if (!(x > 0)) return 0;
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

std::size_t EditBudget(double c_max, std::size_t n) {
  return std::clamp<std::size_t>(RoundHalfUp(c_max * static_cast<double>(n)), 1,
                                 std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> FilterLocations(const SaliencyVector& saliency,
                                         double c_max) {
  const std::size_t n = saliency.size();
  if (n == 0) return {};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return saliency[a] > saliency[b];
  });
  order.resize(EditBudget(c_max, n));
  return order;
}

std::size_t CoalitionSize(double c_max, std::size_t n, std::size_t filtered) {
  const std::size_t c = std::max<std::size_t>(
      1, RoundHalfUp(0.5 * c_max * static_cast<double>(n)));
  return std::min(c, std::max<std::size_t>(filtered, 1));
}

std::vector<Substitution> SubstitutionUniverse(
    const CandidateProposal& proposal, const std::vector<std::size_t>& locations) {
  std::vector<Substitution> universe;
  for (std::size_t loc : locations) {
    if (loc >= proposal.per_position.size()) continue;
    for (TokenId token : proposal.per_position[loc]) universe.push_back({loc, token});
  }
  return universe;
}

absl::StatusOr<CoalitionGame> CoalitionGame::Create(
    const std::vector<TokenId>& input, ClassifierBackend& backend) {
  ASSIGN_OR_RETURN(ClassScore base, backend.Predict(input));
  return CoalitionGame(input, base);
}

double CoalitionGame::ValueOf(ClassScore score) const {
  return original_label() == 0 ? score.p1 - base_.p1 : base_.p1 - score.p1;
}

absl::StatusOr<std::vector<double>> CoalitionGame::Values(
    const std::vector<Coalition>& coalitions, ClassifierBackend& backend) const {
  std::vector<std::vector<TokenId>> batch;
  batch.reserve(coalitions.size());
  for (const Coalition& c : coalitions) {
    std::vector<TokenId> ids = input_;
    for (const Substitution& s : c) {
      if (s.location >= ids.size()) {
        return absl::OutOfRangeError("substitution location out of range");
      }
      ids[s.location] = s.token;
    }
    batch.push_back(std::move(ids));
  }
  ASSIGN_OR_RETURN(std::vector<ClassScore> scores, backend.PredictBatch(batch));
  std::vector<double> values;
  values.reserve(scores.size());
  for (const ClassScore& s : scores) values.push_back(ValueOf(s));
  return values;
}

double CountCoalitions(const CandidateProposal& proposal,
                       const std::vector<std::size_t>& locations,
                       std::size_t coalition_size) {
  // Elementary symmetric polynomial of the per-location candidate counts.
  std::vector<double> e(coalition_size + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t loc : locations) {
    const double c = loc < proposal.per_position.size()
                         ? static_cast<double>(proposal.per_position[loc].size())
                         : 0.0;
    for (std::size_t j = coalition_size; j >= 1; --j) e[j] += e[j - 1] * c;
  }
  return e[coalition_size];
}

absl::StatusOr<std::vector<CoalitionSample>> SampleCoalitions(
    const CoalitionGame& game, const CandidateProposal& proposal,
    const std::vector<std::size_t>& locations, const SamplingOptions& options,
    ClassifierBackend& backend) {
  RETURN_IF_ERROR(CheckLocations(proposal, locations));
  const std::size_t c_s = options.coalition_size;
  if (c_s < 1) return absl::InvalidArgumentError("coalition size must be >= 1");
  if (c_s > locations.size()) {
    return absl::InvalidArgumentError("infeasible coalition size");
  }
  for (std::size_t loc : locations) {
    if (proposal.per_position[loc].empty()) {
      return absl::FailedPreconditionError(
          absl::StrCat("location ", loc, " has no candidates"));
    }
  }

  std::vector<Coalition> coalitions;
  if (options.mode == SamplingMode::kEnumerate) {
    if (CountCoalitions(proposal, locations, c_s) > kOracleCoalitionLimit) {
      return absl::ResourceExhaustedError("instance too large for oracle");
    }
    ForEachCoalition(proposal, locations, c_s,
                     [&](const Coalition& c) { coalitions.push_back(c); });
  } else {
    if (options.budget < 1) return absl::InvalidArgumentError("budget must be >= 1");
    Rng rng(options.seed);
    std::vector<std::size_t> slots(locations.size());
    coalitions.reserve(options.budget);
    for (std::size_t draw = 0; draw < options.budget; ++draw) {
      std::iota(slots.begin(), slots.end(), 0);
      Coalition c;
      c.reserve(c_s);
      // Partial Fisher-Yates: the first c_s slots are a uniform subset.
      for (std::size_t i = 0; i < c_s; ++i) {
        std::swap(slots[i], slots[i + UniformIndex(rng, slots.size() - i)]);
        const std::size_t loc = locations[slots[i]];
        const auto& cands = proposal.per_position[loc];
        c.push_back({loc, cands[UniformIndex(rng, cands.size())]});
      }
      coalitions.push_back(Canonical(std::move(c)));
    }
  }

  std::vector<CoalitionSample> samples;
  samples.reserve(coalitions.size());
  for (std::size_t start = 0; start < coalitions.size(); start += kEvalChunk) {
    const std::size_t end = std::min(coalitions.size(), start + kEvalChunk);
    std::vector<Coalition> chunk(coalitions.begin() + start, coalitions.begin() + end);
    ASSIGN_OR_RETURN(std::vector<double> values, game.Values(chunk, backend));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (!IsConflictFree(chunk[i])) return absl::InternalError("conflicting coalition");
      samples.push_back({std::move(chunk[i]), values[i]});
    }
  }
  return samples;
}

std::vector<Substitution> ShapleyTable::Ranked() const {
  std::vector<std::pair<Substitution, double>> items;
  items.reserve(estimates.size());
  for (const auto& [s, e] : estimates) items.emplace_back(s, e.sv);
  // `estimates` iterates in (location, token) order; stable sort keeps that
  // as the tie-break.
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Substitution> out;
  out.reserve(items.size());
  for (auto& [s, sv] : items) out.push_back(s);
  return out;
}

absl::StatusOr<ShapleyTable> EstimateSv(std::vector<CoalitionSample> samples,
                                        const std::vector<Substitution>& universe) {
  if (samples.empty()) return absl::InvalidArgumentError("empty sample list");
  ShapleyTable table;
  table.coalition_size = samples.front().coalition.size();
  double total = 0.0;
  std::map<Substitution, double> sums;
  for (const Substitution& s : universe) {
    table.estimates[s];
    sums[s];
  }
  for (const CoalitionSample& sample : samples) {
    total += sample.value;
    for (const Substitution& s : sample.coalition) {
      sums[s] += sample.value;
      ++table.estimates[s].hits;
    }
  }
  const auto count = static_cast<double>(samples.size());
  for (auto& [s, e] : table.estimates) {
    if (e.hits == 0) continue;
    const double with = sums[s] / static_cast<double>(e.hits);
    if (e.hits == samples.size()) {
      e.in_every_sample = true;
      e.sv = with;
      continue;
    }
    const double without = (total - sums[s]) / (count - static_cast<double>(e.hits));
    e.sv = with - without;
  }
  table.samples = std::move(samples);
  return table;
}

absl::StatusOr<ShapleyTable> BruteForceSv(const CoalitionGame& game,
                                          const CandidateProposal& proposal,
                                          const std::vector<std::size_t>& locations,
                                          std::size_t coalition_size,
                                          ClassifierBackend& backend) {
  RETURN_IF_ERROR(CheckLocations(proposal, locations));
  if (coalition_size < 1 || coalition_size > locations.size()) {
    return absl::InvalidArgumentError("infeasible coalition size");
  }
  if (CountCoalitions(proposal, locations, coalition_size) > kOracleCoalitionLimit) {
    return absl::ResourceExhaustedError("instance too large for oracle");
  }
  SamplingOptions options;
  options.coalition_size = coalition_size;
  options.mode = SamplingMode::kEnumerate;
  ASSIGN_OR_RETURN(std::vector<CoalitionSample> all,
                   SampleCoalitions(game, proposal, locations, options, backend));
  if (all.empty()) return absl::FailedPreconditionError("no coalitions to enumerate");

  // Direct form: partition the full coalition set by membership.
  ShapleyTable table;
  table.coalition_size = coalition_size;
  for (const Substitution& s : SubstitutionUniverse(proposal, locations)) {
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t in_count = 0, out_count = 0;
    for (const CoalitionSample& sample : all) {
      if (std::binary_search(sample.coalition.begin(), sample.coalition.end(), s)) {
        in_sum += sample.value;
        ++in_count;
      } else {
        out_sum += sample.value;
        ++out_count;
      }
    }
    ShapleyEstimate& e = table.estimates[s];
    e.hits = in_count;
    if (in_count == 0) continue;
    e.in_every_sample = out_count == 0;
    e.sv = in_sum / static_cast<double>(in_count) -
           (out_count == 0 ? 0.0 : out_sum / static_cast<double>(out_count));
  }
  table.samples = std::move(all);
  return table;
}

absl::Status WriteCoalitionAudit(const std::string& path,
                                 const std::vector<CoalitionSample>& samples,
                                 const Vocab* vocab) {
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (const CoalitionSample& sample : samples) {
    nlohmann::json locs = nlohmann::json::array();
    nlohmann::json tokens = nlohmann::json::array();
    for (const Substitution& s : sample.coalition) {
      locs.push_back(s.location);
      if (vocab != nullptr) {
        tokens.push_back(vocab->Token(s.token));
      } else {
        tokens.push_back(s.token);
      }
    }
    out << nlohmann::json{{"locs", locs}, {"tokens", tokens}, {"value", sample.value}}.dump()
        << '\n';
  }
  return absl::OkStatus();
}

double SpearmanCorrelation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  const std::vector<double> ra = Ranks(a);
  const std::vector<double> rb = Ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 && sbb == 0) return 1.0;
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace closs
