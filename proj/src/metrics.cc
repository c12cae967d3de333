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

#include "closs/metrics.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"

namespace closs {
namespace {

// Clipped n-gram matches and hypothesis n-gram total for one order.
std::pair<std::size_t, std::size_t> NgramMatches(const std::vector<TokenId>& reference,
                                                 const std::vector<TokenId>& hypothesis,
                                                 std::size_t order) {
  if (hypothesis.size() < order) return {0, 0};
  std::map<std::vector<TokenId>, std::size_t> ref_counts;
  for (std::size_t i = 0; i + order <= reference.size(); ++i) {
    ++ref_counts[std::vector<TokenId>(reference.begin() + i, reference.begin() + i + order)];
  }
  std::map<std::vector<TokenId>, std::size_t> hyp_counts;
  for (std::size_t i = 0; i + order <= hypothesis.size(); ++i) {
    ++hyp_counts[std::vector<TokenId>(hypothesis.begin() + i,
                                      hypothesis.begin() + i + order)];
  }
  std::size_t matches = 0;
  for (const auto& [gram, count] : hyp_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matches += std::min(count, it->second);
  }
  return {matches, hypothesis.size() - order + 1};
}

}  // namespace

double Bleu(const std::vector<TokenId>& reference,
            const std::vector<TokenId>& hypothesis) {
  if (reference.empty() || hypothesis.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t order = 1; order <= 4; ++order) {
    auto [matches, total] = NgramMatches(reference, hypothesis, order);
    const double precision =
        matches == 0 ? 1.0 / static_cast<double>(total + 1)
                     : static_cast<double>(matches) / static_cast<double>(total);
    log_sum += 0.25 * std::log(precision);
  }
  const double c = static_cast<double>(hypothesis.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum);
}

double PerplexityFromProbabilities(const std::vector<Probability>& probs) {
  if (probs.empty()) return 1.0;
  if (std::all_of(probs.begin(), probs.end(),
                  [&](const Probability& p) { return p == probs.front(); })) {
    return probs.front().denominator / probs.front().numerator;
  }
  double nll = 0.0;
  for (const Probability& p : probs) {
    nll += std::log(p.denominator) - std::log(p.numerator);
  }
  return std::exp(nll / static_cast<double>(probs.size()));
}

absl::StatusOr<double> TokenLevelScorer::Perplexity(const std::vector<TokenId>& ids) {
  if (ids.empty()) return absl::InvalidArgumentError("empty text");
  ASSIGN_OR_RETURN(std::vector<Probability> probs, TokenProbabilities(ids));
  return PerplexityFromProbabilities(probs);
}

absl::StatusOr<std::vector<Probability>> UniformScorer::TokenProbabilities(
    const std::vector<TokenId>& ids) const {
  if (vocab_size_ == 0) return absl::FailedPreconditionError("empty vocabulary");
  return std::vector<Probability>(ids.size(),
                                  {1.0, static_cast<double>(vocab_size_)});
}

TrigramScorer::TrigramScorer(std::size_t vocab_size, double add_k)
    : vocab_size_(vocab_size), add_k_(add_k) {}

void TrigramScorer::Fit(const std::vector<std::vector<TokenId>>& corpus) {
  for (const auto& ids : corpus) {
    TokenId u = kBoundary, v = kBoundary;
    for (TokenId w : ids) {
      ++trigrams_[{u, v, w}];
      ++histories_[{u, v}];
      u = v;
      v = w;
    }
  }
}

absl::StatusOr<std::vector<Probability>> TrigramScorer::TokenProbabilities(
    const std::vector<TokenId>& ids) const {
  if (vocab_size_ == 0 || !(add_k_ > 0)) {
    return absl::FailedPreconditionError("trigram scorer needs |V| > 0 and k > 0");
  }
  std::vector<Probability> probs;
  probs.reserve(ids.size());
  TokenId u = kBoundary, v = kBoundary;
  for (TokenId w : ids) {
    if (w < 0 || static_cast<std::size_t>(w) >= vocab_size_) {
      return absl::OutOfRangeError(absl::StrCat("token id ", w, " out of range"));
    }
    auto tri = trigrams_.find({u, v, w});
    auto hist = histories_.find({u, v});
    const double c = tri == trigrams_.end() ? 0.0 : static_cast<double>(tri->second);
    const double h = hist == histories_.end() ? 0.0 : static_cast<double>(hist->second);
    probs.push_back({c + add_k_, h + add_k_ * static_cast<double>(vocab_size_)});
    u = v;
    v = w;
  }
  return probs;
}

absl::StatusOr<double> FailureRate(const std::vector<GenerationRecord>& records) {
  if (records.empty()) return absl::InvalidArgumentError("no records");
  const auto failures = std::count_if(records.begin(), records.end(),
                                      [](const GenerationRecord& r) { return !r.success; });
  return 100.0 * static_cast<double>(failures) / static_cast<double>(records.size());
}

std::optional<double> PercentChanged(const std::vector<GenerationRecord>& records) {
  double sum = 0.0;
  std::size_t successes = 0;
  for (const GenerationRecord& r : records) {
    if (!r.success || r.n == 0) continue;
    sum += 100.0 * static_cast<double>(r.tokens_changed) / static_cast<double>(r.n);
    ++successes;
  }
  if (successes == 0) return std::nullopt;
  return sum / static_cast<double>(successes);
}

}  // namespace closs
