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

#ifndef CLOSS_METRICS_H_
#define CLOSS_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"

namespace closs {

// Sentence BLEU-4 over token ids: uniform weights, standard brevity
// penalty. A zero-match order n uses (0 + 1) / (total_n + 1) instead of 0.
double Bleu(const std::vector<TokenId>& reference,
            const std::vector<TokenId>& hypothesis);

// Perplexity scorers are pluggable; the bundled ones work on token ids.
class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  virtual absl::StatusOr<double> Perplexity(const std::vector<TokenId>& ids) = 0;
};

// P(token | history) as an exact ratio, so that constant-probability
// texts produce exactly 1 / P.
struct Probability {
  double numerator = 1.0;
  double denominator = 1.0;
  bool operator==(const Probability&) const = default;
};

// exp(mean negative log-likelihood); the geometric mean of 1 / P.
double PerplexityFromProbabilities(const std::vector<Probability>& probs);

class TokenLevelScorer : public PerplexityScorer {
 public:
  absl::StatusOr<double> Perplexity(const std::vector<TokenId>& ids) override;
  virtual absl::StatusOr<std::vector<Probability>> TokenProbabilities(
      const std::vector<TokenId>& ids) const = 0;
};

class UniformScorer : public TokenLevelScorer {
 public:
  explicit UniformScorer(std::size_t vocab_size) : vocab_size_(vocab_size) {}
  absl::StatusOr<std::vector<Probability>> TokenProbabilities(
      const std::vector<TokenId>& ids) const override;

 private:
  std::size_t vocab_size_;
};

// Add-k smoothed trigram model with two boundary symbols of left context
// and no end-of-text event:
//
//   P(w | u v) = (c(u v w) + k) / (c(u v .) + k |V|)
class TrigramScorer : public TokenLevelScorer {
 public:
  TrigramScorer(std::size_t vocab_size, double add_k = 0.1);

  void Fit(const std::vector<std::vector<TokenId>>& corpus);
  absl::StatusOr<std::vector<Probability>> TokenProbabilities(
      const std::vector<TokenId>& ids) const override;

 private:
  static constexpr TokenId kBoundary = -1;
  std::size_t vocab_size_;
  double add_k_;
  std::map<std::tuple<TokenId, TokenId, TokenId>, std::size_t> trigrams_;
  std::map<std::pair<TokenId, TokenId>, std::size_t> histories_;
};

struct GenerationRecord {
  std::size_t index = 0;
  std::string strategy;
  bool success = false;
  std::size_t n = 0;
  std::size_t tokens_changed = 0;
  std::uint64_t queries = 0;
  double bleu = 0.0;                   // successes only
  std::optional<double> perplexity;    // successes only
};

// 100 * failures / records.
absl::StatusOr<double> FailureRate(const std::vector<GenerationRecord>& records);

// Mean over successes of 100 * tokens_changed / n; nullopt with no successes.
std::optional<double> PercentChanged(const std::vector<GenerationRecord>& records);

}  // namespace closs

#endif  // CLOSS_METRICS_H_
