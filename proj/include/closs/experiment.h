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

#ifndef CLOSS_EXPERIMENT_H_
#define CLOSS_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/gateway.h"
#include "closs/metrics.h"
#include "closs/search.h"
#include "json.hpp"

namespace closs {

// One line of the per-input result JSONL.
struct ResultRecord {
  std::size_t index = 0;
  std::string strategy;
  std::string dataset;
  std::string model;
  std::uint64_t seed = 0;
  bool success = false;
  std::vector<TokenId> ids;
  std::optional<std::vector<TokenId>> counterfactual_ids;
  std::vector<std::string> tokens;
  Coalition substitutions;
  std::vector<std::string> edit_from;
  std::vector<std::string> edit_to;
  std::uint64_t queries = 0;
  std::uint64_t gradient_queries = 0;
  double p_before = 0.5;
  double p_after = 0.5;
  std::size_t vocab_size = 0;
  int label = 0;
};

ResultRecord MakeRecord(std::size_t index, const TokenSequence& x,
                        const SearchConfig& config, const SearchResult& result,
                        const Vocab& vocab, const std::string& dataset,
                        const std::string& model);

nlohmann::json ToJson(const ResultRecord& record);
absl::StatusOr<ResultRecord> ResultFromJson(const nlohmann::json& j);
absl::StatusOr<std::vector<ResultRecord>> ReadResults(const std::string& path);

// Aggregated metrics for one (strategy, dataset, model, seed) group.
struct MetricsReport {
  std::string strategy;
  std::string dataset;
  std::string model;
  std::string seed;  // decimal seed, or "mean" for the across-seed row
  std::size_t records = 0;
  double percent_fail = 0.0;
  std::optional<double> percent_changed;
  std::optional<double> bleu;
  std::optional<double> perplexity;
  double avg_queries = 0.0;
};

GenerationRecord ToGenerationRecord(const ResultRecord& record,
                                    PerplexityScorer* scorer);

// Groups by (strategy, dataset, model, seed) in first-seen order and adds
// a "mean" row after any group of runs with more than one seed. Fails on
// mixed datasets unless allow_mixed is set.
absl::StatusOr<std::vector<MetricsReport>> Aggregate(
    const std::vector<ResultRecord>& records, PerplexityScorer* scorer,
    bool allow_mixed = false);

inline constexpr char kReportHeader[] =
    "strategy,dataset,model,F_pct,C_pct,bleu,perplexity,avg_queries,seed";

// Shortest decimal that parses back to the same double.
std::string FormatDouble(double v);

std::string ReportCsv(const std::vector<MetricsReport>& rows);
absl::StatusOr<std::vector<MetricsReport>> ParseReportCsv(const std::string& csv);

struct ExperimentOptions {
  std::string dataset_name;
  std::string model_name;
  std::size_t jobs = 1;
  // Scores counterfactual perplexity; optional.
  PerplexityScorer* scorer = nullptr;
  const Vocab* vocab = nullptr;
};

// Input i of config c runs with seed DeriveSeed(c.seed, i).
std::uint64_t InputSeed(std::uint64_t config_seed, std::size_t index);

// Runs every config on every input regardless of whether the model is
// right about it. Writes <out_dir>/results.jsonl and <out_dir>/report.csv.
// On a backend failure the finished records are flushed, followed by an
// {"error": ...} marker line, and the error is returned.
absl::StatusOr<std::vector<MetricsReport>> RunExperiment(
    const Dataset& data, const std::vector<SearchConfig>& configs,
    ClassifierBackend& backend, const std::string& out_dir,
    const ExperimentOptions& options);

// Runs one config over the dataset with `jobs` workers and returns the
// records ordered by input index.
absl::StatusOr<std::vector<ResultRecord>> GenerateAll(
    const Dataset& data, const SearchConfig& config, ClassifierBackend& backend,
    const ExperimentOptions& options, std::vector<ResultRecord>* partial = nullptr);

}  // namespace closs

#endif  // CLOSS_EXPERIMENT_H_
