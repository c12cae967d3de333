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

#include "closs/experiment.h"

#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "closs/rng.h"
#include "closs/status_macros.h"

namespace closs {
namespace {

using Json = nlohmann::json;

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::optional<double> MeanOf(const std::vector<std::optional<double>>& v) {
  std::vector<double> present;
  for (const auto& x : v) {
    if (x) present.push_back(*x);
  }
  if (present.empty()) return std::nullopt;
  return Mean(present);
}

std::string Optional(const std::optional<double>& v) {
  return v ? FormatDouble(*v) : std::string();
}

absl::StatusOr<double> ParseDouble(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    return absl::InvalidArgumentError(absl::StrCat("bad number '", std::string(s), "'"));
  }
  return v;
}

absl::StatusOr<std::optional<double>> ParseOptional(std::string_view s) {
  if (s.empty()) return std::optional<double>();
  ASSIGN_OR_RETURN(double v, ParseDouble(s));
  return std::optional<double>(v);
}

template <typename T>
absl::Status Get(const Json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return absl::InvalidArgumentError(absl::StrCat("missing \"", key, "\""));
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad \"", key, "\": ", e.what()));
  }
  return absl::OkStatus();
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ResultRecord MakeRecord(std::size_t index, const TokenSequence& x,
                        const SearchConfig& config, const SearchResult& result,
                        const Vocab& vocab, const std::string& dataset,
                        const std::string& model) {
  ResultRecord r;
  r.index = index;
  r.strategy = std::string(StrategyName(config.strategy));
  r.dataset = dataset;
  r.model = model;
  r.seed = config.seed;
  r.success = result.success;
  r.ids = x.ids;
  r.tokens = TokenStrings(x, vocab);
  if (result.counterfactual) r.counterfactual_ids = result.counterfactual->ids;
  r.substitutions = result.substitutions;
  for (const Substitution& s : result.substitutions) {
    r.edit_from.push_back(vocab.Token(x.ids[s.location]));
    r.edit_to.push_back(vocab.Token(s.token));
  }
  r.queries = result.queries;
  r.gradient_queries = result.gradient_queries;
  r.p_before = result.p_before;
  r.p_after = result.p_after;
  r.vocab_size = vocab.size();
  r.label = x.label;
  return r;
}

Json ToJson(const ResultRecord& r) {
  Json edits = Json::array();
  for (std::size_t i = 0; i < r.substitutions.size(); ++i) {
    edits.push_back({{"pos", r.substitutions[i].location},
                     {"from", i < r.edit_from.size() ? r.edit_from[i] : ""},
                     {"to", i < r.edit_to.size() ? r.edit_to[i] : ""},
                     {"to_id", r.substitutions[i].token}});
  }
  Json j = {{"index", r.index},
            {"strategy", r.strategy},
            {"success", r.success},
            {"edits", std::move(edits)},
            {"queries", r.queries},
            {"p_before", r.p_before},
            {"p_after", r.p_after},
            {"gradient_queries", r.gradient_queries},
            {"dataset", r.dataset},
            {"model", r.model},
            {"seed", r.seed},
            {"label", r.label},
            {"n", r.ids.size()},
            {"vocab_size", r.vocab_size},
            {"ids", r.ids},
            {"tokens", r.tokens}};
  j["cf_ids"] = r.counterfactual_ids ? Json(*r.counterfactual_ids) : Json(nullptr);
  return j;
}

absl::StatusOr<ResultRecord> ResultFromJson(const Json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("record is not an object");
  ResultRecord r;
  RETURN_IF_ERROR(Get(j, "index", r.index));
  RETURN_IF_ERROR(Get(j, "strategy", r.strategy));
  RETURN_IF_ERROR(Get(j, "success", r.success));
  RETURN_IF_ERROR(Get(j, "queries", r.queries));
  RETURN_IF_ERROR(Get(j, "p_before", r.p_before));
  RETURN_IF_ERROR(Get(j, "p_after", r.p_after));
  RETURN_IF_ERROR(Get(j, "dataset", r.dataset));
  RETURN_IF_ERROR(Get(j, "model", r.model));
  RETURN_IF_ERROR(Get(j, "seed", r.seed));
  RETURN_IF_ERROR(Get(j, "ids", r.ids));
  RETURN_IF_ERROR(Get(j, "vocab_size", r.vocab_size));
  if (j.contains("gradient_queries")) RETURN_IF_ERROR(Get(j, "gradient_queries", r.gradient_queries));
  if (j.contains("label")) RETURN_IF_ERROR(Get(j, "label", r.label));
  if (j.contains("tokens")) RETURN_IF_ERROR(Get(j, "tokens", r.tokens));
  if (auto cf = j.find("cf_ids"); cf != j.end() && !cf->is_null()) {
    std::vector<TokenId> ids;
    RETURN_IF_ERROR(Get(j, "cf_ids", ids));
    r.counterfactual_ids = std::move(ids);
  }
  auto edits = j.find("edits");
  if (edits == j.end() || !edits->is_array()) {
    return absl::InvalidArgumentError("missing \"edits\"");
  }
  for (const Json& e : *edits) {
    Substitution s;
    std::string from, to;
    RETURN_IF_ERROR(Get(e, "pos", s.location));
    RETURN_IF_ERROR(Get(e, "from", from));
    RETURN_IF_ERROR(Get(e, "to", to));
    if (e.contains("to_id")) RETURN_IF_ERROR(Get(e, "to_id", s.token));
    r.substitutions.push_back(s);
    r.edit_from.push_back(std::move(from));
    r.edit_to.push_back(std::move(to));
  }
  if (r.success && !r.counterfactual_ids) {
    return absl::InvalidArgumentError("successful record without \"cf_ids\"");
  }
  return r;
}

absl::StatusOr<std::vector<ResultRecord>> ReadResults(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<ResultRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      return absl::InvalidArgumentError(absl::StrCat(path, ":", line_no, ": malformed JSON"));
    }
    if (j.contains("error") && !j.contains("index")) {
      return absl::DataLossError(absl::StrCat(path, ":", line_no, ": partial run: ",
                                              j["error"].dump()));
    }
    auto r = ResultFromJson(j);
    if (!r.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_no, ": ", r.status().message()));
    }
    records.push_back(*std::move(r));
  }
  if (records.empty()) return absl::InvalidArgumentError(absl::StrCat(path, ": no results"));
  return records;
}

GenerationRecord ToGenerationRecord(const ResultRecord& r, PerplexityScorer* scorer) {
  GenerationRecord g;
  g.index = r.index;
  g.strategy = r.strategy;
  g.success = r.success;
  g.n = r.ids.size();
  g.queries = r.queries;
  if (r.success && r.counterfactual_ids) {
    g.tokens_changed = HammingDistance(r.ids, *r.counterfactual_ids);
    g.bleu = Bleu(r.ids, *r.counterfactual_ids);
    if (scorer != nullptr) {
      auto ppl = scorer->Perplexity(*r.counterfactual_ids);
      if (ppl.ok()) g.perplexity = *ppl;
    }
  }
  return g;
}

absl::StatusOr<std::vector<MetricsReport>> Aggregate(
    const std::vector<ResultRecord>& records, PerplexityScorer* scorer,
    bool allow_mixed) {
  if (records.empty()) return absl::InvalidArgumentError("no records");
  if (!allow_mixed) {
    for (const ResultRecord& r : records) {
      if (r.dataset != records.front().dataset) {
        return absl::InvalidArgumentError(absl::StrCat(
            "results mix datasets '", records.front().dataset, "' and '", r.dataset,
            "' (pass --allow-mixed to aggregate anyway)"));
      }
    }
  }
  using RunKey = std::tuple<std::string, std::string, std::string>;
  std::vector<RunKey> run_order;
  std::map<RunKey, std::vector<std::uint64_t>> seed_order;
  std::map<std::pair<RunKey, std::uint64_t>, std::vector<GenerationRecord>> groups;
  for (const ResultRecord& r : records) {
    RunKey key{r.strategy, r.dataset, r.model};
    if (!seed_order.contains(key)) run_order.push_back(key);
    auto& seeds = seed_order[key];
    if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
    groups[{key, r.seed}].push_back(ToGenerationRecord(r, scorer));
  }

  std::vector<MetricsReport> rows;
  for (const RunKey& key : run_order) {
    std::vector<MetricsReport> per_seed;
    for (std::uint64_t seed : seed_order[key]) {
      const auto& gens = groups[{key, seed}];
      MetricsReport m;
      std::tie(m.strategy, m.dataset, m.model) = key;
      m.seed = std::to_string(seed);
      m.records = gens.size();
      ASSIGN_OR_RETURN(m.percent_fail, FailureRate(gens));
      m.percent_changed = PercentChanged(gens);
      std::vector<double> bleus, ppls, queries;
      for (const GenerationRecord& g : gens) {
        queries.push_back(static_cast<double>(g.queries));
        if (!g.success) continue;
        bleus.push_back(g.bleu);
        if (g.perplexity) ppls.push_back(*g.perplexity);
      }
      if (!bleus.empty()) m.bleu = Mean(bleus);
      if (!ppls.empty()) m.perplexity = Mean(ppls);
      m.avg_queries = Mean(queries);
      per_seed.push_back(m);
    }
    rows.insert(rows.end(), per_seed.begin(), per_seed.end());
    if (per_seed.size() > 1) {
      MetricsReport mean = per_seed.front();
      mean.seed = "mean";
      mean.records = 0;
      std::vector<double> f, q;
      std::vector<std::optional<double>> c, b, p;
      for (const MetricsReport& m : per_seed) {
        mean.records += m.records;
        f.push_back(m.percent_fail);
        q.push_back(m.avg_queries);
        c.push_back(m.percent_changed);
        b.push_back(m.bleu);
        p.push_back(m.perplexity);
      }
      mean.percent_fail = Mean(f);
      mean.avg_queries = Mean(q);
      mean.percent_changed = MeanOf(c);
      mean.bleu = MeanOf(b);
      mean.perplexity = MeanOf(p);
      rows.push_back(mean);
    }
  }
  return rows;
}

std::string ReportCsv(const std::vector<MetricsReport>& rows) {
  std::ostringstream out;
  out << kReportHeader << '\n';
  for (const MetricsReport& m : rows) {
    out << m.strategy << ',' << m.dataset << ',' << m.model << ','
        << FormatDouble(m.percent_fail) << ',' << Optional(m.percent_changed) << ','
        << Optional(m.bleu) << ',' << Optional(m.perplexity) << ','
        << FormatDouble(m.avg_queries) << ',' << m.seed << '\n';
  }
  return out.str();
}

absl::StatusOr<std::vector<MetricsReport>> ParseReportCsv(const std::string& csv) {
  std::vector<std::string> lines = absl::StrSplit(csv, '\n', absl::SkipEmpty());
  if (lines.empty() || lines.front() != kReportHeader) {
    return absl::InvalidArgumentError("missing report header");
  }
  std::vector<MetricsReport> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = absl::StrSplit(lines[i], ',');
    if (f.size() != 9) {
      return absl::InvalidArgumentError(absl::StrCat("row ", i, ": expected 9 fields"));
    }
    MetricsReport m;
    m.strategy = f[0];
    m.dataset = f[1];
    m.model = f[2];
    ASSIGN_OR_RETURN(m.percent_fail, ParseDouble(f[3]));
    ASSIGN_OR_RETURN(m.percent_changed, ParseOptional(f[4]));
    ASSIGN_OR_RETURN(m.bleu, ParseOptional(f[5]));
    ASSIGN_OR_RETURN(m.perplexity, ParseOptional(f[6]));
    ASSIGN_OR_RETURN(m.avg_queries, ParseDouble(f[7]));
    m.seed = f[8];
    rows.push_back(std::move(m));
  }
  return rows;
}

std::uint64_t InputSeed(std::uint64_t config_seed, std::size_t index) {
  return DeriveSeed(config_seed, index);
}

absl::StatusOr<std::vector<ResultRecord>> GenerateAll(
    const Dataset& data, const SearchConfig& config, ClassifierBackend& backend,
    const ExperimentOptions& options, std::vector<ResultRecord>* partial) {
  if (data.examples.empty()) return absl::InvalidArgumentError("empty dataset");
  if (options.vocab == nullptr) return absl::InvalidArgumentError("vocabulary required");
  const std::size_t count = data.examples.size();
  std::vector<std::optional<ResultRecord>> slots(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mu;
  absl::Status error;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      SearchConfig input_config = config;
      input_config.seed = InputSeed(config.seed, i);
      auto result = RunStrategy(data.examples[i], input_config, backend);
      if (!result.ok()) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (error.ok()) {
          error = absl::Status(result.status().code(),
                               absl::StrCat("input ", i, ": ", result.status().message()));
        }
        failed.store(true);
        return;
      }
      ResultRecord record = MakeRecord(i, data.examples[i], config, *result,
                                       *options.vocab, options.dataset_name,
                                       options.model_name);
      slots[i] = std::move(record);
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, count));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  std::vector<ResultRecord> records;
  for (auto& slot : slots) {
    if (slot) records.push_back(std::move(*slot));
  }
  if (!error.ok()) {
    if (partial != nullptr) *partial = std::move(records);
    return error;
  }
  return records;
}

absl::StatusOr<std::vector<MetricsReport>> RunExperiment(
    const Dataset& data, const std::vector<SearchConfig>& configs,
    ClassifierBackend& backend, const std::string& out_dir,
    const ExperimentOptions& options) {
  if (data.examples.empty()) return absl::InvalidArgumentError("empty dataset");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("cannot create ", out_dir));
  const std::string results_path = out_dir + "/results.jsonl";
  std::ofstream results(results_path);
  if (!results) return absl::UnavailableError(absl::StrCat("cannot write ", results_path));

  std::vector<ResultRecord> all;
  for (const SearchConfig& config : configs) {
    std::vector<ResultRecord> partial;
    auto records = GenerateAll(data, config, backend, options, &partial);
    if (!records.ok()) {
      for (const ResultRecord& r : partial) results << ToJson(r).dump() << '\n';
      results << Json{{"error", std::string(records.status().message())},
                      {"partial", true}}
                     .dump()
              << '\n';
      results.flush();
      return records.status();
    }
    for (const ResultRecord& r : *records) results << ToJson(r).dump() << '\n';
    results.flush();
    all.insert(all.end(), records->begin(), records->end());
  }

  ASSIGN_OR_RETURN(std::vector<MetricsReport> rows, Aggregate(all, options.scorer, true));
  std::ofstream csv(out_dir + "/report.csv");
  if (!csv) return absl::UnavailableError("cannot write report.csv");
  csv << ReportCsv(rows);
  return rows;
}

}  // namespace closs
