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

// The `closs` command-line tool.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/statusor.h"
#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "closs/audit.h"
#include "closs/corpus.h"
#include "closs/experiment.h"
#include "closs/in_process_backend.h"
#include "closs/metrics.h"
#include "closs/search.h"
#include "closs/status_macros.h"
#include "closs/synthetic.h"
#include "closs/toy_model.h"
#include "closs/wire.h"
#include "json.hpp"

namespace closs {
namespace {

using Json = nlohmann::json;

constexpr char kToolVersion[] = "0.1.0";
constexpr int kManifestSchema = 1;
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status.message() << "\n";
  return kExitRuntime;
}

int Usage(const std::string& message) {
  std::cerr << "usage error: " << message << "\n";
  return kExitUsage;
}

std::string Timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

absl::Status WriteManifest(const std::string& path, const std::string& command, Json config) {
  Json manifest = {{"schema_version", kManifestSchema},
                   {"tool", "closs"},
                   {"tool_version", kToolVersion},
                   {"command", command},
                   {"timestamp", Timestamp()},
                   {"config", std::move(config)}};
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << manifest.dump(2) << "\n";
  return absl::OkStatus();
}

// --seed wins, then CLOSS_SEED, then 0.
absl::StatusOr<std::uint64_t> ResolveSeed(const CLI::Option* flag, std::uint64_t value) {
  if (flag->count() > 0) return value;
  const char* env = std::getenv("CLOSS_SEED");
  if (env == nullptr || *env == '\0') return 0;
  std::uint64_t seed = 0;
  if (!absl::SimpleAtoi(env, &seed)) {
    return absl::InvalidArgumentError(absl::StrCat("CLOSS_SEED is not a number: ", env));
  }
  return seed;
}

bool IsCheckpointFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in && std::string(magic, 4) == "CLSM";
}

absl::StatusOr<Vocab> LoadVocab(const std::string& path) {
  if (IsCheckpointFile(path)) {
    ASSIGN_OR_RETURN(ModelCheckpoint ckpt, LoadCheckpoint(path));
    return ckpt.vocab;
  }
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == Vocab::kUnkToken) continue;
    tokens.push_back(line);
  }
  return Vocab::FromTokens(tokens);
}

struct BackendTarget {
  enum class Kind { kCheckpoint, kProcess, kHttp } kind = Kind::kCheckpoint;
  std::string target;
};

BackendTarget ParseBackendTarget(const std::string& uri) {
  if (absl::StartsWith(uri, "jsonl-ipc:")) {
    return {BackendTarget::Kind::kProcess, uri.substr(10)};
  }
  if (absl::StartsWith(uri, "http://") || absl::StartsWith(uri, "https://")) {
    return {BackendTarget::Kind::kHttp, uri};
  }
  if (absl::StartsWith(uri, "http:")) return {BackendTarget::Kind::kHttp, uri.substr(5)};
  if (absl::StartsWith(uri, "ckpt:")) {
    return {BackendTarget::Kind::kCheckpoint, uri.substr(5)};
  }
  return {BackendTarget::Kind::kCheckpoint, uri};
}

struct LoadedBackend {
  std::unique_ptr<ClassifierBackend> backend;
  std::optional<Vocab> vocab;  // set for checkpoints
  WireClientBackend* wire = nullptr;
  std::string name;
};

absl::StatusOr<LoadedBackend> OpenBackend(const std::string& uri,
                                          const OptimizerOptions& optimizer) {
  const BackendTarget parsed = ParseBackendTarget(uri);
  LoadedBackend out;
  switch (parsed.kind) {
    case BackendTarget::Kind::kCheckpoint: {
      ASSIGN_OR_RETURN(ModelCheckpoint ckpt, LoadCheckpoint(parsed.target));
      auto model = std::make_shared<ToyModel>(std::move(ckpt.classifier),
                                              std::move(ckpt.retrained_head),
                                              std::move(ckpt.untrained_head));
      out.backend = std::make_unique<InProcessBackend>(std::move(model), optimizer);
      out.vocab = std::move(ckpt.vocab);
      out.name = std::filesystem::path(parsed.target).stem().string();
      return out;
    }
    case BackendTarget::Kind::kProcess: {
      ASSIGN_OR_RETURN(auto transport, SpawnProcessTransport(parsed.target));
      auto client = std::make_unique<WireClientBackend>(std::move(transport));
      out.wire = client.get();
      out.backend = std::move(client);
      out.name = "jsonl-ipc";
      return out;
    }
    case BackendTarget::Kind::kHttp: {
      ASSIGN_OR_RETURN(auto transport, HttpTransport(parsed.target));
      auto client = std::make_unique<WireClientBackend>(std::move(transport));
      out.wire = client.get();
      out.backend = std::move(client);
      out.name = "http";
      return out;
    }
  }
  return absl::InternalError("unreachable");
}

absl::StatusOr<Vocab> ResolveVocab(const LoadedBackend& backend, const std::string& vocab_path) {
  if (!vocab_path.empty()) return LoadVocab(vocab_path);
  if (backend.vocab) return *backend.vocab;
  return absl::InvalidArgumentError("remote backends need --vocab <checkpoint or token list>");
}

// ---------------------------------------------------------------- train-toy

struct TrainArgs {
  std::string data;
  std::string out;
  std::size_t epochs = 50;
  double lr = 0.1;
  std::uint64_t seed = 1;
  std::size_t dim = 16;
  std::size_t hidden = 32;
  std::size_t head_epochs = 150;
  std::size_t max_vocab = 20000;
  CLI::Option* seed_flag = nullptr;
};

int RunTrainToy(const TrainArgs& args) {
  auto seed = ResolveSeed(args.seed_flag, args.seed);
  if (!seed.ok()) return Usage(std::string(seed.status().message()));
  auto records = ReadLabeledJsonl(args.data);
  if (!records.ok()) return Fail(records.status());
  ToyTrainingOptions options;
  options.embed = args.dim;
  options.hidden = args.hidden;
  options.max_vocab = args.max_vocab;
  options.classifier.epochs = args.epochs;
  options.classifier.learning_rate = args.lr;
  options.classifier.seed = *seed;
  options.head.epochs = args.head_epochs;
  options.head.seed = *seed;
  auto trained = TrainToyModel(*records, options,
                               std::filesystem::path(args.data).stem().string());
  if (!trained.ok()) return Fail(trained.status());
  if (auto s = SaveCheckpoint(args.out, trained->checkpoint); !s.ok()) return Fail(s);
  Json config = {{"data", args.data},       {"out", args.out},
                 {"epochs", args.epochs},   {"lr", args.lr},
                 {"seed", *seed},           {"dim", args.dim},
                 {"hidden", args.hidden},   {"head_epochs", args.head_epochs},
                 {"max_vocab", args.max_vocab}};
  if (auto s = WriteManifest(args.out + ".manifest.json", "train-toy", config); !s.ok()) {
    return Fail(s);
  }
  std::cout << "vocab size: " << trained->checkpoint.vocab.size() << "\n"
            << "train accuracy: " << FormatDouble(trained->train_accuracy) << "\n"
            << "lm head accuracy: " << FormatDouble(trained->lm_accuracy) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------- make-synthetic

struct SynthArgs {
  std::string kind = "planted";
  std::string out;
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
};

int RunMakeSynthetic(const SynthArgs& args) {
  TriggerSuiteOptions options;
  if (args.kind == "planted") {
    options = PlantedTriggerSuite(args.count, args.seed);
  } else if (args.kind == "three") {
    options = ThreeTriggerSuite(args.count, args.seed);
  } else {
    return Usage("--kind must be planted or three");
  }
  options.min_length = args.min_length;
  options.max_length = args.max_length;
  auto records = MakeTriggerCorpus(options);
  if (!records.ok()) return Usage(std::string(records.status().message()));
  if (auto s = WriteLabeledJsonl(args.out, *records); !s.ok()) return Fail(s);
  return kExitOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string model;
  std::string data;
  std::string strategy = "closs";
  std::string out;
  std::string vocab;
  std::size_t k = 30;
  std::size_t w = 5;
  std::size_t beam = 15;
  double c_max = 0.15;
  std::uint64_t seed = 0;
  bool everything_salient = false;
  bool scale_w = false;
  std::size_t jobs = 1;
  double step_size = OptimizerOptions{}.step_size;
  double lambda = OptimizerOptions{}.lambda;
  CLI::Option* seed_flag = nullptr;
};

int RunGenerate(const GenerateArgs& args) {
  auto strategy = ParseStrategy(args.strategy);
  if (!strategy.ok()) return Usage(std::string(strategy.status().message()));
  auto seed = ResolveSeed(args.seed_flag, args.seed);
  if (!seed.ok()) return Usage(std::string(seed.status().message()));
  SearchConfig config;
  config.k = args.k;
  config.w = args.w;
  config.beam_width = args.beam;
  config.c_max = args.c_max;
  config.seed = *seed;
  config.strategy = *strategy;
  config.everything_salient = args.everything_salient;
  config.scale_w_with_universe = args.scale_w;
  if (auto s = config.Validate(); !s.ok()) return Usage(std::string(s.message()));
  if (args.jobs == 0) return Usage("--jobs must be positive");

  OptimizerOptions optimizer;
  optimizer.step_size = args.step_size;
  optimizer.lambda = args.lambda;
  auto backend = OpenBackend(args.model, optimizer);
  if (!backend.ok()) return Fail(backend.status());
  auto vocab = ResolveVocab(*backend, args.vocab);
  if (!vocab.ok()) return Fail(vocab.status());
  auto data = LoadJsonl(args.data, *vocab);
  if (!data.ok()) return Fail(data.status());

  ExperimentOptions options;
  options.dataset_name = data->name;
  options.model_name = backend->name;
  options.jobs = args.jobs;
  options.vocab = &*vocab;

  Json manifest = {{"model", args.model},
                   {"data", args.data},
                   {"out", args.out},
                   {"vocab", args.vocab},
                   {"strategy", std::string(StrategyName(config.strategy))},
                   {"k", config.k},
                   {"w", config.w},
                   {"beam", config.beam_width},
                   {"cmax", config.c_max},
                   {"seed", config.seed},
                   {"everything_salient", config.everything_salient},
                   {"scale_w", config.scale_w_with_universe},
                   {"jobs", args.jobs},
                   {"step_size", optimizer.step_size},
                   {"lambda", optimizer.lambda}};
  std::error_code ec;
  std::filesystem::create_directories(args.out, ec);
  if (auto s = WriteManifest(args.out + "/manifest.json", "generate", manifest); !s.ok()) {
    return Fail(s);
  }
  auto rows = RunExperiment(*data, {config}, *backend->backend, args.out, options);
  if (!rows.ok()) return Fail(rows.status());
  const MetricsReport& row = rows->front();
  std::cout << "inputs: " << row.records << "\n"
            << "F_pct: " << FormatDouble(row.percent_fail) << "\n"
            << "C_pct: " << (row.percent_changed ? FormatDouble(*row.percent_changed) : "")
            << "\n"
            << "avg_queries: " << FormatDouble(row.avg_queries) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::vector<std::string> results;
  std::string out;
  std::string ppl_scorer = "trigram";
  std::string ppl_corpus;
  std::string vocab;
  std::string model;
  bool allow_mixed = false;
};

class WirePerplexity : public PerplexityScorer {
 public:
  explicit WirePerplexity(WireClientBackend& client) : client_(client) {}
  absl::StatusOr<double> Perplexity(const std::vector<TokenId>& ids) override {
    return client_.Perplexity(ids);
  }

 private:
  WireClientBackend& client_;
};

int RunEvaluate(const EvaluateArgs& args) {
  std::vector<ResultRecord> records;
  for (const std::string& path : args.results) {
    auto part = ReadResults(path);
    if (!part.ok()) return Fail(part.status());
    records.insert(records.end(), part->begin(), part->end());
  }

  std::unique_ptr<PerplexityScorer> scorer;
  std::optional<LoadedBackend> wire_backend;
  const std::size_t vocab_size = records.front().vocab_size;
  if (args.ppl_scorer == "trigram") {
    auto trigram = std::make_unique<TrigramScorer>(vocab_size);
    std::vector<std::vector<TokenId>> corpus;
    if (!args.ppl_corpus.empty()) {
      if (args.vocab.empty()) return Usage("--ppl-corpus needs --vocab");
      auto vocab = LoadVocab(args.vocab);
      if (!vocab.ok()) return Fail(vocab.status());
      auto data = LoadJsonl(args.ppl_corpus, *vocab);
      if (!data.ok()) return Fail(data.status());
      for (const TokenSequence& x : data->examples) corpus.push_back(x.ids);
    } else {
      for (const ResultRecord& r : records) corpus.push_back(r.ids);
    }
    trigram->Fit(corpus);
    scorer = std::move(trigram);
  } else if (args.ppl_scorer == "uniform") {
    scorer = std::make_unique<UniformScorer>(vocab_size);
  } else if (args.ppl_scorer == "wire") {
    if (args.model.empty()) return Usage("--ppl-scorer wire needs --model");
    auto backend = OpenBackend(args.model, {});
    if (!backend.ok()) return Fail(backend.status());
    if (backend->wire == nullptr) return Usage("--ppl-scorer wire needs a jsonl-ipc: or http: model");
    wire_backend = std::move(*backend);
    scorer = std::make_unique<WirePerplexity>(*wire_backend->wire);
  } else if (args.ppl_scorer != "none") {
    return Usage("--ppl-scorer must be trigram, uniform, wire or none");
  }

  auto rows = Aggregate(records, scorer.get(), args.allow_mixed);
  if (!rows.ok()) return Fail(rows.status());
  const std::string csv = ReportCsv(*rows);
  std::ofstream out(args.out);
  if (!out) return Fail(absl::UnavailableError(absl::StrCat("cannot write ", args.out)));
  out << csv;
  out.close();
  Json config = {{"results", args.results}, {"out", args.out},
                 {"ppl_scorer", args.ppl_scorer}, {"ppl_corpus", args.ppl_corpus},
                 {"allow_mixed", args.allow_mixed}};
  if (auto s = WriteManifest(args.out + ".manifest.json", "evaluate", config); !s.ok()) {
    return Fail(s);
  }
  std::cout << csv;
  return kExitOk;
}

// ----------------------------------------------------------- shapley-audit

struct AuditArgs {
  std::string model;
  std::string data;
  std::string vocab;
  std::string audit_out;
  std::size_t index = 0;
  std::vector<std::size_t> ws = {1, 2, 5, 10, 50};
  std::size_t seeds = 100;
  std::size_t k = 30;
  double c_max = 0.15;
  std::size_t max_candidates = 0;
  bool enumerate = false;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int RunAudit(const AuditArgs& args) {
  for (std::size_t w : args.ws) {
    if (w == 0) return Usage("--w values must be positive");
  }
  if (args.seeds == 0) return Usage("--seeds must be positive");
  if (args.k == 0) return Usage("--k must be positive");
  if (!(args.c_max > 0.0 && args.c_max <= 1.0)) return Usage("--cmax must be in (0, 1]");
  auto seed = ResolveSeed(args.seed_flag, args.seed);
  if (!seed.ok()) return Usage(std::string(seed.status().message()));

  auto backend = OpenBackend(args.model, {});
  if (!backend.ok()) return Fail(backend.status());
  auto vocab = ResolveVocab(*backend, args.vocab);
  if (!vocab.ok()) return Fail(vocab.status());
  auto data = LoadJsonl(args.data, *vocab);
  if (!data.ok()) return Fail(data.status());
  if (args.index >= data->examples.size()) {
    return Usage(absl::StrCat("--index ", args.index, " out of range (", data->examples.size(),
                              " inputs)"));
  }

  AuditOptions options;
  options.ws = args.ws;
  options.seeds = args.seeds;
  options.k = args.k;
  options.c_max = args.c_max;
  options.max_candidates = args.max_candidates;
  options.seed = *seed;
  options.mode = args.enumerate ? SamplingMode::kEnumerate : SamplingMode::kRandom;
  auto report = RunShapleyAudit(data->examples[args.index], options, *backend->backend);
  if (!report.ok()) return Fail(report.status());
  if (!args.audit_out.empty()) {
    if (auto s = WriteCoalitionAudit(args.audit_out, report->oracle.samples, &*vocab); !s.ok()) {
      return Fail(s);
    }
  }
  std::cout << "locations: " << report->locations << "  substitutions: " << report->universe
            << "  coalition size: " << report->oracle.coalition_size
            << "  coalitions: " << report->oracle.samples.size() << "\n";
  std::cout << "w,budget,mean_spearman,min_spearman,max_spearman\n";
  for (const AuditRow& row : report->rows) {
    std::cout << row.w << ',' << row.budget << ',' << FormatDouble(row.mean_spearman) << ','
              << FormatDouble(row.min_spearman) << ',' << FormatDouble(row.max_spearman)
              << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------------- serve

struct ServeArgs {
  std::string model;
  std::string mode = "stdio";
  std::string host = "127.0.0.1";
  int port = 0;
  std::string ppl_corpus;
  double step_size = OptimizerOptions{}.step_size;
  double lambda = OptimizerOptions{}.lambda;
};

int RunServe(const ServeArgs& args) {
  if (args.mode != "stdio" && args.mode != "http") return Usage("--mode must be stdio or http");
  const BackendTarget target = ParseBackendTarget(args.model);
  if (target.kind != BackendTarget::Kind::kCheckpoint) return Usage("serve needs a checkpoint");
  OptimizerOptions optimizer;
  optimizer.step_size = args.step_size;
  optimizer.lambda = args.lambda;
  auto backend = OpenBackend(args.model, optimizer);
  if (!backend.ok()) return Fail(backend.status());

  std::shared_ptr<TrigramScorer> trigram;
  PerplexityFn ppl;
  if (!args.ppl_corpus.empty()) {
    auto data = LoadJsonl(args.ppl_corpus, *backend->vocab);
    if (!data.ok()) return Fail(data.status());
    trigram = std::make_shared<TrigramScorer>(backend->vocab->size());
    std::vector<std::vector<TokenId>> corpus;
    for (const TokenSequence& x : data->examples) corpus.push_back(x.ids);
    trigram->Fit(corpus);
    ppl = [trigram](const std::vector<TokenId>& ids) { return trigram->Perplexity(ids); };
  }
  WireServer server(*backend->backend, ppl);
  if (args.mode == "stdio") {
    server.ServeStream(std::cin, std::cout);
    return kExitOk;
  }
  auto status = server.ServeHttp(args.host, args.port, "/rpc", [](int port) {
    std::cerr << "listening on port " << port << std::endl;
  });
  if (!status.ok()) return Fail(status);
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"Minimal-edit counterfactual generation for text classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the reference toy classifier");
  train_cmd->add_option("--data", train.data, "Labeled JSONL corpus")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.lr)->check(CLI::PositiveNumber);
  train.seed_flag = train_cmd->add_option("--seed", train.seed);
  train_cmd->add_option("--dim", train.dim, "Embedding size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", train.hidden, "Encoder width")->check(CLI::PositiveNumber);
  train_cmd->add_option("--head-epochs", train.head_epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-vocab", train.max_vocab)->check(CLI::Range(2, 1 << 24));

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("make-synthetic", "Write a planted-trigger corpus as JSONL");
  synth_cmd->add_option("--kind", synth.kind, "planted (one trigger) | three (two of three)");
  synth_cmd->add_option("--out", synth.out)->required();
  synth_cmd->add_option("--count", synth.count)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--min-length", synth.min_length)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-length", synth.max_length)->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate counterfactuals for a dataset");
  gen_cmd->add_option("--model", gen.model, "ckpt:<path> | jsonl-ipc:<cmd> | http:<url>")
      ->required();
  gen_cmd->add_option("--data", gen.data, "Labeled JSONL inputs")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--strategy", gen.strategy,
                      "closs|closs-sv|closs-eo|closs-rtl|hotflip-d|hotflip-o");
  gen_cmd->add_option("--k", gen.k, "Optimization steps / candidates per location");
  gen_cmd->add_option("--w", gen.w, "Shapley sampling multiplier");
  gen_cmd->add_option("--beam", gen.beam, "Beam width");
  gen_cmd->add_option("--cmax", gen.c_max, "Maximum fraction of tokens edited");
  gen.seed_flag = gen_cmd->add_option("--seed", gen.seed, "Defaults to $CLOSS_SEED, then 0");
  gen_cmd->add_flag("--everything-salient", gen.everything_salient);
  gen_cmd->add_flag("--scale-w", gen.scale_w);
  gen_cmd->add_option("--jobs", gen.jobs, "Worker threads over inputs");
  gen_cmd->add_option("--vocab", gen.vocab, "Checkpoint or token list (remote models)");
  gen_cmd->add_option("--step-size", gen.step_size)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--lambda", gen.lambda)->check(CLI::NonNegativeNumber);

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Aggregate result files into a report");
  eval_cmd->add_option("--results", eval.results, "Result JSONL files")->required();
  eval_cmd->add_option("--out", eval.out, "Report CSV path")->required();
  eval_cmd->add_option("--ppl-scorer", eval.ppl_scorer, "trigram|uniform|wire|none");
  eval_cmd->add_option("--ppl-corpus", eval.ppl_corpus, "JSONL corpus for the trigram scorer");
  eval_cmd->add_option("--vocab", eval.vocab, "Vocabulary for --ppl-corpus");
  eval_cmd->add_option("--model", eval.model, "Wire model for --ppl-scorer wire");
  eval_cmd->add_flag("--allow-mixed", eval.allow_mixed);

  AuditArgs audit;
  auto* audit_cmd =
      app.add_subcommand("shapley-audit", "Compare sampled Shapley values with the oracle");
  audit_cmd->add_option("--model", audit.model)->required();
  audit_cmd->add_option("--data", audit.data)->required();
  audit_cmd->add_option("--index", audit.index, "Input to audit");
  audit_cmd->add_option("--w", audit.ws, "Sampling multipliers")->delimiter(',');
  audit_cmd->add_option("--seeds", audit.seeds, "Sampled runs per w");
  audit_cmd->add_option("--k", audit.k);
  audit_cmd->add_option("--cmax", audit.c_max);
  audit_cmd->add_option("--max-candidates", audit.max_candidates, "Truncate candidate lists");
  audit_cmd->add_flag("--enumerate", audit.enumerate, "Evaluate every coalition");
  audit.seed_flag = audit_cmd->add_option("--seed", audit.seed);
  audit_cmd->add_option("--vocab", audit.vocab);
  audit_cmd->add_option("--audit-out", audit.audit_out, "Oracle coalition JSONL");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a checkpoint over the wire protocol");
  serve_cmd->add_option("--model", serve.model)->required();
  serve_cmd->add_option("--mode", serve.mode, "stdio|http");
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port, "0 picks a free port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--ppl-corpus", serve.ppl_corpus, "Enables the ppl verb");
  serve_cmd->add_option("--step-size", serve.step_size)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--lambda", serve.lambda)->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (synth_cmd->parsed()) return RunMakeSynthetic(synth);
  if (train_cmd->parsed()) return RunTrainToy(train);
  if (gen_cmd->parsed()) return RunGenerate(gen);
  if (eval_cmd->parsed()) return RunEvaluate(eval);
  if (audit_cmd->parsed()) return RunAudit(audit);
  if (serve_cmd->parsed()) return RunServe(serve);
  return kExitUsage;
}

}  // namespace
}  // namespace closs

int main(int argc, char** argv) { return closs::Main(argc, argv); }
