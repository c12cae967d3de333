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

// Acceptance checks for the counterfactual pipeline. Prints one PASS/FAIL
// line per criterion and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "closs/audit.h"
#include "closs/candidates.h"
#include "closs/in_process_backend.h"
#include "closs/metrics.h"
#include "closs/rng.h"
#include "closs/search.h"
#include "closs/shapley.h"
#include "closs/synthetic.h"
#include "closs/toy_model.h"

namespace closs {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome Fail(const absl::Status& status) { return {false, std::string(status.message())}; }

// Random toy model with parameters uniform in [-scale, scale).
std::shared_ptr<ToyModel> ScaledToy(std::size_t vocab, std::uint64_t seed, double scale,
                                    std::size_t embed = 16, std::size_t hidden = 32) {
  ToyClassifier c = ToyClassifier::Random({vocab, embed, hidden}, seed);
  const double s = scale / 0.1;
  c.embeddings *= s;
  c.encoder_weight *= s;
  c.encoder_bias *= s;
  c.head_weight *= s;
  c.head_bias *= s;
  return std::make_shared<ToyModel>(std::move(c), LmHead::Random(vocab, hidden, seed + 1),
                                    LmHead::Random(vocab, hidden, seed + 2));
}

std::vector<TokenId> RandomIds(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = static_cast<TokenId>(1 + UniformIndex(rng, vocab - 1));
  return ids;
}

template <typename F>
Matrix NumericGradient(F f, const Matrix& e, double h) {
  Matrix grad(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      Matrix plus = e, minus = e;
      plus(i, j) += h;
      minus(i, j) -= h;
      grad(i, j) = (f(plus) - f(minus)) / (2 * h);
    }
  }
  return grad;
}

double MaxRelativeError(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i], n = numeric.data()[i];
    const double scale = std::max({std::abs(a), std::abs(n), 1e-7});
    worst = std::max(worst, std::abs(a - n) / scale);
  }
  return worst;
}

Outcome GradientCorrectness() {
  const auto start = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t vocab = 5 + UniformIndex(rng, 20);
    auto model = ScaledToy(vocab, 500 + instance, 0.5);
    const std::size_t n = 1 + UniformIndex(rng, 12);
    auto e = model->Embed(RandomIds(rng, n, vocab));
    if (!e.ok()) return Fail(e.status());
    const int target = static_cast<int>(UniformIndex(rng, 2));
    auto score_grad = model->ScoreGradient(*e);
    auto ce_grad = model->CrossEntropyGradient(*e, target);
    if (!score_grad.ok()) return Fail(score_grad.status());
    if (!ce_grad.ok()) return Fail(ce_grad.status());
    auto score = [&](const Matrix& m) { return *model->Score(m); };
    auto ce = [&](const Matrix& m) { return model->CrossEntropyGradient(m, target)->loss; };
    worst = std::max(worst, MaxRelativeError(*score_grad, NumericGradient(score, *e, 1e-5)));
    worst = std::max(worst, MaxRelativeError(ce_grad->gradient, NumericGradient(ce, *e, 1e-5)));
  }
  const double secs = Seconds(start);
  return {worst < 1e-4 && secs < 10.0,
          absl::StrFormat("max relative error %.3g over 100 instances (CE and score), %.2f s",
                          worst, secs)};
}

Outcome ShapleyOracle() {
  const auto start = Clock::now();
  Rng rng(77);
  double worst_diff = 0.0;
  double sum_mean = 0.0, min_mean = 1.0;
  int instances = 0;
  for (std::uint64_t seed = 0; instances < 50; ++seed) {
    auto model = ScaledToy(20, 1000 + seed, 0.5, 8, 12);
    InProcessBackend backend(model);
    TokenSequence x;
    x.ids = RandomIds(rng, 6 + UniformIndex(rng, 5), 20);
    // C_max 0.5 keeps at most 5 filtered locations; K = 2 at most 2
    // candidates each.
    const double c_max = 0.5;
    const std::size_t k = 2;
    auto inst = PrepareShapleyInstance(x, c_max, k, 0, backend);
    if (!inst.ok()) return Fail(inst.status());
    if (inst->locations.size() > 5) return {false, "instance exceeds 5 locations"};
    SamplingOptions all{.coalition_size = inst->coalition_size,
                        .mode = SamplingMode::kEnumerate};
    auto samples = SampleCoalitions(inst->game, inst->proposal, inst->locations, all, backend);
    if (!samples.ok()) return Fail(samples.status());
    auto estimate = EstimateSv(*std::move(samples), inst->universe);
    auto oracle = BruteForceSv(inst->game, inst->proposal, inst->locations,
                               inst->coalition_size, backend);
    if (!estimate.ok()) return Fail(estimate.status());
    if (!oracle.ok()) return Fail(oracle.status());
    for (const auto& s : inst->universe) {
      worst_diff = std::max(
          worst_diff, std::abs(estimate->estimates.at(s).sv - oracle->estimates.at(s).sv));
    }
    AuditOptions audit{.ws = {50}, .seeds = 100, .k = k, .c_max = c_max, .seed = seed};
    auto report = RunShapleyAudit(x, audit, backend);
    if (!report.ok()) return Fail(report.status());
    const double mean = report->rows.front().mean_spearman;
    sum_mean += mean;
    min_mean = std::min(min_mean, mean);
    ++instances;
  }
  const double mean = sum_mean / instances;
  const double secs = Seconds(start);
  return {worst_diff <= 1e-9 && mean >= 0.9 && secs < 60.0,
          absl::StrFormat("enumerate vs oracle max |diff| %.3g; w=50 Spearman mean %.4f "
                          "(worst instance %.4f) over 50 instances x 100 seeds, %.2f s",
                          worst_diff, mean, min_mean, secs)};
}

struct Toy {
  TrainedToy trained;
  std::shared_ptr<ToyModel> model;
};

absl::StatusOr<Toy> TrainSuite(const TriggerSuiteOptions& options) {
  auto records = MakeTriggerCorpus(options);
  if (!records.ok()) return records.status();
  auto trained = TrainToyModel(*records, {}, "train");
  if (!trained.ok()) return trained.status();
  Toy toy{*std::move(trained), nullptr};
  toy.model = std::make_shared<ToyModel>(toy.trained.checkpoint.classifier,
                                         toy.trained.checkpoint.retrained_head,
                                         toy.trained.checkpoint.untrained_head);
  return toy;
}

absl::StatusOr<Dataset> SuiteData(const TriggerSuiteOptions& options, const Vocab& vocab) {
  auto records = MakeTriggerCorpus(options);
  if (!records.ok()) return records.status();
  return TokenizeAll(*records, vocab, "test");
}

Outcome BudgetIdentity(const Toy& planted) {
  InProcessBackend backend(planted.model);
  auto data = SuiteData(PlantedTriggerSuite(20, 3), planted.trained.checkpoint.vocab);
  if (!data.ok()) return Fail(data.status());
  SearchConfig config;  // K = 30, w = 5
  std::uint64_t low = ~0ull, high = 0;
  for (const TokenSequence& x : data->examples) {
    auto res = RunStrategy(x, config, backend);
    if (!res.ok()) return Fail(res.status());
    low = std::min(low, res->sampling_queries);
    high = std::max(high, res->sampling_queries);
  }
  // Independently of the search: a metered sampler run over one instance.
  const TokenSequence& x = data->examples.front();
  auto inst = PrepareShapleyInstance(x, config.c_max, config.k, 0, backend);
  if (!inst.ok()) return Fail(inst.status());
  MeteredBackend meter(backend);
  auto game = CoalitionGame::Create(x.ids, meter);
  if (!game.ok()) return Fail(game.status());
  auto samples = SampleCoalitions(
      *game, inst->proposal, inst->locations,
      {.coalition_size = inst->coalition_size, .budget = 2 * config.w * config.k, .seed = 1},
      meter);
  if (!samples.ok()) return Fail(samples.status());
  const std::uint64_t metered = meter.counter().forward();
  return {low == 300 && high == 300 && metered == 301,
          absl::StrFormat("coalition evaluations per input min %d max %d (expected 300); "
                          "metered sampler queries %d = 300 + 1 base",
                          low, high, metered)};
}

Outcome EditBudgetSafety(const Toy& planted) {
  InProcessBackend backend(planted.model);
  TriggerSuiteOptions fuzz = PlantedTriggerSuite(200, 4);
  fuzz.min_length = 3;
  fuzz.max_length = 30;
  auto data = SuiteData(fuzz, planted.trained.checkpoint.vocab);
  if (!data.ok()) return Fail(data.status());
  std::size_t successes = 0, violations = 0;
  for (Strategy s : kAllStrategies) {
    for (const TokenSequence& x : data->examples) {
      SearchConfig config;
      config.strategy = s;
      auto res = RunStrategy(x, config, backend);
      if (!res.ok()) return Fail(res.status());
      if (!res->success) continue;
      ++successes;
      const bool within = res->substitutions.size() <= EditBudget(config.c_max, x.size());
      auto applied = ApplySubstitutions(x, res->substitutions);
      if (!applied.ok()) return Fail(applied.status());
      auto before = backend.Predict(x.ids);
      auto after = backend.Predict(applied->ids);
      if (!before.ok() || !after.ok()) return {false, "re-prediction failed"};
      const bool flipped = after->Label() != before->Label() &&
                           applied->ids == res->counterfactual->ids;
      violations += !(within && flipped);
    }
  }
  return {violations == 0 && successes > 0,
          absl::StrFormat("%d successes over 200 inputs x 6 strategies, %d budget or flip "
                          "violations",
                          successes, violations)};
}

Outcome CandidateProperties() {
  Rng rng(5);
  std::size_t checks = 0, failures = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t vocab = 3 + UniformIndex(rng, 12);
    const std::size_t n = 1 + UniformIndex(rng, 6);
    std::vector<TokenId> original = RandomIds(rng, n, vocab);
    CandidateSelector selector(original, vocab);
    CandidateProposal previous;
    previous.per_position.resize(n);
    const std::size_t steps = 1 + UniformIndex(rng, vocab + 3);
    for (std::size_t k = 1; k <= steps; ++k) {
      Matrix logits = Matrix::Random(static_cast<Eigen::Index>(vocab),
                                     static_cast<Eigen::Index>(n));
      // Duplicated values exercise the tie rule.
      if (UniformUnit(rng) < 0.3) logits.row(0) = logits.row(vocab - 1);
      if (!selector.AddStep(logits).ok()) return {false, "AddStep failed"};
      const CandidateProposal& now = selector.proposal();
      for (std::size_t t = 0; t < n; ++t) {
        const auto& list = now.per_position[t];
        ++checks;
        const bool size_ok = list.size() == std::min(k, vocab - 2);
        const bool excludes =
            std::find(list.begin(), list.end(), original[t]) == list.end() &&
            std::find(list.begin(), list.end(), Vocab::kUnkId) == list.end();
        const auto& before = previous.per_position[t];
        const bool prefix = before.size() <= list.size() &&
                            std::equal(before.begin(), before.end(), list.begin());
        failures += !(size_ok && excludes && prefix);
      }
      previous = now;
    }
  }
  return {failures == 0,
          absl::StrFormat("%d position-step checks over 300 random logit sequences, %d "
                          "violations of size min(k, |V|-2), exclusion or prefix stability",
                          checks, failures)};
}

Outcome PlantedEndToEnd(const Toy& planted, double train_secs) {
  const auto start = Clock::now();
  InProcessBackend backend(planted.model);
  auto data = SuiteData(PlantedTriggerSuite(100, 2), planted.trained.checkpoint.vocab);
  if (!data.ok()) return Fail(data.status());
  std::vector<GenerationRecord> records;
  double expected_c = 0.0;
  std::size_t successes = 0, one_edit = 0;
  for (std::size_t i = 0; i < data->examples.size(); ++i) {
    const TokenSequence& x = data->examples[i];
    SearchConfig config;
    config.seed = 1;
    auto res = RunStrategy(x, config, backend);
    if (!res.ok()) return Fail(res.status());
    GenerationRecord r{.index = i, .strategy = "CLOSS", .success = res->success,
                       .n = x.size(), .tokens_changed = res->substitutions.size()};
    records.push_back(r);
    if (res->success) {
      ++successes;
      one_edit += res->substitutions.size() == 1;
      expected_c += 100.0 / static_cast<double>(x.size());
    }
  }
  auto f = FailureRate(records);
  auto c = PercentChanged(records);
  if (!f.ok()) return Fail(f.status());
  const double secs = Seconds(start) + train_secs;
  expected_c /= std::max<std::size_t>(successes, 1);
  const bool pass = *f == 0.0 && one_edit == successes && c.has_value() &&
                    std::abs(*c - expected_c) < 1e-9 && secs < 30.0;
  return {pass, absl::StrFormat("%%F %.4g, %%C %.6g vs mean 100/n %.6g, %d/%d successes with "
                                "one edit, train accuracy %.4g, %.2f s including training",
                                *f, c.value_or(-1.0), expected_c, one_edit, successes,
                                planted.trained.train_accuracy, secs)};
}

absl::StatusOr<double> FailPercent(const Dataset& data, const SearchConfig& config,
                                   ClassifierBackend& backend) {
  std::vector<GenerationRecord> records;
  for (const TokenSequence& x : data.examples) {
    auto res = RunStrategy(x, config, backend);
    if (!res.ok()) return res.status();
    records.push_back({.success = res->success, .n = x.size()});
  }
  return FailureRate(records);
}

Outcome AblationDirection(const Toy& three, const Dataset& data) {
  InProcessBackend backend(three.model);
  double closs = 0.0, sv = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto a = FailPercent(data, {.seed = seed, .strategy = Strategy::kCloss}, backend);
    auto b = FailPercent(data, {.seed = seed, .strategy = Strategy::kClossSv}, backend);
    if (!a.ok()) return Fail(a.status());
    if (!b.ok()) return Fail(b.status());
    closs += *a / 3.0;
    sv += *b / 3.0;
    absl::StrAppend(&per_seed, " seed ", seed, ": ", *a, " vs ", *b, ";");
  }
  return {closs <= sv,
          absl::StrFormat("mean %%F CLOSS %.4g, CLOSS-SV %.4g, gap %.4g points (train acc "
                          "%.4g;%s)",
                          closs, sv, sv - closs, three.trained.train_accuracy, per_seed)};
}

Outcome BeamWidthDirection(const Toy& three, const Dataset& data) {
  InProcessBackend backend(three.model);
  std::vector<double> fails;
  std::string detail = "%F by beam width:";
  bool monotone = true;
  for (std::size_t b : {5, 10, 15, 20}) {
    auto f = FailPercent(data, {.beam_width = b, .seed = 1}, backend);
    if (!f.ok()) return Fail(f.status());
    if (!fails.empty() && *f > fails.back()) monotone = false;
    fails.push_back(*f);
    absl::StrAppend(&detail, " b=", b, " ", *f, ";");
  }
  return {monotone, detail};
}

bool ExhaustiveFlip(const std::vector<TokenId>& input, int target,
                    const std::vector<Substitution>& universe, std::size_t depth,
                    ClassifierBackend& backend) {
  bool found = false;
  Coalition current;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (found) return;
    if (!current.empty()) {
      std::vector<TokenId> ids = input;
      for (const auto& s : current) ids[s.location] = s.token;
      auto score = backend.Predict(ids);
      if (score.ok() && score->Label() == target) {
        found = true;
        return;
      }
    }
    if (current.size() == depth) return;
    for (std::size_t i = start; i < universe.size(); ++i) {
      bool clash = false;
      for (const auto& s : current) clash |= s.location == universe[i].location;
      if (clash) continue;
      current.push_back(universe[i]);
      rec(i + 1);
      current.pop_back();
    }
  };
  rec(0);
  return found;
}

Outcome SearchOptimality() {
  Rng rng(9);
  int agree = 0, total = 0, oracle_hits = 0;
  for (std::uint64_t seed = 0; total < 200; ++seed) {
    const std::size_t vocab = 20;
    InProcessBackend backend(ScaledToy(vocab, 3000 + seed, 0.6, 4, 6));
    const std::size_t n = 4 + UniformIndex(rng, 4);
    std::vector<TokenId> input = RandomIds(rng, n, vocab);
    const std::size_t locs = 1 + UniformIndex(rng, 4);
    std::vector<Substitution> universe;
    for (std::size_t l = 0; l < locs; ++l) {
      const std::size_t cands = 1 + UniformIndex(rng, 3);
      for (std::size_t c = 0; c < cands; ++c) {
        const TokenId tok = static_cast<TokenId>(1 + UniformIndex(rng, vocab - 1));
        if (tok == input[l] ||
            std::find(universe.begin(), universe.end(), Substitution{l, tok}) !=
                universe.end()) {
          continue;
        }
        universe.push_back({l, tok});
      }
    }
    if (universe.empty()) continue;
    Shuffle(universe.begin(), universe.end(), rng);
    const std::size_t depth = 1 + UniformIndex(rng, locs);
    auto game = CoalitionGame::Create(input, backend);
    if (!game.ok()) return Fail(game.status());
    auto res = BeamSearch(*game, universe, {.beam_width = kUnboundedBeam, .max_depth = depth},
                          backend);
    if (!res.ok()) return Fail(res.status());
    const bool oracle =
        ExhaustiveFlip(input, 1 - game->original_label(), universe, depth, backend);
    agree += res->success == oracle;
    oracle_hits += oracle;
    ++total;
  }
  return {agree == total && oracle_hits > 0 && oracle_hits < total,
          absl::StrFormat("%d/%d instances agree with exhaustive enumeration (%d flippable)",
                          agree, total, oracle_hits)};
}

double ReferenceBleu(const std::vector<TokenId>& ref, const std::vector<TokenId>& hyp) {
  if (ref.empty() || hyp.empty()) return 0.0;
  auto grams = [](const std::vector<TokenId>& s, std::size_t n) {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::string key;
      for (std::size_t j = i; j < i + n; ++j) absl::StrAppend(&key, s[j], ",");
      out[key]++;
    }
    return out;
  };
  double product = 1.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto h = grams(hyp, n);
    auto r = grams(ref, n);
    int clipped = 0, total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      clipped += std::min(c, r.count(g) ? r[g] : 0);
    }
    product *= clipped == 0 ? 1.0 / (total + 1) : static_cast<double>(clipped) / total;
  }
  const double bp = hyp.size() > ref.size()
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref.size()) / hyp.size());
  return bp * std::pow(product, 0.25);
}

Outcome MetricsFidelity() {
  Rng rng(10);
  double worst = 0.0;
  bool identity = true, uniform = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t vocab = 3 + UniformIndex(rng, 10);
    auto ref = RandomIds(rng, 1 + UniformIndex(rng, 25), vocab);
    auto hyp = ref;
    if (trial % 2 == 0) {
      for (std::size_t e = UniformIndex(rng, ref.size() + 1); e > 0; --e) {
        hyp[UniformIndex(rng, hyp.size())] = static_cast<TokenId>(UniformIndex(rng, vocab));
      }
    } else {
      hyp = RandomIds(rng, 1 + UniformIndex(rng, 25), vocab);
    }
    worst = std::max(worst, std::abs(Bleu(ref, hyp) - ReferenceBleu(ref, hyp)));
    identity &= Bleu(ref, ref) == 1.0;
    UniformScorer scorer(vocab);
    auto ppl = scorer.Perplexity(ref);
    uniform &= ppl.ok() && *ppl == static_cast<double>(vocab);
  }
  return {worst <= 1e-9 && identity && uniform,
          absl::StrFormat("BLEU max |diff| vs reference %.3g over 100 pairs; bleu(x,x)=1 %s; "
                          "uniform perplexity == |V| %s",
                          worst, identity ? "yes" : "no", uniform ? "yes" : "no")};
}

int Main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("criterion %d %s: %s (%s)\n", id, o.pass ? "PASS" : "FAIL", name,
                o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  report(1, "gradient correctness", GradientCorrectness());
  report(2, "Shapley oracle equivalence", ShapleyOracle());

  const auto train_start = Clock::now();
  auto planted = TrainSuite(PlantedTriggerSuite(1000, 1));
  const double train_secs = Seconds(train_start);
  if (!planted.ok()) {
    std::printf("error: planted training failed: %s\n",
                std::string(planted.status().message()).c_str());
    return 1;
  }
  report(3, "budget identity", BudgetIdentity(*planted));
  report(4, "edit-budget safety", EditBudgetSafety(*planted));
  report(5, "candidate list properties", CandidateProperties());
  report(6, "planted-trigger end to end", PlantedEndToEnd(*planted, train_secs));

  auto three = TrainSuite(ThreeTriggerSuite(1000, 1));
  if (!three.ok()) {
    std::printf("error: three-trigger training failed: %s\n",
                std::string(three.status().message()).c_str());
    return 1;
  }
  auto three_data = SuiteData(ThreeTriggerSuite(100, 2), three->trained.checkpoint.vocab);
  if (!three_data.ok()) return 1;
  report(7, "ablation direction", AblationDirection(*three, *three_data));
  report(8, "beam-width direction", BeamWidthDirection(*three, *three_data));
  report(9, "small-instance search optimality", SearchOptimality());
  report(10, "metrics fidelity", MetricsFidelity());

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace closs

int main() { return closs::Main(); }
