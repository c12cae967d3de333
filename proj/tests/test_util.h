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

#ifndef CLOSS_TESTS_TEST_UTIL_H_
#define CLOSS_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/gateway.h"
#include "closs/in_process_backend.h"
#include "closs/rng.h"
#include "closs/synthetic.h"
#include "closs/toy_model.h"
#include "gtest/gtest.h"

namespace closs::testing {

inline const absl::Status& StatusOf(const absl::Status& s) { return s; }
template <typename T>
const absl::Status& StatusOf(const absl::StatusOr<T>& s) {
  return s.status();
}

#define ASSERT_OK(expr) \
  ASSERT_TRUE((expr).ok()) << ::closs::testing::StatusOf(expr)
#define EXPECT_OK(expr) \
  EXPECT_TRUE((expr).ok()) << ::closs::testing::StatusOf(expr)
#define ASSERT_OK_AND_ASSIGN(lhs, rexpr) \
  ASSERT_OK_AND_ASSIGN_IMPL(CLOSS_TEST_CONCAT(_so_, __LINE__), lhs, rexpr)
#define ASSERT_OK_AND_ASSIGN_IMPL(tmp, lhs, rexpr) \
  auto tmp = (rexpr);                              \
  ASSERT_TRUE(tmp.ok()) << tmp.status();           \
  lhs = *std::move(tmp)
#define CLOSS_TEST_CONCAT_INNER(a, b) a##b
#define CLOSS_TEST_CONCAT(a, b) CLOSS_TEST_CONCAT_INNER(a, b)

// Fresh directory under the gtest temp root.
inline std::string TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::path(::testing::TempDir()) /
             ("closs_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Random toy model with parameters uniform in [-scale, scale).
inline ToyModel RandomToyModel(std::size_t vocab, std::uint64_t seed, double scale = 1.0,
                               std::size_t embed = 4, std::size_t hidden = 6) {
  ToyClassifier c = ToyClassifier::Random({vocab, embed, hidden}, seed);
  const double s = scale / 0.1;
  c.embeddings *= s;
  c.encoder_weight *= s;
  c.encoder_bias *= s;
  c.head_weight *= s;
  c.head_bias *= s;
  LmHead retrained = LmHead::Random(vocab, hidden, seed + 1);
  retrained.projection *= s;
  retrained.bias *= s;
  LmHead untrained = LmHead::Random(vocab, hidden, seed + 2);
  return ToyModel(std::move(c), std::move(retrained), std::move(untrained));
}

inline std::vector<TokenId> RandomIds(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = static_cast<TokenId>(UniformIndex(rng, vocab));
  return ids;
}

// p1 = 0.5 + sum of per-(position, token) weights, so coalition values are
// additive in their members. Saliency and proposals are fixed tables.
class LinearBackend : public ClassifierBackend {
 public:
  std::map<std::pair<std::size_t, TokenId>, double> weights;
  SaliencyVector saliency;
  CandidateProposal proposal;

  double Score(const std::vector<TokenId>& ids) const {
    double p = 0.5;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = weights.find({i, ids[i]});
      if (it != weights.end()) p += it->second;
    }
    return p;
  }

 protected:
  absl::StatusOr<std::vector<ClassScore>> DoPredictBatch(
      const std::vector<std::vector<TokenId>>& batch) override {
    std::vector<ClassScore> out;
    for (const auto& ids : batch) out.push_back(ClassScore::Clamped(Score(ids)));
    return out;
  }
  absl::StatusOr<SaliencyVector> DoSaliency(const std::vector<TokenId>& ids) override {
    if (saliency.empty()) return SaliencyVector(ids.size(), 1.0);
    return saliency;
  }
  absl::StatusOr<CandidateProposal> DoProposeCandidates(const std::vector<TokenId>&, int,
                                                        std::size_t, ProposalMode) override {
    return proposal;
  }
};

// The single-trigger toy task, trained once per process.
inline const TrainedToy& PlantedToy() {
  static const TrainedToy* toy = [] {
    auto records = MakeTriggerCorpus(PlantedTriggerSuite(1000, 1));
    auto trained = TrainToyModel(*records, {}, "planted");
    if (!trained.ok()) std::abort();
    return new TrainedToy(*std::move(trained));
  }();
  return *toy;
}

inline std::shared_ptr<ToyModel> ModelFrom(const ModelCheckpoint& ckpt) {
  return std::make_shared<ToyModel>(ckpt.classifier, ckpt.retrained_head,
                                    ckpt.untrained_head);
}

inline std::unique_ptr<InProcessBackend> PlantedBackend() {
  return std::make_unique<InProcessBackend>(ModelFrom(PlantedToy().checkpoint));
}

}  // namespace closs::testing

#endif  // CLOSS_TESTS_TEST_UTIL_H_
