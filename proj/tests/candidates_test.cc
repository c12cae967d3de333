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

#include "closs/candidates.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "closs/in_process_backend.h"
#include "closs/latent_optimizer.h"
#include "closs/rng.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "test_util.h"

namespace closs {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

Matrix RandomLogits(Rng& rng, std::size_t vocab, std::size_t n) {
  Matrix m(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    // Coarse values so that ties occur.
    m.data()[i] = static_cast<double>(UniformIndex(rng, 7)) - 3.0;
  }
  return m;
}

// Hand-rolled reference: a fresh masked argmax scan per step.
std::vector<std::vector<TokenId>> ReferenceSelection(const std::vector<Matrix>& logits,
                                                     const std::vector<TokenId>& original) {
  std::vector<std::vector<TokenId>> lists(original.size());
  for (const Matrix& m : logits) {
    for (std::size_t t = 0; t < original.size(); ++t) {
      TokenId best = -1;
      for (TokenId s = 1; s < m.rows(); ++s) {
        if (s == original[t]) continue;
        if (std::find(lists[t].begin(), lists[t].end(), s) != lists[t].end()) continue;
        if (best < 0 || m(s, static_cast<Eigen::Index>(t)) > m(best, static_cast<Eigen::Index>(t))) {
          best = s;
        }
      }
      if (best >= 0) lists[t].push_back(best);
    }
  }
  return lists;
}

TEST(CandidatesTest, CapacityIsVocabMinusTwo) {
  Rng rng(1);
  std::vector<Matrix> logits;
  for (int k = 0; k < 10; ++k) logits.push_back(RandomLogits(rng, 4, 3));
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates(logits, {1, 2, 3}, 4, 10));
  for (const auto& list : p.per_position) EXPECT_EQ(list.size(), 2u);
}

TEST(CandidatesTest, UnkOriginalLeavesOneMoreChoice) {
  Rng rng(2);
  std::vector<Matrix> logits;
  for (int k = 0; k < 10; ++k) logits.push_back(RandomLogits(rng, 4, 1));
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates(logits, {0}, 4, 10));
  EXPECT_THAT(p.per_position[0], ::testing::UnorderedElementsAre(1, 2, 3));
}

TEST(CandidatesTest, SingleStepIsMaskedArgmax) {
  Matrix m(5, 2);
  m << 9, 9,   // UNK: never selected
      1, 7,    //
      8, 2,    // original at position 0
      3, 7,    //
      0, 1;
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates({m}, {2, 4}, 5, 1));
  EXPECT_THAT(p.per_position, ElementsAre(ElementsAre(3), ElementsAre(1)));
  EXPECT_THAT(p.steps, ElementsAre(ElementsAre(1), ElementsAre(1)));
}

TEST(CandidatesTest, AlternatingTopTokenIsRecordedInOrder) {
  // u = 2 tops step 1, v = 3 tops step 2.
  Matrix t1 = Matrix::Zero(5, 1), t2 = Matrix::Zero(5, 1);
  t1(2, 0) = 5;
  t1(3, 0) = 4;
  t2(3, 0) = 5;
  t2(2, 0) = 4;
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates({t1, t2}, {1}, 5, 2));
  EXPECT_THAT(p.per_position[0], ElementsAre(2, 3));
  EXPECT_THAT(p.steps[0], ElementsAre(1, 2));
}

TEST(CandidatesTest, RepeatedTopTokenYieldsTheRunnerUp) {
  Matrix t = Matrix::Zero(5, 1);
  t(2, 0) = 5;
  t(3, 0) = 4;
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates({t, t}, {1}, 5, 2));
  EXPECT_THAT(p.per_position[0], ElementsAre(2, 3));
}

TEST(CandidatesTest, TiesGoToTheLowestId) {
  Matrix t = Matrix::Constant(6, 1, 1.0);
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates({t, t, t}, {2}, 6, 3));
  EXPECT_THAT(p.per_position[0], ElementsAre(1, 3, 4));
}

TEST(CandidatesTest, PropertiesOverRandomLogits) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t vocab = 3 + UniformIndex(rng, 10);
    const std::size_t n = 1 + UniformIndex(rng, 6);
    const std::size_t k = 1 + UniformIndex(rng, 15);
    auto original = testing::RandomIds(rng, n, vocab);
    std::vector<Matrix> logits;
    for (std::size_t s = 0; s <= k; ++s) logits.push_back(RandomLogits(rng, vocab, n));

    CandidateSelector selector(original, vocab);
    for (std::size_t step = 1; step <= k; ++step) {
      ASSERT_OK(selector.AddStep(logits[step - 1]));
      for (std::size_t t = 0; t < n; ++t) {
        const auto& list = selector.proposal().per_position[t];
        // Growth, exclusion, no duplicates. UNK as the original still
        // leaves |V| - 2 selectable tokens, so the bound is exact either way.
        const std::size_t cap = original[t] == Vocab::kUnkId ? vocab - 1 : vocab - 2;
        EXPECT_EQ(list.size(), std::min(step, cap));
        EXPECT_EQ(std::count(list.begin(), list.end(), original[t]), 0);
        EXPECT_EQ(std::count(list.begin(), list.end(), Vocab::kUnkId), 0);
        EXPECT_EQ(std::set<TokenId>(list.begin(), list.end()).size(), list.size());
      }
    }
    const std::vector<Matrix> first_k(logits.begin(), logits.begin() + static_cast<long>(k));
    ASSERT_OK_AND_ASSIGN(CandidateProposal shorter,
                         GenerateCandidates(first_k, original, vocab, k));
    ASSERT_OK_AND_ASSIGN(CandidateProposal longer,
                         GenerateCandidates(logits, original, vocab, k + 1));
    EXPECT_EQ(shorter.per_position, ReferenceSelection(first_k, original));
    for (std::size_t t = 0; t < n; ++t) {
      const auto& a = shorter.per_position[t];
      const auto& b = longer.per_position[t];
      ASSERT_LE(a.size(), b.size());
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << "prefix at " << t;
    }
  }
}

TEST(CandidatesTest, StepCountMustMatchK) {
  Matrix t = Matrix::Zero(5, 1);
  auto p = GenerateCandidates({t, t}, {1}, 5, 3);
  ASSERT_FALSE(p.ok());
  EXPECT_THAT(p.status().message(), HasSubstr("K = 3"));
}

TEST(CandidatesTest, RejectsBadLogits) {
  CandidateSelector selector({1, 2}, 5);
  EXPECT_FALSE(selector.AddStep(Matrix::Zero(4, 2)).ok());
  EXPECT_FALSE(selector.AddStep(Matrix::Zero(5, 3)).ok());
  Matrix nan = Matrix::Zero(5, 2);
  nan(3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(selector.AddStep(nan).ok());
}

TEST(CandidatesTest, TopKEqualsSelectorOnRepeatedMatrix) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t vocab = 4 + UniformIndex(rng, 8);
    auto original = testing::RandomIds(rng, 4, vocab);
    const Matrix m = RandomLogits(rng, vocab, 4);
    const std::size_t k = 1 + UniformIndex(rng, 10);
    ASSERT_OK_AND_ASSIGN(CandidateProposal top, TopKCandidates(m, original, vocab, k));
    ASSERT_OK_AND_ASSIGN(CandidateProposal repeated,
                         GenerateCandidates(std::vector<Matrix>(k, m), original, vocab, k));
    EXPECT_EQ(top.per_position, repeated.per_position);
  }
}

TEST(CandidatesTest, TrajectoryPathUsesTheChosenHead) {
  auto model = testing::ModelFrom(testing::PlantedToy().checkpoint);
  const auto& ids = testing::PlantedToy().data.examples[0].ids;
  OptimizerOptions options;
  options.steps = 5;
  ASSERT_OK_AND_ASSIGN(Trajectory traj, OptimizeEmbeddings(*model, ids, 1, options));
  for (LmHeadKind head : {LmHeadKind::kRetrained, LmHeadKind::kUntrained}) {
    std::vector<Matrix> logits;
    for (const Matrix& e : traj.steps) logits.push_back(*model->LmLogits(e, head));
    ASSERT_OK_AND_ASSIGN(CandidateProposal expected,
                         GenerateCandidates(logits, ids, model->vocab_size(), 5));
    ASSERT_OK_AND_ASSIGN(CandidateProposal actual,
                         GenerateCandidates(traj, *model, head, ids, 5));
    EXPECT_EQ(actual.per_position, expected.per_position);
  }
}

TEST(CandidatesTest, DumpWritesOneLinePerPosition) {
  ASSERT_OK_AND_ASSIGN(Vocab vocab, Vocab::FromTokens({"a", "b", "c"}));
  Matrix t = Matrix::Zero(4, 2);
  t(3, 0) = 1;
  ASSERT_OK_AND_ASSIGN(CandidateProposal p, GenerateCandidates({t}, {1, 2}, 4, 1));
  const std::string path = testing::TempDir("dump") + "/c.jsonl";
  ASSERT_OK(WriteCandidateDump(path, p, vocab));
  std::ifstream in(path);
  std::string line;
  std::vector<nlohmann::json> lines;
  while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0]["position"], 0);
  EXPECT_EQ(lines[0]["candidates"][0]["token"], "c");
  EXPECT_EQ(lines[0]["candidates"][0]["step"], 1);
  EXPECT_EQ(lines[1]["candidates"][0]["token"], "a");
}

}  // namespace
}  // namespace closs
