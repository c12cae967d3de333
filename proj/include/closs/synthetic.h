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

#ifndef CLOSS_SYNTHETIC_H_
#define CLOSS_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/toy_model.h"

namespace closs {

// Texts of filler words with trigger tokens planted at random positions.
// The label is 1 iff at least `threshold` distinct triggers occur. Every
// text holds exactly threshold or threshold - 1 triggers, so one
// substitution always suffices to flip the true label.
struct TriggerSuiteOptions {
  std::size_t count = 1000;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::vector<std::string> triggers = {"zonk"};
  std::size_t threshold = 1;
  std::uint64_t seed = 1;
};

// The single-trigger corpus: "zonk" alone decides the label.
TriggerSuiteOptions PlantedTriggerSuite(std::size_t count, std::uint64_t seed);
// Three triggers, label 1 iff at least two are present.
TriggerSuiteOptions ThreeTriggerSuite(std::size_t count, std::uint64_t seed);

const std::vector<std::string>& FillerWords();

absl::StatusOr<std::vector<LabeledText>> MakeTriggerCorpus(
    const TriggerSuiteOptions& options);

struct ToyTrainingOptions {
  std::size_t embed = 16;
  std::size_t hidden = 32;
  std::size_t max_vocab = 20000;
  TrainOptions classifier;
  LmHeadOptions head;
};

struct TrainedToy {
  ModelCheckpoint checkpoint;
  Dataset data;
  double train_accuracy = 0.0;
  double lm_accuracy = 0.0;
};

// Builds the vocabulary, trains the classifier and the retrained LM head,
// and draws the untrained head from the same seed.
absl::StatusOr<TrainedToy> TrainToyModel(const std::vector<LabeledText>& records,
                                         const ToyTrainingOptions& options,
                                         std::string dataset_name = "train");

// Fraction of positions where the LM head's argmax reproduces the input
// token when fed the unmodified embeddings.
double LmArgmaxAccuracy(const ToyModel& model, const Dataset& data,
                        LmHeadKind kind);

}  // namespace closs

#endif  // CLOSS_SYNTHETIC_H_
