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

#include "closs/synthetic.h"

#include <algorithm>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "closs/rng.h"
#include "closs/status_macros.h"

namespace closs {

TriggerSuiteOptions PlantedTriggerSuite(std::size_t count, std::uint64_t seed) {
  TriggerSuiteOptions o;
  o.count = count;
  o.seed = seed;
  return o;
}

TriggerSuiteOptions ThreeTriggerSuite(std::size_t count, std::uint64_t seed) {
  TriggerSuiteOptions o;
  o.count = count;
  o.seed = seed;
  o.triggers = {"zonk", "blip", "frob"};
  o.threshold = 2;
  return o;
}

const std::vector<std::string>& FillerWords() {
  static const std::vector<std::string> words = {
      "the",   "a",     "cat",   "dog",  "sat",   "ran",   "on",    "under",
      "mat",   "park",  "green", "old",  "quiet", "river", "house", "and",
      "then",  "slowly", "bird", "tree", "over",  "road",  "small", "blue"};
  return words;
}

absl::StatusOr<std::vector<LabeledText>> MakeTriggerCorpus(
    const TriggerSuiteOptions& options) {
  if (options.triggers.empty() || options.threshold == 0 ||
      options.threshold > options.triggers.size()) {
    return absl::InvalidArgumentError("threshold must be in [1, #triggers]");
  }
  if (options.min_length < options.threshold ||
      options.max_length < options.min_length) {
    return absl::InvalidArgumentError("bad length range");
  }
  for (const std::string& t : options.triggers) {
    if (std::find(FillerWords().begin(), FillerWords().end(), t) != FillerWords().end()) {
      return absl::InvalidArgumentError(absl::StrCat("trigger '", t, "' is a filler word"));
    }
  }
  Rng rng(options.seed);
  const auto& filler = FillerWords();
  std::vector<LabeledText> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    const int label = static_cast<int>(i % 2);
    const std::size_t n =
        options.min_length + UniformIndex(rng, options.max_length - options.min_length + 1);
    std::vector<std::string> words(n);
    for (auto& w : words) w = filler[UniformIndex(rng, filler.size())];

    const std::size_t planted = label == 1 ? options.threshold : options.threshold - 1;
    std::vector<std::size_t> trigger_order(options.triggers.size());
    std::vector<std::size_t> positions(n);
    for (std::size_t j = 0; j < trigger_order.size(); ++j) trigger_order[j] = j;
    for (std::size_t j = 0; j < n; ++j) positions[j] = j;
    Shuffle(trigger_order.begin(), trigger_order.end(), rng);
    Shuffle(positions.begin(), positions.end(), rng);
    for (std::size_t j = 0; j < planted; ++j) {
      words[positions[j]] = options.triggers[trigger_order[j]];
    }
    out.push_back({absl::StrJoin(words, " "), label, 0});
  }
  return out;
}

absl::StatusOr<TrainedToy> TrainToyModel(const std::vector<LabeledText>& records,
                                         const ToyTrainingOptions& options,
                                         std::string dataset_name) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const LabeledText& r : records) texts.push_back(r.text);
  ASSIGN_OR_RETURN(Vocab vocab, BuildVocab(texts, options.max_vocab, 1));
  ASSIGN_OR_RETURN(Dataset data, TokenizeAll(records, vocab, std::move(dataset_name)));

  const ToyDims dims{vocab.size(), options.embed, options.hidden};
  ASSIGN_OR_RETURN(TrainResult trained, TrainClassifier(data, dims, options.classifier));
  ASSIGN_OR_RETURN(LmHead head, RetrainLmHead(trained.model, data, options.head));
  LmHead untrained = LmHead::Random(vocab.size(), options.hidden, options.head.seed);

  TrainedToy out;
  out.train_accuracy = trained.train_accuracy;
  ToyModel model(trained.model, head, untrained);
  out.lm_accuracy = LmArgmaxAccuracy(model, data, LmHeadKind::kRetrained);
  out.checkpoint = {std::move(vocab), std::move(trained.model), std::move(head),
                    std::move(untrained)};
  out.data = std::move(data);
  return out;
}

double LmArgmaxAccuracy(const ToyModel& model, const Dataset& data,
                        LmHeadKind kind) {
  std::size_t hits = 0, total = 0;
  for (const TokenSequence& x : data.examples) {
    auto e = model.Embed(x.ids);
    if (!e.ok()) continue;
    auto logits = model.LmLogits(*e, kind);
    if (!logits.ok()) continue;
    for (std::size_t t = 0; t < x.ids.size(); ++t) {
      Eigen::Index best = 0;
      logits->col(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      hits += static_cast<int>(best) == x.ids[t];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace closs
