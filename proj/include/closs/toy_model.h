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

#ifndef CLOSS_TOY_MODEL_H_
#define CLOSS_TOY_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <string>

#include "absl/status/statusor.h"
#include "closs/corpus.h"
#include "closs/model.h"

namespace closs {

struct ToyDims {
  std::size_t vocab = 0;
  std::size_t embed = 16;
  std::size_t hidden = 32;
};

// Window-3 encoder, mean pooling, logistic head:
//
//   h_t = tanh(W [e_{t-1}; e_t; e_{t+1}] + b)    (zero rows past the ends)
//   p1  = sigmoid(u . mean_t(h_t) + c)
struct ToyClassifier {
  Matrix embeddings;      // |V| x d
  Matrix encoder_weight;  // d_h x 3d
  Vector encoder_bias;    // d_h
  Vector head_weight;     // d_h
  double head_bias = 0.0;

  // Every parameter uniform in [-0.1, 0.1).
  static ToyClassifier Random(const ToyDims& dims, std::uint64_t seed);

  ToyDims dims() const;
  absl::Status CheckInput(const Matrix& e) const;

  // n x 3d stacked windows.
  Matrix Windows(const Matrix& e) const;
  // n x d_h encoder states.
  Matrix Hidden(const Matrix& e) const;
  double Logit(const Matrix& e) const;

  // Gradient of a scalar f(logit) w.r.t. E, given df/dlogit.
  Matrix BackpropLogit(const Matrix& e, double dlogit) const;

  bool operator==(const ToyClassifier& other) const;
};

// Token logits from encoder states: column t = projection * h_t + bias.
struct LmHead {
  Matrix projection;  // |V| x d_h
  Vector bias;        // |V|

  static LmHead Random(std::size_t vocab, std::size_t hidden,
                       std::uint64_t seed);
  // |V| x n.
  Matrix Logits(const Matrix& hidden_states) const;

  bool operator==(const LmHead& other) const;
};

struct TrainOptions {
  std::size_t epochs = 50;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct TrainResult {
  ToyClassifier model;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

// Mini-batch SGD on mean binary cross-entropy. Examples are visited in a
// seeded shuffle each epoch.
absl::StatusOr<TrainResult> TrainClassifier(const Dataset& data,
                                            const ToyDims& dims,
                                            const TrainOptions& options);

double Accuracy(const ToyClassifier& model, const Dataset& data);

struct LmHeadOptions {
  std::size_t epochs = 150;
  double learning_rate = 1.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

// Softmax regression predicting x_t from the (frozen) encoder state h_t
// over every position of `data`. Starts from LmHead::Random(seed).
absl::StatusOr<LmHead> RetrainLmHead(const ToyClassifier& model,
                                     const Dataset& data,
                                     const LmHeadOptions& options);

// Classifier plus both LM heads, exposed as a DifferentiableModel.
class ToyModel : public DifferentiableModel {
 public:
  ToyModel(ToyClassifier classifier, LmHead retrained, LmHead untrained);

  std::size_t vocab_size() const override;
  std::size_t embedding_dim() const override;
  const Matrix& embedding_table() const override {
    return classifier_.embeddings;
  }
  absl::StatusOr<double> Score(const Matrix& embeddings) const override;
  absl::StatusOr<Matrix> ScoreGradient(const Matrix& embeddings) const override;
  absl::StatusOr<LossAndGradient> CrossEntropyGradient(
      const Matrix& embeddings, int target) const override;
  bool HasLmHead(LmHeadKind) const override { return true; }
  absl::StatusOr<Matrix> LmLogits(const Matrix& embeddings,
                                  LmHeadKind kind) const override;

  const ToyClassifier& classifier() const { return classifier_; }
  const LmHead& head(LmHeadKind kind) const {
    return kind == LmHeadKind::kRetrained ? retrained_ : untrained_;
  }

 private:
  ToyClassifier classifier_;
  LmHead retrained_;
  LmHead untrained_;
};

// A trained toy model together with the vocabulary it was trained on.
struct ModelCheckpoint {
  Vocab vocab;
  ToyClassifier classifier;
  LmHead retrained_head;
  LmHead untrained_head;
};

// Binary layout: "CLSM", u32 version, u32 |V|, u32 d, u32 d_h, then
// row-major little-endian f64 blocks (embeddings, encoder weight, encoder
// bias, head weight, head bias, retrained projection, retrained bias,
// untrained projection, untrained bias), then the vocabulary as u32 count
// followed by u32-length-prefixed UTF-8 tokens (UNK excluded).
absl::Status SaveCheckpoint(const std::string& path,
                            const ModelCheckpoint& checkpoint);
absl::StatusOr<ModelCheckpoint> LoadCheckpoint(const std::string& path);

}  // namespace closs

#endif  // CLOSS_TOY_MODEL_H_
