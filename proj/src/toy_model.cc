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

#include "closs/toy_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "absl/strings/str_cat.h"
#include "closs/rng.h"
#include "closs/status_macros.h"

namespace closs {
namespace {

void FillUniform(Matrix& m, Rng& rng) {
  // Row-major fill so the draw order matches the checkpoint layout.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = UniformReal(rng, -0.1, 0.1);
    }
  }
}

void FillUniform(Vector& v, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = UniformReal(rng, -0.1, 0.1);
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// log(1 + exp(z)) without overflow.
double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double BinaryCrossEntropyFromLogit(double z, int target) {
  return Softplus(z) - (target == 1 ? z : 0.0);
}

Matrix EmbedIds(const Matrix& table, const std::vector<TokenId>& ids) {
  Matrix e(ids.size(), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) e.row(t) = table.row(ids[t]);
  return e;
}

}  // namespace

ToyClassifier ToyClassifier::Random(const ToyDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  ToyClassifier m;
  m.embeddings.resize(dims.vocab, dims.embed);
  m.encoder_weight.resize(dims.hidden, 3 * dims.embed);
  m.encoder_bias.resize(dims.hidden);
  m.head_weight.resize(dims.hidden);
  FillUniform(m.embeddings, rng);
  FillUniform(m.encoder_weight, rng);
  FillUniform(m.encoder_bias, rng);
  FillUniform(m.head_weight, rng);
  m.head_bias = UniformReal(rng, -0.1, 0.1);
  return m;
}

ToyDims ToyClassifier::dims() const {
  return {static_cast<std::size_t>(embeddings.rows()),
          static_cast<std::size_t>(embeddings.cols()),
          static_cast<std::size_t>(encoder_weight.rows())};
}

absl::Status ToyClassifier::CheckInput(const Matrix& e) const {
  if (e.rows() < 1) return absl::InvalidArgumentError("empty input");
  if (e.cols() != embeddings.cols()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "dimension mismatch: got ", e.cols(), " columns, expected ",
        embeddings.cols()));
  }
  if (!e.allFinite()) return absl::InvalidArgumentError("non-finite embedding");
  return absl::OkStatus();
}

Matrix ToyClassifier::Windows(const Matrix& e) const {
  const Eigen::Index n = e.rows();
  const Eigen::Index d = e.cols();
  Matrix x = Matrix::Zero(n, 3 * d);
  if (n > 1) {
    x.block(1, 0, n - 1, d) = e.topRows(n - 1);
    x.block(0, 2 * d, n - 1, d) = e.bottomRows(n - 1);
  }
  x.block(0, d, n, d) = e;
  return x;
}

Matrix ToyClassifier::Hidden(const Matrix& e) const {
  Matrix a = Windows(e) * encoder_weight.transpose();
  a.rowwise() += encoder_bias.transpose();
  return a.array().tanh().matrix();
}

double ToyClassifier::Logit(const Matrix& e) const {
  const Vector pooled = Hidden(e).colwise().mean().transpose();
  return head_weight.dot(pooled) + head_bias;
}

Matrix ToyClassifier::BackpropLogit(const Matrix& e, double dlogit) const {
  const Eigen::Index n = e.rows();
  const Eigen::Index d = e.cols();
  const Matrix h = Hidden(e);
  // dA = dlogit / n * u^T scaled by tanh'(a) = 1 - h^2.
  Matrix da = (1.0 - h.array().square()).matrix();
  da.array().rowwise() *= (dlogit / static_cast<double>(n)) *
                          head_weight.transpose().array();
  const Matrix dx = da * encoder_weight;  // n x 3d
  Matrix de = dx.block(0, d, n, d);
  if (n > 1) {
    de.topRows(n - 1) += dx.block(1, 0, n - 1, d);
    de.bottomRows(n - 1) += dx.block(0, 2 * d, n - 1, d);
  }
  return de;
}

bool ToyClassifier::operator==(const ToyClassifier& other) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(embeddings, other.embeddings) &&
         same(encoder_weight, other.encoder_weight) &&
         same(encoder_bias, other.encoder_bias) &&
         same(head_weight, other.head_weight) && head_bias == other.head_bias;
}

LmHead LmHead::Random(std::size_t vocab, std::size_t hidden,
                      std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, 0x4c4d));
  LmHead head;
  head.projection.resize(vocab, hidden);
  head.bias.resize(vocab);
  FillUniform(head.projection, rng);
  FillUniform(head.bias, rng);
  return head;
}

Matrix LmHead::Logits(const Matrix& hidden_states) const {
  Matrix logits = projection * hidden_states.transpose();
  logits.colwise() += bias;
  return logits;
}

bool LmHead::operator==(const LmHead& other) const {
  return projection.rows() == other.projection.rows() &&
         projection.cols() == other.projection.cols() &&
         projection == other.projection && bias.size() == other.bias.size() &&
         bias == other.bias;
}

double Accuracy(const ToyClassifier& model, const Dataset& data) {
  if (data.examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const TokenSequence& x : data.examples) {
    const int predicted =
        Sigmoid(model.Logit(EmbedIds(model.embeddings, x.ids))) > 0.5 ? 1 : 0;
    correct += predicted == x.label;
  }
  return static_cast<double>(correct) / static_cast<double>(data.examples.size());
}

absl::StatusOr<TrainResult> TrainClassifier(const Dataset& data,
                                            const ToyDims& dims,
                                            const TrainOptions& options) {
  if (data.examples.empty()) return absl::InvalidArgumentError("empty dataset");
  if (!(options.learning_rate > 0)) {
    return absl::InvalidArgumentError("learning rate must be positive");
  }
  if (options.batch_size == 0) {
    return absl::InvalidArgumentError("batch size must be positive");
  }
  for (const TokenSequence& x : data.examples) {
    if (x.ids.empty()) return absl::InvalidArgumentError("empty example");
    for (TokenId id : x.ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= dims.vocab) {
        return absl::OutOfRangeError(absl::StrCat("token id ", id, " out of range"));
      }
    }
  }

  TrainResult result;
  ToyClassifier& m = result.model;
  m = ToyClassifier::Random(dims, options.seed);
  Rng order_rng(DeriveSeed(options.seed, 1));
  std::vector<std::size_t> order(data.examples.size());
  std::iota(order.begin(), order.end(), 0);

  Matrix g_emb, g_w;
  Vector g_b, g_u;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    Shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      g_emb.setZero(m.embeddings.rows(), m.embeddings.cols());
      g_w.setZero(m.encoder_weight.rows(), m.encoder_weight.cols());
      g_b.setZero(m.encoder_bias.size());
      g_u.setZero(m.head_weight.size());
      double g_c = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const TokenSequence& x = data.examples[order[i]];
        const Matrix e = EmbedIds(m.embeddings, x.ids);
        const Eigen::Index n = e.rows();
        const Eigen::Index d = e.cols();
        const Matrix windows = m.Windows(e);
        Matrix h = windows * m.encoder_weight.transpose();
        h.rowwise() += m.encoder_bias.transpose();
        h = h.array().tanh().matrix();
        const Vector pooled = h.colwise().mean().transpose();
        const double z = m.head_weight.dot(pooled) + m.head_bias;
        epoch_loss += BinaryCrossEntropyFromLogit(z, x.label);

        const double dz = (Sigmoid(z) - x.label) * scale;
        g_u += dz * pooled;
        g_c += dz;
        Matrix da = (1.0 - h.array().square()).matrix();
        da.array().rowwise() *=
            (dz / static_cast<double>(n)) * m.head_weight.transpose().array();
        g_w += da.transpose() * windows;
        g_b += da.colwise().sum().transpose();
        const Matrix dx = da * m.encoder_weight;
        for (Eigen::Index t = 0; t < n; ++t) {
          g_emb.row(x.ids[t]) += dx.block(t, d, 1, d);
          if (t > 0) g_emb.row(x.ids[t - 1]) += dx.block(t, 0, 1, d);
          if (t + 1 < n) g_emb.row(x.ids[t + 1]) += dx.block(t, 2 * d, 1, d);
        }
      }
      m.embeddings -= options.learning_rate * g_emb;
      m.encoder_weight -= options.learning_rate * g_w;
      m.encoder_bias -= options.learning_rate * g_b;
      m.head_weight -= options.learning_rate * g_u;
      m.head_bias -= options.learning_rate * g_c;
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || !m.embeddings.allFinite() ||
        !m.encoder_weight.allFinite()) {
      return absl::InternalError(absl::StrCat("diverged at epoch ", epoch));
    }
    result.final_loss = epoch_loss;
  }
  result.train_accuracy = Accuracy(m, data);
  return result;
}

absl::StatusOr<LmHead> RetrainLmHead(const ToyClassifier& model,
                                     const Dataset& data,
                                     const LmHeadOptions& options) {
  if (data.examples.empty()) return absl::InvalidArgumentError("empty dataset");
  const ToyDims dims = model.dims();
  // Encoder is frozen, so states are computed once.
  std::vector<Vector> states;
  std::vector<TokenId> targets;
  for (const TokenSequence& x : data.examples) {
    for (TokenId id : x.ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= dims.vocab) {
        return absl::OutOfRangeError(absl::StrCat("token id ", id, " out of range"));
      }
    }
    const Matrix h = model.Hidden(EmbedIds(model.embeddings, x.ids));
    for (Eigen::Index t = 0; t < h.rows(); ++t) {
      states.push_back(h.row(t).transpose());
      targets.push_back(x.ids[t]);
    }
  }

  LmHead head = LmHead::Random(dims.vocab, dims.hidden, options.seed);
  Rng order_rng(DeriveSeed(options.seed, 2));
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  Matrix g_proj;
  Vector g_bias;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    Shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      g_proj.setZero(head.projection.rows(), head.projection.cols());
      g_bias.setZero(head.bias.size());
      for (std::size_t i = start; i < end; ++i) {
        const Vector& h = states[order[i]];
        Vector logits = head.projection * h + head.bias;
        const double top = logits.maxCoeff();
        Vector prob = (logits.array() - top).exp().matrix();
        const double total = prob.sum();
        prob /= total;
        const TokenId y = targets[order[i]];
        epoch_loss += std::log(total) + top - logits(y);
        prob(y) -= 1.0;
        prob *= scale;
        g_proj.noalias() += prob * h.transpose();
        g_bias += prob;
      }
      head.projection -= options.learning_rate * g_proj;
      head.bias -= options.learning_rate * g_bias;
    }
    if (!std::isfinite(epoch_loss) || !head.projection.allFinite()) {
      return absl::InternalError(absl::StrCat("LM head diverged at epoch ", epoch));
    }
  }
  return head;
}

absl::StatusOr<Matrix> DifferentiableModel::Embed(
    const std::vector<TokenId>& ids) const {
  if (ids.empty()) return absl::InvalidArgumentError("empty input");
  const Matrix& table = embedding_table();
  for (TokenId id : ids) {
    if (id < 0 || id >= table.rows()) {
      return absl::OutOfRangeError(absl::StrCat("token id ", id, " out of range"));
    }
  }
  return EmbedIds(table, ids);
}

ToyModel::ToyModel(ToyClassifier classifier, LmHead retrained, LmHead untrained)
    : classifier_(std::move(classifier)),
      retrained_(std::move(retrained)),
      untrained_(std::move(untrained)) {}

std::size_t ToyModel::vocab_size() const {
  return static_cast<std::size_t>(classifier_.embeddings.rows());
}

std::size_t ToyModel::embedding_dim() const {
  return static_cast<std::size_t>(classifier_.embeddings.cols());
}

absl::StatusOr<double> ToyModel::Score(const Matrix& embeddings) const {
  RETURN_IF_ERROR(classifier_.CheckInput(embeddings));
  return Sigmoid(classifier_.Logit(embeddings));
}

absl::StatusOr<Matrix> ToyModel::ScoreGradient(const Matrix& embeddings) const {
  RETURN_IF_ERROR(classifier_.CheckInput(embeddings));
  const double p = Sigmoid(classifier_.Logit(embeddings));
  return classifier_.BackpropLogit(embeddings, p * (1.0 - p));
}

absl::StatusOr<LossAndGradient> ToyModel::CrossEntropyGradient(
    const Matrix& embeddings, int target) const {
  RETURN_IF_ERROR(classifier_.CheckInput(embeddings));
  if (target != 0 && target != 1) {
    return absl::InvalidArgumentError("target must be 0 or 1");
  }
  const double z = classifier_.Logit(embeddings);
  LossAndGradient out;
  out.loss = BinaryCrossEntropyFromLogit(z, target);
  out.gradient = classifier_.BackpropLogit(embeddings, Sigmoid(z) - target);
  return out;
}

absl::StatusOr<Matrix> ToyModel::LmLogits(const Matrix& embeddings,
                                          LmHeadKind kind) const {
  RETURN_IF_ERROR(classifier_.CheckInput(embeddings));
  return head(kind).Logits(classifier_.Hidden(embeddings));
}

}  // namespace closs
