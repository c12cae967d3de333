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

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"
#include "closs/toy_model.h"

namespace closs {
namespace {

constexpr char kMagic[4] = {'C', 'L', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::numeric_limits<double>::is_iec559);

template <typename T>
T ToLittle(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void U32(std::uint32_t v) { Raw(ToLittle(v)); }
  void F64(double v) { Raw(ToLittle(std::bit_cast<std::uint64_t>(v))); }
  void Block(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) F64(m(r, c));
    }
  }
  void Block(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) F64(v(i));
  }
  void Bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  template <typename T>
  void Raw(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}
  bool ok() const { return static_cast<bool>(in_); }
  std::uint32_t U32() { return ToLittle(Raw<std::uint32_t>()); }
  double F64() { return std::bit_cast<double>(ToLittle(Raw<std::uint64_t>())); }
  void Block(Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = F64();
    }
  }
  void Block(Vector& v, Eigen::Index size) {
    v.resize(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = F64();
  }
  std::string Bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    return s;
  }

 private:
  template <typename T>
  T Raw() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  std::ifstream& in_;
};

absl::Status CheckShapes(const ModelCheckpoint& c) {
  const ToyDims dims = c.classifier.dims();
  if (dims.vocab != c.vocab.size()) {
    return absl::InvalidArgumentError("vocabulary size does not match embeddings");
  }
  const auto& w = c.classifier.encoder_weight;
  if (static_cast<std::size_t>(w.cols()) != 3 * dims.embed ||
      static_cast<std::size_t>(c.classifier.encoder_bias.size()) != dims.hidden ||
      static_cast<std::size_t>(c.classifier.head_weight.size()) != dims.hidden) {
    return absl::InvalidArgumentError("inconsistent classifier shapes");
  }
  for (const LmHead* head : {&c.retrained_head, &c.untrained_head}) {
    if (static_cast<std::size_t>(head->projection.rows()) != dims.vocab ||
        static_cast<std::size_t>(head->projection.cols()) != dims.hidden ||
        static_cast<std::size_t>(head->bias.size()) != dims.vocab) {
      return absl::InvalidArgumentError("inconsistent LM head shapes");
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status SaveCheckpoint(const std::string& path,
                            const ModelCheckpoint& checkpoint) {
  RETURN_IF_ERROR(CheckShapes(checkpoint));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  Writer w(out);
  const ToyDims dims = checkpoint.classifier.dims();
  out.write(kMagic, sizeof(kMagic));
  w.U32(kVersion);
  w.U32(static_cast<std::uint32_t>(dims.vocab));
  w.U32(static_cast<std::uint32_t>(dims.embed));
  w.U32(static_cast<std::uint32_t>(dims.hidden));
  const ToyClassifier& m = checkpoint.classifier;
  w.Block(m.embeddings);
  w.Block(m.encoder_weight);
  w.Block(m.encoder_bias);
  w.Block(m.head_weight);
  w.F64(m.head_bias);
  w.Block(checkpoint.retrained_head.projection);
  w.Block(checkpoint.retrained_head.bias);
  w.Block(checkpoint.untrained_head.projection);
  w.Block(checkpoint.untrained_head.bias);
  const auto& tokens = checkpoint.vocab.tokens();
  w.U32(static_cast<std::uint32_t>(tokens.size() - 1));
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    w.U32(static_cast<std::uint32_t>(tokens[i].size()));
    w.Bytes(tokens[i]);
  }
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<ModelCheckpoint> LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": not a CLSM checkpoint"));
  }
  Reader r(in);
  const std::uint32_t version = r.U32();
  if (version != kVersion) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": unsupported checkpoint version ", version));
  }
  const Eigen::Index vocab = r.U32();
  const Eigen::Index embed = r.U32();
  const Eigen::Index hidden = r.U32();
  constexpr Eigen::Index kMaxDim = 1 << 24;
  if (!r.ok() || vocab < 1 || embed < 1 || hidden < 1 || vocab > kMaxDim ||
      embed > 4096 || hidden > 4096) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": bad dimensions"));
  }
  ModelCheckpoint c;
  ToyClassifier& m = c.classifier;
  r.Block(m.embeddings, vocab, embed);
  r.Block(m.encoder_weight, hidden, 3 * embed);
  r.Block(m.encoder_bias, hidden);
  r.Block(m.head_weight, hidden);
  m.head_bias = r.F64();
  r.Block(c.retrained_head.projection, vocab, hidden);
  r.Block(c.retrained_head.bias, vocab);
  r.Block(c.untrained_head.projection, vocab, hidden);
  r.Block(c.untrained_head.bias, vocab);
  const std::uint32_t count = r.U32();
  if (!r.ok() || static_cast<Eigen::Index>(count) + 1 != vocab) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": truncated or bad vocabulary"));
  }
  std::vector<std::string> tokens;
  tokens.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.U32();
    if (!r.ok() || len > (1u << 20)) {
      return absl::InvalidArgumentError(absl::StrCat(path, ": bad vocabulary entry"));
    }
    tokens.push_back(r.Bytes(len));
  }
  if (!r.ok()) return absl::InvalidArgumentError(absl::StrCat(path, ": truncated"));
  if (in.peek() != std::ifstream::traits_type::eof()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": trailing data"));
  }
  ASSIGN_OR_RETURN(c.vocab, Vocab::FromTokens(tokens));
  RETURN_IF_ERROR(CheckShapes(c));
  return c;
}

}  // namespace closs
