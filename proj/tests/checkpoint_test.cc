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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "closs/synthetic.h"
#include "closs/toy_model.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace closs {
namespace {

std::string ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void WriteBytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

std::uint32_t U32At(const std::string& bytes, std::size_t offset) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3])) << 24;
}

ModelCheckpoint SmallCheckpoint() {
  ToyModel model = testing::RandomToyModel(4, 12, 0.7, 3, 5);
  return {*Vocab::FromTokens({"x", "y", "zed"}), model.classifier(),
          model.head(LmHeadKind::kRetrained), model.head(LmHeadKind::kUntrained)};
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  const std::string dir = testing::TempDir("ckpt");
  const ModelCheckpoint ckpt = SmallCheckpoint();
  ASSERT_OK(SaveCheckpoint(dir + "/a.ckpt", ckpt));
  ASSERT_OK_AND_ASSIGN(ModelCheckpoint back, LoadCheckpoint(dir + "/a.ckpt"));
  EXPECT_EQ(back.vocab, ckpt.vocab);
  EXPECT_EQ(back.classifier, ckpt.classifier);
  EXPECT_EQ(back.retrained_head, ckpt.retrained_head);
  EXPECT_EQ(back.untrained_head, ckpt.untrained_head);
  ASSERT_OK(SaveCheckpoint(dir + "/b.ckpt", back));
  EXPECT_EQ(ReadBytes(dir + "/a.ckpt"), ReadBytes(dir + "/b.ckpt"));
}

TEST(CheckpointTest, HeaderLayout) {
  const std::string dir = testing::TempDir("ckpt");
  const ModelCheckpoint ckpt = SmallCheckpoint();
  ASSERT_OK(SaveCheckpoint(dir + "/a.ckpt", ckpt));
  const std::string bytes = ReadBytes(dir + "/a.ckpt");
  ASSERT_GE(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 4), "CLSM");
  EXPECT_EQ(U32At(bytes, 4), 1u);
  EXPECT_EQ(U32At(bytes, 8), 4u);
  EXPECT_EQ(U32At(bytes, 12), 3u);
  EXPECT_EQ(U32At(bytes, 16), 5u);
  // First parameter: embeddings(0, 0) as a little-endian double.
  std::uint64_t raw = 0;
  for (int i = 7; i >= 0; --i) {
    raw = raw << 8 | static_cast<unsigned char>(bytes[20 + static_cast<std::size_t>(i)]);
  }
  double first;
  std::memcpy(&first, &raw, sizeof first);
  EXPECT_EQ(first, ckpt.classifier.embeddings(0, 0));
}

TEST(CheckpointTest, RejectsCorruptFiles) {
  const std::string dir = testing::TempDir("ckpt");
  ASSERT_OK(SaveCheckpoint(dir + "/good.ckpt", SmallCheckpoint()));
  const std::string bytes = ReadBytes(dir + "/good.ckpt");

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  WriteBytes(dir + "/magic.ckpt", bad_magic);
  EXPECT_FALSE(LoadCheckpoint(dir + "/magic.ckpt").ok());

  std::string bad_version = bytes;
  bad_version[4] = 9;
  WriteBytes(dir + "/version.ckpt", bad_version);
  EXPECT_FALSE(LoadCheckpoint(dir + "/version.ckpt").ok());

  WriteBytes(dir + "/short.ckpt", bytes.substr(0, bytes.size() / 2));
  EXPECT_FALSE(LoadCheckpoint(dir + "/short.ckpt").ok());

  WriteBytes(dir + "/long.ckpt", bytes + "junk");
  EXPECT_FALSE(LoadCheckpoint(dir + "/long.ckpt").ok());

  EXPECT_FALSE(LoadCheckpoint(dir + "/missing.ckpt").ok());
}

TEST(CheckpointTest, SameSeedTrainingGivesIdenticalFiles) {
  auto records = MakeTriggerCorpus(PlantedTriggerSuite(100, 4));
  ASSERT_OK(records);
  ToyTrainingOptions options;
  options.classifier.epochs = 5;
  options.head.epochs = 5;
  const std::string dir = testing::TempDir("ckpt");
  for (const char* name : {"/one.ckpt", "/two.ckpt"}) {
    ASSERT_OK_AND_ASSIGN(TrainedToy toy, TrainToyModel(*records, options));
    ASSERT_OK(SaveCheckpoint(dir + name, toy.checkpoint));
  }
  EXPECT_EQ(ReadBytes(dir + "/one.ckpt"), ReadBytes(dir + "/two.ckpt"));
}

}  // namespace
}  // namespace closs
