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

#ifndef CLOSS_CORPUS_H_
#define CLOSS_CORPUS_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "absl/status/statusor.h"

namespace closs {

using TokenId = int;

// Word-level vocabulary. Id 0 is always the reserved unknown token.
class Vocab {
 public:
  static constexpr TokenId kUnkId = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();
  // `tokens` must not contain kUnkToken or duplicates; they receive ids
  // 1..tokens.size() in order.
  static absl::StatusOr<Vocab> FromTokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  // Returns kUnkId for tokens outside the vocabulary.
  TokenId Id(std::string_view token) const;
  bool Contains(std::string_view token) const;
  const std::string& Token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  std::string raw_text;
  int label = 0;
  // 1-based line in the source file; 0 when not loaded from a file.
  int line = 0;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence& other) const = default;
};

struct Dataset {
  std::string name;
  std::vector<TokenSequence> examples;
};

// One raw (text, label) record before tokenization.
struct LabeledText {
  std::string text;
  int label = 0;
  int line = 0;
};

// A single token replacement at `location`.
struct Substitution {
  std::size_t location = 0;
  TokenId token = 0;

  auto operator<=>(const Substitution&) const = default;
};

// A set of simultaneous substitutions. Conflict-free coalitions have
// pairwise-distinct locations. Canonical form is sorted by location.
using Coalition = std::vector<Substitution>;

// Lowercases ASCII letters, splits on whitespace and emits every ASCII
// punctuation character as its own token. Bytes >= 0x80 are word bytes.
std::vector<std::string> SplitWords(std::string_view text);

// Joins tokens with single spaces, attaching closing punctuation to the
// preceding token. SplitWords(Detokenize(t)) == t for tokens produced by
// SplitWords.
std::string Detokenize(const std::vector<std::string>& tokens);

// The max_size most frequent tokens (UNK included in the count) with at
// least min_freq occurrences. Frequency ties are broken lexicographically.
absl::StatusOr<Vocab> BuildVocab(const std::vector<std::string>& corpus,
                                 std::size_t max_size, std::size_t min_freq);

absl::StatusOr<TokenSequence> Tokenize(std::string_view text,
                                       const Vocab& vocab, int label = 0);

std::vector<std::string> TokenStrings(const TokenSequence& x,
                                      const Vocab& vocab);

// Reads `{"text": ..., "label": 0|1}` objects, one per line. Blank lines
// are skipped; errors name the offending line number.
absl::StatusOr<std::vector<LabeledText>> ReadLabeledJsonl(
    const std::string& path);

absl::StatusOr<Dataset> LoadJsonl(const std::string& path, const Vocab& vocab);

absl::StatusOr<Dataset> TokenizeAll(const std::vector<LabeledText>& records,
                                    const Vocab& vocab, std::string name);

absl::Status WriteLabeledJsonl(const std::string& path,
                               const std::vector<LabeledText>& records);

// Returns x with every member of `coalition` applied. Fails on an
// out-of-range location or when two members share a location.
absl::StatusOr<TokenSequence> ApplySubstitutions(const TokenSequence& x,
                                                 const Coalition& coalition);

// Sorted-by-location copy; the canonical key used for dedupe.
Coalition Canonical(Coalition coalition);

bool IsConflictFree(const Coalition& coalition);

std::size_t HammingDistance(const std::vector<TokenId>& a,
                            const std::vector<TokenId>& b);

}  // namespace closs

#endif  // CLOSS_CORPUS_H_
