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

#include "closs/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <utility>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"
#include "json.hpp"

namespace closs {
namespace {

bool IsSpace(unsigned char c) { return std::isspace(c) != 0; }
bool IsPunct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

bool AttachesLeft(const std::string& token) {
  return token.size() == 1 && std::string_view(".,!?;:)]}").find(token[0]) !=
                                  std::string_view::npos;
}

}  // namespace

Vocab::Vocab() {
  tokens_.emplace_back(kUnkToken);
  index_.emplace(std::string(kUnkToken), kUnkId);
}

absl::StatusOr<Vocab> Vocab::FromTokens(const std::vector<std::string>& tokens) {
  Vocab vocab;
  for (const std::string& token : tokens) {
    if (token.empty()) return absl::InvalidArgumentError("empty token");
    const auto id = static_cast<TokenId>(vocab.tokens_.size());
    if (!vocab.index_.emplace(token, id).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate token '", token, "'"));
    }
    vocab.tokens_.push_back(token);
  }
  return vocab;
}

TokenId Vocab::Id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::Contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocab::Token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    return tokens_[kUnkId];
  }
  return tokens_[id];
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsSpace(c)) {
      flush();
    } else if (IsPunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string Detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& token : tokens) {
    if (!out.empty() && !AttachesLeft(token)) out.push_back(' ');
    out += token;
  }
  return out;
}

absl::StatusOr<Vocab> BuildVocab(const std::vector<std::string>& corpus,
                                 std::size_t max_size, std::size_t min_freq) {
  if (corpus.empty()) return absl::InvalidArgumentError("empty corpus");
  if (max_size < 2) {
    return absl::InvalidArgumentError("max_size must be at least 2");
  }
  std::map<std::string, std::size_t> counts;
  for (const std::string& text : corpus) {
    for (std::string& token : SplitWords(text)) ++counts[std::move(token)];
  }
  counts.erase(std::string(Vocab::kUnkToken));
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count >= min_freq) ranked.emplace_back(token, count);
  }
  // std::map iteration is lexicographic; a stable sort keeps that order
  // among equal counts.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - 1) ranked.resize(max_size - 1);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, count] : ranked) tokens.push_back(std::move(token));
  return Vocab::FromTokens(tokens);
}

absl::StatusOr<TokenSequence> Tokenize(std::string_view text,
                                       const Vocab& vocab, int label) {
  std::vector<std::string> words = SplitWords(text);
  if (words.empty()) return absl::InvalidArgumentError("empty text");
  TokenSequence x;
  x.raw_text = std::string(text);
  x.label = label;
  x.ids.reserve(words.size());
  for (const std::string& w : words) x.ids.push_back(vocab.Id(w));
  return x;
}

std::vector<std::string> TokenStrings(const TokenSequence& x,
                                      const Vocab& vocab) {
  std::vector<std::string> out;
  out.reserve(x.ids.size());
  for (TokenId id : x.ids) out.push_back(vocab.Token(id));
  return out;
}

absl::StatusOr<std::vector<LabeledText>> ReadLabeledJsonl(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<LabeledText> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fail = [&](std::string_view why) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_no, ": ", std::string(why)));
    };
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return fail("malformed JSON");
    auto text = obj.find("text");
    auto label = obj.find("label");
    if (text == obj.end() || !text->is_string()) {
      return fail("missing string field \"text\"");
    }
    if (label == obj.end() || !label->is_number_integer()) {
      return fail("missing integer field \"label\"");
    }
    const auto value = label->get<long long>();
    if (value != 0 && value != 1) return fail("label must be 0 or 1");
    records.push_back({text->get<std::string>(), static_cast<int>(value), line_no});
  }
  return records;
}

absl::StatusOr<Dataset> TokenizeAll(const std::vector<LabeledText>& records,
                                    const Vocab& vocab, std::string name) {
  if (records.empty()) return absl::InvalidArgumentError("empty dataset");
  Dataset data;
  data.name = std::move(name);
  data.examples.reserve(records.size());
  for (const LabeledText& r : records) {
    auto x = Tokenize(r.text, vocab, r.label);
    if (!x.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", r.line, ": ", x.status().message()));
    }
    x->line = r.line;
    data.examples.push_back(*std::move(x));
  }
  return data;
}

absl::StatusOr<Dataset> LoadJsonl(const std::string& path, const Vocab& vocab) {
  ASSIGN_OR_RETURN(std::vector<LabeledText> records, ReadLabeledJsonl(path));
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  if (auto dot = name.rfind(".jsonl"); dot != std::string::npos) name.resize(dot);
  return TokenizeAll(records, vocab, std::move(name));
}

absl::Status WriteLabeledJsonl(const std::string& path,
                               const std::vector<LabeledText>& records) {
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (const LabeledText& r : records) {
    out << nlohmann::json{{"text", r.text}, {"label", r.label}}.dump() << '\n';
  }
  return out ? absl::OkStatus()
             : absl::DataLossError(absl::StrCat("write failed: ", path));
}

absl::StatusOr<TokenSequence> ApplySubstitutions(const TokenSequence& x,
                                                 const Coalition& coalition) {
  TokenSequence out = x;
  std::vector<bool> touched(x.ids.size(), false);
  for (const Substitution& s : coalition) {
    if (s.location >= x.ids.size()) {
      return absl::OutOfRangeError(absl::StrCat(
          "substitution location ", s.location, " >= length ", x.ids.size()));
    }
    if (touched[s.location]) {
      return absl::InvalidArgumentError("conflicting coalition");
    }
    touched[s.location] = true;
    out.ids[s.location] = s.token;
  }
  return out;
}

Coalition Canonical(Coalition coalition) {
  std::sort(coalition.begin(), coalition.end());
  return coalition;
}

bool IsConflictFree(const Coalition& coalition) {
  Coalition sorted = Canonical(coalition);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].location == sorted[i - 1].location) return false;
  }
  return true;
}

std::size_t HammingDistance(const std::vector<TokenId>& a,
                            const std::vector<TokenId>& b) {
  const std::size_t common = std::min(a.size(), b.size());
  std::size_t d = std::max(a.size(), b.size()) - common;
  for (std::size_t i = 0; i < common; ++i) d += a[i] != b[i];
  return d;
}

}  // namespace closs
