#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "parasent/corpus.hpp"

namespace parasent {

using TokenId = std::int32_t;

// Dense token ids. Id 0 is reserved for unknown tokens and has no surface
// string, so no corpus token can collide with it.
class Vocabulary {
 public:
  static constexpr TokenId kUnknown = 0;

  Vocabulary() : tokens_{std::string()} {}
  // Builds from known tokens in id order (ids 1..n).
  explicit Vocabulary(std::vector<std::string> known_tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view token) const { return id(token) != kUnknown; }

  std::vector<TokenId> encode(const Sentence& s) const;

  // Known tokens in id order, excluding the unknown slot.
  std::vector<std::string> known_tokens() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Counts tokens from any number of sentences, then freezes a vocabulary.
class VocabularyBuilder {
 public:
  void add(const Sentence& s);
  void add(const LabeledPairSet& set);
  void add(const RankedPairCorpus& corpus);

  // Tokens with count >= min_count, ordered by count desc then bytewise.
  Vocabulary build(std::size_t min_count = 1) const;

 private:
  std::unordered_map<std::string, std::size_t> counts_;
};

Vocabulary build_vocab(const LabeledPairSet& set, std::size_t min_count = 1);

}  // namespace parasent
