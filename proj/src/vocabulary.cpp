#include "parasent/vocabulary.hpp"

#include <algorithm>
#include <stdexcept>

namespace parasent {

Vocabulary::Vocabulary(std::vector<std::string> known_tokens) : tokens_{std::string()} {
  tokens_.reserve(known_tokens.size() + 1);
  for (auto& t : known_tokens) {
    if (t.empty()) throw std::invalid_argument("vocabulary tokens must be non-empty");
    const auto id = static_cast<TokenId>(tokens_.size());
    if (!ids_.emplace(t, id).second) throw std::invalid_argument("duplicate token: " + t);
    tokens_.push_back(std::move(t));
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<TokenId> Vocabulary::encode(const Sentence& s) const {
  std::vector<TokenId> ids;
  ids.reserve(s.tokens.size());
  for (const auto& t : s.tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::known_tokens() const {
  return {tokens_.begin() + 1, tokens_.end()};
}

void VocabularyBuilder::add(const Sentence& s) {
  for (const auto& t : s.tokens) ++counts_[t];
}

void VocabularyBuilder::add(const LabeledPairSet& set) {
  for (const auto& p : set.pairs) {
    add(p.a);
    add(p.b);
  }
}

void VocabularyBuilder::add(const RankedPairCorpus& corpus) {
  for (const auto& p : corpus.pairs) {
    add(p.a);
    add(p.b);
  }
}

Vocabulary VocabularyBuilder::build(std::size_t min_count) const {
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, n] : counts_)
    if (n >= min_count) kept.emplace_back(token, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [t, n] : kept) tokens.push_back(std::move(t));
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocab(const LabeledPairSet& set, std::size_t min_count) {
  VocabularyBuilder b;
  b.add(set);
  return b.build(min_count);
}

}  // namespace parasent
