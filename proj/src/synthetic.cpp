#include "parasent/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace parasent::synthetic {
namespace {

const char* const kFunctionWords[] = {"the", "a",    "of",   "near", "with", "and", "is",
                                      "to",  "very", "was",  "on",   "for",  "my",  "this",
                                      "it",  "not",  "have", "will", "in",   "at"};

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Distinct pseudo words, none colliding with the function words.
std::vector<std::string> distinct_words(Rng& rng, std::size_t n, std::size_t min_syl,
                                        std::size_t max_syl, std::set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < n) {
    const std::size_t syl = min_syl + pick(rng, max_syl - min_syl + 1);
    auto w = pseudo_word(rng, syl);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += consonants[pick(rng, consonants.size())];
    w += vowels[pick(rng, vowels.size())];
  }
  return w;
}

ParaphraseGenerator::ParaphraseGenerator(const ParaphraseOptions& opts)
    : opts_(opts), rng_(opts.seed) {
  if (opts.concepts < 2 || opts.synonyms == 0 || opts.templates == 0 || opts.slots == 0)
    throw std::invalid_argument("bad paraphrase generator options");
  std::set<std::string> used(std::begin(kFunctionWords), std::end(kFunctionWords));
  for (std::size_t c = 0; c < opts.concepts; ++c)
    words_.push_back(distinct_words(rng_, opts.synonyms, 2, 3, used));

  const std::size_t n_func = std::size(kFunctionWords);
  for (std::size_t t = 0; t < opts.templates; ++t) {
    std::vector<std::string> tmpl;
    const std::size_t fillers = 2 + pick(rng_, 3);
    for (std::size_t i = 0; i < fillers; ++i) tmpl.emplace_back(kFunctionWords[pick(rng_, n_func)]);
    for (std::size_t s = 0; s < opts.slots; ++s) {
      const std::size_t pos = pick(rng_, tmpl.size() + 1);
      tmpl.insert(tmpl.begin() + std::ptrdiff_t(pos), std::string());
    }
    tmpl.emplace_back(".");
    templates_.push_back(std::move(tmpl));
  }
}

ParaphraseGenerator::Plan ParaphraseGenerator::random_plan() {
  Plan p;
  p.tmpl = pick(rng_, templates_.size());
  for (std::size_t s = 0; s < opts_.slots; ++s) p.concepts.push_back(pick(rng_, words_.size()));
  return p;
}

Sentence ParaphraseGenerator::realize(const Plan& plan) {
  std::vector<std::string> tokens;
  std::size_t slot = 0;
  for (const auto& w : templates_[plan.tmpl]) {
    if (w.empty()) {
      const auto& syn = words_[plan.concepts[slot++]];
      tokens.push_back(syn[pick(rng_, syn.size())]);
    } else {
      tokens.push_back(w);
    }
  }
  return Sentence::from_tokens(std::move(tokens));
}

Sentence ParaphraseGenerator::random_sentence() { return realize(random_plan()); }

RankedPair ParaphraseGenerator::paraphrase_pair() {
  const Plan p = random_plan();
  RankedPair pair;
  pair.a = realize(p);
  pair.b = realize(p);
  return pair;
}

RankedPairCorpus ParaphraseGenerator::training_corpus(std::size_t n) {
  RankedPairCorpus c;
  c.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.pairs.push_back(paraphrase_pair());
  return c;
}

AnnotatedPairSet ParaphraseGenerator::annotated_set(std::size_t n, double positive_fraction) {
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0))
    throw std::invalid_argument("positive fraction must be in [0, 1]");
  const auto n_pos = static_cast<std::size_t>(std::llround(positive_fraction * double(n)));
  AnnotatedPairSet set;
  set.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    AnnotatedPair ap;
    if (i < n_pos) {
      auto p = paraphrase_pair();
      ap = {std::move(p.a), std::move(p.b), 4.0};
    } else {
      const Plan pa = random_plan();
      Plan pb = pa;
      for (auto& c : pb.concepts) {
        const std::size_t old = c;
        while (c == old) c = pick(rng_, words_.size());
      }
      ap = {realize(pa), realize(pb), 1.0};
    }
    set.pairs.push_back(std::move(ap));
  }
  std::shuffle(set.pairs.begin(), set.pairs.end(), rng_);
  return set;
}

RankedPairCorpus corrupt_pairs(const RankedPairCorpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in [0, 1]");
  RankedPairCorpus out = corpus;
  const std::size_t n = corpus.size();
  if (n < 2) return out;
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto k = static_cast<std::size_t>(std::llround(fraction * double(n)));
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = idx[j];
    std::size_t other = i;
    while (other == i) other = pick(rng, n);
    out.pairs[i].b = corpus.pairs[other].a;
  }
  return out;
}

std::vector<Sentence> compositional_corpus(std::size_t sentences, const CompositionalOptions& opts) {
  if (opts.stems == 0 || opts.min_words == 0 || opts.max_words < opts.min_words)
    throw std::invalid_argument("bad compositional corpus options");
  Rng rng(opts.seed);
  std::set<std::string> used;
  const auto stems = distinct_words(rng, opts.stems, 2, 3, used);
  const auto prefixes = distinct_words(rng, opts.prefixes, 1, 1, used);
  std::vector<std::string> suffixes;
  for (std::size_t i = 0; i < opts.suffixes; ++i) suffixes.push_back(pseudo_word(rng, 1).substr(1) + "s");
  std::sort(suffixes.begin(), suffixes.end());
  suffixes.erase(std::unique(suffixes.begin(), suffixes.end()), suffixes.end());

  std::vector<Sentence> out;
  out.reserve(sentences);
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t len = opts.min_words + pick(rng, opts.max_words - opts.min_words + 1);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < len; ++i) {
      std::string w;
      if (!prefixes.empty() && pick(rng, 3) == 0) w += prefixes[pick(rng, prefixes.size())];
      w += stems[pick(rng, stems.size())];
      if (!suffixes.empty() && pick(rng, 4) != 0) w += suffixes[pick(rng, suffixes.size())];
      tokens.push_back(std::move(w));
    }
    out.push_back(Sentence::from_tokens(std::move(tokens)));
  }
  return out;
}

}  // namespace parasent::synthetic
