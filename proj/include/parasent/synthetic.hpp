#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parasent/corpus.hpp"
#include "parasent/numcore.hpp"

namespace parasent::synthetic {

// Templated synonym paraphrases. A sentence is a template with its slots
// filled by concepts; each concept has several synonymous surface words.
// A paraphrase keeps template and concepts and redraws every synonym.
struct ParaphraseOptions {
  std::size_t concepts = 60;
  std::size_t synonyms = 3;
  std::size_t templates = 8;
  std::size_t slots = 3;
  std::uint64_t seed = 42;
};

class ParaphraseGenerator {
 public:
  explicit ParaphraseGenerator(const ParaphraseOptions& opts);

  // n positive pairs, best-first, no rank scores.
  RankedPairCorpus training_corpus(std::size_t n);

  // Grade 4 for paraphrases; grade 1 for pairs sharing the template but
  // with every concept different. positives = round(n * positive_fraction).
  AnnotatedPairSet annotated_set(std::size_t n, double positive_fraction = 0.5);

  // Paraphrase of a fresh random sentence.
  RankedPair paraphrase_pair();
  Sentence random_sentence();

  const ParaphraseOptions& options() const { return opts_; }
  const std::vector<std::vector<std::string>>& lexicon() const { return words_; }

 private:
  struct Plan {
    std::size_t tmpl = 0;
    std::vector<std::size_t> concepts;
  };
  Plan random_plan();
  Sentence realize(const Plan& plan);

  ParaphraseOptions opts_;
  Rng rng_;
  std::vector<std::vector<std::string>> words_;      // concept -> synonyms
  std::vector<std::vector<std::string>> templates_;  // "" marks a slot
};

// Replaces sentence b of round(fraction * size) randomly chosen pairs with
// sentence a of another random pair, so those pairs are no longer
// paraphrases. Order and size are preserved.
RankedPairCorpus corrupt_pairs(const RankedPairCorpus& corpus, double fraction, std::uint64_t seed);

// Sentences over words built as [prefix] stem [suffix]. Word types grow
// multiplicatively while the morph inventory stays small.
struct CompositionalOptions {
  std::size_t stems = 150;
  std::size_t prefixes = 4;
  std::size_t suffixes = 8;
  std::size_t min_words = 5;
  std::size_t max_words = 12;
  std::uint64_t seed = 42;
};

std::vector<Sentence> compositional_corpus(std::size_t sentences, const CompositionalOptions& opts = {});

// Lowercase consonant-vowel word of the given number of syllables.
std::string pseudo_word(Rng& rng, std::size_t syllables);

}  // namespace parasent::synthetic
