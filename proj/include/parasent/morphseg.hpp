#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parasent/corpus.hpp"

namespace parasent::morphseg {

// word -> occurrence count (all counts >= 1, words non-empty).
struct WordCountTable {
  std::map<std::string, std::uint64_t> counts;

  void add(std::string_view word, std::uint64_t n = 1);
  std::size_t size() const { return counts.size(); }
  bool empty() const { return counts.empty(); }

  static WordCountTable from_corpus(const RankedPairCorpus& corpus);
  static WordCountTable from_sentences(const std::vector<Sentence>& sentences);
};

// word<TAB>count per line.
WordCountTable read_word_counts(std::istream& in, const std::string& source = "<stream>");
WordCountTable load_word_counts(const std::filesystem::path& path);

// UTF-8 helpers: morph lengths and split points are in code points.
std::vector<std::size_t> codepoint_offsets(std::string_view word);
std::size_t codepoint_length(std::string_view s);

struct Cost {
  double corpus = 0.0;
  double lexicon = 0.0;
  double total() const { return corpus + lexicon; }
};

struct TrainOptions;
struct TrainStats;

class SegmentationModel {
 public:
  SegmentationModel() = default;
  SegmentationModel(std::map<std::string, std::uint64_t> morph_counts, std::size_t alphabet_size);

  const std::map<std::string, std::uint64_t>& morph_counts() const { return morph_counts_; }
  std::uint64_t total_morph_tokens() const { return total_; }
  std::size_t alphabet_size() const { return alphabet_size_; }
  bool type_based() const { return type_based_; }

  // Training-time analyses; empty for a model loaded from disk.
  const std::map<std::string, std::vector<std::string>>& analyses() const { return analyses_; }

  // Stored analysis, else the word itself if it is a morph, else the most
  // probable segmentation over known morphs with single-character fallback.
  std::vector<std::string> segment(std::string_view word) const;

  // Two-part code length (nats) of the model's own counts.
  Cost cost() const;

  // Accumulates analyses into the counts; used by training and tests.
  static SegmentationModel from_analyses(std::map<std::string, std::vector<std::string>> analyses,
                                         const WordCountTable& table, bool type_based = false);

 private:
  friend class Trainer;
  friend SegmentationModel train_segmenter(const WordCountTable&, const TrainOptions&, TrainStats*);
  std::map<std::string, std::uint64_t> morph_counts_;
  std::uint64_t total_ = 0;
  std::size_t alphabet_size_ = 0;
  bool type_based_ = false;
  std::map<std::string, std::vector<std::string>> analyses_;
};

struct TrainOptions {
  std::uint64_t seed = 0;
  // Absolute cost delta per epoch; when unset, 0.005 x initial cost.
  std::optional<double> convergence_threshold;
  bool type_based = false;
  std::size_t max_epochs = 100;
};

struct TrainStats {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::size_t epochs = 0;
  std::size_t rejected_steps = 0;
  std::vector<double> epoch_costs;
};

SegmentationModel train_segmenter(const WordCountTable& table, const TrainOptions& opts = {},
                                  TrainStats* stats = nullptr);

// Cost of the model as a code for this table. Throws std::invalid_argument
// when analyses are missing, do not concatenate to the word, or disagree
// with the stored morph counts.
double model_cost(const SegmentationModel& model, const WordCountTable& table);
Cost model_cost_breakdown(const SegmentationModel& model, const WordCountTable& table);

// Code length of an arbitrary morph multiset under the two-part cost.
Cost cost_of_counts(const std::map<std::string, std::uint64_t>& counts, std::size_t alphabet_size);

std::size_t alphabet_size_of(const WordCountTable& table);

std::vector<std::string> segment_word(const SegmentationModel& model, std::string_view word);

Sentence apply_segmentation(const Sentence& s, const SegmentationModel& model);
RankedPairCorpus apply_segmentation(const RankedPairCorpus& corpus, const SegmentationModel& model);
AnnotatedPairSet apply_segmentation(const AnnotatedPairSet& set, const SegmentationModel& model);
LabeledPairSet apply_segmentation(const LabeledPairSet& set, const SegmentationModel& model);

// "#morphseg v1 total=<N> alphabet=<K>" then morph<TAB>count lines.
void save_model(std::ostream& out, const SegmentationModel& model);
void save_model(const std::filesystem::path& path, const SegmentationModel& model);
SegmentationModel read_model(std::istream& in, const std::string& source = "<stream>");
SegmentationModel load_model(const std::filesystem::path& path);

}  // namespace parasent::morphseg
