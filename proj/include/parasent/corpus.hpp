#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parasent {

// A pre-tokenized sentence. Tokens are the whitespace-separated units of raw.
struct Sentence {
  std::vector<std::string> tokens;
  std::string raw;

  // Throws std::invalid_argument when raw has no tokens.
  static Sentence parse(std::string_view raw);
  static Sentence from_tokens(std::vector<std::string> tokens);

  std::string joined() const;
  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct RankedPair {
  Sentence a;
  Sentence b;
  std::optional<double> rank_score;
};

// Candidate pairs ordered best-first.
struct RankedPairCorpus {
  std::vector<RankedPair> pairs;
  std::size_t size() const { return pairs.size(); }
};

inline constexpr double kGradeValues[] = {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
bool is_valid_grade(double grade);

struct AnnotatedPair {
  Sentence a;
  Sentence b;
  double grade = 0.0;
};

struct AnnotatedPairSet {
  std::vector<AnnotatedPair> pairs;
  std::size_t size() const { return pairs.size(); }
};

enum class Label : std::uint8_t { negative = 0, positive = 1 };

struct LabeledPair {
  Sentence a;
  Sentence b;
  Label label = Label::negative;
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

struct LabeledPairSet {
  std::vector<LabeledPair> pairs;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  std::size_t count(Label label) const;
  friend bool operator==(const LabeledPairSet&, const LabeledPairSet&) = default;
};

// Malformed input; line is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// File formats. All are UTF-8 TSV, one record per line.

// sentence_a<TAB>sentence_b[<TAB>rank_score]
RankedPairCorpus read_pair_corpus(std::istream& in, const std::string& source = "<stream>");
RankedPairCorpus load_pair_corpus(const std::filesystem::path& path);
void write_pair_corpus(std::ostream& out, const RankedPairCorpus& corpus);

// sentence_a<TAB>sentence_b<TAB>grade. With strict_grades the grade must be
// one of the seven annotation values; otherwise any finite real is accepted
// (used for graded similarity files).
AnnotatedPairSet read_annotated_set(std::istream& in, const std::string& source = "<stream>",
                                    bool strict_grades = true);
AnnotatedPairSet load_annotated_set(const std::filesystem::path& path, bool strict_grades = true);
void write_annotated_set(std::ostream& out, const AnnotatedPairSet& set);

// label<TAB>sentence_a<TAB>sentence_b with label 1 (positive) or 0.
LabeledPairSet read_labeled_set(std::istream& in, const std::string& source = "<stream>");
LabeledPairSet load_labeled_set(const std::filesystem::path& path);
void write_labeled_set(std::ostream& out, const LabeledPairSet& set);

// ---------------------------------------------------------------------------
// Training-set construction

// First n_positive pairs become positives; n_positive negatives pair two
// sentences drawn uniformly from the prefix. Positives precede negatives.
LabeledPairSet sample_training_set(const RankedPairCorpus& corpus, std::size_t n_positive,
                                   std::uint64_t seed);

// Longest prefix whose total token count (both sides) fits the budget, then
// negatives as in sample_training_set.
LabeledPairSet sample_by_token_budget(const RankedPairCorpus& corpus, std::size_t token_budget,
                                      std::uint64_t seed);

std::size_t pair_tokens(const RankedPair& pair);

struct QualityPoint {
  double prefix_size = 0.0;
  double clean_fraction = 0.0;
};

// Piecewise-linear estimate of the clean fraction of each corpus prefix.
class QualityCurve {
 public:
  explicit QualityCurve(std::vector<QualityPoint> points);
  const std::vector<QualityPoint>& points() const { return points_; }
  double at(double prefix_size) const;
  double max_fraction() const;

 private:
  std::vector<QualityPoint> points_;
};

// prefix_size<TAB>clean_fraction per line; '#' starts a comment.
QualityCurve load_quality_curve(const std::filesystem::path& path);
QualityCurve read_quality_curve(std::istream& in, const std::string& source = "<stream>");

class UnattainableQuality : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Largest prefix size whose interpolated clean fraction is >= target.
std::size_t select_prefix_for_quality(const QualityCurve& curve, double target_clean_fraction);

// Grades >= 3.0 positive, <= 2.0 negative, 2.5 dropped.
LabeledPairSet binarize_annotations(const AnnotatedPairSet& set);

}  // namespace parasent
