#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "parasent/corpus.hpp"
#include "parasent/encoder_model.hpp"

namespace parasent {

// Sample Pearson correlation. Throws on length < 2, unequal lengths or a
// zero-variance input.
double pearson_r(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks (ties share their mean rank).
double spearman_rho(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Unequal-variance two-sample t-test of mean(a) - mean(b). Both samples need
// at least two values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct GradeRow {
  double grade = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single pair
};

// Adjacent present grades, lower grade first. t is computed as
// mean(higher) - mean(lower), so a positive t means similarity rises with grade.
struct GradeTest {
  double grade_a = 0.0;
  double grade_b = 0.0;
  bool testable = false;
  WelchResult result;
  bool significant = false;
};

struct GradeStats {
  std::vector<GradeRow> rows;  // ascending grade
  std::vector<GradeTest> tests;
  double alpha = 0.01;

  std::size_t total_count() const;
  // grade,count,mean,std then a blank line and grade_a,grade_b,t,p,significant
  void write_csv(std::ostream& out) const;
};

GradeStats grade_stats_from_scores(std::span<const double> grades,
                                   std::span<const double> similarities, double alpha = 0.01);

// Per-grade cosine similarity of the encoder's pair embeddings.
GradeStats grade_similarity_stats(const AnnotatedPairSet& dev, const EncoderModel& encoder,
                                  double alpha = 0.01);

// Cosine similarity of each annotated pair under the encoder.
std::vector<double> pair_similarities(const AnnotatedPairSet& set, const EncoderModel& encoder);

}  // namespace parasent
