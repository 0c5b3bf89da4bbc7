#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "parasent/corpus.hpp"
#include "parasent/encoder_model.hpp"
#include "parasent/matrix.hpp"
#include "parasent/numcore.hpp"

namespace parasent {

inline constexpr std::size_t kProbeHiddenUnits = 200;

struct ProbeConfig {
  std::size_t hidden = kProbeHiddenUnits;
  double leaky_slope = kDefaultLeakySlope;
  AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 300;
  std::size_t patience = 20;  // epochs without held-out improvement
  double holdout_fraction = 0.1;
  bool standardize = true;  // z-score features with training statistics
  std::uint64_t seed = 42;

  std::string to_json() const;
};

// Labeled feature rows; a pair's row is the concatenation [u ; v].
struct FeatureSet {
  BasicMatrix<double> x;
  std::vector<Label> y;
  std::size_t size() const { return y.size(); }
};

FeatureSet embed_pairs(const LabeledPairSet& pairs, const EncoderModel& encoder);
FeatureSet make_features(std::span<const std::vector<float>> left,
                         std::span<const std::vector<float>> right, std::span<const Label> labels);

// input -> hidden (leaky ReLU) -> sigmoid output.
class MLPProbe {
 public:
  MLPProbe() = default;
  MLPProbe(ParameterSet<double> params, std::vector<double> mean, std::vector<double> scale,
           double slope);

  // A probe that answers `label` for every input.
  static MLPProbe constant(Label label, std::size_t input_dim);

  std::size_t input_dim() const { return params_.size() ? params_[0].cols() : 0; }
  std::size_t hidden() const { return params_.size() ? params_[0].rows() : 0; }

  double probability(std::span<const double> features) const;
  Label predict(std::span<const double> features) const;

  // Same network with the output logit negated: flips every decision.
  MLPProbe complement() const;

  const ParameterSet<double>& params() const { return params_; }

  // Training metadata.
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;
  double holdout_accuracy = 0.0;
  double holdout_loss = 0.0;

 private:
  double logit(std::span<const double> features) const;

  ParameterSet<double> params_;  // W1 (h x n), b1 (h), w2 (1 x h), b2 (1)
  std::vector<double> mean_;
  std::vector<double> scale_;
  double slope_ = kDefaultLeakySlope;
};

// Cross-entropy with Adam, early-stopped on a seeded held-out split.
// Throws std::invalid_argument on an empty or single-class set.
MLPProbe train_probe(const FeatureSet& data, const ProbeConfig& config = {});
MLPProbe train_probe(const LabeledPairSet& dev, const EncoderModel& encoder,
                     const ProbeConfig& config = {});

double classify_accuracy(const MLPProbe& probe, const FeatureSet& test);
double classify_accuracy(const MLPProbe& probe, const LabeledPairSet& test,
                         const EncoderModel& encoder);

// Accuracy of always answering the more frequent class.
double majority_baseline(const LabeledPairSet& test);

}  // namespace parasent
