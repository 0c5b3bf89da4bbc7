#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "parasent/corpus.hpp"
#include "parasent/encoder_model.hpp"
#include "parasent/loss.hpp"
#include "parasent/numcore.hpp"

namespace parasent {

struct TrainConfig {
  EncoderConfig encoder;
  double margin = kDefaultMargin;
  AdamConfig adam;  // lr 0.001
  std::size_t batch_size = 128;
  std::size_t epochs = 10;
  double keep_prob = 0.8;  // GRAN only
  std::uint64_t seed = 42;
  std::size_t min_count = 1;
  // Early stopping on dev accuracy; 0 disables. Only used with a dev set.
  std::size_t patience = 2;

  void validate() const;
  std::string to_json() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double seconds = 0.0;
  std::optional<double> dev_accuracy;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t batches_per_epoch = 0;
  bool early_stopped = false;
  std::size_t best_epoch = 0;

  // epoch,mean_loss,seconds,dev_accuracy
  void write_csv(std::ostream& out) const;
};

// Non-finite loss; names the batch (0-based within the epoch).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t epoch, std::size_t batch, const std::string& what);
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct TrainResult {
  EncoderModel model;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Margin-loss training with Adam. The input set is not modified. When dev is
// given, per-epoch dev accuracy is the best-threshold cosine accuracy on the
// binarized dev pairs and drives early stopping (the best epoch is returned).
TrainResult train(const TrainConfig& config, const LabeledPairSet& data,
                  const AnnotatedPairSet* dev = nullptr, const EpochCallback& on_epoch = {});

std::size_t batches_per_epoch(std::size_t pairs, std::size_t batch_size);

// Accuracy of the best single cosine threshold on scored labeled pairs.
double best_threshold_accuracy(std::span<const double> similarities, std::span<const Label> labels);

// ---------------------------------------------------------------------------
// Objective, shared by the training loop and gradient checks.

struct EncodedPair {
  std::vector<TokenId> a;
  std::vector<TokenId> b;
  Label label = Label::negative;
};

struct DropoutSource {
  Rng* rng = nullptr;
  double keep_prob = 1.0;
};

// Mean margin loss over the batch. When grads is non-null the gradient of
// that mean is accumulated into it.
template <class Encoder, class T>
double batch_objective(const Encoder& enc, std::span<const EncodedPair> batch, double margin,
                       Gradients<T>* grads, const DropoutSource& dropout = {}) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double inv_b = 1.0 / double(batch.size());
  double total = 0.0;
  typename Encoder::Trace ta, tb;
  const bool use_dropout = dropout.rng != nullptr && dropout.keep_prob < 1.0;
  for (const auto& pair : batch) {
    std::optional<typename Encoder::Masks> ma, mb;
    if (use_dropout) {
      ma = enc.make_masks(dropout.keep_prob, *dropout.rng);
      mb = enc.make_masks(dropout.keep_prob, *dropout.rng);
    }
    const auto u = enc.forward(pair.a, ma ? &*ma : nullptr, grads ? &ta : nullptr);
    const auto v = enc.forward(pair.b, mb ? &*mb : nullptr, grads ? &tb : nullptr);
    const double dist = cosine_distance<T>(u, v);
    total += margin_loss(dist, pair.label, margin);
    if (grads) {
      const double scale = margin_loss_grad(dist, pair.label, margin) * inv_b;
      if (scale == 0.0) continue;
      std::vector<T> du(u.size(), T{0}), dv(v.size(), T{0});
      cosine_distance_backward<T>(u, v, scale, du, dv);
      enc.backward(ta, du, *grads);
      enc.backward(tb, dv, *grads);
    }
  }
  return total * inv_b;
}

}  // namespace parasent
