#include "parasent/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace parasent {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (!(margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("keep_prob must be in (0, 1]");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (encoder.dim == 0) throw std::invalid_argument("dimension must be >= 1");
  if (encoder.kind == EncoderKind::gran && encoder.hidden == 0)
    throw std::invalid_argument("hidden size must be >= 1");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["encoder"] = to_string(encoder.kind);
  j["dim"] = encoder.dim;
  j["hidden"] = encoder.kind == EncoderKind::gran ? encoder.hidden : 0;
  j["leaky_slope"] = encoder.leaky_slope;
  j["gate_biases"] = encoder.gate_biases;
  j["max_length"] = encoder.max_length;
  j["margin"] = margin;
  j["lr"] = adam.learning_rate;
  j["beta1"] = adam.beta1;
  j["beta2"] = adam.beta2;
  j["adam_eps"] = adam.epsilon;
  j["batch"] = batch_size;
  j["epochs"] = epochs;
  j["keep_prob"] = keep_prob;
  j["seed"] = seed;
  j["min_count"] = min_count;
  j["patience"] = patience;
  return j.dump();
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,mean_loss,seconds,dev_accuracy\n";
  const auto old_precision = out.precision(9);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.mean_loss << ',' << e.seconds << ',';
    if (e.dev_accuracy) out << *e.dev_accuracy;
    out << '\n';
  }
  out.precision(old_precision);
}

NumericalError::NumericalError(std::size_t epoch, std::size_t batch, const std::string& what)
    : std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch) + ": " + what),
      epoch_(epoch),
      batch_(batch) {}

std::size_t batches_per_epoch(std::size_t pairs, std::size_t batch_size) {
  return (pairs + batch_size - 1) / batch_size;
}

double best_threshold_accuracy(std::span<const double> sims, std::span<const Label> labels) {
  if (sims.size() != labels.size() || sims.empty())
    throw std::invalid_argument("best_threshold_accuracy: need equal, non-empty inputs");
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] < sims[b]; });
  std::size_t positives = 0;
  for (auto l : labels) positives += (l == Label::positive);
  // Threshold below everything: all predicted positive.
  std::size_t correct = positives;
  std::size_t best = correct;
  for (std::size_t i = 0; i < order.size(); ++i) {
    correct += labels[order[i]] == Label::negative ? 1 : 0;
    correct -= labels[order[i]] == Label::positive ? 1 : 0;
    const bool boundary = i + 1 == order.size() || sims[order[i + 1]] > sims[order[i]];
    if (boundary) best = std::max(best, correct);
  }
  return double(best) / double(sims.size());
}

namespace {

double dev_accuracy(const EncoderModel& model, const LabeledPairSet& dev) {
  std::vector<double> sims;
  std::vector<Label> labels;
  sims.reserve(dev.size());
  for (const auto& p : dev.pairs) {
    const auto u = model.embed(p.a);
    const auto v = model.embed(p.b);
    sims.push_back(1.0 - cosine_distance<float>(u, v));
    labels.push_back(p.label);
  }
  return best_threshold_accuracy(sims, labels);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const LabeledPairSet& data, const AnnotatedPairSet* dev,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("training data is empty");

  VocabularyBuilder vb;
  vb.add(data);
  Rng init_rng(cfg.seed);
  EncoderModel model = EncoderModel::initialize(cfg.encoder, vb.build(cfg.min_count), init_rng);
  model.set_provenance(cfg.to_json());

  std::vector<EncodedPair> encoded;
  encoded.reserve(data.size());
  for (const auto& p : data.pairs)
    encoded.push_back({model.token_ids(p.a), model.token_ids(p.b), p.label});

  LabeledPairSet dev_pairs;
  if (dev) dev_pairs = binarize_annotations(*dev);
  const bool use_dev = !dev_pairs.empty();

  Rng shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  Rng dropout_rng(cfg.seed + 1);
  const DropoutSource dropout{cfg.encoder.kind == EncoderKind::gran ? &dropout_rng : nullptr,
                              cfg.keep_prob};

  TrainLog log;
  log.batches_per_epoch = batches_per_epoch(encoded.size(), cfg.batch_size);
  Gradients<float> grads = model.params().zero_gradients();

  std::optional<ParameterSet<float>> best_params;
  double best_dev = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(encoded.begin(), encoded.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < log.batches_per_epoch; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(encoded.size(), lo + cfg.batch_size);
      std::span<const EncodedPair> batch(encoded.data() + lo, hi - lo);
      for (auto& g : grads) g.fill(0.0f);
      const double loss = std::visit(
          [&](auto& net) {
            using Net = std::decay_t<decltype(net)>;
            return batch_objective<Net, float>(net, batch, cfg.margin, &grads, dropout);
          },
          model.network());
      if (!std::isfinite(loss)) throw NumericalError(epoch, b, "loss = " + std::to_string(loss));
      for (const auto& g : grads)
        for (float x : g.values())
          if (!std::isfinite(x)) throw NumericalError(epoch, b, "non-finite gradient");
      adam_step(model.params(), grads, cfg.adam);
      loss_sum += loss * double(batch.size());
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = loss_sum / double(encoded.size());
    if (use_dev) entry.dev_accuracy = dev_accuracy(model, dev_pairs);
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (use_dev) {
      if (*entry.dev_accuracy > best_dev) {
        best_dev = *entry.dev_accuracy;
        best_params = model.params();
        log.best_epoch = epoch;
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
        log.early_stopped = true;
        break;
      }
    } else {
      log.best_epoch = epoch;
    }
  }
  if (best_params) model.params() = std::move(*best_params);
  return {std::move(model), std::move(log)};
}

}  // namespace parasent
