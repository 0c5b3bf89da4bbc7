#include "parasent/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace parasent {
namespace {

enum Slot : std::size_t { kW1, kB1, kW2, kB2 };

// Numerically stable -log p(label | logit).
double bce_from_logit(double logit, Label y) {
  const double s = y == Label::positive ? logit : -logit;
  return s >= 0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
}

}  // namespace

std::string ProbeConfig::to_json() const {
  nlohmann::json j;
  j["hidden"] = hidden;
  j["activation"] = "leaky_relu";
  j["leaky_slope"] = leaky_slope;
  j["output"] = "sigmoid";
  j["loss"] = "cross_entropy";
  j["lr"] = adam.learning_rate;
  j["batch"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["holdout_fraction"] = holdout_fraction;
  j["standardize"] = standardize;
  j["seed"] = seed;
  return j.dump();
}

FeatureSet make_features(std::span<const std::vector<float>> left,
                         std::span<const std::vector<float>> right, std::span<const Label> labels) {
  if (left.size() != right.size() || left.size() != labels.size())
    throw std::invalid_argument("make_features: size mismatch");
  FeatureSet fs;
  if (left.empty()) return fs;
  const std::size_t d = left[0].size();
  fs.x = BasicMatrix<double>(left.size(), 2 * d);
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (left[i].size() != d || right[i].size() != d)
      throw std::invalid_argument("make_features: inconsistent embedding dimension");
    auto row = fs.x.row(i);
    std::copy(left[i].begin(), left[i].end(), row.begin());
    std::copy(right[i].begin(), right[i].end(), row.begin() + std::ptrdiff_t(d));
  }
  fs.y.assign(labels.begin(), labels.end());
  return fs;
}

FeatureSet embed_pairs(const LabeledPairSet& pairs, const EncoderModel& encoder) {
  std::vector<std::vector<float>> left, right;
  std::vector<Label> labels;
  left.reserve(pairs.size());
  right.reserve(pairs.size());
  for (const auto& p : pairs.pairs) {
    left.push_back(encoder.embed(p.a));
    right.push_back(encoder.embed(p.b));
    labels.push_back(p.label);
  }
  return make_features(left, right, labels);
}

// ---------------------------------------------------------------------------

MLPProbe::MLPProbe(ParameterSet<double> params, std::vector<double> mean,
                   std::vector<double> scale, double slope)
    : params_(std::move(params)), mean_(std::move(mean)), scale_(std::move(scale)), slope_(slope) {
  if (params_.size() != 4) throw std::invalid_argument("probe expects 4 parameter blocks");
  if (mean_.size() != input_dim() || scale_.size() != input_dim())
    throw std::invalid_argument("probe normalization size mismatch");
}

MLPProbe MLPProbe::constant(Label label, std::size_t input_dim) {
  ParameterSet<double> p;
  p.add("W1", BasicMatrix<double>(1, input_dim));
  p.add("b1", BasicMatrix<double>(1, 1));
  p.add("W2", BasicMatrix<double>(1, 1));
  p.add("b2", BasicMatrix<double>(1, 1, label == Label::positive ? 10.0 : -10.0));
  return MLPProbe(std::move(p), std::vector<double>(input_dim, 0.0),
                  std::vector<double>(input_dim, 1.0), kDefaultLeakySlope);
}

double MLPProbe::logit(std::span<const double> x) const {
  if (x.size() != input_dim()) throw std::invalid_argument("probe input dimension mismatch");
  const auto& w1 = params_[kW1];
  const auto& b1 = params_[kB1];
  const auto& w2 = params_[kW2];
  double out = params_[kB2][0];
  for (std::size_t h = 0; h < w1.rows(); ++h) {
    auto row = w1.row(h);
    double a = b1[h];
    for (std::size_t k = 0; k < row.size(); ++k) a += row[k] * ((x[k] - mean_[k]) / scale_[k]);
    out += w2[h] * leaky_relu(a, slope_);
  }
  return out;
}

double MLPProbe::probability(std::span<const double> x) const { return sigmoid(logit(x)); }

Label MLPProbe::predict(std::span<const double> x) const {
  return logit(x) > 0.0 ? Label::positive : Label::negative;
}

MLPProbe MLPProbe::complement() const {
  MLPProbe out = *this;
  for (auto& v : out.params_[kW2].values()) v = -v;
  for (auto& v : out.params_[kB2].values()) v = -v;
  return out;
}

// ---------------------------------------------------------------------------

MLPProbe train_probe(const FeatureSet& data, const ProbeConfig& cfg) {
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("probe needs at least two labeled pairs");
  const std::size_t pos = std::count(data.y.begin(), data.y.end(), Label::positive);
  if (pos == 0 || pos == n)
    throw std::invalid_argument("probe training set contains a single class");
  if (cfg.hidden == 0 || cfg.batch_size == 0) throw std::invalid_argument("bad probe config");

  const std::size_t in_dim = data.x.cols();
  Rng rng(cfg.seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_hold = static_cast<std::size_t>(std::llround(cfg.holdout_fraction * double(n)));
  n_hold = std::clamp<std::size_t>(n_hold, 1, n - 1);
  std::vector<std::size_t> hold(order.begin(), order.begin() + std::ptrdiff_t(n_hold));
  std::vector<std::size_t> train(order.begin() + std::ptrdiff_t(n_hold), order.end());

  std::vector<double> mean(in_dim, 0.0), scale(in_dim, 1.0);
  if (cfg.standardize) {
    for (std::size_t i : train)
      for (std::size_t k = 0; k < in_dim; ++k) mean[k] += data.x(i, k);
    for (auto& m : mean) m /= double(train.size());
    std::vector<double> var(in_dim, 0.0);
    for (std::size_t i : train)
      for (std::size_t k = 0; k < in_dim; ++k) {
        const double c = data.x(i, k) - mean[k];
        var[k] += c * c;
      }
    for (std::size_t k = 0; k < in_dim; ++k) {
      const double sd = std::sqrt(var[k] / double(train.size()));
      scale[k] = sd > 1e-12 ? sd : 1.0;
    }
  }

  ParameterSet<double> params;
  params.add("W1", xavier_init<double>(cfg.hidden, in_dim, rng));
  params.add("b1", BasicMatrix<double>(cfg.hidden, 1));
  params.add("W2", xavier_init<double>(1, cfg.hidden, rng));
  params.add("b2", BasicMatrix<double>(1, 1));

  // Standardized copy of the features.
  BasicMatrix<double> z(n, in_dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < in_dim; ++k) z(i, k) = (data.x(i, k) - mean[k]) / scale[k];

  const std::size_t H = cfg.hidden;
  std::vector<double> pre(H), act(H);
  auto forward = [&](std::size_t i) {
    const auto& w1 = params[kW1];
    auto xi = z.row(i);
    double out = params[kB2][0];
    for (std::size_t h = 0; h < H; ++h) {
      auto row = w1.row(h);
      double a = params[kB1][h];
      for (std::size_t k = 0; k < in_dim; ++k) a += row[k] * xi[k];
      pre[h] = a;
      act[h] = leaky_relu(a, cfg.leaky_slope);
      out += params[kW2][h] * act[h];
    }
    return out;
  };
  auto evaluate = [&](const std::vector<std::size_t>& idx, double* loss) {
    std::size_t correct = 0;
    double total = 0.0;
    for (std::size_t i : idx) {
      const double l = forward(i);
      total += bce_from_logit(l, data.y[i]);
      correct += ((l > 0.0) == (data.y[i] == Label::positive));
    }
    if (loss) *loss = total / double(idx.size());
    return double(correct) / double(idx.size());
  };

  Gradients<double> grads = params.zero_gradients();
  ParameterSet<double> best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_acc = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs = 0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    epochs = epoch;
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t lo = 0; lo < train.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
      for (auto& g : grads) g.fill(0.0);
      const double inv = 1.0 / double(hi - lo);
      for (std::size_t b = lo; b < hi; ++b) {
        const std::size_t i = train[b];
        const double l = forward(i);
        const double y = data.y[i] == Label::positive ? 1.0 : 0.0;
        const double dl = (sigmoid(l) - y) * inv;
        grads[kB2][0] += dl;
        auto xi = z.row(i);
        for (std::size_t h = 0; h < H; ++h) {
          grads[kW2][h] += dl * act[h];
          const double da = dl * params[kW2][h] * leaky_relu_grad(pre[h], cfg.leaky_slope);
          if (da == 0.0) continue;
          grads[kB1][h] += da;
          auto grow = grads[kW1].row(h);
          for (std::size_t k = 0; k < in_dim; ++k) grow[k] += da * xi[k];
        }
      }
      adam_step(params, grads, cfg.adam);
    }
    double loss = 0.0;
    const double acc = evaluate(hold, &loss);
    if (loss < best_loss - 1e-9) {
      best_loss = loss;
      best_acc = acc;
      best = params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  MLPProbe probe(std::move(best), std::move(mean), std::move(scale), cfg.leaky_slope);
  probe.epochs_trained = epochs;
  probe.best_epoch = best_epoch;
  probe.holdout_accuracy = best_acc;
  probe.holdout_loss = best_loss;
  return probe;
}

MLPProbe train_probe(const LabeledPairSet& dev, const EncoderModel& encoder,
                     const ProbeConfig& config) {
  if (dev.empty()) throw std::invalid_argument("empty development set");
  return train_probe(embed_pairs(dev, encoder), config);
}

double classify_accuracy(const MLPProbe& probe, const FeatureSet& test) {
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    correct += probe.predict(test.x.row(i)) == test.y[i];
  return double(correct) / double(test.size());
}

double classify_accuracy(const MLPProbe& probe, const LabeledPairSet& test,
                         const EncoderModel& encoder) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  return classify_accuracy(probe, embed_pairs(test, encoder));
}

double majority_baseline(const LabeledPairSet& test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  const std::size_t pos = test.count(Label::positive);
  return double(std::max(pos, test.size() - pos)) / double(test.size());
}

}  // namespace parasent
