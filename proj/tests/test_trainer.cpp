#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grad_fixture.hpp"
#include "parasent/checkpoint.hpp"
#include "parasent/trainer.hpp"

using namespace parasent;

namespace {

LabeledPair make_pair(const std::string& a, const std::string& b, Label l) {
  return {Sentence::parse(a), Sentence::parse(b), l};
}

// One identical positive pair and one negative pair over disjoint tokens.
LabeledPairSet toy_set() {
  LabeledPairSet s;
  s.pairs.push_back(make_pair("the cat sat on the mat", "the cat sat on the mat", Label::positive));
  s.pairs.push_back(make_pair("alpha beta gamma delta", "one two three four five", Label::negative));
  return s;
}

TrainConfig small_config(EncoderKind kind) {
  TrainConfig c;
  c.encoder.kind = kind;
  c.encoder.dim = 16;
  c.encoder.hidden = kind == EncoderKind::gran ? 16 : 0;
  c.epochs = 50;
  c.seed = 5;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("parasent_trainer_" + name);
}

}  // namespace

TEST_CASE("cosine distance cases") {
  const std::vector<double> u{1.0, 2.0}, neg{-1.0, -2.0}, e1{1.0, 0.0}, e2{0.0, 1.0}, z{0.0, 0.0};
  CHECK(cosine_distance<double>(u, u) == doctest::Approx(0.0));
  CHECK(cosine_distance<double>(u, neg) == doctest::Approx(2.0));
  CHECK(cosine_distance<double>(e1, e2) == doctest::Approx(1.0));
  const auto before = degenerate_cosine_count();
  CHECK(cosine_distance<double>(u, z) == 1.0);
  CHECK(degenerate_cosine_count() == before + 1);
}

TEST_CASE("margin loss cases") {
  CHECK(margin_loss(0.3, Label::positive, 0.4) == 0.3);
  CHECK(margin_loss(0.5, Label::negative, 0.4) == 0.0);
  CHECK(margin_loss(0.1, Label::negative, 0.4) == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(margin_loss(0.0, Label::positive, 0.4) == 0.0);
  CHECK(margin_loss(0.4, Label::negative, 0.4) == 0.0);
  for (double d = 0.0; d <= 2.0; d += 0.05) {
    CHECK(margin_loss(d, Label::positive, 0.4) >= 0.0);
    CHECK(margin_loss(d, Label::negative, 0.4) >= 0.0);
    if (d >= 0.4) CHECK(margin_loss_grad(d, Label::negative, 0.4) == 0.0);
  }
  CHECK(margin_loss_grad(0.1, Label::negative, 0.4) == doctest::Approx(-0.6));
  CHECK(std::isnan(margin_loss(std::nan(""), Label::negative, 0.4)));
}

TEST_CASE("batch gradient of a negative pair beyond the margin is zero") {
  Rng rng(1);
  auto wa = WaEncoder<double>::init(10, 4, rng);
  fixture::spread_parameters(wa, 1.0, rng);
  EncodedPair p{{1, 2}, {3, 4}, Label::negative};
  const double d = cosine_distance<double>(wa.forward(p.a), wa.forward(p.b));
  REQUIRE(d > 0.0);
  auto grads = wa.params().zero_gradients();
  const double loss = batch_objective<WaEncoder<double>, double>(wa, std::span(&p, 1), d * 0.5, &grads);
  CHECK(loss == 0.0);
  for (double v : grads[0].values()) CHECK(v == 0.0);
}

TEST_CASE("batches per epoch") {
  CHECK(batches_per_epoch(2'000'000, 128) == 15625);
  CHECK(batches_per_epoch(129, 128) == 2);
  CHECK(batches_per_epoch(1, 128) == 1);
}

TEST_CASE("defaults") {
  TrainConfig c;
  CHECK(c.adam.learning_rate == 0.001);
  CHECK(c.batch_size == 128);
  CHECK(c.margin == 0.4);
  CHECK(c.epochs == 10);
  CHECK(c.patience == 2);
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.margin = -0.1;
  CHECK_THROWS(c.validate());
}

TEST_CASE("toy set loss decreases") {
  for (auto kind : {EncoderKind::wa, EncoderKind::gran}) {
    CAPTURE(to_string(kind));
    const auto data = toy_set();
    const auto copy = data;
    auto cfg = small_config(kind);
    // With the default margin the random negative already sits beyond it and
    // the WA loss starts at 0.
    cfg.margin = 1.5;
    const auto r = train(cfg, data);
    CHECK(data == copy);
    REQUIRE(r.log.epochs.size() == 50);
    CHECK(r.log.epochs.back().mean_loss < r.log.epochs.front().mean_loss);
    // After the first 10 epochs the loss may only jitter upward by 5%. Near
    // zero the float32 cosine resolution (~1e-7) takes over.
    for (std::size_t e = 11; e < r.log.epochs.size(); ++e)
      CHECK(r.log.epochs[e].mean_loss <= r.log.epochs[e - 1].mean_loss * 1.05 + 1e-6);
  }
}

TEST_CASE("training is deterministic") {
  const auto data = toy_set();
  auto cfg = small_config(EncoderKind::gran);
  cfg.epochs = 5;
  const auto a = serialize_checkpoint(train(cfg, data).model);
  const auto b = serialize_checkpoint(train(cfg, data).model);
  CHECK(a == b);
  cfg.seed = 6;
  CHECK(serialize_checkpoint(train(cfg, data).model) != a);
}

TEST_CASE("train log csv") {
  auto cfg = small_config(EncoderKind::wa);
  cfg.epochs = 3;
  const auto r = train(cfg, toy_set());
  std::ostringstream os;
  r.log.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,mean_loss,seconds,dev_accuracy");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("non-finite loss aborts with the batch index") {
  auto cfg = small_config(EncoderKind::wa);
  cfg.adam.learning_rate = std::numeric_limits<double>::infinity();
  cfg.margin = 2.0;  // keeps the negative pair active so an update happens
  cfg.epochs = 3;
  try {
    train(cfg, toy_set());
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("empty training set is rejected") {
  CHECK_THROWS_AS(train(small_config(EncoderKind::wa), LabeledPairSet{}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  for (auto kind : {EncoderKind::wa, EncoderKind::gran}) {
    auto cfg = small_config(kind);
    cfg.epochs = 2;
    const auto model = train(cfg, toy_set()).model;
    const auto path = temp_path(std::string(to_string(kind)) + ".ckpt");
    save_checkpoint(model, path);
    const auto loaded = load_checkpoint(path, kind);
    CHECK(loaded.kind() == kind);
    CHECK(loaded.vocab() == model.vocab());
    REQUIRE(loaded.params().size() == model.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      CHECK(loaded.params().name(i) == model.params().name(i));
      const auto a = model.params()[i].values();
      const auto b = loaded.params()[i].values();
      CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    CHECK(serialize_checkpoint(loaded) == serialize_checkpoint(model));
    std::filesystem::remove(path);
  }
}

TEST_CASE("WA checkpoint carries only the embedding") {
  auto cfg = small_config(EncoderKind::wa);
  cfg.epochs = 1;
  const auto model = train(cfg, toy_set()).model;
  CHECK(model.params().size() == 1);
  CHECK(model.params().name(0) == "embedding");
}

TEST_CASE("checkpoint errors are distinct") {
  auto cfg = small_config(EncoderKind::wa);
  cfg.epochs = 1;
  const auto bytes = serialize_checkpoint(train(cfg, toy_set()).model);
  auto kind_of = [](const std::string& b, std::optional<EncoderKind> expected = std::nullopt) {
    try {
      parse_checkpoint(b, expected);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    return CheckpointErrorKind::io;  // sentinel: parsed fine
  };

  auto flipped = bytes;
  flipped[flipped.size() - 10] ^= 0x40;
  CHECK(kind_of(flipped) == CheckpointErrorKind::checksum);

  CHECK(kind_of(bytes.substr(0, bytes.size() - 7)) == CheckpointErrorKind::truncated);
  CHECK(kind_of(bytes.substr(0, 8)) == CheckpointErrorKind::truncated);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK(kind_of(magic) == CheckpointErrorKind::bad_magic);

  auto version = bytes;
  version[5] = 2;
  CHECK(kind_of(version) == CheckpointErrorKind::version_mismatch);

  CHECK(kind_of(bytes, EncoderKind::gran) == CheckpointErrorKind::kind_mismatch);
  CHECK(kind_of(bytes, EncoderKind::wa) == CheckpointErrorKind::io);

  CHECK_THROWS_AS(load_checkpoint(temp_path("does-not-exist")), CheckpointError);
}

TEST_CASE("best threshold accuracy") {
  const std::vector<double> sims{0.9, 0.8, 0.3, 0.2};
  const std::vector<Label> labels{Label::positive, Label::positive, Label::negative, Label::negative};
  CHECK(best_threshold_accuracy(sims, labels) == 1.0);
  const std::vector<Label> mixed{Label::positive, Label::negative, Label::positive, Label::negative};
  CHECK(best_threshold_accuracy(sims, mixed) == doctest::Approx(0.75));
}

TEST_CASE("dev set drives early stopping") {
  LabeledPairSet data;
  AnnotatedPairSet dev;
  for (int i = 0; i < 8; ++i) {
    const std::string s = "w" + std::to_string(i) + " x" + std::to_string(i);
    data.pairs.push_back(make_pair(s, s, Label::positive));
    data.pairs.push_back(make_pair(s, "q" + std::to_string(i) + " r" + std::to_string(i), Label::negative));
    dev.pairs.push_back({Sentence::parse(s), Sentence::parse(s), 4.0});
    dev.pairs.push_back({Sentence::parse(s), Sentence::parse("q" + std::to_string(i)), 1.0});
  }
  auto cfg = small_config(EncoderKind::wa);
  cfg.epochs = 30;
  cfg.patience = 2;
  const auto r = train(cfg, data, &dev);
  for (const auto& e : r.log.epochs) CHECK(e.dev_accuracy.has_value());
  CHECK(r.log.best_epoch >= 1);
  CHECK(r.log.best_epoch <= r.log.epochs.size());
  if (r.log.early_stopped) CHECK(r.log.epochs.size() < 30);
}
