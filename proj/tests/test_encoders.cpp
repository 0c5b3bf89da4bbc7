#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "grad_fixture.hpp"
#include "parasent/encoders.hpp"

using namespace parasent;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GranEncoder<double> random_gran(std::size_t vocab, std::size_t d, std::size_t h, std::uint64_t seed,
                                bool biases = false) {
  Rng rng(seed);
  auto enc = GranEncoder<double>::init(vocab, d, h, {kDefaultLeakySlope, biases}, rng);
  fixture::spread_parameters(enc, fixture::kSpread, rng);
  return enc;
}

// Zeroes everything except the embedding.
void zero_non_embedding(GranEncoder<double>& enc) {
  for (std::size_t i = 1; i < enc.params().size(); ++i) enc.params()[i].fill(0.0);
}

}  // namespace

TEST_CASE("WA averages embedding rows") {
  ParameterSet<double> p;
  BasicMatrix<double> e(3, 2);
  e(1, 0) = 1.0;
  e(2, 1) = 1.0;
  p.add("embedding", e);
  WaEncoder<double> wa(p);
  const std::vector<TokenId> two{1, 2};
  CHECK(wa.forward(two) == std::vector<double>{0.5, 0.5});
  const std::vector<TokenId> same{1, 1, 1};
  CHECK(wa.forward(same) == std::vector<double>{1.0, 0.0});
  const std::vector<TokenId> one{2};
  CHECK(wa.forward(one) == std::vector<double>{0.0, 1.0});
  CHECK_THROWS(wa.forward(std::vector<TokenId>{}));
  CHECK_THROWS(wa.forward(std::vector<TokenId>{3}));
}

TEST_CASE("WA is permutation invariant and scales linearly") {
  Rng rng(3);
  auto wa = WaEncoder<double>::init(20, 6, rng);
  std::vector<TokenId> ids{4, 7, 1, 9, 9, 0};
  auto shuffled = ids;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto a = wa.forward(ids);
  const auto b = wa.forward(shuffled);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));

  auto scaled = wa;
  for (auto& v : scaled.params()[0].values()) v *= 3.0;
  const auto c = scaled.forward(ids);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(c[k] == doctest::Approx(3.0 * a[k]).epsilon(1e-12));
  const std::vector<TokenId> other{2, 3};
  CHECK(cosine_distance<double>(scaled.forward(ids), scaled.forward(other)) ==
        doctest::Approx(cosine_distance<double>(a, wa.forward(other))).epsilon(1e-12));
}

TEST_CASE("GRU with zero weights keeps a zero state") {
  auto enc = random_gran(10, 4, 3, 1);
  zero_non_embedding(enc);
  const std::vector<TokenId> ids{1, 2, 3, 4, 5};
  for (const auto& h : enc.hidden_states(ids))
    for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("scalar GRU step") {
  auto enc = random_gran(2, 1, 1, 1);
  for (std::size_t i = 1; i < enc.params().size(); ++i) enc.params()[i].fill(1.0);
  enc.params()[GranEncoder<double>::kBh].fill(0.0);
  enc.params()[0](1, 0) = 0.5;
  const std::vector<TokenId> ids{1};
  const double h1 = enc.hidden_states(ids)[0][0];
  // r and z = sigma(0.5); h~ = z * f(0.5 + U_h (r * 0)); h = (1 - z) * 0 + h~.
  const double expected = sig(0.5) * 0.5;
  CHECK(h1 == doctest::Approx(expected).epsilon(1e-14));
  CHECK(h1 == doctest::Approx(0.3112).epsilon(1e-3));

  const std::vector<TokenId> rep{1, 1, 1};
  CHECK(enc.hidden_states(rep)[0][0] == h1);
}

TEST_CASE("zero non-embedding parameters halve the WA embedding") {
  auto enc = random_gran(30, 8, 5, 2);
  zero_non_embedding(enc);
  ParameterSet<double> wp;
  wp.add("embedding", enc.params()[0]);
  WaEncoder<double> wa(wp);
  Rng rng(9);
  std::uniform_int_distribution<TokenId> tok(0, 29);
  for (int s = 0; s < 20; ++s) {
    std::vector<TokenId> ids(1 + s % 7);
    for (auto& id : ids) id = tok(rng);
    const auto g = enc.forward(ids);
    const auto w = wa.forward(ids);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(0.5 * w[k]).epsilon(1e-14));
  }
}

TEST_CASE("large gate bias recovers WA") {
  auto enc = random_gran(10, 4, 3, 5);
  enc.params()[GranEncoder<double>::kB].fill(60.0);
  ParameterSet<double> wp;
  wp.add("embedding", enc.params()[0]);
  WaEncoder<double> wa(wp);
  const std::vector<TokenId> ids{1, 2, 3};
  const auto g = enc.forward(ids);
  const auto w = wa.forward(ids);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(w[k]).epsilon(1e-12));
}

TEST_CASE("single token GRAN is the gated embedding") {
  auto enc = random_gran(10, 4, 3, 6);
  const std::vector<TokenId> ids{7};
  GranEncoder<double>::Trace t;
  const auto out = enc.forward(ids, nullptr, &t);
  for (std::size_t k = 0; k < 4; ++k) CHECK(out[k] == doctest::Approx(enc.params()[0](7, k) * t.gate[k]));
}

TEST_CASE("GRAN is order sensitive and causal") {
  auto enc = random_gran(20, 6, 4, 7);
  const std::vector<TokenId> ids{1, 2, 3, 4};
  const std::vector<TokenId> rev{4, 3, 2, 1};
  const auto a = enc.forward(ids);
  const auto b = enc.forward(rev);
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) diff += std::abs(a[k] - b[k]);
  CHECK(diff > 1e-6);

  const std::vector<TokenId> changed{1, 2, 3, 9};
  const auto h1 = enc.hidden_states(ids);
  const auto h2 = enc.hidden_states(changed);
  for (std::size_t t = 0; t < 3; ++t) CHECK(h1[t] == h2[t]);
  CHECK(h1[3] != h2[3]);
}

TEST_CASE("activations stay finite for large parameters and long inputs") {
  Rng rng(8);
  auto enc = GranEncoder<float>::init(50, 8, 8, {}, rng);
  for (std::size_t i = 0; i < enc.params().size(); ++i) {
    auto& m = enc.params()[i];
    m = uniform_init<float>(m.rows(), m.cols(), -10.0, 10.0, rng);
  }
  std::vector<TokenId> ids(512);
  std::uniform_int_distribution<TokenId> tok(0, 49);
  for (auto& id : ids) id = tok(rng);
  for (float v : enc.forward(ids)) CHECK(std::isfinite(v));
}

TEST_CASE("variational masks are shared across time steps") {
  auto enc = random_gran(10, 6, 5, 11);
  Rng rng(1);
  const auto masks = enc.make_masks(0.5, rng);
  GranEncoder<double>::Trace t;
  const std::vector<TokenId> ids{1, 2, 3, 4};
  enc.forward(ids, &masks, &t);
  CHECK(t.mask_x == masks.input.scale);
  CHECK(t.mask_h == masks.hidden.scale);
  // Dropout only touches the recurrent path: with an all-zero input mask and
  // zero hidden mask the state sees no input, so h stays at zero.
  GranEncoder<double>::Masks zero{DropoutMask<double>{std::vector<double>(6, 0.0), 0.5},
                                  DropoutMask<double>{std::vector<double>(5, 0.0), 0.5}};
  auto z = enc;
  z.params()[GranEncoder<double>::kBh].fill(0.0);
  for (const auto& h : z.hidden_states(ids, &zero))
    for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("embedding gradient is sparse") {
  Rng rng(4);
  auto enc = random_gran(12, 4, 3, 12);
  std::vector<EncodedPair> batch{{{1, 2, 3}, {4, 5}, Label::positive}, {{1, 6}, {7}, Label::negative}};
  auto grads = enc.params().zero_gradients();
  batch_objective<GranEncoder<double>, double>(enc, batch, 1.5, &grads);
  for (TokenId unused : {0, 8, 9, 10, 11})
    for (double v : grads[0].row(std::size_t(unused))) CHECK(v == 0.0);
}

TEST_CASE("identical positive pair has zero WA gradient") {
  Rng rng(2);
  auto wa = WaEncoder<double>::init(10, 5, rng);
  std::vector<EncodedPair> batch{{{1, 2, 3}, {1, 2, 3}, Label::positive}};
  auto grads = wa.params().zero_gradients();
  const double loss = batch_objective<WaEncoder<double>, double>(wa, batch, 0.4, &grads);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : grads[0].values()) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("gradient check: WA and GRAN") {
  Rng rng(21);
  const auto batch = fixture::random_batch(4, 15, rng);
  const double margin = 1.2;

  SUBCASE("WA") {
    auto wa = WaEncoder<double>::init(15, 8, rng);
    fixture::spread_parameters(wa, fixture::kSpread, rng);
    REQUIRE(fixture::margin_clearance(wa, batch, margin) > 1e-3);
    auto params = wa.params();
    const auto r = gradient_check(fixture::objective(wa, batch, margin), params, fixture::check_options());
    CHECK(r.max_relative_error < 1e-4);
  }
  SUBCASE("GRAN") {
    auto gran = random_gran(15, 8, 8, 22);
    REQUIRE(fixture::margin_clearance(gran, batch, margin) > 1e-3);
    auto params = gran.params();
    const auto r = gradient_check(fixture::objective(gran, batch, margin), params, fixture::check_options());
    INFO("worst " << r.worst_parameter << "[" << r.worst_index << "] a=" << r.worst_analytic << " n=" << r.worst_numeric);
    CHECK(r.max_relative_error < 1e-4);
  }
  SUBCASE("GRAN with gate biases, hidden != d and dropout masks") {
    auto gran = random_gran(15, 6, 4, 23, true);
    REQUIRE(fixture::margin_clearance(gran, batch, margin) > 1e-3);
    auto params = gran.params();
    const auto r = gradient_check(fixture::objective(gran, batch, margin, 0.7, 99), params, fixture::check_options());
    INFO("worst " << r.worst_parameter << "[" << r.worst_index << "] a=" << r.worst_analytic << " n=" << r.worst_numeric);
    CHECK(r.max_relative_error < 1e-4);
  }
}
