#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "parasent/numcore.hpp"

using namespace parasent;

TEST_CASE("leaky relu and its derivative") {
  CHECK(leaky_relu(2.0) == 2.0);
  CHECK(leaky_relu(-1.0) == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(leaky_relu_grad(-5.0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(leaky_relu_grad(3.0) == 1.0);
  CHECK(leaky_relu(-2.0, 0.2) == doctest::Approx(-0.4));
}

TEST_CASE("sigmoid is stable and symmetric") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::abs(sigmoid(50.0) - 1.0) < 1e-15);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid_grad_from_output(sigmoid(0.0)) == 0.25);
  for (double x : {-100.0, -3.0, 0.7, 100.0}) {
    CHECK(std::isfinite(sigmoid(x)));
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0));
  }
}

TEST_CASE("uniform init respects bounds and seed") {
  const auto a = uniform_init<float>(20, 30, -0.01, 0.01, 7);
  const auto b = uniform_init<float>(20, 30, -0.01, 0.01, 7);
  CHECK(a == b);
  for (float v : a.values()) {
    CHECK(v >= -0.01f);
    CHECK(v <= 0.01f);
  }
  const double eps = 1e-6;
  const auto narrow = uniform_init<double>(10, 10, 1.0 - eps, 1.0, 3);
  for (double v : narrow.values()) CHECK(std::abs(v - 1.0) <= eps);
  CHECK_THROWS_AS(uniform_init<float>(2, 2, 1.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("xavier init bound and mean") {
  CHECK(xavier_bound(3, 3) == doctest::Approx(1.0).epsilon(1e-15));
  const auto m = xavier_init<double>(100, 100, 11);
  const double bound = std::sqrt(6.0 / 200.0);
  double sum = 0.0;
  for (double v : m.values()) {
    CHECK(std::abs(v) <= bound);
    sum += v;
  }
  // Standard error of the mean: bound / sqrt(3 * 10^4) ~ 1e-3.
  CHECK(std::abs(sum / double(m.size())) < 0.02);
  CHECK(xavier_init<double>(4, 5, 11) == xavier_init<double>(4, 5, 11));
  CHECK_THROWS(xavier_init<float>(0, 3, 1));
}

TEST_CASE("adam first step moves by lr against the gradient") {
  ParameterSet<double> p;
  p.add("theta", BasicMatrix<double>(1, 2, 1.0));
  Gradients<double> g = p.zero_gradients();
  g[0][0] = 0.5;
  g[0][1] = -3.0;
  AdamConfig cfg;
  CHECK(cfg.learning_rate == 0.001);
  adam_step(p, g, cfg);
  // m_hat = g, v_hat = g^2 on step one.
  CHECK(p[0][0] == doctest::Approx(1.0 - 0.001 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p[0][1] == doctest::Approx(1.0 + 0.001 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(p.step() == 1);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParameterSet<double> p;
  p.add("w", BasicMatrix<double>(2, 2, 0.3));
  const auto before = p[0];
  adam_step(p, p.zero_gradients(), AdamConfig{});
  CHECK(p[0] == before);
  for (double m : p.first_moment(0).values()) CHECK(m == 0.0);
  for (double v : p.second_moment(0).values()) CHECK(v == 0.0);
}

TEST_CASE("adam rejects mismatched gradients and bad lr") {
  ParameterSet<double> p;
  p.add("w", BasicMatrix<double>(2, 2));
  Gradients<double> wrong{BasicMatrix<double>(2, 3)};
  CHECK_THROWS_AS(adam_step(p, wrong, AdamConfig{}), std::invalid_argument);
  AdamConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(adam_step(p, p.zero_gradients(), bad), std::invalid_argument);
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    ParameterSet<float> p;
    p.add("w", xavier_init<float>(3, 4, 5));
    auto g = p.zero_gradients();
    for (int s = 0; s < 5; ++s) {
      for (std::size_t i = 0; i < g[0].size(); ++i) g[0][i] = float(std::sin(double(i + s)));
      adam_step(p, g, AdamConfig{});
    }
    return p[0];
  };
  CHECK(run() == run());
}

TEST_CASE("variational mask") {
  const auto ones = make_variational_mask<float>(50, 1.0, 1);
  for (float v : ones.scale) CHECK(v == 1.0f);

  const auto m = make_variational_mask<double>(100000, 0.8, 9);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (double v : m.scale) {
    CHECK((v == 0.0 || v == doctest::Approx(1.25)));
    zeros += v == 0.0;
    sum += v * 3.0;
  }
  // Binomial sd of the zero fraction is sqrt(0.16 / 1e5) ~ 0.0013.
  CHECK(std::abs(double(zeros) / 1e5 - 0.2) < 0.01);
  CHECK(sum / 1e5 == doctest::Approx(3.0).epsilon(0.02));
  CHECK_THROWS(make_variational_mask<float>(3, 0.0, 1));
  CHECK_THROWS(make_variational_mask<float>(3, 1.5, 1));
}

TEST_CASE("gradient check on a quadratic") {
  ParameterSet<double> p;
  BasicMatrix<double> theta(3, 1);
  theta[0] = 0.7;
  theta[1] = -1.3;
  theta[2] = 2.1;
  p.add("theta", theta);
  Objective f = [](ParameterSet<double>& ps, Gradients<double>* g) {
    double s = 0.0;
    for (std::size_t i = 0; i < ps[0].size(); ++i) {
      s += ps[0][i] * ps[0][i];
      if (g) (*g)[0][i] += 2.0 * ps[0][i];
    }
    return s;
  };
  const auto r = gradient_check(f, p);
  CHECK(r.max_relative_error < 1e-9);
  CHECK(r.coordinates_checked == 3);

  SUBCASE("injected fault is reported") {
    Gradients<double> bad = p.zero_gradients();
    for (std::size_t i = 0; i < 3; ++i) bad[0][i] = 2.0 * p[0][i];
    bad[0][1] *= 2.0;
    const auto rb = gradient_check(f, p, {}, &bad);
    // |2g - g| / |2g| = 1/2 for the doubled entry.
    CHECK(rb.max_relative_error >= 1.0 / 3.0);
    CHECK(rb.worst_index == 1);
  }
}

TEST_CASE("gradient check rejects non-finite loss") {
  ParameterSet<double> p;
  p.add("x", BasicMatrix<double>(1, 1, 1.0));
  Objective f = [](ParameterSet<double>&, Gradients<double>*) { return std::nan(""); };
  CHECK_THROWS(gradient_check(f, p));
}

TEST_CASE("gradient check samples at most the coordinate cap") {
  ParameterSet<double> p;
  p.add("big", uniform_init<double>(30, 30, -1, 1, 2));
  Objective f = [](ParameterSet<double>& ps, Gradients<double>* g) {
    double s = 0.0;
    for (std::size_t i = 0; i < ps[0].size(); ++i) {
      s += std::sin(ps[0][i]);
      if (g) (*g)[0][i] += std::cos(ps[0][i]);
    }
    return s;
  };
  GradCheckOptions o;
  o.max_coords_per_param = 50;
  const auto r = gradient_check(f, p, o);
  CHECK(r.coordinates_checked == 50);
  CHECK(r.max_relative_error < 1e-7);
}

TEST_CASE("64-bit accumulation in gemv") {
  BasicMatrix<float> a(1, 3);
  a[0] = 1e8f;
  a[1] = 1.0f;
  a[2] = -1e8f;
  std::vector<float> x{1.0f, 1.0f, 1.0f}, y{0.0f};
  gemv_acc<float>(a, x, y);
  CHECK(y[0] == 1.0f);
}
