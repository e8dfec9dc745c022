#include <cmath>
#include <random>

#include "doctest.h"
#include "se2hypo/errors.hpp"
#include "se2hypo/geometry.hpp"
#include "se2hypo/test_function.hpp"

using namespace se2hypo;

namespace {

TestFunction random_function(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> deg(0, 3), freq(0, 4), ph(0, 1), coef(-8, 8);
  TestFunction f;
  for (int t = 0; t < 5; ++t) {
    f.add_term({deg(rng), deg(rng), freq(rng), ph(rng) ? Phase::Sin : Phase::Cos}, coef(rng) / 4.0);
  }
  return f;
}

}  // namespace

TEST_SUITE("test_function") {

TEST_CASE("canonical form") {
  TestFunction f;
  f.add_term({1, 0, 0, Phase::Sin}, 3.0);  // sin 0 = 0
  CHECK(f.is_zero());
  f.add_term({1, 0, -2, Phase::Sin}, 1.0);  // sin(−2θ) = −sin 2θ
  f.add_term({1, 0, -2, Phase::Cos}, 1.0);
  CHECK(f.terms().at({1, 0, 2, Phase::Sin}) == -1.0);
  CHECK(f.terms().at({1, 0, 2, Phase::Cos}) == 1.0);
  f.add_term({1, 0, 2, Phase::Cos}, -1.0);
  CHECK(f.terms().size() == 1);
  CHECK(TestFunction::constant(2).is_theta_independent());
  CHECK_FALSE(f.is_theta_independent());
  CHECK(f.max_frequency() == 2);
}

TEST_CASE("product agrees with pointwise evaluation") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 30; ++i) {
    const TestFunction f = random_function(rng), g = random_function(rng);
    const TestFunction fg = f * g;
    for (int j = 0; j < 5; ++j) {
      const double x = u(rng), y = u(rng), th = 3 * u(rng);
      const double ref = f.evaluate(x, y, th) * g.evaluate(x, y, th);
      CHECK(fg.evaluate(x, y, th) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("derivatives agree with finite differences") {
  std::mt19937_64 rng(6);
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const TestFunction f = random_function(rng);
    const double x = 0.3, y = -0.7, th = 1.9;
    CHECK(d_xi1(f).evaluate(x, y, th) ==
          doctest::Approx((f.evaluate(x + h, y, th) - f.evaluate(x - h, y, th)) / (2 * h))
              .epsilon(1e-7).scale(1.0));
    CHECK(d_xi2(f).evaluate(x, y, th) ==
          doctest::Approx((f.evaluate(x, y + h, th) - f.evaluate(x, y - h, th)) / (2 * h))
              .epsilon(1e-7).scale(1.0));
    CHECK(d_theta(f).evaluate(x, y, th) ==
          doctest::Approx((f.evaluate(x, y, th + h) - f.evaluate(x, y, th - h)) / (2 * h))
              .epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("multiplication primitives") {
  std::mt19937_64 rng(8);
  const TestFunction f = random_function(rng);
  const double x = 1.2, y = 0.4, th = 0.9;
  const double fv = f.evaluate(x, y, th);
  CHECK(mul_xi1(f).evaluate(x, y, th) == doctest::Approx(x * fv));
  CHECK(mul_xi2(f).evaluate(x, y, th) == doctest::Approx(y * fv));
  CHECK(mul_cos(f).evaluate(x, y, th) == doctest::Approx(std::cos(th) * fv));
  CHECK(mul_sin(f).evaluate(x, y, th) == doctest::Approx(std::sin(th) * fv));
}

TEST_CASE("json round trip") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    const TestFunction f = random_function(rng);
    CHECK(test_function_from_json(to_json(f)) == f);
  }
  CHECK_THROWS_AS(test_function_from_json(nlohmann::json::parse(R"([{"a":1}])")),
                  std::exception);
}

TEST_CASE("distance and arithmetic") {
  const TestFunction f = TestFunction::monomial(2, 1, 0, 1, Phase::Cos);
  CHECK((f - f).is_zero());
  CHECK(distance(f, 0.5 * f) == 1.0);
}

}
