#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "se2hypo/geometry.hpp"

using namespace se2hypo;

namespace {

Eigen::Matrix3d homogeneous(double x1, double x2, double th) {
  Eigen::Matrix3d m;
  m << std::cos(th), -std::sin(th), x1, std::sin(th), std::cos(th), x2, 0, 0, 1;
  return m;
}

void check_point_near(const GroupPoint& p, double x1, double x2, double th, double tol) {
  CHECK(std::abs(p.xi1() - x1) <= tol);
  CHECK(std::abs(p.xi2() - x2) <= tol);
  CHECK(std::abs(angle_difference(p.theta(), th)) <= tol);
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("compose with identity") {
  const GroupPoint h(1, 2, 0.3);
  const GroupPoint r = compose(GroupPoint::identity(), h);
  CHECK(r.xi1() == 1.0);
  CHECK(r.xi2() == 2.0);
  CHECK(r.theta() == doctest::Approx(0.3));
}

TEST_CASE("compose agrees with homogeneous matrix product") {
  check_point_near(compose(GroupPoint(0, 0, std::numbers::pi / 2), GroupPoint(1, 0, 0)), 0, 1,
                   std::numbers::pi / 2, 1e-15);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const double a1 = u(rng), a2 = u(rng), at = u(rng), b1 = u(rng), b2 = u(rng), bt = u(rng);
    const Eigen::Matrix3d m = homogeneous(a1, a2, at) * homogeneous(b1, b2, bt);
    const GroupPoint r = compose(GroupPoint(a1, a2, at), GroupPoint(b1, b2, bt));
    CHECK(std::abs(r.xi1() - m(0, 2)) < 1e-12);
    CHECK(std::abs(r.xi2() - m(1, 2)) < 1e-12);
    CHECK(std::abs(angle_difference(r.theta(), std::atan2(m(1, 0), m(0, 0)))) < 1e-12);
  }
}

TEST_CASE("inverse cancels") {
  const GroupPoint g(1, 2, 0.7);
  check_point_near(compose(g, inverse(g)), 0, 0, 0, 1e-12);
  check_point_near(compose(inverse(g), g), 0, 0, 0, 1e-12);
}

TEST_CASE("angles stay in [0, 2pi)") {
  for (double th : {-100.0, -kTwoPi, -1e-300, 0.0, 3.0, kTwoPi, 7.5, 1e6}) {
    const double r = normalize_angle(th);
    CHECK(r >= 0.0);
    CHECK(r < kTwoPi);
    CHECK(std::abs(std::sin(r) - std::sin(th)) < 1e-9);
  }
  CHECK(angle_difference(0.1, kTwoPi - 0.1) == doctest::Approx(0.2));
  CHECK(GroupPoint(0, 0, -0.5).theta() == doctest::Approx(kTwoPi - 0.5));
}

TEST_CASE("field coefficients") {
  const auto x1 = field_coefficients(FieldId::X1, GroupPoint(0, 0, 0));
  CHECK(x1[0] == 1.0);
  CHECK(x1[1] == 0.0);
  CHECK(x1[2] == 0.0);
  const auto x2 = field_coefficients(FieldId::X2, GroupPoint(3, -1, 2.2));
  CHECK(x2[0] == 0.0);
  CHECK(x2[1] == 0.0);
  CHECK(x2[2] == 1.0);
  const auto x3 = field_coefficients(FieldId::X3, GroupPoint(0, 0, 0));
  CHECK(x3[0] == 0.0);
  CHECK(x3[1] == 1.0);
  CHECK(x3[2] == 0.0);
  const double th = 1.1;
  const auto v = frame_v(th);
  const auto vp = frame_v_perp(th);
  CHECK(v[0] * vp[0] + v[1] * vp[1] == doctest::Approx(0.0));
}

TEST_CASE("apply_field matches finite differences along the flow") {
  TestFunction f = TestFunction::monomial(1.5, 2, 1, 1, Phase::Sin) +
                   TestFunction::monomial(-0.75, 0, 3, 2, Phase::Cos) +
                   TestFunction::monomial(2.0, 1, 0);
  const GroupPoint p(0.4, -0.8, 1.3);
  const double h = 1e-5;
  for (FieldId id : kAllFields) {
    const auto c = field_coefficients(id, p);
    auto at = [&](double s) {
      return f.evaluate(p.xi1() + s * c[0], p.xi2() + s * c[1], p.theta() + s * c[2]);
    };
    const double fd = (at(h) - at(-h)) / (2 * h);
    CHECK(apply_field(id, f).evaluate(p) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("commutator of X2 and X1 is X3") {
  const GroupPoint p(0.3, 1.1, 2.0);
  CHECK(commutator_residual(TestFunction::monomial(1, 1, 0), p) == 0.0);
  CHECK(commutator_residual(TestFunction::constant(4), p) == 0.0);
  const TestFunction xi2 = TestFunction::monomial(1, 0, 1);
  CHECK(commutator_residual(xi2, GroupPoint(0, 0, 0)) == 0.0);
  CHECK(apply_field(FieldId::X3, xi2).evaluate(GroupPoint(0, 0, 0)) == 1.0);

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> deg(0, 3), freq(0, 3), ph(0, 1), coef(-8, 8);
  for (int i = 0; i < 50; ++i) {
    TestFunction g;
    for (int t = 0; t < 4; ++t) {
      g.add_term({deg(rng), deg(rng), freq(rng), ph(rng) ? Phase::Sin : Phase::Cos},
                 coef(rng) / 4.0);
    }
    CHECK(commutator_defect(g).is_zero());
  }
}

}
