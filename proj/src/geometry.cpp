#include "se2hypo/geometry.hpp"

#include <cmath>

namespace se2hypo {

double normalize_angle(double theta) noexcept {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2π.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double angle_difference(double a, double b) noexcept {
  double d = normalize_angle(a - b);
  if (d > std::numbers::pi) d -= kTwoPi;
  return d;
}

GroupPoint compose(const GroupPoint& g, const GroupPoint& h) noexcept {
  const double c = std::cos(g.theta());
  const double s = std::sin(g.theta());
  return {c * h.xi1() - s * h.xi2() + g.xi1(), s * h.xi1() + c * h.xi2() + g.xi2(),
          g.theta() + h.theta()};
}

GroupPoint inverse(const GroupPoint& g) noexcept {
  const double c = std::cos(g.theta());
  const double s = std::sin(g.theta());
  // (R, ξ)^{-1} = (Rᵀ, −Rᵀ ξ)
  return {-(c * g.xi1() + s * g.xi2()), -(-s * g.xi1() + c * g.xi2()), -g.theta()};
}

const char* to_string(FieldId id) noexcept {
  switch (id) {
    case FieldId::X1: return "X1";
    case FieldId::X2: return "X2";
    case FieldId::X3: return "X3";
  }
  return "?";
}

std::array<double, 3> field_coefficients(FieldId id, const GroupPoint& p) noexcept {
  const double c = std::cos(p.theta());
  const double s = std::sin(p.theta());
  switch (id) {
    case FieldId::X1: return {c, s, 0.0};
    case FieldId::X2: return {0.0, 0.0, 1.0};
    case FieldId::X3: return {-s, c, 0.0};
  }
  return {0.0, 0.0, 0.0};
}

std::array<double, 2> frame_v(double theta) noexcept { return {std::cos(theta), std::sin(theta)}; }

std::array<double, 2> frame_v_perp(double theta) noexcept {
  return {-std::sin(theta), std::cos(theta)};
}

TestFunction apply_field(FieldId id, const TestFunction& f) {
  switch (id) {
    case FieldId::X1: return mul_cos(d_xi1(f)) + mul_sin(d_xi2(f));
    case FieldId::X2: return d_theta(f);
    case FieldId::X3: return mul_cos(d_xi2(f)) - mul_sin(d_xi1(f));
  }
  return {};
}

TestFunction commutator_defect(const TestFunction& f) {
  const TestFunction x2x1 = apply_field(FieldId::X2, apply_field(FieldId::X1, f));
  const TestFunction x1x2 = apply_field(FieldId::X1, apply_field(FieldId::X2, f));
  return x2x1 - x1x2 - apply_field(FieldId::X3, f);
}

double commutator_residual(const TestFunction& f, const GroupPoint& p) {
  const TestFunction x2x1 = apply_field(FieldId::X2, apply_field(FieldId::X1, f));
  const TestFunction x1x2 = apply_field(FieldId::X1, apply_field(FieldId::X2, f));
  const TestFunction x3 = apply_field(FieldId::X3, f);
  return std::abs(x2x1.evaluate(p) - x1x2.evaluate(p) - x3.evaluate(p));
}

}  // namespace se2hypo
