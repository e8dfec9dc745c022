#pragma once

// SE(2) = ℝ² ⋊ S¹ in global coordinates (ξ¹, ξ², θ) and its invariant frame.

#include <array>
#include <numbers>

#include "se2hypo/test_function.hpp"

namespace se2hypo {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an angle to [0, 2π).
double normalize_angle(double theta) noexcept;

/// Shortest signed difference a − b on the circle, in (−π, π].
double angle_difference(double a, double b) noexcept;

/// A group element. θ is kept in [0, 2π).
class GroupPoint {
 public:
  constexpr GroupPoint() = default;
  GroupPoint(double xi1, double xi2, double theta) noexcept
      : xi1_(xi1), xi2_(xi2), theta_(normalize_angle(theta)) {}

  static GroupPoint identity() noexcept { return {}; }

  double xi1() const noexcept { return xi1_; }
  double xi2() const noexcept { return xi2_; }
  double theta() const noexcept { return theta_; }

  friend bool operator==(const GroupPoint&, const GroupPoint&) = default;

 private:
  double xi1_ = 0.0;
  double xi2_ = 0.0;
  double theta_ = 0.0;
};

/// Group law: the point whose homogeneous matrix is M(g)·M(h).
GroupPoint compose(const GroupPoint& g, const GroupPoint& h) noexcept;
GroupPoint inverse(const GroupPoint& g) noexcept;

enum class FieldId { X1, X2, X3 };

inline constexpr std::array<FieldId, 3> kAllFields = {FieldId::X1, FieldId::X2, FieldId::X3};

const char* to_string(FieldId id) noexcept;

/// Coefficients (c_ξ1, c_ξ2, c_θ) of the field at p:
/// X1 = cos θ ∂ξ1 + sin θ ∂ξ2, X2 = ∂θ, X3 = [X2, X1] = −sin θ ∂ξ1 + cos θ ∂ξ2.
std::array<double, 3> field_coefficients(FieldId id, const GroupPoint& p) noexcept;

/// v(θ) = (cos θ, sin θ) and v⊥(θ) = ∂θ v = (−sin θ, cos θ).
std::array<double, 2> frame_v(double theta) noexcept;
std::array<double, 2> frame_v_perp(double theta) noexcept;

/// Applies the vector field to a symbolic function.
TestFunction apply_field(FieldId id, const TestFunction& f);

/// |(X2 X1 f − X1 X2 f)(p) − (X3 f)(p)|.
double commutator_residual(const TestFunction& f, const GroupPoint& p);

/// The commutator defect X2 X1 f − X1 X2 f − X3 f as a symbolic function (zero in canonical form).
TestFunction commutator_defect(const TestFunction& f);

}  // namespace se2hypo
