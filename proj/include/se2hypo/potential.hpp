#pragma once

// Confining potentials Φ on ℝ² and the quantities derived from the Gibbs factor e^{−Φ}:
// normalization Z, the (C3) growth constant and the weighted Poincaré constant Λ.

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace se2hypo {

struct PotentialValue {
  double value = 0.0;
  std::array<double, 2> gradient{0.0, 0.0};
  double laplacian = 0.0;
};

/// Axis-aligned rectangle [lo1, hi1] × [lo2, hi2].
struct Box {
  double lo1 = -1.0;
  double hi1 = 1.0;
  double lo2 = -1.0;
  double hi2 = 1.0;

  static Box symmetric(double half_width1, double half_width2) {
    return {-half_width1, half_width1, -half_width2, half_width2};
  }
  double area() const noexcept { return (hi1 - lo1) * (hi2 - lo2); }
  bool contains(double x1, double x2) const noexcept {
    return x1 >= lo1 && x1 <= hi1 && x2 >= lo2 && x2 <= hi2;
  }
};

/// Φ sampled on a uniform rectangular node grid (row-major: ξ² varies fastest).
struct TabulatedGrid {
  double x1_min = 0.0;
  double dx1 = 1.0;
  int n1 = 0;
  double x2_min = 0.0;
  double dx2 = 1.0;
  int n2 = 0;
  std::vector<double> values;  // values[i1 * n2 + i2]

  double x1_max() const noexcept { return x1_min + dx1 * (n1 - 1); }
  double x2_max() const noexcept { return x2_min + dx2 * (n2 - 1); }
  Box extent() const noexcept { return {x1_min, x1_max(), x2_min, x2_max()}; }
  double at(int i1, int i2) const { return values[static_cast<std::size_t>(i1) * n2 + i2]; }
};

/// Loads a table from CSV with header `xi1,xi2,phi`. Malformed input throws InputError
/// naming the offending line.
TabulatedGrid load_tabulated_csv(const std::filesystem::path& path);
TabulatedGrid parse_tabulated_csv(const std::string& text);

class PotentialSpec {
 public:
  struct Quadratic {
    double a1 = 1.0;
    double a2 = 1.0;
  };
  struct DoubleWell {
    double height = 1.0;
  };
  struct Flat {};
  struct Tabulated {
    std::shared_ptr<const TabulatedGrid> grid;
  };
  using Kind = std::variant<Quadratic, DoubleWell, Flat, Tabulated>;

  /// Φ = (a1 ξ1² + a2 ξ2²)/2, a1, a2 > 0.
  static PotentialSpec quadratic(double a1, double a2);
  /// Φ = h (|ξ|² − 1)² / 4, h > 0.
  static PotentialSpec double_well(double height);
  /// Φ ≡ 0 on all of ℝ². Not normalizable; for dynamics only.
  static PotentialSpec flat();
  static PotentialSpec tabulated(TabulatedGrid grid);

  const Kind& kind() const noexcept { return kind_; }
  bool is_quadratic() const noexcept { return std::holds_alternative<Quadratic>(kind_); }
  bool is_tabulated() const noexcept { return std::holds_alternative<Tabulated>(kind_); }
  bool is_normalizable() const noexcept { return !std::holds_alternative<Flat>(kind_); }

  /// Short stable identifier, e.g. "quadratic(1,1)".
  std::string id() const;

  /// Value, gradient and Laplacian. Built-in kinds are analytic. Tabulated kinds use
  /// bilinear interpolation for the value, and centered differences of the interpolant
  /// with step equal to the table spacing for derivatives (one-sided at the table edge).
  PotentialValue evaluate(double xi1, double xi2) const;
  double value(double xi1, double xi2) const { return evaluate(xi1, xi2).value; }

  /// A box outside which e^{−Φ} is negligible (Φ − min Φ ≥ 40 on the axes); the table
  /// extent for tabulated kinds.
  Box default_box() const;

 private:
  explicit PotentialSpec(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

/// Midpoint tensor rule: n1 × n2 equal cells covering the box.
struct MidpointRule {
  Box box;
  int n1 = 256;
  int n2 = 256;
};

/// Inclusive node grid: x_i = lo + i (hi − lo)/(n − 1).
struct NodeGrid {
  Box box;
  int n1 = 65;
  int n2 = 65;

  double h1() const noexcept { return (box.hi1 - box.lo1) / (n1 - 1); }
  double h2() const noexcept { return (box.hi2 - box.lo2) / (n2 - 1); }
  double x1(int i) const noexcept { return box.lo1 + i * h1(); }
  double x2(int j) const noexcept { return box.lo2 + j * h2(); }
};

inline constexpr double kNormalizationBoundaryTol = 1e-10;

/// Z = ∫ e^{−Φ} dξ by the midpoint rule. Throws BoxTooSmallError when the largest
/// boundary weight exceeds `boundary_tol` times the largest interior weight (skipped
/// for tabulated potentials, whose domain is the table itself).
double normalization(const PotentialSpec& spec, const MidpointRule& rule,
                     double boundary_tol = kNormalizationBoundaryTol);

/// Largest e^{−Φ} on the box boundary relative to the largest e^{−Φ} inside.
double boundary_weight_ratio(const PotentialSpec& spec, const Box& box, int samples_per_edge = 257);

/// Smallest c on the grid with |ΔΦ| ≤ c (1 + |∇Φ|).
double check_C3(const PotentialSpec& spec, const NodeGrid& grid);

/// Checks that Φ is bounded from below on the grid (always true analytically for built-ins).
bool check_C1_bounded_below(const PotentialSpec& spec, const NodeGrid& grid);

/// Discrete weighted Dirichlet form on a node grid:
///   E(f) = Σ_edges ω_e (f_i − f_j)²,  ω_e = e^{−Φ(edge midpoint)} / h²,
///   mass m_i = e^{−Φ(x_i)}.
/// Weights are stored relative to e^{−min Φ}.
class DirichletForm {
 public:
  DirichletForm(const PotentialSpec& spec, const NodeGrid& grid);

  int n1() const noexcept { return n1_; }
  int n2() const noexcept { return n2_; }
  const std::vector<double>& mass() const noexcept { return mass_; }
  /// Multiplies every weight (mass and edges) by c > 0.
  void scale_weights(double c);

  struct Edge {
    int i;
    int j;
    double weight;
  };
  const std::vector<Edge>& edges() const noexcept { return edges_; }

 private:
  int n1_;
  int n2_;
  std::vector<double> mass_;
  std::vector<Edge> edges_;
};

struct PoincareResult {
  double lambda = 0.0;
  /// |Λ(grid) − Λ(half-resolution grid)|; negative when refinement was skipped.
  double refinement_delta = -1.0;
  int iterations = 0;
};

/// Second-smallest generalized eigenvalue of E against the mass matrix.
PoincareResult poincare_constant(const DirichletForm& form);
PoincareResult poincare_constant(const PotentialSpec& spec, const NodeGrid& grid,
                                 bool with_refinement = true);

struct PotentialReport {
  double Z = 0.0;
  double lambda = 0.0;
  double lambda_refinement_delta = -1.0;
  double c3 = 0.0;
  bool c1_bounded_below = false;
};

}  // namespace se2hypo
