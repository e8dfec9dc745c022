#pragma once

// Discretization of the generator on L²(μΦ): Fourier modes in θ (orthonormal real basis
// 1, √2 cos kθ, √2 sin kθ for k = 1..K) and a node grid in ξ.
//
// The ξ first-derivative is D = W^{-1/2} K W^{1/2} + diag(β) with K the skew centered
// difference and β = −(W^{-1/2} K W^{1/2}) 1. The matching discrete gradient ∇Φ_h = 2β
// enters the drift. With this pairing
//   D* = −D + diag(∇Φ_h)        (weighted adjoint),
//   D 1 = 0,
// so A_h is exactly antisymmetric, A_h 1 = 0, and Π_S A_h² Π_S on the k = 0 block equals
// G_h = ½(D1² + D2²) − ½(∂1Φ_h D1 + ∂2Φ_h D2).

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "se2hypo/eigensolvers.hpp"
#include "se2hypo/potential.hpp"

namespace se2hypo {

struct Discretization {
  double half_width1 = 6.0;
  double half_width2 = 6.0;
  int n1 = 32;
  int n2 = 32;
  int modes = 8;  // K; θ modes −K..K
  int max_dimension = 40000;
  double boundary_tol = 1e-6;

  int modes_per_node() const noexcept { return 2 * modes + 1; }
  int dimension() const noexcept { return n1 * n2 * modes_per_node(); }
  std::string id() const;
  /// Throws InputError on n < 8, K < 2, non-positive widths or cap violations.
  void validate() const;
};

/// Coefficient space with the discrete μΦ inner product. Node weights sum to 1.
class WeightedSpace {
 public:
  WeightedSpace(std::vector<double> node_weights, int modes_per_node);

  int nodes() const noexcept { return static_cast<int>(node_weights_.size()); }
  int modes_per_node() const noexcept { return modes_per_node_; }
  int dimension() const noexcept { return nodes() * modes_per_node_; }
  int index(int node, int mode) const noexcept { return node * modes_per_node_ + mode; }

  const std::vector<double>& node_weights() const noexcept { return node_weights_; }
  const Vector& dof_weights() const noexcept { return dof_weights_; }

  double inner(const Vector& f, const Vector& g) const;
  double norm(const Vector& f) const;
  /// (f, 1)_w: only the k = 0 coefficient carries the mean.
  double mean(const Vector& f) const;
  Vector constant(double c = 1.0) const;
  /// Weighted adjoint W^{-1} Mᵀ W.
  SparseMatrix adjoint(const SparseMatrix& m) const;

 private:
  std::vector<double> node_weights_;
  int modes_per_node_;
  Vector dof_weights_;
};

enum class Role { S, A, L, PiS, Pi, G, B };
const char* to_string(Role r) noexcept;

struct OperatorMetadata {
  double sigma = 1.0;
  std::string potential_id;
  std::string discretization_id;
};

class DiscreteOperator {
 public:
  DiscreteOperator() = default;
  DiscreteOperator(Role role, SparseMatrix matrix, std::shared_ptr<const WeightedSpace> space,
                   OperatorMetadata meta, bool subtract_mean = false);

  Role role() const noexcept { return role_; }
  const SparseMatrix& matrix() const noexcept { return matrix_; }
  const OperatorMetadata& metadata() const noexcept { return meta_; }
  /// Π carries the rank-one mean removal f ↦ f − (f,1)_w 1 on top of its sparse part.
  bool subtracts_mean() const noexcept { return subtract_mean_; }

  Vector apply(const Vector& f) const;
  Vector apply_adjoint(const Vector& f) const;

 private:
  Role role_ = Role::S;
  SparseMatrix matrix_;
  SparseMatrix adjoint_;
  std::shared_ptr<const WeightedSpace> space_;
  OperatorMetadata meta_;
  bool subtract_mean_ = false;
};

struct OperatorSet {
  Discretization disc;
  double sigma = 1.0;
  std::string potential_id;
  std::shared_ptr<const WeightedSpace> space;
  std::vector<double> x1;  // node coordinates per axis
  std::vector<double> x2;
  SparseMatrix d1;       // ξ-block first derivatives (nodes × nodes)
  SparseMatrix d2;
  SparseMatrix g_xi;     // G_h on the ξ-block
  Vector drift1;         // ∂1Φ_h at nodes
  Vector drift2;
  Eigen::MatrixXd mult_cos;    // θ-block multiplication by cos θ
  Eigen::MatrixXd mult_sin;
  Eigen::MatrixXd d_theta;
  Vector interior_mask;  // 1 on dofs at least two nodes from the box edge, else 0

  DiscreteOperator S, A, L, PiS, Pi, G;

  int dimension() const noexcept { return space->dimension(); }
  int node(int i1, int i2) const noexcept { return i1 * disc.n2 + i2; }
};

OperatorSet assemble(double sigma, const PotentialSpec& phi, const Discretization& d);

/// θ-block matrices on the orthonormal real Fourier basis, truncated at K.
Eigen::MatrixXd fourier_mult_cos(int modes);
Eigen::MatrixXd fourier_mult_sin(int modes);
Eigen::MatrixXd fourier_d_theta(int modes);

/// ‖M − sign·M*‖_F / ‖M‖_F with M* the weighted adjoint (sign +1: symmetry, −1: antisymmetry).
double weighted_symmetry_residual(const SparseMatrix& m, const WeightedSpace& space, int sign);

struct StructureReport {
  double s_symmetry = 0.0;
  double s_max_rayleigh = 0.0;       // max (S f, f)/‖f‖² over samples; ≤ 0
  double a_antisymmetry = 0.0;
  double pis_idempotence = 0.0;
  double pis_self_adjoint = 0.0;
  double pi_idempotence = 0.0;
  double pi_self_adjoint = 0.0;
  double quadratic_form_defect = 0.0;  // |(L f, f) − (S f, f)| / |(S f, f)|
  double constant_in_kernel = 0.0;     // ‖L 1‖ / ‖L‖_F-scale
};

StructureReport check_structure(const OperatorSet& ops, int samples, std::uint64_t seed);

struct ProjectionReport {
  double pi_a_pi_norm = 0.0;
  double a2_minus_g_relative = 0.0;  // interior-restricted
  bool pass = false;
};

ProjectionReport verify_projection_identities(const OperatorSet& ops, double tol_pi_a_pi = 1e-10,
                                              double tol_g = 1e-8, std::uint64_t seed = 11);

enum class GapMethod { Auto, Dense, Arnoldi, DecayFit };
const char* to_string(GapMethod m) noexcept;
GapMethod parse_gap_method(const std::string& s);

struct GapOptions {
  GapMethod method = GapMethod::Auto;
  int dense_limit = 1500;
  double shift = 0.1;
  int krylov_dim = 120;
  double arnoldi_tol = 1e-8;
  // decay-fit method
  int decay_samples = 30;
  double decay_t_final = 30.0;
  double decay_dt = 0.05;
  double min_r_squared = 0.99;
  std::uint64_t seed = 5;
};

struct GapResult {
  double gap = 0.0;
  std::complex<double> slowest{0.0, 0.0};  // eigenvalue attaining the gap (eigen methods)
  GapMethod method = GapMethod::Dense;
  int eigenvalues_used = 0;
  double max_residual = 0.0;
  double min_r_squared = 1.0;  // decay-fit only
  std::vector<std::complex<double>> leading;  // up to 12 eigenvalues nearest the imaginary axis
};

/// min −Re λ over the nonzero spectrum of L_h on mean-zero vectors.
GapResult spectral_gap(const OperatorSet& ops, const GapOptions& opts = {});

/// Gap of S alone on the truncated Fourier space: σ²/2.
double circle_gap(double sigma, int modes);

struct CoercivityReport {
  bool microscopic_holds = true;    // exact inequality on every sample
  double microscopic_min_ratio = 0.0;  // min −(Sf,f) / (σ²/2 ‖(I−Π_S)f‖²)
  double macroscopic_min_ratio = 0.0;  // min ‖AΠf‖² / ‖Πf‖²
  double lambda_h = 0.0;               // reference Poincaré constant
  bool macroscopic_holds = false;      // min ratio ≥ 0.95 Λ_h/2
};

CoercivityReport check_coercivity(const OperatorSet& ops, double lambda_h, int samples,
                                  std::uint64_t seed);

/// Discrete Poincaré constant of the spectral module: smallest nonzero eigenvalue of
/// D1*D1 + D2*D2 on the k = 0 block (equals 2‖AΠ·‖²/‖Π·‖² at its minimizer).
double discrete_poincare_constant(const OperatorSet& ops);

/// B = (I + (AΠ)*(AΠ))^{-1} (AΠ)*. I + (AΠ)*(AΠ) is the identity off the k = 0 block and
/// I + Q on it (Q the k = 0 block of A*A), so one sparse factorization of the ξ-block
/// system serves every application.
class BOperator {
 public:
  explicit BOperator(const OperatorSet& ops);
  Vector apply(const Vector& f) const;
  Vector apply_adjoint(const Vector& f) const;

 private:
  const OperatorSet* ops_;
  SparseMatrix a_adjoint_;
  Eigen::SparseLU<SparseMatrix> solver_;
};

struct EllipticReport {
  double sigma = 1.0;
  double c1_bound = 0.0;         // σ²/4
  double c1_observed = 0.0;      // max over random samples, Π_S denominator
  double c1_sup = 0.0;           // power-iteration estimate of the operator norm
  double c1_observed_pi = 0.0;   // Π denominator
  double c2_random = 0.0;
  double c2_sup = 0.0;
  double c2_estimate = 0.0;      // max(c2_random, c2_sup)
  double c2_observed_pi = 0.0;
  bool c1_pass = false;
};

EllipticReport elliptic_estimate_check(const OperatorSet& ops, int samples, std::uint64_t seed);

struct QuantityRow {
  std::string quantity;
  double value = 0.0;
  std::string resolution;
  std::uint64_t seed = 0;
};

/// CSV `quantity,value,resolution,seed`.
void write_quantity_csv(const std::filesystem::path& path, const std::vector<QuantityRow>& rows);
/// Coordinate text format: one `row col value` triplet per line.
void write_coordinate_matrix(const std::filesystem::path& path, const SparseMatrix& m);

}  // namespace se2hypo
