#pragma once

// Small collection of iterative eigen/norm routines shared by the potential and spectral modules.

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace se2hypo {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using LinearMap = std::function<Vector(const Vector&)>;

struct SubspaceIterationResult {
  double eigenvalue = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// Smallest eigenvalue of the symmetric PSD matrix `a` on the orthogonal complement of
/// `null_vector`, by shifted block inverse iteration with Rayleigh–Ritz.
/// Throws NumericalError after `max_iterations`.
SubspaceIterationResult lowest_eigenvalue_deflated(const SparseMatrix& a, const Vector& null_vector,
                                                   int block_size = 4, double tol = 1e-11,
                                                   int max_iterations = 500,
                                                   std::uint64_t seed = 7);

struct RitzPair {
  std::complex<double> eigenvalue;  // eigenvalue of the original operator
  double residual = 0.0;            // relative residual estimate
};

struct ArnoldiResult {
  std::vector<RitzPair> converged;  // sorted by decreasing real part
  int krylov_dimension = 0;
  double max_residual = 0.0;
};

/// Shift-invert Arnoldi on `op` ≈ (L − shift)^{-1}; Ritz values μ map back to λ = shift + 1/μ.
/// `deflate` is applied to every Krylov vector (e.g. removal of the constant mode).
ArnoldiResult shift_invert_arnoldi(const LinearMap& inverse_op, double shift, int dimension,
                                   const std::function<void(Vector&)>& deflate, int krylov_dim,
                                   std::uint64_t seed, double residual_tol = 1e-8);

struct NormEstimate {
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// ‖T‖ in the inner product `inner`, by power iteration on T*T from `starts` random vectors.
NormEstimate operator_norm(const LinearMap& op, const LinearMap& adjoint,
                           const std::function<double(const Vector&, const Vector&)>& inner,
                           int dimension, int starts, std::uint64_t seed, int max_iterations = 200,
                           double rel_tol = 1e-10,
                           const std::function<void(Vector&)>& prepare = nullptr);

/// Deterministic standard-normal vector.
Vector random_normal_vector(int dimension, std::uint64_t seed);

}  // namespace se2hypo
