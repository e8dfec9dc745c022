#include "se2hypo/eigensolvers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "se2hypo/errors.hpp"

namespace se2hypo {

Vector random_normal_vector(int dimension, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(dimension);
  for (int i = 0; i < dimension; ++i) v[i] = normal(rng);
  return v;
}

SubspaceIterationResult lowest_eigenvalue_deflated(const SparseMatrix& a, const Vector& null_vector,
                                                   int block_size, double tol, int max_iterations,
                                                   std::uint64_t seed) {
  const int n = static_cast<int>(a.rows());
  const Vector u = null_vector.normalized();
  const int p = std::min(block_size, n - 1);

  // Scale the shift by the smallest diagonal entry: steep weights inflate the others.
  double min_diag = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) min_diag = std::min(min_diag, a.coeff(i, i));
  const double shift = 1e-3 * std::max(min_diag, 1e-300);

  SparseMatrix shifted = a;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
  Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success) throw NumericalError("inverse iteration: factorization failed");

  auto deflate = [&](Eigen::MatrixXd& x) {
    for (int c = 0; c < x.cols(); ++c) x.col(c) -= u * u.dot(x.col(c));
  };

  Eigen::MatrixXd x(n, p);
  for (int c = 0; c < p; ++c) x.col(c) = random_normal_vector(n, seed + 101 * c);
  deflate(x);

  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd y = solver.solve(x);
    deflate(y);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    deflate(q);
    const Eigen::MatrixXd aq = a * q;
    const Eigen::MatrixXd h = q.transpose() * aq;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (h + h.transpose()));
    x = q * ritz.eigenvectors();
    const double lambda = ritz.eigenvalues()[0];
    const Vector v = x.col(0);
    const double residual = (a * v - lambda * v).norm() / std::max(std::abs(lambda), 1e-300);
    if (std::abs(lambda - previous) <= tol * std::abs(lambda) && residual < 1e-6) {
      return {lambda, it, residual};
    }
    previous = lambda;
  }
  throw NumericalError(
      fmt::format("inverse iteration did not converge after {} iterations", max_iterations));
}

ArnoldiResult shift_invert_arnoldi(const LinearMap& inverse_op, double shift, int dimension,
                                   const std::function<void(Vector&)>& deflate, int krylov_dim,
                                   std::uint64_t seed, double residual_tol) {
  const int m = std::min(krylov_dim, dimension - 1);
  if (m < 2) throw InputError("Arnoldi: dimension too small");

  Eigen::MatrixXd basis(dimension, m + 1);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);

  Vector v = random_normal_vector(dimension, seed);
  if (deflate) deflate(v);
  basis.col(0) = v.normalized();

  int steps = m;
  for (int j = 0; j < m; ++j) {
    Vector w = inverse_op(basis.col(j));
    if (deflate) deflate(w);
    // Two passes of classical Gram–Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      const Vector coeffs = basis.leftCols(j + 1).transpose() * w;
      w -= basis.leftCols(j + 1) * coeffs;
      hess.col(j).head(j + 1) += coeffs;
    }
    const double beta = w.norm();
    hess(j + 1, j) = beta;
    if (beta < 1e-14 * hess.col(j).head(j + 1).norm()) {
      steps = j + 1;  // invariant subspace found
      break;
    }
    basis.col(j + 1) = w / beta;
  }

  const Eigen::MatrixXd h = hess.topLeftCorner(steps, steps);
  Eigen::EigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("Arnoldi: Hessenberg eigensolve failed");
  const double tail = steps < m || steps == dimension ? 0.0 : hess(steps, steps - 1);

  ArnoldiResult result;
  result.krylov_dimension = steps;
  for (int i = 0; i < steps; ++i) {
    const std::complex<double> mu = es.eigenvalues()[i];
    if (std::abs(mu) == 0.0) continue;
    const Eigen::VectorXcd y = es.eigenvectors().col(i);
    const double res = tail * std::abs(y[steps - 1]) / (y.norm() * std::abs(mu));
    if (res <= residual_tol) {
      result.converged.push_back({shift + 1.0 / mu, res});
      result.max_residual = std::max(result.max_residual, res);
    }
  }
  std::sort(result.converged.begin(), result.converged.end(),
            [](const RitzPair& a, const RitzPair& b) {
              return a.eigenvalue.real() > b.eigenvalue.real();
            });
  return result;
}

NormEstimate operator_norm(const LinearMap& op, const LinearMap& adjoint,
                           const std::function<double(const Vector&, const Vector&)>& inner,
                           int dimension, int starts, std::uint64_t seed, int max_iterations,
                           double rel_tol, const std::function<void(Vector&)>& prepare) {
  NormEstimate best;
  for (int s = 0; s < starts; ++s) {
    Vector x = random_normal_vector(dimension, seed + 7919ULL * s);
    if (prepare) prepare(x);
    double nx = std::sqrt(inner(x, x));
    if (nx == 0.0) continue;
    x /= nx;
    double estimate = 0.0;
    bool converged = false;
    int it = 0;
    for (it = 1; it <= max_iterations; ++it) {
      const Vector tx = op(x);
      const double ntx = std::sqrt(inner(tx, tx));
      if (ntx == 0.0) {
        estimate = 0.0;
        converged = true;
        break;
      }
      Vector y = adjoint(tx);
      const double ny = std::sqrt(inner(y, y));
      if (std::abs(ntx - estimate) <= rel_tol * ntx) {
        estimate = ntx;
        converged = true;
        break;
      }
      estimate = ntx;
      if (ny == 0.0) {
        converged = true;
        break;
      }
      x = y / ny;
    }
    if (estimate >= best.norm) {
      best.norm = estimate;
      best.iterations = it;
      best.converged = converged;
    }
  }
  return best;
}

}  // namespace se2hypo
