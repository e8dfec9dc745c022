#include "se2hypo/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "se2hypo/errors.hpp"

namespace se2hypo {

namespace {

using Triplet = Eigen::Triplet<double>;

int cos_index(int k) { return 2 * k - 1; }
int sin_index(int k) { return 2 * k; }

// Least-squares slope and R² of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return {slope, r2};
}

}  // namespace

std::string Discretization::id() const {
  return fmt::format("{}x{}x{}", n1, n2, modes_per_node());
}

void Discretization::validate() const {
  if (!(half_width1 > 0.0) || !(half_width2 > 0.0)) {
    throw InputError("discretization: half widths must be > 0");
  }
  if (n1 < 8 || n2 < 8) throw InputError("discretization: n1, n2 must be >= 8");
  if (modes < 2) throw InputError("discretization: modes must be >= 2");
  if (dimension() > max_dimension) {
    throw InputError(fmt::format("discretization: dimension {} exceeds the cap {}", dimension(),
                                 max_dimension));
  }
}

// ---------------------------------------------------------------------------
// WeightedSpace

WeightedSpace::WeightedSpace(std::vector<double> node_weights, int modes_per_node)
    : node_weights_(std::move(node_weights)), modes_per_node_(modes_per_node) {
  double total = 0.0;
  for (double w : node_weights_) {
    if (!(w > 0.0)) throw NumericalError("weighted space: weights must be strictly positive");
    total += w;
  }
  for (double& w : node_weights_) w /= total;
  dof_weights_.resize(dimension());
  for (int i = 0; i < nodes(); ++i) {
    dof_weights_.segment(static_cast<Eigen::Index>(i) * modes_per_node_, modes_per_node_)
        .setConstant(node_weights_[i]);
  }
}

double WeightedSpace::inner(const Vector& f, const Vector& g) const {
  return (dof_weights_.array() * f.array() * g.array()).sum();
}

double WeightedSpace::norm(const Vector& f) const { return std::sqrt(inner(f, f)); }

double WeightedSpace::mean(const Vector& f) const {
  double m = 0.0;
  for (int i = 0; i < nodes(); ++i) m += node_weights_[i] * f[index(i, 0)];
  return m;
}

Vector WeightedSpace::constant(double c) const {
  Vector v = Vector::Zero(dimension());
  for (int i = 0; i < nodes(); ++i) v[index(i, 0)] = c;
  return v;
}

SparseMatrix WeightedSpace::adjoint(const SparseMatrix& m) const {
  SparseMatrix t = m.transpose();
  for (int k = 0; k < t.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(t, k); it; ++it) {
      it.valueRef() *= dof_weights_[it.col()] / dof_weights_[it.row()];
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// DiscreteOperator

const char* to_string(Role r) noexcept {
  switch (r) {
    case Role::S: return "S";
    case Role::A: return "A";
    case Role::L: return "L";
    case Role::PiS: return "Pi_S";
    case Role::Pi: return "Pi";
    case Role::G: return "G";
    case Role::B: return "B";
  }
  return "?";
}

DiscreteOperator::DiscreteOperator(Role role, SparseMatrix matrix,
                                   std::shared_ptr<const WeightedSpace> space,
                                   OperatorMetadata meta, bool subtract_mean)
    : role_(role),
      matrix_(std::move(matrix)),
      space_(std::move(space)),
      meta_(std::move(meta)),
      subtract_mean_(subtract_mean) {
  adjoint_ = space_->adjoint(matrix_);
}

Vector DiscreteOperator::apply(const Vector& f) const {
  Vector out = matrix_ * f;
  if (subtract_mean_) out -= space_->constant(space_->mean(f));
  return out;
}

Vector DiscreteOperator::apply_adjoint(const Vector& f) const {
  // The mean-removal term f ↦ (f,1) 1 is self-adjoint.
  Vector out = adjoint_ * f;
  if (subtract_mean_) out -= space_->constant(space_->mean(f));
  return out;
}

// ---------------------------------------------------------------------------
// Fourier blocks

Eigen::MatrixXd fourier_mult_cos(int modes) {
  const int m = 2 * modes + 1;
  const double r = 1.0 / std::numbers::sqrt2;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  c(cos_index(1), 0) = r;
  for (int k = 1; k <= modes; ++k) {
    // √2 cos kθ · cos θ = (√2/2)(cos(k−1)θ + cos(k+1)θ)
    if (k == 1) c(0, cos_index(1)) = r;
    else c(cos_index(k - 1), cos_index(k)) = 0.5;
    if (k + 1 <= modes) c(cos_index(k + 1), cos_index(k)) = 0.5;
    // √2 sin kθ · cos θ = (√2/2)(sin(k+1)θ + sin(k−1)θ)
    if (k + 1 <= modes) c(sin_index(k + 1), sin_index(k)) = 0.5;
    if (k >= 2) c(sin_index(k - 1), sin_index(k)) = 0.5;
  }
  return c;
}

Eigen::MatrixXd fourier_mult_sin(int modes) {
  const int m = 2 * modes + 1;
  const double r = 1.0 / std::numbers::sqrt2;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  s(sin_index(1), 0) = r;
  for (int k = 1; k <= modes; ++k) {
    // √2 cos kθ · sin θ = (√2/2)(sin(k+1)θ − sin(k−1)θ)
    if (k + 1 <= modes) s(sin_index(k + 1), cos_index(k)) = 0.5;
    if (k >= 2) s(sin_index(k - 1), cos_index(k)) = -0.5;
    // √2 sin kθ · sin θ = (√2/2)(cos(k−1)θ − cos(k+1)θ)
    if (k == 1) s(0, sin_index(1)) = r;
    else s(cos_index(k - 1), sin_index(k)) = 0.5;
    if (k + 1 <= modes) s(cos_index(k + 1), sin_index(k)) = -0.5;
  }
  return s;
}

Eigen::MatrixXd fourier_d_theta(int modes) {
  const int m = 2 * modes + 1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k <= modes; ++k) {
    d(sin_index(k), cos_index(k)) = -k;
    d(cos_index(k), sin_index(k)) = k;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

// Kronecker product of a sparse ξ-block with a dense θ-block, appended as triplets.
void append_kron(std::vector<Triplet>& out, const SparseMatrix& xi, const Eigen::MatrixXd& th,
                 double scale = 1.0) {
  const int m = static_cast<int>(th.rows());
  for (int k = 0; k < xi.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(xi, k); it; ++it) {
      for (int c = 0; c < m; ++c) {
        for (int r = 0; r < m; ++r) {
          const double v = th(r, c);
          if (v != 0.0) {
            out.emplace_back(static_cast<int>(it.row()) * m + r, static_cast<int>(it.col()) * m + c,
                             scale * it.value() * v);
          }
        }
      }
    }
  }
}

SparseMatrix from_triplets(int n, const std::vector<Triplet>& t) {
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.prune(0.0);
  return m;
}

}  // namespace

OperatorSet assemble(double sigma, const PotentialSpec& phi, const Discretization& d) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InputError(fmt::format("sigma must be > 0 (got {})", sigma));
  }
  d.validate();
  const Box box = Box::symmetric(d.half_width1, d.half_width2);
  if (phi.is_tabulated()) {
    const Box ext = phi.default_box();
    if (box.lo1 < ext.lo1 || box.hi1 > ext.hi1 || box.lo2 < ext.lo2 || box.hi2 > ext.hi2) {
      throw InputError("discretization box exceeds the tabulated domain");
    }
  } else {
    const double ratio = boundary_weight_ratio(phi, box);
    if (ratio > d.boundary_tol) {
      throw BoxTooSmallError(fmt::format(
          "discretization: boundary weight ratio {:.3e} exceeds {:.1e}; enlarge the box", ratio,
          d.boundary_tol));
    }
  }

  OperatorSet ops;
  ops.disc = d;
  ops.sigma = sigma;
  ops.potential_id = phi.id();
  const int n1 = d.n1, n2 = d.n2, nodes = n1 * n2, m = d.modes_per_node();
  const NodeGrid grid{box, n1, n2};
  ops.x1.resize(n1);
  ops.x2.resize(n2);
  for (int i = 0; i < n1; ++i) ops.x1[i] = grid.x1(i);
  for (int j = 0; j < n2; ++j) ops.x2[j] = grid.x2(j);

  std::vector<double> potential(nodes);
  double phi_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      potential[i * n2 + j] = phi.value(ops.x1[i], ops.x2[j]);
      phi_min = std::min(phi_min, potential[i * n2 + j]);
    }
  }
  std::vector<double> weights(nodes);
  for (int k = 0; k < nodes; ++k) weights[k] = std::exp(-(potential[k] - phi_min));
  ops.space = std::make_shared<const WeightedSpace>(std::move(weights), m);

  // First derivatives along each axis.
  auto build_derivative = [&](int axis, Vector& drift) {
    const double h = axis == 0 ? grid.h1() : grid.h2();
    std::vector<Triplet> t;
    drift.resize(nodes);
    for (int i = 0; i < n1; ++i) {
      for (int j = 0; j < n2; ++j) {
        const int self = i * n2 + j;
        double beta = 0.0;
        auto neighbour = [&](int ii, int jj, double sgn) {
          if (ii < 0 || ii >= n1 || jj < 0 || jj >= n2) return;
          const int other = ii * n2 + jj;
          // √(w_other / w_self)
          const double ratio = std::exp(-0.5 * (potential[other] - potential[self]));
          t.emplace_back(self, other, sgn * ratio / (2.0 * h));
          beta -= sgn * ratio / (2.0 * h);
        };
        if (axis == 0) {
          neighbour(i + 1, j, 1.0);
          neighbour(i - 1, j, -1.0);
        } else {
          neighbour(i, j + 1, 1.0);
          neighbour(i, j - 1, -1.0);
        }
        t.emplace_back(self, self, beta);
        drift[self] = 2.0 * beta;
      }
    }
    return from_triplets(nodes, t);
  };
  ops.d1 = build_derivative(0, ops.drift1);
  ops.d2 = build_derivative(1, ops.drift2);

  SparseMatrix drift1_diag(nodes, nodes), drift2_diag(nodes, nodes);
  {
    std::vector<Triplet> t1, t2;
    for (int k = 0; k < nodes; ++k) {
      t1.emplace_back(k, k, ops.drift1[k]);
      t2.emplace_back(k, k, ops.drift2[k]);
    }
    drift1_diag.setFromTriplets(t1.begin(), t1.end());
    drift2_diag.setFromTriplets(t2.begin(), t2.end());
  }
  const SparseMatrix laplacian = SparseMatrix(ops.d1 * ops.d1) + SparseMatrix(ops.d2 * ops.d2);
  const SparseMatrix drift_term = SparseMatrix(drift1_diag * ops.d1) + SparseMatrix(drift2_diag * ops.d2);
  ops.g_xi = 0.5 * laplacian - 0.5 * drift_term;
  ops.g_xi.prune(0.0);

  ops.mult_cos = fourier_mult_cos(d.modes);
  ops.mult_sin = fourier_mult_sin(d.modes);
  ops.d_theta = fourier_d_theta(d.modes);

  const int dim = nodes * m;
  const OperatorMetadata meta{sigma, ops.potential_id, d.id()};

  // A = X1 − (∇Φ·v⊥) ∂θ = D1⊗cos + D2⊗sin + ∂1Φ_h ⊗ (sin·∂θ) − ∂2Φ_h ⊗ (cos·∂θ)
  std::vector<Triplet> ta;
  append_kron(ta, ops.d1, ops.mult_cos);
  append_kron(ta, ops.d2, ops.mult_sin);
  append_kron(ta, drift1_diag, ops.mult_sin * ops.d_theta);
  append_kron(ta, drift2_diag, ops.mult_cos * ops.d_theta, -1.0);
  SparseMatrix a = from_triplets(dim, ta);

  std::vector<Triplet> ts, tpis;
  const double half_s2 = 0.5 * sigma * sigma;
  for (int node = 0; node < nodes; ++node) {
    for (int k = 1; k <= d.modes; ++k) {
      ts.emplace_back(node * m + cos_index(k), node * m + cos_index(k), -half_s2 * k * k);
      ts.emplace_back(node * m + sin_index(k), node * m + sin_index(k), -half_s2 * k * k);
    }
    tpis.emplace_back(node * m, node * m, 1.0);
  }
  SparseMatrix s = from_triplets(dim, ts);
  SparseMatrix pis = from_triplets(dim, tpis);
  SparseMatrix l = s - a;

  Eigen::MatrixXd p0 = Eigen::MatrixXd::Zero(m, m);
  p0(0, 0) = 1.0;
  std::vector<Triplet> tg;
  append_kron(tg, ops.g_xi, p0);
  SparseMatrix g = from_triplets(dim, tg);

  ops.S = DiscreteOperator(Role::S, std::move(s), ops.space, meta);
  ops.A = DiscreteOperator(Role::A, std::move(a), ops.space, meta);
  ops.L = DiscreteOperator(Role::L, std::move(l), ops.space, meta);
  ops.PiS = DiscreteOperator(Role::PiS, pis, ops.space, meta);
  ops.Pi = DiscreteOperator(Role::Pi, pis, ops.space, meta, true);
  ops.G = DiscreteOperator(Role::G, std::move(g), ops.space, meta);

  ops.interior_mask = Vector::Zero(dim);
  for (int i = 2; i < n1 - 2; ++i) {
    for (int j = 2; j < n2 - 2; ++j) {
      ops.interior_mask.segment(static_cast<Eigen::Index>(i * n2 + j) * m, m).setOnes();
    }
  }
  return ops;
}

double weighted_symmetry_residual(const SparseMatrix& m, const WeightedSpace& space, int sign) {
  const SparseMatrix adj = space.adjoint(m);
  const double denom = m.norm();
  if (denom == 0.0) return 0.0;
  return SparseMatrix(m - sign * adj).norm() / denom;
}

// ---------------------------------------------------------------------------
// Structure checks

StructureReport check_structure(const OperatorSet& ops, int samples, std::uint64_t seed) {
  const WeightedSpace& sp = *ops.space;
  const int dim = ops.dimension();
  StructureReport r;
  r.s_symmetry = weighted_symmetry_residual(ops.S.matrix(), sp, +1);
  r.a_antisymmetry = weighted_symmetry_residual(ops.A.matrix(), sp, -1);
  r.s_max_rayleigh = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Vector f = random_normal_vector(dim, seed + 2 * s);
    const Vector g = random_normal_vector(dim, seed + 2 * s + 1);
    const double nf = sp.norm(f), ng = sp.norm(g);

    const Vector sf = ops.S.apply(f);
    r.s_max_rayleigh = std::max(r.s_max_rayleigh, sp.inner(sf, f) / (nf * nf));

    for (const DiscreteOperator* p : {&ops.PiS, &ops.Pi}) {
      const Vector pf = p->apply(f);
      const double idem = sp.norm(p->apply(pf) - pf) / nf;
      const double selfadj = std::abs(sp.inner(pf, g) - sp.inner(f, p->apply(g))) / (nf * ng);
      if (p == &ops.PiS) {
        r.pis_idempotence = std::max(r.pis_idempotence, idem);
        r.pis_self_adjoint = std::max(r.pis_self_adjoint, selfadj);
      } else {
        r.pi_idempotence = std::max(r.pi_idempotence, idem);
        r.pi_self_adjoint = std::max(r.pi_self_adjoint, selfadj);
      }
    }
    const double lff = sp.inner(ops.L.apply(f), f);
    const double sff = sp.inner(sf, f);
    r.quadratic_form_defect = std::max(r.quadratic_form_defect, std::abs(lff - sff) / std::abs(sff));
  }
  // L 1 = 0, measured against the row scale of |L|.
  const Vector one = sp.constant();
  const Vector l1 = ops.L.apply(one);
  SparseMatrix abs_l = ops.L.matrix().cwiseAbs();
  const Vector scale = abs_l * one.cwiseAbs();
  r.constant_in_kernel = l1.cwiseAbs().maxCoeff() / scale.maxCoeff();
  return r;
}

ProjectionReport verify_projection_identities(const OperatorSet& ops, double tol_pi_a_pi,
                                              double tol_g, std::uint64_t seed) {
  const WeightedSpace& sp = *ops.space;
  const int dim = ops.dimension();
  auto inner = [&](const Vector& a, const Vector& b) { return sp.inner(a, b); };
  const Vector& mask = ops.interior_mask;

  ProjectionReport r;
  {
    LinearMap op = [&](const Vector& x) { return ops.Pi.apply(ops.A.apply(ops.Pi.apply(x))); };
    LinearMap adj = [&](const Vector& y) {
      return ops.Pi.apply_adjoint(ops.A.apply_adjoint(ops.Pi.apply_adjoint(y)));
    };
    r.pi_a_pi_norm = operator_norm(op, adj, inner, dim, 20, seed).norm;
  }
  {
    LinearMap diff = [&](const Vector& x) {
      const Vector lhs = ops.Pi.apply(ops.A.apply(ops.A.apply(ops.Pi.apply(x))));
      return Vector((lhs - ops.G.apply(x)).cwiseProduct(mask));
    };
    LinearMap diff_adj = [&](const Vector& y) {
      const Vector ry = y.cwiseProduct(mask);
      const Vector lhs =
          ops.Pi.apply_adjoint(ops.A.apply_adjoint(ops.A.apply_adjoint(ops.Pi.apply_adjoint(ry))));
      return Vector(lhs - ops.G.apply_adjoint(ry));
    };
    LinearMap g = [&](const Vector& x) { return Vector(ops.G.apply(x).cwiseProduct(mask)); };
    LinearMap g_adj = [&](const Vector& y) { return ops.G.apply_adjoint(y.cwiseProduct(mask)); };
    const double num = operator_norm(diff, diff_adj, inner, dim, 20, seed + 1).norm;
    const double den = operator_norm(g, g_adj, inner, dim, 20, seed + 2).norm;
    r.a2_minus_g_relative = den > 0.0 ? num / den : num;
  }
  r.pass = r.pi_a_pi_norm <= tol_pi_a_pi && r.a2_minus_g_relative <= tol_g;
  return r;
}

// ---------------------------------------------------------------------------
// Spectral gap

const char* to_string(GapMethod m) noexcept {
  switch (m) {
    case GapMethod::Auto: return "auto";
    case GapMethod::Dense: return "dense";
    case GapMethod::Arnoldi: return "arnoldi";
    case GapMethod::DecayFit: return "decay-fit";
  }
  return "?";
}

GapMethod parse_gap_method(const std::string& s) {
  if (s == "auto") return GapMethod::Auto;
  if (s == "dense") return GapMethod::Dense;
  if (s == "arnoldi") return GapMethod::Arnoldi;
  if (s == "decay-fit") return GapMethod::DecayFit;
  throw InputError("unknown gap method '" + s + "' (expected auto, dense, arnoldi, decay-fit)");
}

namespace {

void fill_gap_from_eigenvalues(GapResult& r, std::vector<std::complex<double>> ev) {
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() > b.real(); });
  r.eigenvalues_used = static_cast<int>(ev.size());
  if (ev.empty()) throw NumericalError("spectral gap: no eigenvalues available");
  r.slowest = ev.front();
  r.gap = -ev.front().real();
  for (std::size_t i = 0; i < ev.size() && i < 12; ++i) r.leading.push_back(ev[i]);
}

GapResult dense_gap(const OperatorSet& ops) {
  const Eigen::MatrixXd l = Eigen::MatrixXd(ops.L.matrix());
  Eigen::EigenSolver<Eigen::MatrixXd> es(l, false);
  if (es.info() != Eigen::Success) throw NumericalError("spectral gap: dense eigensolve failed");
  std::vector<std::complex<double>> ev(es.eigenvalues().data(),
                                       es.eigenvalues().data() + es.eigenvalues().size());
  // Drop the eigenvalue of the constant mode.
  const auto zero = std::min_element(ev.begin(), ev.end(),
                                     [](auto a, auto b) { return std::abs(a) < std::abs(b); });
  ev.erase(zero);
  GapResult r;
  r.method = GapMethod::Dense;
  fill_gap_from_eigenvalues(r, std::move(ev));
  return r;
}

GapResult arnoldi_gap(const OperatorSet& ops, const GapOptions& opts) {
  const int dim = ops.dimension();
  SparseMatrix shifted = ops.L.matrix();
  for (int i = 0; i < dim; ++i) shifted.coeffRef(i, i) -= opts.shift;
  shifted.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success) throw NumericalError("spectral gap: LU of L − shift failed");
  const WeightedSpace& sp = *ops.space;
  LinearMap inv = [&](const Vector& x) { return Vector(lu.solve(x)); };
  auto deflate = [&](Vector& x) { x -= sp.constant(sp.mean(x)); };
  const ArnoldiResult ar =
      shift_invert_arnoldi(inv, opts.shift, dim, deflate, opts.krylov_dim, opts.seed, opts.arnoldi_tol);
  std::vector<std::complex<double>> ev;
  for (const RitzPair& p : ar.converged) {
    if (std::abs(p.eigenvalue) > 1e-9) ev.push_back(p.eigenvalue);
  }
  if (ev.empty()) {
    throw NumericalError(fmt::format("spectral gap: no Ritz value converged (Krylov dimension {})",
                                     ar.krylov_dimension));
  }
  GapResult r;
  r.method = GapMethod::Arnoldi;
  r.max_residual = ar.max_residual;
  fill_gap_from_eigenvalues(r, std::move(ev));
  return r;
}

GapResult decay_fit_gap(const OperatorSet& ops, const GapOptions& opts) {
  const int dim = ops.dimension();
  const WeightedSpace& sp = *ops.space;
  const double dt = opts.decay_dt;
  const int steps = static_cast<int>(std::lround(opts.decay_t_final / dt));
  SparseMatrix id(dim, dim);
  id.setIdentity();
  SparseMatrix lhs = id - 0.5 * dt * ops.L.matrix();
  SparseMatrix rhs = id + 0.5 * dt * ops.L.matrix();
  lhs.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) throw NumericalError("decay fit: factorization failed");

  const int ns = opts.decay_samples;
  Eigen::MatrixXd x(dim, ns);
  for (int s = 0; s < ns; ++s) {
    Vector f = random_normal_vector(dim, opts.seed + 31 * s);
    f -= sp.constant(sp.mean(f));
    x.col(s) = f / sp.norm(f);
  }
  std::vector<double> times;
  std::vector<std::vector<double>> logs(ns);
  for (int n = 1; n <= steps; ++n) {
    const Eigen::MatrixXd b = rhs * x;
    x = lu.solve(b);
    const double t = n * dt;
    if (t >= 0.5 * opts.decay_t_final) {
      times.push_back(t);
      for (int s = 0; s < ns; ++s) {
        Vector col = x.col(s);
        col -= sp.constant(sp.mean(col));
        x.col(s) = col;
        logs[s].push_back(std::log(sp.norm(col)));
      }
    }
  }
  GapResult r;
  r.method = GapMethod::DecayFit;
  r.gap = std::numeric_limits<double>::infinity();
  r.min_r_squared = 1.0;
  for (int s = 0; s < ns; ++s) {
    const auto [slope, r2] = linear_fit(times, logs[s]);
    r.min_r_squared = std::min(r.min_r_squared, r2);
    r.gap = std::min(r.gap, -slope);
  }
  r.eigenvalues_used = 0;
  r.slowest = {-r.gap, 0.0};
  if (r.min_r_squared < opts.min_r_squared) {
    std::string dump;
    for (std::size_t i = 0; i < times.size(); i += std::max<std::size_t>(1, times.size() / 8)) {
      dump += fmt::format(" (t={:.3g}, log|f|={:.6g})", times[i], logs[0][i]);
    }
    throw NumericalError(fmt::format("decay fit: R² = {:.4f} below {:.2f};{}", r.min_r_squared,
                                     opts.min_r_squared, dump));
  }
  return r;
}

}  // namespace

GapResult spectral_gap(const OperatorSet& ops, const GapOptions& opts) {
  GapMethod method = opts.method;
  if (method == GapMethod::Auto) {
    method = ops.dimension() <= opts.dense_limit ? GapMethod::Dense : GapMethod::Arnoldi;
  }
  switch (method) {
    case GapMethod::Dense: return dense_gap(ops);
    case GapMethod::Arnoldi: return arnoldi_gap(ops, opts);
    case GapMethod::DecayFit: return decay_fit_gap(ops, opts);
    case GapMethod::Auto: break;
  }
  throw InputError("spectral gap: unresolved method");
}

double circle_gap(double sigma, int modes) {
  const int m = 2 * modes + 1;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k <= modes; ++k) {
    s(cos_index(k), cos_index(k)) = -0.5 * sigma * sigma * k * k;
    s(sin_index(k), sin_index(k)) = -0.5 * sigma * sigma * k * k;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  // Eigenvalues ascending; the last is the zero of the constant mode.
  return -es.eigenvalues()[m - 2];
}

// ---------------------------------------------------------------------------
// Coercivity

double discrete_poincare_constant(const OperatorSet& ops) {
  const int nodes = ops.space->nodes();
  const auto& w = ops.space->node_weights();
  // E = W^{1/2} D W^{-1/2}; the weighted form D*D is similar to EᵀE.
  auto similar = [&](const SparseMatrix& d) {
    SparseMatrix e = d;
    for (int k = 0; k < e.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(e, k); it; ++it) {
        it.valueRef() *= std::sqrt(w[it.row()] / w[it.col()]);
      }
    }
    return e;
  };
  const SparseMatrix e1 = similar(ops.d1);
  const SparseMatrix e2 = similar(ops.d2);
  const SparseMatrix a = SparseMatrix(e1.transpose() * e1) + SparseMatrix(e2.transpose() * e2);
  Vector null_vec(nodes);
  for (int i = 0; i < nodes; ++i) null_vec[i] = std::sqrt(w[i]);
  return lowest_eigenvalue_deflated(a, null_vec).eigenvalue;
}

CoercivityReport check_coercivity(const OperatorSet& ops, double lambda_h, int samples,
                                  std::uint64_t seed) {
  const WeightedSpace& sp = *ops.space;
  const int dim = ops.dimension();
  const int m = sp.modes_per_node();
  const double c = 0.5 * ops.sigma * ops.sigma;
  const Vector neg_s_diag = -Vector(ops.S.matrix().diagonal());

  CoercivityReport r;
  r.lambda_h = lambda_h;
  r.microscopic_min_ratio = std::numeric_limits<double>::infinity();
  r.macroscopic_min_ratio = std::numeric_limits<double>::infinity();

  // Random vectors plus smooth ξ-modes, which sit near the bottom of the macroscopic spectrum.
  std::vector<Vector> probes;
  for (int s = 0; s < samples; ++s) probes.push_back(random_normal_vector(dim, seed + s));
  for (int p = 0; p < 4; ++p) {
    Vector f = Vector::Zero(dim);
    for (int i = 0; i < ops.disc.n1; ++i) {
      for (int j = 0; j < ops.disc.n2; ++j) {
        const double x = ops.x1[i], y = ops.x2[j];
        const double v = p == 0 ? x : p == 1 ? y : p == 2 ? x * y : x * x - y * y;
        f[sp.index(ops.node(i, j), 0)] = v;
      }
    }
    probes.push_back(f);
  }

  for (const Vector& f : probes) {
    // −(S f, f) ≥ (σ²/2)‖(I − Π_S) f‖², summed term by term in the same order so the
    // comparison is monotone under rounding: (c k²) f² ≥ c f² whenever k ≥ 1.
    double lhs = 0.0, rhs = 0.0;
    for (int node = 0; node < sp.nodes(); ++node) {
      const double w = sp.node_weights()[node];
      for (int mode = 1; mode < m; ++mode) {
        const double f2 = f[node * m + mode] * f[node * m + mode];
        lhs += w * (neg_s_diag[node * m + mode] * f2);
        rhs += w * (c * f2);
      }
    }
    if (lhs < rhs) r.microscopic_holds = false;
    if (rhs > 0.0) r.microscopic_min_ratio = std::min(r.microscopic_min_ratio, lhs / rhs);

    const Vector pf = ops.Pi.apply(f);
    const double npf = sp.inner(pf, pf);
    if (npf > 0.0) {
      const Vector apf = ops.A.apply(pf);
      r.macroscopic_min_ratio = std::min(r.macroscopic_min_ratio, sp.inner(apf, apf) / npf);
    }
  }
  r.macroscopic_holds = r.macroscopic_min_ratio >= 0.95 * lambda_h / 2.0;
  return r;
}

// ---------------------------------------------------------------------------
// Elliptic estimates

BOperator::BOperator(const OperatorSet& ops) : ops_(&ops) {
  const WeightedSpace& sp = *ops.space;
  const int nodes = sp.nodes();
  const int m = sp.modes_per_node();
  a_adjoint_ = sp.adjoint(ops.A.matrix());
  const SparseMatrix ata = a_adjoint_ * ops.A.matrix();
  std::vector<Triplet> t;
  for (int k = 0; k < ata.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(ata, k); it; ++it) {
      if (it.row() % m == 0 && it.col() % m == 0) {
        t.emplace_back(static_cast<int>(it.row() / m), static_cast<int>(it.col() / m), it.value());
      }
    }
  }
  for (int i = 0; i < nodes; ++i) t.emplace_back(i, i, 1.0);
  SparseMatrix system(nodes, nodes);
  system.setFromTriplets(t.begin(), t.end());
  system.makeCompressed();
  solver_.compute(system);
  if (solver_.info() != Eigen::Success) throw NumericalError("B operator: factorization failed");
}

namespace {

Vector mode_zero_block(const WeightedSpace& sp, const Vector& f) {
  Vector out(sp.nodes());
  for (int i = 0; i < sp.nodes(); ++i) out[i] = f[sp.index(i, 0)];
  return out;
}

void remove_node_mean(const WeightedSpace& sp, Vector& g) {
  double m = 0.0;
  for (int i = 0; i < sp.nodes(); ++i) m += sp.node_weights()[i] * g[i];
  g.array() -= m;
}

Vector embed_mode_zero(const WeightedSpace& sp, const Vector& g) {
  Vector out = Vector::Zero(sp.dimension());
  for (int i = 0; i < sp.nodes(); ++i) out[sp.index(i, 0)] = g[i];
  return out;
}

}  // namespace

Vector BOperator::apply(const Vector& f) const {
  const WeightedSpace& sp = *ops_->space;
  // (AΠ)* f = Π A* f
  Vector y = mode_zero_block(sp, a_adjoint_ * f);
  remove_node_mean(sp, y);
  const Vector x = solver_.solve(y);
  return embed_mode_zero(sp, x);
}

Vector BOperator::apply_adjoint(const Vector& f) const {
  const WeightedSpace& sp = *ops_->space;
  // B* = (AΠ)(I + (AΠ)*(AΠ))^{-1}
  Vector y = mode_zero_block(sp, f);
  remove_node_mean(sp, y);
  const Vector x = solver_.solve(y);
  return ops_->A.apply(embed_mode_zero(sp, x));
}

EllipticReport elliptic_estimate_check(const OperatorSet& ops, int samples, std::uint64_t seed) {
  const WeightedSpace& sp = *ops.space;
  const int dim = ops.dimension();
  const BOperator b(ops);
  EllipticReport r;
  r.sigma = ops.sigma;
  r.c1_bound = 0.25 * ops.sigma * ops.sigma;

  auto complement_s = [&](const Vector& f) { return Vector(f - ops.PiS.apply(f)); };
  auto complement_pi = [&](const Vector& f) { return Vector(f - ops.Pi.apply(f)); };

  for (int s = 0; s < samples; ++s) {
    const Vector f = random_normal_vector(dim, seed + s);
    const double den_s = sp.norm(complement_s(f));
    const double den_pi = sp.norm(complement_pi(f));
    const double bs = sp.norm(b.apply(ops.S.apply(f)));
    const double ba = sp.norm(b.apply(ops.A.apply(complement_pi(f))));
    if (den_s > 0.0) {
      r.c1_observed = std::max(r.c1_observed, bs / den_s);
      r.c2_random = std::max(r.c2_random, ba / den_s);
    }
    if (den_pi > 0.0) {
      r.c1_observed_pi = std::max(r.c1_observed_pi, bs / den_pi);
      r.c2_observed_pi = std::max(r.c2_observed_pi, ba / den_pi);
    }
  }

  auto inner = [&](const Vector& x, const Vector& y) { return sp.inner(x, y); };
  std::function<void(Vector&)> prepare = [&](Vector& x) { x = complement_s(x); };
  LinearMap t1 = [&](const Vector& x) { return b.apply(ops.S.apply(complement_s(x))); };
  LinearMap t1_adj = [&](const Vector& y) {
    return complement_s(ops.S.apply_adjoint(b.apply_adjoint(y)));
  };
  LinearMap t2 = [&](const Vector& x) {
    return b.apply(ops.A.apply(complement_pi(complement_s(x))));
  };
  LinearMap t2_adj = [&](const Vector& y) {
    const Vector z = ops.A.apply_adjoint(b.apply_adjoint(y));
    return complement_s(complement_pi(z));
  };
  r.c1_sup = operator_norm(t1, t1_adj, inner, dim, 4, seed + 100003, 200, 1e-10, prepare).norm;
  r.c2_sup = operator_norm(t2, t2_adj, inner, dim, 4, seed + 200003, 200, 1e-10, prepare).norm;
  r.c2_estimate = std::max(r.c2_random, r.c2_sup);
  r.c1_pass = std::max(r.c1_observed, r.c1_sup) <= r.c1_bound * (1.0 + 1e-6);
  return r;
}

// ---------------------------------------------------------------------------
// Output

void write_quantity_csv(const std::filesystem::path& path, const std::vector<QuantityRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "quantity,value,resolution,seed\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{:.17g},{},{}\n", r.quantity, r.value, r.resolution, r.seed);
  }
}

void write_coordinate_matrix(const std::filesystem::path& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out << fmt::format("{} {} {:.17g}\n", it.row(), it.col(), it.value());
    }
  }
}

}  // namespace se2hypo
