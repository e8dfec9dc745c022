#include "se2hypo/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "se2hypo/eigensolvers.hpp"
#include "se2hypo/errors.hpp"

namespace se2hypo {

namespace {

void require_finite(double x1, double x2) {
  if (!std::isfinite(x1) || !std::isfinite(x2)) {
    throw InputError(fmt::format("potential: non-finite coordinates ({}, {})", x1, x2));
  }
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& field, int line) {
  const std::string t = trim(field);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw InputError(fmt::format("line {}: not a number: '{}'", line, t));
  }
  if (used != t.size() || !std::isfinite(v)) {
    throw InputError(fmt::format("line {}: not a finite number: '{}'", line, t));
  }
  return v;
}

// Bilinear interpolation of the table; coordinates are clamped to the table extent.
double table_value(const TabulatedGrid& g, double x1, double x2) {
  const double u = std::clamp((x1 - g.x1_min) / g.dx1, 0.0, double(g.n1 - 1));
  const double v = std::clamp((x2 - g.x2_min) / g.dx2, 0.0, double(g.n2 - 1));
  const int i = std::min(static_cast<int>(u), g.n1 - 2);
  const int j = std::min(static_cast<int>(v), g.n2 - 2);
  const double fu = u - i;
  const double fv = v - j;
  return (1 - fu) * (1 - fv) * g.at(i, j) + fu * (1 - fv) * g.at(i + 1, j) +
         (1 - fu) * fv * g.at(i, j + 1) + fu * fv * g.at(i + 1, j + 1);
}

}  // namespace

TabulatedGrid parse_tabulated_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<std::array<double, 3>> rows;
  std::vector<int> row_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!header_seen) {
      if (fields.size() != 3 || trim(fields[0]) != "xi1" || trim(fields[1]) != "xi2" ||
          trim(fields[2]) != "phi") {
        throw InputError(fmt::format("line {}: expected header 'xi1,xi2,phi'", line_no));
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) {
      throw InputError(fmt::format("line {}: expected 3 columns, found {}", line_no, fields.size()));
    }
    rows.push_back({parse_number(fields[0], line_no), parse_number(fields[1], line_no),
                    parse_number(fields[2], line_no)});
    row_lines.push_back(line_no);
  }
  if (!header_seen) throw InputError("line 1: empty table, expected header 'xi1,xi2,phi'");
  if (rows.size() < 4) throw InputError(fmt::format("line {}: need at least a 2x2 grid", line_no));

  // ξ² varies fastest: the first block of rows sharing ξ¹ fixes n2.
  std::size_t n2 = 1;
  while (n2 < rows.size() && rows[n2][0] == rows[0][0]) ++n2;
  if (n2 < 2) throw InputError(fmt::format("line {}: grid needs at least two xi2 values", row_lines[1]));
  if (rows.size() % n2 != 0) {
    throw InputError(fmt::format("line {}: row count {} is not a multiple of the row length {}",
                                 row_lines.back(), rows.size(), n2));
  }
  const std::size_t n1 = rows.size() / n2;
  if (n1 < 2) throw InputError(fmt::format("line {}: grid needs at least two xi1 values", row_lines.back()));

  TabulatedGrid g;
  g.n1 = static_cast<int>(n1);
  g.n2 = static_cast<int>(n2);
  g.x1_min = rows[0][0];
  g.x2_min = rows[0][1];
  g.dx1 = rows[n2][0] - rows[0][0];
  g.dx2 = rows[1][1] - rows[0][1];
  if (!(g.dx1 > 0.0) || !(g.dx2 > 0.0)) {
    throw InputError(fmt::format("line {}: coordinates must increase (xi1 outer, xi2 inner)",
                                 row_lines[g.dx2 > 0.0 ? n2 : 1]));
  }
  const double tol1 = 1e-9 * std::max(1.0, g.dx1 * n1);
  const double tol2 = 1e-9 * std::max(1.0, g.dx2 * n2);
  g.values.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = r / n2;
    const std::size_t j = r % n2;
    if (std::abs(rows[r][0] - (g.x1_min + i * g.dx1)) > tol1 ||
        std::abs(rows[r][1] - (g.x2_min + j * g.dx2)) > tol2) {
      throw InputError(fmt::format(
          "line {}: point ({}, {}) breaks the uniform row-major grid (expected ({}, {}))",
          row_lines[r], rows[r][0], rows[r][1], g.x1_min + i * g.dx1, g.x2_min + j * g.dx2));
    }
    g.values[r] = rows[r][2];
  }
  return g;
}

TabulatedGrid load_tabulated_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open potential table: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_tabulated_csv(buffer.str());
}

PotentialSpec PotentialSpec::quadratic(double a1, double a2) {
  if (!(a1 > 0.0) || !(a2 > 0.0) || !std::isfinite(a1) || !std::isfinite(a2)) {
    throw InputError(fmt::format("quadratic potential needs a1, a2 > 0 (got {}, {})", a1, a2));
  }
  return PotentialSpec(Quadratic{a1, a2});
}

PotentialSpec PotentialSpec::double_well(double height) {
  if (!(height > 0.0) || !std::isfinite(height)) {
    throw InputError(fmt::format("double-well potential needs height > 0 (got {})", height));
  }
  return PotentialSpec(DoubleWell{height});
}

PotentialSpec PotentialSpec::flat() { return PotentialSpec(Flat{}); }

PotentialSpec PotentialSpec::tabulated(TabulatedGrid grid) {
  if (grid.n1 < 2 || grid.n2 < 2 ||
      grid.values.size() != static_cast<std::size_t>(grid.n1) * grid.n2) {
    throw InputError("tabulated potential: inconsistent grid dimensions");
  }
  for (double v : grid.values) {
    if (!std::isfinite(v)) throw InputError("tabulated potential: non-finite value");
  }
  return PotentialSpec(Tabulated{std::make_shared<const TabulatedGrid>(std::move(grid))});
}

std::string PotentialSpec::id() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Quadratic>) {
          return fmt::format("quadratic({},{})", k.a1, k.a2);
        } else if constexpr (std::is_same_v<T, DoubleWell>) {
          return fmt::format("double_well({})", k.height);
        } else if constexpr (std::is_same_v<T, Flat>) {
          return "flat";
        } else {
          return fmt::format("tabulated({}x{})", k.grid->n1, k.grid->n2);
        }
      },
      kind_);
}

PotentialValue PotentialSpec::evaluate(double xi1, double xi2) const {
  require_finite(xi1, xi2);
  return std::visit(
      [&](const auto& k) -> PotentialValue {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Quadratic>) {
          return {0.5 * (k.a1 * xi1 * xi1 + k.a2 * xi2 * xi2), {k.a1 * xi1, k.a2 * xi2},
                  k.a1 + k.a2};
        } else if constexpr (std::is_same_v<T, DoubleWell>) {
          const double r2m1 = xi1 * xi1 + xi2 * xi2 - 1.0;
          const double h = k.height;
          return {0.25 * h * r2m1 * r2m1, {h * r2m1 * xi1, h * r2m1 * xi2},
                  h * (4.0 * (r2m1 + 1.0) - 2.0)};
        } else if constexpr (std::is_same_v<T, Flat>) {
          return {};
        } else {
          const TabulatedGrid& g = *k.grid;
          if (!g.extent().contains(xi1, xi2)) {
            throw InputError(fmt::format("point ({}, {}) outside the tabulated domain", xi1, xi2));
          }
          const double f0 = table_value(g, xi1, xi2);
          // Centered differences with step = spacing, shifted inward at the table edge.
          auto diff = [&](double x, double lo, double hi, double h, auto&& at) {
            double xm = x - h, xp = x + h;
            if (xm < lo) { xm = lo; xp = lo + 2 * h; }
            if (xp > hi) { xp = hi; xm = hi - 2 * h; }
            const double xc = 0.5 * (xm + xp);
            const double fm = at(xm), fp = at(xp), fc = at(xc);
            return std::pair{(fp - fm) / (xp - xm), (fp - 2 * fc + fm) / (h * h)};
          };
          const auto [g1, l1] = diff(xi1, g.x1_min, g.x1_max(), g.dx1,
                                     [&](double x) { return table_value(g, x, xi2); });
          const auto [g2, l2] = diff(xi2, g.x2_min, g.x2_max(), g.dx2,
                                     [&](double y) { return table_value(g, xi1, y); });
          return {f0, {g1, g2}, l1 + l2};
        }
      },
      kind_);
}

Box PotentialSpec::default_box() const {
  return std::visit(
      [](const auto& k) -> Box {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Quadratic>) {
          // a r²/2 = 40
          return Box::symmetric(std::sqrt(80.0 / k.a1), std::sqrt(80.0 / k.a2));
        } else if constexpr (std::is_same_v<T, DoubleWell>) {
          // h (r² − 1)²/4 = 40
          const double r = std::sqrt(1.0 + std::sqrt(160.0 / k.height));
          return Box::symmetric(r, r);
        } else if constexpr (std::is_same_v<T, Flat>) {
          return Box::symmetric(10.0, 10.0);
        } else {
          return k.grid->extent();
        }
      },
      kind_);
}

double boundary_weight_ratio(const PotentialSpec& spec, const Box& box, int samples_per_edge) {
  double phi_min_boundary = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples_per_edge; ++i) {
    const double t = double(i) / (samples_per_edge - 1);
    const double x1 = box.lo1 + t * (box.hi1 - box.lo1);
    const double x2 = box.lo2 + t * (box.hi2 - box.lo2);
    phi_min_boundary = std::min({phi_min_boundary, spec.value(x1, box.lo2), spec.value(x1, box.hi2),
                                 spec.value(box.lo1, x2), spec.value(box.hi1, x2)});
  }
  double phi_min = phi_min_boundary;
  const int n = samples_per_edge;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      phi_min = std::min(phi_min, spec.value(box.lo1 + (box.hi1 - box.lo1) * i / (n - 1),
                                             box.lo2 + (box.hi2 - box.lo2) * j / (n - 1)));
    }
  }
  return std::exp(-(phi_min_boundary - phi_min));
}

double normalization(const PotentialSpec& spec, const MidpointRule& rule, double boundary_tol) {
  if (rule.n1 < 1 || rule.n2 < 1) throw InputError("normalization: need at least one cell per axis");
  if (!spec.is_tabulated()) {
    const double ratio = boundary_weight_ratio(spec, rule.box);
    if (ratio > boundary_tol) {
      throw BoxTooSmallError(fmt::format(
          "normalization: boundary weight ratio {:.3e} exceeds {:.1e}; enlarge the box", ratio,
          boundary_tol));
    }
  } else {
    const Box ext = spec.default_box();
    const Box& b = rule.box;
    if (b.lo1 < ext.lo1 || b.hi1 > ext.hi1 || b.lo2 < ext.lo2 || b.hi2 > ext.hi2) {
      throw InputError("normalization: quadrature box exceeds the tabulated domain");
    }
  }
  const double h1 = (rule.box.hi1 - rule.box.lo1) / rule.n1;
  const double h2 = (rule.box.hi2 - rule.box.lo2) / rule.n2;
  std::vector<double> phi(static_cast<std::size_t>(rule.n1) * rule.n2);
  double phi_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < rule.n1; ++i) {
    for (int j = 0; j < rule.n2; ++j) {
      const double v = spec.value(rule.box.lo1 + (i + 0.5) * h1, rule.box.lo2 + (j + 0.5) * h2);
      phi[static_cast<std::size_t>(i) * rule.n2 + j] = v;
      phi_min = std::min(phi_min, v);
    }
  }
  double sum = 0.0;
  for (double v : phi) sum += std::exp(-(v - phi_min));
  return std::exp(-phi_min) * sum * h1 * h2;
}

double check_C3(const PotentialSpec& spec, const NodeGrid& grid) {
  double c = 0.0;
  for (int i = 0; i < grid.n1; ++i) {
    for (int j = 0; j < grid.n2; ++j) {
      const PotentialValue pv = spec.evaluate(grid.x1(i), grid.x2(j));
      const double gnorm = std::hypot(pv.gradient[0], pv.gradient[1]);
      c = std::max(c, std::abs(pv.laplacian) / (1.0 + gnorm));
    }
  }
  return c;
}

bool check_C1_bounded_below(const PotentialSpec& spec, const NodeGrid& grid) {
  if (!spec.is_tabulated()) return true;
  for (int i = 0; i < grid.n1; ++i) {
    for (int j = 0; j < grid.n2; ++j) {
      if (!std::isfinite(spec.value(grid.x1(i), grid.x2(j)))) return false;
    }
  }
  return true;
}

DirichletForm::DirichletForm(const PotentialSpec& spec, const NodeGrid& grid)
    : n1_(grid.n1), n2_(grid.n2) {
  if (grid.n1 < 3 || grid.n2 < 3) throw InputError("Dirichlet form: need at least 3 nodes per axis");
  const double h1 = grid.h1();
  const double h2 = grid.h2();
  std::vector<double> phi(static_cast<std::size_t>(n1_) * n2_);
  double phi_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n1_; ++i) {
    for (int j = 0; j < n2_; ++j) {
      phi[i * n2_ + j] = spec.value(grid.x1(i), grid.x2(j));
      phi_min = std::min(phi_min, phi[i * n2_ + j]);
    }
  }
  mass_.resize(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) mass_[k] = std::exp(-(phi[k] - phi_min));
  for (int i = 0; i < n1_; ++i) {
    for (int j = 0; j < n2_; ++j) {
      if (i + 1 < n1_) {
        const double mid = spec.value(grid.x1(i) + 0.5 * h1, grid.x2(j));
        edges_.push_back({i * n2_ + j, (i + 1) * n2_ + j, std::exp(-(mid - phi_min)) / (h1 * h1)});
      }
      if (j + 1 < n2_) {
        const double mid = spec.value(grid.x1(i), grid.x2(j) + 0.5 * h2);
        edges_.push_back({i * n2_ + j, i * n2_ + j + 1, std::exp(-(mid - phi_min)) / (h2 * h2)});
      }
    }
  }
}

void DirichletForm::scale_weights(double c) {
  if (!(c > 0.0)) throw InputError("Dirichlet form: weight scale must be positive");
  for (double& m : mass_) m *= c;
  for (Edge& e : edges_) e.weight *= c;
}

PoincareResult poincare_constant(const DirichletForm& form) {
  const int n = form.n1() * form.n2();
  const std::vector<double>& m = form.mass();
  for (double v : m) {
    if (!(v > 0.0)) throw NumericalError("Poincaré constant: zero Gibbs weight on the grid (box too large?)");
  }
  // Symmetric form M^{-1/2} K M^{-1/2}; its null vector is M^{1/2} 1.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(form.edges().size() * 4);
  std::vector<double> diag(n, 0.0);
  for (const auto& e : form.edges()) {
    const double s = e.weight / std::sqrt(m[e.i] * m[e.j]);
    trip.emplace_back(e.i, e.j, -s);
    trip.emplace_back(e.j, e.i, -s);
    diag[e.i] += e.weight / m[e.i];
    diag[e.j] += e.weight / m[e.j];
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
  SparseMatrix a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  Vector null_vec(n);
  for (int i = 0; i < n; ++i) null_vec[i] = std::sqrt(m[i]);
  const SubspaceIterationResult r = lowest_eigenvalue_deflated(a, null_vec);
  return {r.eigenvalue, -1.0, r.iterations};
}

PoincareResult poincare_constant(const PotentialSpec& spec, const NodeGrid& grid,
                                 bool with_refinement) {
  PoincareResult fine = poincare_constant(DirichletForm(spec, grid));
  if (with_refinement) {
    NodeGrid coarse = grid;
    coarse.n1 = (grid.n1 - 1) / 2 + 1;
    coarse.n2 = (grid.n2 - 1) / 2 + 1;
    if (coarse.n1 >= 3 && coarse.n2 >= 3) {
      fine.refinement_delta = std::abs(fine.lambda - poincare_constant(DirichletForm(spec, coarse)).lambda);
    }
  }
  return fine;
}

}  // namespace se2hypo
