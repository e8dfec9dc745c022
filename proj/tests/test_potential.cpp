#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "doctest.h"
#include "se2hypo/errors.hpp"
#include "se2hypo/potential.hpp"

using namespace se2hypo;
using std::numbers::pi;

namespace {

std::string csv_table(int n1, int n2, double lo, double h, double (*f)(double, double)) {
  std::string s = "xi1,xi2,phi\n";
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const double x = lo + i * h, y = lo + j * h;
      s += fmt::format("{},{},{}\n", x, y, f(x, y));
    }
  }
  return s;
}

// Dense generalized eigenproblem E v = λ M v assembled from the form's edges and masses.
double dense_poincare(const DirichletForm& form) {
  const int n = form.n1() * form.n2();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  for (const auto& edge : form.edges()) {
    e(edge.i, edge.i) += edge.weight;
    e(edge.j, edge.j) += edge.weight;
    e(edge.i, edge.j) -= edge.weight;
    e(edge.j, edge.i) -= edge.weight;
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = form.mass()[i];
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(e, m);
  return es.eigenvalues()(1);
}

}  // namespace

TEST_SUITE("potential") {

TEST_CASE("evaluate built-in kinds") {
  const auto q = PotentialSpec::quadratic(1, 1).evaluate(1, 2);
  CHECK(q.value == 2.5);
  CHECK(q.gradient[0] == 1.0);
  CHECK(q.gradient[1] == 2.0);
  CHECK(q.laplacian == 2.0);
  const auto z = PotentialSpec::quadratic(1, 1).evaluate(0, 0);
  CHECK(z.value == 0.0);
  CHECK(z.laplacian == 2.0);

  // Φ = h(r² − 1)²/4: ∇Φ = h(r² − 1)ξ, ΔΦ = h(4r² − 2)
  const auto dw = PotentialSpec::double_well(1).evaluate(0, 0);
  CHECK(dw.value == 0.25);
  CHECK(dw.gradient[0] == 0.0);
  CHECK(dw.laplacian == -2.0);
  const double x = 0.7, y = -1.3, h = 2.5, r2 = x * x + y * y;
  const auto dw2 = PotentialSpec::double_well(h).evaluate(x, y);
  CHECK(dw2.value == doctest::Approx(h * (r2 - 1) * (r2 - 1) / 4));
  CHECK(dw2.gradient[0] == doctest::Approx(h * (r2 - 1) * x));
  CHECK(dw2.gradient[1] == doctest::Approx(h * (r2 - 1) * y));
  CHECK(dw2.laplacian == doctest::Approx(h * (4 * r2 - 2)));

  CHECK_THROWS_AS(PotentialSpec::quadratic(1, 1).evaluate(NAN, 0), InputError);
  CHECK_THROWS_AS(PotentialSpec::quadratic(0, 1), InputError);
  CHECK_THROWS_AS(PotentialSpec::double_well(-1), InputError);
}

TEST_CASE("normalization against Gaussian integrals") {
  const MidpointRule rule{Box::symmetric(8, 8), 256, 256};
  CHECK(normalization(PotentialSpec::quadratic(1, 1), rule) == doctest::Approx(2 * pi).epsilon(1e-6));
  CHECK(normalization(PotentialSpec::quadratic(4, 4), rule) == doctest::Approx(pi / 2).epsilon(1e-6));
  CHECK(normalization(PotentialSpec::quadratic(1, 3), rule) ==
        doctest::Approx(2 * pi / std::sqrt(3.0)).epsilon(1e-6));
}

TEST_CASE("double well normalization") {
  // ∫ e^{−h(r²−1)²/4} dξ = π √(π/h) (1 + erf(√h/2))
  for (double h : {1.0, 4.0}) {
    const double z = pi * std::sqrt(pi / h) * (1 + std::erf(std::sqrt(h) / 2));
    const MidpointRule rule{PotentialSpec::double_well(h).default_box(), 512, 512};
    CHECK(normalization(PotentialSpec::double_well(h), rule) == doctest::Approx(z).epsilon(1e-6));
  }
}

TEST_CASE("normalization rejects small boxes and flat potentials") {
  CHECK_THROWS_AS(normalization(PotentialSpec::quadratic(1, 1), {Box::symmetric(2, 2), 64, 64}),
                  BoxTooSmallError);
  CHECK_FALSE(PotentialSpec::flat().is_normalizable());
}

TEST_CASE("tabulated constant potential") {
  const auto spec = PotentialSpec::tabulated(
      parse_tabulated_csv(csv_table(5, 7, -1.0, 0.5, [](double, double) { return 3.0; })));
  const Box box = spec.default_box();
  CHECK(box.area() == doctest::Approx(2.0 * 3.0));
  CHECK(normalization(spec, {box, 40, 40}) == doctest::Approx(box.area() * std::exp(-3.0)));
  CHECK(check_C3(spec, {box, 9, 9}) == 0.0);
}

TEST_CASE("tabulated interpolation is exact for bilinear data") {
  auto f = [](double x, double y) { return 1.0 + 2.0 * x - y + 0.5 * x * y; };
  const auto spec = PotentialSpec::tabulated(parse_tabulated_csv(csv_table(6, 6, -2.0, 0.8, f)));
  for (auto [x, y] : {std::pair{0.1, 0.3}, {-1.7, 1.9}, {1.2, -0.4}}) {
    CHECK(spec.value(x, y) == doctest::Approx(f(x, y)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(spec.value(5.0, 0.0), InputError);
}

TEST_CASE("tabulated csv errors name the line") {
  auto message = [](const std::string& text) {
    try {
      parse_tabulated_csv(text);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("a,b,c\n").find("line 1") != std::string::npos);
  CHECK(message("xi1,xi2,phi\n0,0,1\n0,1,x\n1,0,1\n1,1,1\n").find("line 3") != std::string::npos);
  CHECK(message("xi1,xi2,phi\n0,0,1\n0,1\n").find("line 3") != std::string::npos);
  CHECK(message("xi1,xi2,phi\n0,0,1\n0,1,1\n1,0,nan\n1,1,1\n").find("line 4") != std::string::npos);
  CHECK_THROWS_AS(load_tabulated_csv("/nonexistent/table.csv"), InputError);
}

TEST_CASE("C3 constant") {
  // quadratic: sup |a1 + a2| / (1 + |∇Φ|) is attained at the origin
  const NodeGrid grid{Box::symmetric(3, 3), 31, 31};
  CHECK(check_C3(PotentialSpec::quadratic(1, 1), grid) == doctest::Approx(2.0));
  CHECK(check_C3(PotentialSpec::quadratic(1, 4), grid) == doctest::Approx(5.0));
  const double c = check_C3(PotentialSpec::double_well(1), grid);
  CHECK(std::isfinite(c));
  CHECK(c > 0.0);
  CHECK(check_C1_bounded_below(PotentialSpec::double_well(1), grid));
}

TEST_CASE("Poincare constant matches dense generalized eigensolve") {
  const NodeGrid grid{Box::symmetric(3, 3), 14, 14};
  for (const auto& spec : {PotentialSpec::quadratic(1, 1), PotentialSpec::quadratic(1, 3),
                           PotentialSpec::double_well(2)}) {
    const DirichletForm form(spec, grid);
    CHECK(poincare_constant(form).lambda == doctest::Approx(dense_poincare(form)).epsilon(1e-8));
  }
}

TEST_CASE("Poincare constant of Gaussians") {
  const NodeGrid grid{Box::symmetric(6, 6), 64, 64};
  const auto r = poincare_constant(PotentialSpec::quadratic(1, 1), grid);
  CHECK(r.lambda == doctest::Approx(1.0).epsilon(0.02));
  CHECK(r.refinement_delta >= 0.0);
  // the spectral gap of a product Gaussian is its smallest curvature
  CHECK(poincare_constant(PotentialSpec::quadratic(1, 4), grid, false).lambda ==
        doctest::Approx(1.0).epsilon(0.02));
  const NodeGrid fine{Box::symmetric(3, 3), 64, 64};
  CHECK(poincare_constant(PotentialSpec::quadratic(4, 4), fine, false).lambda ==
        doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("Poincare constant is invariant under weight scaling") {
  DirichletForm form(PotentialSpec::quadratic(1, 2), {Box::symmetric(5, 5), 24, 24});
  const double before = poincare_constant(form).lambda;
  form.scale_weights(37.5);
  CHECK(std::abs(poincare_constant(form).lambda - before) <= 1e-10 * before);
  CHECK_THROWS_AS(form.scale_weights(0.0), InputError);
}

}
