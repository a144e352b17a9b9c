#include "hypocert/model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>

using namespace hypocert;
using namespace hypocert::model;
using sphere::UnitVector;

namespace {

PhasePoint at(const Vec& x, const Vec& w) { return {x, UnitVector(w)}; }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// f(x, ω) = x₁ω₁ with full derivatives.
PhaseFunction x1_omega1(int d) {
  PhaseFunction f;
  f.value = [](const Vec& x, const Vec& w) { return x[0] * w[0]; };
  f.grad_x = [d](const Vec&, const Vec& w) { return Vec(w[0] * Vec::Unit(d, 0)); };
  f.grad_omega = [d](const Vec& x, const Vec&) { return Vec(x[0] * Vec::Unit(d, 0)); };
  f.hess_omega = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  return f;
}

// Quadrature of ∫ (Op f) g dμ on a box × angle grid.
double pair(const FiberModel& m, double (*op)(const FiberModel&, const PhaseFunction&, const PhasePoint&),
            const PhaseFunction& f, const PhaseFunction& g, const XQuadrature& xq, const sphere::SphereQuadrature& sq) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < xq.nodes.cols(); ++i)
    for (Eigen::Index k = 0; k < sq.size(); ++k) {
      const PhasePoint p{xq.nodes.col(i), UnitVector(sq.nodes.col(k))};
      s += xq.weights[i] * sq.weights[k] * op(m, f, p) * g.value(p.x, p.omega.coords());
    }
  return s;
}

}  // namespace

TEST_CASE("phi") {
  const FiberModel m(2, 1.0, quadratic({1.0, 1.0}));
  CHECK(phi(m, v2(1, 0), UnitVector(v2(0, 1))) == doctest::Approx(0.0));
  const FiberModel f(3, 1.0, free(3));
  CHECK(phi(f, Vec::Ones(3), UnitVector(Vec::Ones(3))) == 0.0);
  Vec g(3);
  g << 2, 0, 0;
  const FiberModel l(3, 1.0, linear(g));
  CHECK(phi(l, Vec::Zero(3), UnitVector::basis(3, 0)) == doctest::Approx(1.0));
}

TEST_CASE("apply_A, apply_S, apply_L on closed-form examples") {
  const FiberModel m2(2, 1.0, free(2));
  for (double a : {0.3, 1.9, 4.0}) {
    const auto p = at(v2(0.4, -1.0), v2(std::cos(a), std::sin(a)));
    CHECK(apply_A(m2, x_coordinate(2, 0), p) == doctest::Approx(-std::cos(a)).epsilon(1e-14));
    CHECK(apply_A(m2, constant(2, 3.0), p) == 0.0);
    CHECK(apply_L(m2, constant(2, 3.0), p) == 0.0);
    CHECK(apply_L(m2, x_coordinate(2, 0), p) == doctest::Approx(std::cos(a)).epsilon(1e-14));
  }
  const double gx = 1.7;
  const FiberModel lin(2, 1.0, linear(v2(gx, 0)));
  std::mt19937_64 eng(1);
  for (int k = 0; k < 10; ++k) {
    const Vec w = oracle::random_unit(eng, 2);
    const auto p = at(oracle::random_vec(eng, 2), w);
    CHECK(apply_A(lin, omega_coordinate(2, 0), p) == doctest::Approx(gx * (1 - w[0] * w[0])).epsilon(1e-12));
    CHECK(apply_L(lin, omega_coordinate(2, 0), p) ==
          doctest::Approx(-w[0] / 2 - gx * (1 - w[0] * w[0])).epsilon(1e-12));
  }
  const FiberModel m3(3, 1.0, free(3));
  const Vec w3 = oracle::random_unit(eng, 3);
  CHECK(apply_S(m3, omega_coordinate(3, 0), at(Vec::Zero(3), w3)) == doctest::Approx(-w3[0]).epsilon(1e-12));
  CHECK(apply_S(m3, x_coordinate(3, 1), at(Vec::Ones(3), w3)) == 0.0);
  const FiberModel s2(2, 2.0, free(2));
  const Vec x = v2(0.8, 0.1), w = oracle::random_unit(eng, 2);
  CHECK(apply_S(s2, x1_omega1(2), at(x, w)) == doctest::Approx(-2 * x[0] * w[0]).epsilon(1e-12));
}

TEST_CASE("L = S - A agrees with the direct form at random points") {
  std::mt19937_64 eng(2);
  for (int d : {2, 3, 4}) {
    std::vector<double> a(static_cast<std::size_t>(d));
    for (auto& v : a) v = 0.3 + std::uniform_real_distribution<double>(0, 2)(eng);
    const FiberModel m(d, 1.3, quadratic(a));
    const auto f = bump(Vec::Zero(d), 3.0, 1);
    const auto g = x1_omega1(d);
    for (int k = 0; k < 20; ++k) {
      const auto p = at(oracle::random_vec(eng, d), oracle::random_vec(eng, d));
      CHECK(std::abs(apply_L(m, f, p) - apply_L_direct(m, f, p)) <= 1e-10);
      CHECK(std::abs(apply_L(m, g, p) - apply_L_direct(m, g, p)) <= 1e-10);
    }
  }
}

TEST_CASE("phase-function derivatives match finite differences") {
  std::mt19937_64 eng(4);
  const auto f = bump(v2(0.2, -0.1), 2.0, 0);
  for (int k = 0; k < 10; ++k) {
    const Vec x = 0.6 * oracle::random_vec(eng, 2), w = oracle::random_vec(eng, 2);
    const Vec gx = oracle::fd_gradient([&](const Vec& y) { return f.value(y, w); }, x, 1e-4);
    const Vec gw = oracle::fd_gradient([&](const Vec& y) { return f.value(x, y); }, w, 1e-4);
    CHECK((f.grad_x(x, w) - gx).norm() <= 1e-6 * std::max(1.0, gx.norm()));
    CHECK((f.grad_omega(x, w) - gw).norm() <= 1e-6 * std::max(1.0, gw.norm()));
  }
}

TEST_CASE("analytic constants") {
  const auto c = analytic_constants(FiberModel(2, 1.0, quadratic({1.0, 1.0})));
  CHECK(c.lambda_m == doctest::Approx(0.5));
  CHECK(c.lambda_M == doctest::Approx(1.0));
  CHECK(c.n1 == doctest::Approx(0.25));
  auto pot = quadratic({1.5, 1.5, 1.5});
  CHECK(*pot.poincare == doctest::Approx(3.0));
  const auto c3 = analytic_constants(FiberModel(3, 2.0, pot));
  CHECK(c3.lambda_m == doctest::Approx(4.0));
  CHECK(c3.lambda_M == doctest::Approx(1.0));
  CHECK(c3.n1 == doctest::Approx(2.0));
  const auto scaled = analytic_constants(FiberModel(3, 2.0 * 1.7, pot));
  CHECK(scaled.lambda_m == doctest::Approx(c3.lambda_m * 1.7 * 1.7));
  CHECK(scaled.n1 == doctest::Approx(c3.n1 * 1.7 * 1.7));
  CHECK(scaled.lambda_M == doctest::Approx(c3.lambda_M));
  CHECK_THROWS_AS(analytic_constants(FiberModel(2, 1.0, torus(2, 1.0))), std::invalid_argument);
  CHECK_THROWS_AS(FiberModel(2, 0.0, free(2)), std::invalid_argument);
  CHECK_THROWS_AS(FiberModel(1, 1.0, free(1)), std::invalid_argument);
}

TEST_CASE("built-in potentials are normalized") {
  const auto q = quadratic({0.5, 2.0});
  CHECK(q.log_normalizer == doctest::Approx(0.5 * std::log(std::numbers::pi / 0.5) + 0.5 * std::log(std::numbers::pi / 2.0)));
  const auto xq = x_quadrature(q, -9, 9, 241);
  CHECK(xq.weights.sum() == doctest::Approx(1.0).epsilon(1e-10));
  // Torus: periodic midpoint sum of e^{−V} over [0, 2π)².
  const auto t = torus(2, 1.3);
  double s = 0.0;
  const int n = 128;
  const double h = 2 * std::numbers::pi / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += std::exp(-t.value(v2(i * h, j * h))) * h * h;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*torus(2, 0.0).poincare == 1.0);
  for (const auto& x : probe_grid(2, -5, 5, 11)) CHECK(q.value(x) >= q.value(Vec::Zero(2)));
}

TEST_CASE("check_C3") {
  const auto probes = probe_grid(2, -3, 3, 13);
  CHECK(check_C3(quadratic({1.0, 1.0}), probes) == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(check_C3(linear(v2(1, 2)), probes) == 0.0);
  Potential quartic;
  quartic.dim = 1;
  quartic.value = [](const Vec& x) { return std::pow(x[0], 4); };
  quartic.gradient = [](const Vec& x) { return Vec(Vec::Constant(1, 4 * std::pow(x[0], 3))); };
  quartic.hessian = [](const Vec& x) { return Mat(Mat::Constant(1, 1, 12 * x[0] * x[0])); };
  const auto p1 = probe_grid(1, -2, 2, 401);
  double ref = 0.0;
  for (const auto& x : p1) ref = std::max(ref, 12 * x[0] * x[0] / (1 + 4 * std::abs(std::pow(x[0], 3))));
  CHECK(check_C3(quartic, p1) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("check_A3") {
  const auto probes = probe_grid(3, -2, 2, 7);
  CHECK(check_A3(quadratic({0.5, 0.5, 0.5}), probes, 0.0).c2 == doctest::Approx(3.0));
  Vec g(3);
  g << 1, -1, 2;
  CHECK(check_A3(linear(g), probes, 0.0).c2 == doctest::Approx(0.0));
  CHECK(check_A3(quadratic({1.0}), probe_grid(1, -3, 3, 61), 0.25).c2 == doctest::Approx(2.0));
  CHECK_THROWS_AS(check_A3(quadratic({1.0}), probe_grid(1, -1, 1, 3), 0.5), std::invalid_argument);
}

TEST_CASE("invariance of mu under L") {
  const FiberModel m(2, 1.0, quadratic({1.0, 1.0}));
  const auto xq = x_quadrature(m.potential, -1.6, 1.6, 161);
  const auto sq = sphere::angle_grid(32);
  CHECK(std::abs(check_invariance(m, constant(2, 1.0), xq, sq)) <= 1e-14);
  CHECK(std::abs(check_invariance(m, bump(Vec::Zero(2), 1.5, 0), xq, sq)) <= 1e-6);
  CHECK(std::abs(check_invariance(m, bump(v2(0.1, -0.2), 1.2, -1), xq, sq)) <= 1e-6);
  CHECK_THROWS_AS(check_invariance(m, bump(Vec::Zero(2), 2.0, 0), xq, sq), std::invalid_argument);
}

TEST_CASE("A is antisymmetric and S symmetric nonpositive under quadrature") {
  const FiberModel m(2, 1.4, quadratic({0.7, 1.2}));
  const auto xq = x_quadrature(m.potential, -2.2, 2.2, 161);
  const auto sq = sphere::angle_grid(32);
  const auto f = bump(v2(0.2, 0.1), 1.8, 0);
  const auto g = bump(v2(-0.3, 0.2), 1.6, -1);
  const double af_g = pair(m, apply_A, f, g, xq, sq), f_ag = pair(m, apply_A, g, f, xq, sq);
  CHECK(std::abs(af_g + f_ag) <= 1e-6);
  CHECK(std::abs(af_g) > 1e-4);
  const double sf_g = pair(m, apply_S, f, g, xq, sq), f_sg = pair(m, apply_S, g, f, xq, sq);
  CHECK(std::abs(sf_g - f_sg) <= 1e-6);
  CHECK(pair(m, apply_S, f, f, xq, sq) <= 1e-12);
}
