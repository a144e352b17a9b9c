#include "hypocert/sampler.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace hypocert;
using namespace hypocert::sampler;
using sphere::UnitVector;

TEST_CASE("uniform sphere draws have the moments of nu") {
  for (int d : {2, 3}) {
    auto eng = make_stream(1, d);
    const int n = 1000000;
    std::vector<double> w1(n), w1sq(n), w12(n);
    for (int i = 0; i < n; ++i) {
      const auto w = sample_sphere_uniform(d, eng);
      CHECK(std::abs(w.coords().norm() - 1.0) <= 1e-12);
      w1[static_cast<std::size_t>(i)] = w[0];
      w1sq[static_cast<std::size_t>(i)] = w[0] * w[0];
      w12[static_cast<std::size_t>(i)] = w[0] * w[1];
    }
    const auto m1 = mean_se(w1), m2 = mean_se(w1sq), m12 = mean_se(w12);
    CHECK(std::abs(m1.value) <= 3 * m1.se);
    CHECK(std::abs(m2.value - oracle::second_moment(d, 0, 0)) <= 3 * m2.se);
    CHECK(std::abs(m12.value) <= 3 * m12.se);
  }
}

TEST_CASE("direct Gaussian equilibrium sampling") {
  auto eng = make_stream(2, 0);
  const auto s = sample_equilibrium_x(model::quadratic({1.0, 1.0}), 1000000, eng);
  CHECK(s.direct);
  std::vector<double> sq(static_cast<std::size_t>(s.x.cols()));
  for (Eigen::Index i = 0; i < s.x.cols(); ++i) sq[static_cast<std::size_t>(i)] = s.x(0, i) * s.x(0, i);
  const auto v = mean_se(sq);
  CHECK(std::abs(v.value - 0.5) <= 3 * v.se);

  const auto s1 = sample_equilibrium_x(model::quadratic({2.0}), 1000000, eng);
  for (Eigen::Index i = 0; i < s1.x.cols(); ++i) sq[static_cast<std::size_t>(i)] = s1.x(0, i) * s1.x(0, i);
  const auto v1 = mean_se(sq);
  CHECK(std::abs(v1.value - 0.25) <= 3 * v1.se);
}

TEST_CASE("MALA agrees with direct sampling") {
  const auto pot = model::quadratic({1.0, 0.5});
  auto e1 = make_stream(3, 0), e2 = make_stream(3, 1);
  const auto direct = sample_equilibrium_x(pot, 100000, e1);
  const auto mala = sample_equilibrium_x(pot, 100000, e2, {}, true);
  CHECK_FALSE(mala.direct);
  CHECK(mala.acceptance_ok);
  std::vector<double> a(direct.x.row(0).begin(), direct.x.row(0).end());
  std::vector<double> b(mala.x.row(0).begin(), mala.x.row(0).end());
  CHECK(ks_distance(a, b) <= 0.01);
}

TEST_CASE("MALA on the torus stays in the fundamental domain") {
  auto eng = make_stream(4, 0);
  const auto s = sample_equilibrium_x(model::torus(2, 1.0), 20000, eng);
  CHECK(s.acceptance_ok);
  CHECK(s.x.minCoeff() >= 0.0);
  CHECK(s.x.maxCoeff() < 2 * std::numbers::pi);
  // E[cos x₁] under e^{a cos x}/(2π I₀(a)) is I₁(a)/I₀(a).
  std::vector<double> c(static_cast<std::size_t>(s.x.cols()));
  for (Eigen::Index i = 0; i < s.x.cols(); ++i) c[static_cast<std::size_t>(i)] = std::cos(s.x(0, i));
  const double ref = std::cyl_bessel_i(1.0, 1.0) / std::cyl_bessel_i(0.0, 1.0);
  CHECK(std::abs(mean_se(c).value - ref) <= 0.02);
}

TEST_CASE("sde_step keeps unit speed and reduces to free transport at sigma = 0") {
  const model::FiberModel still(3, 1e-300, model::free(3));
  auto eng = make_stream(5, 0);
  model::PhasePoint p{Vec::Zero(3), UnitVector(Vec::Ones(3))};
  const Vec w0 = p.omega.coords();
  for (int k = 0; k < 100; ++k) p = sde_step(still, p, 0.01, eng);
  CHECK((p.omega.coords() - w0).norm() <= 1e-12);
  CHECK((p.x - w0).norm() <= 1e-12);

  const model::FiberModel m(3, 1.0, model::quadratic({1.0, 1.0, 1.0}));
  for (int k = 0; k < 1000; ++k) {
    p = sde_step(m, p, 0.01, eng);
    CHECK(std::abs(p.omega.coords().norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("sde_step_with matches the update formula") {
  const model::FiberModel m(2, 0.7, model::quadratic({1.0, 2.0}));
  Vec x(2), w(2), dw(2);
  x << 0.3, -0.4;
  w << 0.6, 0.8;
  dw << 0.05, -0.02;
  const double dt = 0.01;
  const auto p = sde_step_with(m, {x, UnitVector(w)}, dt, dw);
  const Mat proj = Mat::Identity(2, 2) - w * w.transpose();
  const Vec grad = m.potential.gradient(x);
  const Vec wt = w - dt * proj * grad + 0.7 * proj * dw;
  CHECK((p.x - (x + dt * w)).norm() <= 1e-15);
  CHECK((p.omega.coords() - wt / wt.norm()).norm() <= 1e-15);
  // Drift and noise are tangent, so the pre-normalization speed never drops below 1.
  CHECK(wt.norm() >= 1.0);
}

TEST_CASE("spherical Brownian autocorrelation decays at rate sigma^2 (d-1)/2") {
  const model::FiberModel m(3, 1.0, model::free(3));
  const int paths = 100000;
  Integrator integ(m, 1e-3);
  std::vector<double> c(paths);
  for (int j = 0; j < paths; ++j) {
    auto eng = make_stream(6, j);
    const auto w0 = sample_sphere_uniform(3, eng);
    Vec x = Vec::Zero(3), w = w0.coords();
    integ.advance(x.data(), w.data(), 1000, eng);
    c[static_cast<std::size_t>(j)] = w.dot(w0.coords());
  }
  const auto e = mean_se(c);
  CHECK(std::abs(e.value - std::exp(-1.0)) <= 3 * e.se);
}

TEST_CASE("halving dt moves the autocorrelation by less than 3 SE") {
  for (int d : {2, 3}) {
    const model::FiberModel m(d, 1.0, model::free(d));
    const int paths = 40000;
    std::vector<double> a(paths), b(paths);
    for (double dt : {1e-3, 5e-4}) {
      Integrator integ(m, dt);
      auto& out = dt == 1e-3 ? a : b;
      for (int j = 0; j < paths; ++j) {
        auto eng = make_stream(7, j, dt == 1e-3 ? 0 : 1);
        const auto w0 = sample_sphere_uniform(d, eng);
        Vec x = Vec::Zero(d), w = w0.coords();
        integ.advance(x.data(), w.data(), std::lround(1.0 / dt), eng);
        out[static_cast<std::size_t>(j)] = w.dot(w0.coords());
      }
    }
    const auto ea = mean_se(a), eb = mean_se(b);
    CHECK(std::abs(ea.value - eb.value) <= 3 * std::hypot(ea.se, eb.se));
  }
}

TEST_CASE("mu is stationary for the SDE") {
  const model::FiberModel m(2, 1.0, model::quadratic({1.0, 1.0}));
  auto eng = make_stream(8, 0);
  const int paths = 100000;
  const auto p0 = sample_equilibrium(m, paths, eng);
  Integrator integ(m, 1e-3);
  std::vector<double> x0(paths), x1(paths), w0(paths), w1(paths);
  for (int j = 0; j < paths; ++j) {
    auto e = make_stream(8, 1, j);
    Vec x = p0[static_cast<std::size_t>(j)].x, w = p0[static_cast<std::size_t>(j)].omega.coords();
    x0[static_cast<std::size_t>(j)] = x[0];
    w0[static_cast<std::size_t>(j)] = w[0];
    integ.advance(x.data(), w.data(), 1000, e);
    x1[static_cast<std::size_t>(j)] = x[0];
    w1[static_cast<std::size_t>(j)] = w[0];
  }
  CHECK(ks_distance(x0, x1) <= 0.02);
  CHECK(ks_distance(w0, w1) <= 0.02);
}

TEST_CASE("simulate: zero steps, determinism, ergodic variance") {
  const model::FiberModel m(2, 1.0, model::quadratic({1.0, 1.0}));
  const model::PhasePoint p0{Vec::Zero(2), UnitVector::basis(2, 0)};
  const auto none = simulate(m, p0, {1e-3, 0, 1, 1});
  REQUIRE(none.states.size() == 1);
  CHECK(none.times.front() == 0.0);

  const SdeConfig cfg{1e-2, 500, 42, 7};
  const auto a = simulate(m, p0, cfg, 3), b = simulate(m, p0, cfg, 3);
  std::ostringstream sa, sb;
  write_trajectory_csv(sa, a);
  write_trajectory_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("t,x_1,x_2,omega_1,omega_2\n", 0) == 0);
  for (std::size_t k = 1; k < a.times.size(); ++k) CHECK(a.times[k] > a.times[k - 1]);

  Integrator integ(m, 1e-3);
  auto eng = make_stream(9, 0);
  Vec x = Vec::Zero(2), w = Vec::Unit(2, 0);
  double s = 0.0;
  const long n = 10000000;
  for (long k = 0; k < n; ++k) {
    integ.step(x.data(), w.data(), eng);
    s += x[0] * x[0];
  }
  CHECK(s / n == doctest::Approx(0.5).epsilon(0.05));
  CHECK(step_size_warning(model::FiberModel(2, 2.0, model::free(2)), 0.05));
  CHECK_FALSE(step_size_warning(m, 1e-3));
}
