#include "hypocert/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hypocert::model {

Potential quadratic(std::vector<double> a) {
  if (a.empty()) throw std::invalid_argument("quadratic: need at least one coefficient");
  for (double ai : a)
    if (!(ai > 0.0)) throw std::invalid_argument("quadratic: coefficients must be positive");
  const int d = static_cast<int>(a.size());
  Vec av = Eigen::Map<const Vec>(a.data(), d);
  double logz = 0.0;
  for (double ai : a) logz += 0.5 * std::log(std::numbers::pi / ai);

  Potential p;
  p.family = "quadratic";
  p.params = a;
  p.dim = d;
  p.log_normalizer = logz;
  p.normalized = true;
  p.value = [av, logz](const Vec& x) { return (av.array() * x.array().square()).sum() + logz; };
  p.gradient = [av](const Vec& x) { return Vec(2.0 * av.cwiseProduct(x)); };
  p.hessian = [av](const Vec&) { return Mat((2.0 * av).asDiagonal()); };
  p.gradient_raw = [a](const double* x, double* g) {
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = 2.0 * a[i] * x[i];
  };
  p.poincare = 2.0 * av.minCoeff();
  p.hessian_growth_c = 2.0 * av.norm();
  return p;
}

Potential torus(int d, double a) {
  if (d < 1) throw std::invalid_argument("torus: dimension must be positive");
  if (a < 0.0) throw std::invalid_argument("torus: amplitude must be nonnegative");
  const double logz = d * (std::log(2.0 * std::numbers::pi) - a + std::log(std::cyl_bessel_i(0.0, a)));

  Potential p;
  p.family = "torus";
  p.params = {a};
  p.dim = d;
  p.log_normalizer = logz;
  p.normalized = true;
  p.periodic = true;
  p.value = [a, logz](const Vec& x) { return a * (1.0 - x.array().cos()).sum() + logz; };
  p.gradient = [a](const Vec& x) { return Vec(a * x.array().sin()); };
  p.hessian = [a](const Vec& x) { return Mat((a * x.array().cos()).matrix().asDiagonal()); };
  p.gradient_raw = [a, d](const double* x, double* g) {
    for (int i = 0; i < d; ++i) g[i] = a * std::sin(x[i]);
  };
  if (a == 0.0) p.poincare = 1.0;
  p.hessian_growth_c = a * std::sqrt(static_cast<double>(d));
  return p;
}

Potential free(int d) {
  Potential p;
  p.family = "free";
  p.dim = d;
  p.value = [](const Vec&) { return 0.0; };
  p.gradient = [d](const Vec&) { return Vec(Vec::Zero(d)); };
  p.hessian = [d](const Vec&) { return Mat(Mat::Zero(d, d)); };
  p.gradient_raw = [d](const double*, double* g) { std::fill(g, g + d, 0.0); };
  return p;
}

Potential linear(const Vec& g) {
  Potential p;
  p.family = "linear";
  p.dim = static_cast<int>(g.size());
  p.params.assign(g.data(), g.data() + g.size());
  p.value = [g](const Vec& x) { return g.dot(x); };
  p.gradient = [g](const Vec&) { return Vec(g); };
  p.hessian = [g](const Vec&) { return Mat(Mat::Zero(g.size(), g.size())); };
  return p;
}

FiberModel::FiberModel(int d_, double sigma_, Potential pot) : d(d_), sigma(sigma_), potential(std::move(pot)) {
  if (d < 2) throw std::invalid_argument("FiberModel: d must be at least 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("FiberModel: sigma must be positive");
  if (potential.dim != d) throw std::invalid_argument("FiberModel: potential dimension does not match d");
  if (!potential.gradient) throw std::invalid_argument("FiberModel: potential gradient required");
}

PhaseFunction constant(int d, double c) {
  PhaseFunction f;
  f.value = [c](const Vec&, const Vec&) { return c; };
  f.grad_x = [d](const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  f.grad_omega = [d](const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  f.hess_omega = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  return f;
}

PhaseFunction omega_coordinate(int d, int n) {
  PhaseFunction f;
  f.value = [n](const Vec&, const Vec& w) { return w[n]; };
  f.grad_x = [d](const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  f.grad_omega = [d, n](const Vec&, const Vec&) { return Vec(Vec::Unit(d, n)); };
  f.hess_omega = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  return f;
}

PhaseFunction x_coordinate(int d, int n) {
  PhaseFunction f;
  f.value = [n](const Vec& x, const Vec&) { return x[n]; };
  f.grad_x = [d, n](const Vec&, const Vec&) { return Vec(Vec::Unit(d, n)); };
  f.grad_omega = [d](const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  f.hess_omega = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  return f;
}

PhaseFunction bump(const Vec& center, double radius, int omega_index) {
  if (!(radius > 0.0)) throw std::invalid_argument("bump: radius must be positive");
  const int d = static_cast<int>(center.size());
  const double r2 = radius * radius;
  // b(x) = exp(−1/(1 − s)), s = |x − c|²/R²
  auto b = [center, r2](const Vec& x) {
    const double s = (x - center).squaredNorm() / r2;
    return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
  };
  auto db = [center, r2, d](const Vec& x) {
    const double s = (x - center).squaredNorm() / r2;
    if (s >= 1.0) return Vec(Vec::Zero(d));
    const double v = std::exp(-1.0 / (1.0 - s));
    return Vec(-v / ((1.0 - s) * (1.0 - s)) * 2.0 / r2 * (x - center));
  };
  auto om = [omega_index](const Vec& w) { return omega_index < 0 ? 1.0 : w[omega_index]; };

  PhaseFunction f;
  f.value = [b, om](const Vec& x, const Vec& w) { return b(x) * om(w); };
  f.grad_x = [db, om](const Vec& x, const Vec& w) { return Vec(db(x) * om(w)); };
  f.grad_omega = [b, d, omega_index](const Vec& x, const Vec&) {
    return omega_index < 0 ? Vec(Vec::Zero(d)) : Vec(b(x) * Vec::Unit(d, omega_index));
  };
  f.hess_omega = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  f.support_radius = radius;
  f.support_center = center;
  return f;
}

double phi(const FiberModel& m, const Vec& x, const sphere::UnitVector& w) {
  return m.potential.gradient(x).dot(w.coords()) / (m.d - 1);
}

namespace {

// Spherical gradient of Φ(x, ·).
Vec grad_s_phi(const FiberModel& m, const PhasePoint& p) {
  return sphere::project_tangent(p.omega, m.potential.gradient(p.x) / (m.d - 1));
}

sphere::AmbientFunction omega_slice(const PhaseFunction& f, const Vec& x) {
  return {[&f, x](const Vec& w) { return f.value(x, w); },
          [&f, x](const Vec& w) { return f.grad_omega(x, w); },
          [&f, x](const Vec& w) { return f.hess_omega(x, w); }};
}

}  // namespace

double apply_A(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p) {
  const Vec& w = p.omega.coords();
  return -w.dot(f.grad_x(p.x, w)) + grad_s_phi(m, p).dot(f.grad_omega(p.x, w));
}

double apply_S(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p) {
  if (!f.hess_omega) throw std::invalid_argument("apply_S: hessian in omega required");
  return 0.5 * m.sigma * m.sigma * sphere::laplace_beltrami(omega_slice(f, p.x), p.omega);
}

double apply_L(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p) {
  return apply_S(m, f, p) - apply_A(m, f, p);
}

double apply_L_direct(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p) {
  if (!f.hess_omega) throw std::invalid_argument("apply_L_direct: hessian in omega required");
  const Vec& w = p.omega.coords();
  const auto slice = omega_slice(f, p.x);
  const Vec gs = sphere::spherical_gradient(slice, p.omega);
  return w.dot(f.grad_x(p.x, w)) - grad_s_phi(m, p).dot(gs) +
         0.5 * m.sigma * m.sigma * sphere::laplace_beltrami_nested(slice, p.omega);
}

AnalyticConstants analytic_constants(const FiberModel& m) {
  if (!m.potential.poincare)
    throw std::invalid_argument("analytic_constants: potential has no Poincare constant (set model.poincare or use a grid)");
  const double s2 = m.sigma * m.sigma;
  return {0.5 * s2 * (m.d - 1), *m.potential.poincare / m.d, 0.25 * (m.d - 1) * s2};
}

std::vector<Vec> probe_grid(int d, double lo, double hi, int n) {
  if (d < 1 || n < 1) throw std::invalid_argument("probe_grid: bad size");
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  const double h = n > 1 ? (hi - lo) / (n - 1) : 0.0;
  for (;;) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = lo + h * idx[i];
    out.push_back(x);
    int k = 0;
    while (k < d && ++idx[k] == n) idx[k++] = 0;
    if (k == d) break;
  }
  return out;
}

double check_C3(const Potential& pot, const std::vector<Vec>& probes) {
  if (!pot.hessian) throw std::invalid_argument("check_C3: hessian evaluator required");
  double c = 0.0;
  for (const auto& x : probes) c = std::max(c, pot.hessian(x).norm() / (1.0 + pot.gradient(x).norm()));
  return c;
}

A3Report check_A3(const Potential& pot, const std::vector<Vec>& probes, double c3) {
  if (!pot.hessian) throw std::invalid_argument("check_A3: hessian evaluator required");
  if (!(c3 >= 0.0 && c3 < 0.5)) throw std::invalid_argument("check_A3: c3 must lie in [0, 1/2)");
  if (probes.empty()) throw std::invalid_argument("check_A3: empty probe set");
  double c2 = -std::numeric_limits<double>::infinity();
  for (const auto& x : probes) c2 = std::max(c2, pot.hessian(x).trace() - c3 * pot.gradient(x).squaredNorm());
  return {c3, c2};
}

XQuadrature x_quadrature(const Potential& pot, double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("x_quadrature: bad grid");
  const int d = pot.dim;
  const auto pts = probe_grid(d, lo, hi, n);
  const double h = (hi - lo) / (n - 1);
  XQuadrature q;
  q.lo = lo;
  q.hi = hi;
  q.nodes.resize(d, static_cast<Eigen::Index>(pts.size()));
  q.weights.resize(static_cast<Eigen::Index>(pts.size()));
  const double tol = 1e-12 * (hi - lo);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double w = std::exp(-pot.value(pts[k]));
    for (int i = 0; i < d; ++i) {
      w *= h;
      if (std::abs(pts[k][i] - lo) < tol || std::abs(pts[k][i] - hi) < tol) w *= 0.5;
    }
    q.nodes.col(static_cast<Eigen::Index>(k)) = pts[k];
    q.weights[static_cast<Eigen::Index>(k)] = w;
  }
  return q;
}

double check_invariance(const FiberModel& m, const PhaseFunction& f, const XQuadrature& xq,
                        const sphere::SphereQuadrature& sq) {
  if (sq.dim() != m.d || xq.nodes.rows() != m.d)
    throw std::invalid_argument("check_invariance: dimension mismatch");
  if (f.support_radius) {
    for (int i = 0; i < m.d; ++i) {
      if (f.support_center[i] - *f.support_radius < xq.lo || f.support_center[i] + *f.support_radius > xq.hi)
        throw std::invalid_argument("check_invariance: support of f exceeds the quadrature domain");
    }
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < xq.nodes.cols(); ++i) {
    const Vec x = xq.nodes.col(i);
    double inner = 0.0;
    for (Eigen::Index k = 0; k < sq.size(); ++k)
      inner += sq.weights[k] * apply_L(m, f, {x, sphere::UnitVector(sq.nodes.col(k))});
    total += xq.weights[i] * inner;
  }
  return total;
}

}  // namespace hypocert::model
