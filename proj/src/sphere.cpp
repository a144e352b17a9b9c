#include "hypocert/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace hypocert::sphere {

UnitVector::UnitVector(Vec coords) : v_(std::move(coords)) {
  if (v_.size() < 2) throw std::invalid_argument("UnitVector: dimension must be at least 2");
  const double n = v_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("UnitVector: zero or non-finite vector");
  v_ /= n;
}

UnitVector UnitVector::from_angle(double alpha) {
  return UnitVector(Vec{{std::cos(alpha), std::sin(alpha)}});
}

UnitVector UnitVector::basis(int d, int n) {
  if (n < 0 || n >= d) throw std::out_of_range("UnitVector::basis: index out of range");
  return UnitVector(Vec::Unit(d, n));
}

Polynomial& Polynomial::add(double coef, std::vector<int> exps) {
  if (static_cast<int>(exps.size()) != d_) throw std::invalid_argument("Polynomial: exponent size mismatch");
  for (int e : exps)
    if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
  terms_.push_back({coef, std::move(exps)});
  return *this;
}

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

// Monomial with exponent e_i lowered by `di` in coordinate i (and `dj` in j).
double mono(const std::vector<int>& e, const Vec& x, int i, int di, int j, int dj) {
  double c = 1.0;
  std::vector<int> ee = e;
  if (i >= 0) {
    for (int k = 0; k < di; ++k) c *= ee[i]--;
  }
  if (j >= 0) {
    for (int k = 0; k < dj; ++k) c *= ee[j]--;
  }
  if (c == 0.0) return 0.0;
  for (std::size_t k = 0; k < ee.size(); ++k) c *= ipow(x[static_cast<Eigen::Index>(k)], ee[k]);
  return c;
}

}  // namespace

double Polynomial::value(const Vec& x) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.coef * mono(t.exps, x, -1, 0, -1, 0);
  return s;
}

Vec Polynomial::gradient(const Vec& x) const {
  Vec g = Vec::Zero(d_);
  for (const auto& t : terms_)
    for (int i = 0; i < d_; ++i) g[i] += t.coef * mono(t.exps, x, i, 1, -1, 0);
  return g;
}

Mat Polynomial::hessian(const Vec& x) const {
  Mat h = Mat::Zero(d_, d_);
  for (const auto& t : terms_)
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        h(i, j) += t.coef * (i == j ? mono(t.exps, x, i, 2, -1, 0) : mono(t.exps, x, i, 1, j, 1));
  return h;
}

int Polynomial::degree() const {
  int deg = 0;
  for (const auto& t : terms_) {
    int s = 0;
    for (int e : t.exps) s += e;
    deg = std::max(deg, s);
  }
  return deg;
}

AmbientFunction Polynomial::function() const {
  auto self = *this;
  return {[self](const Vec& x) { return self.value(x); },
          [self](const Vec& x) { return self.gradient(x); },
          [self](const Vec& x) { return self.hessian(x); }};
}

AmbientFunction linear_function(const Vec& z) {
  return {[z](const Vec& x) { return z.dot(x); }, [z](const Vec&) { return Vec(z); },
          [z](const Vec&) { return Mat(Mat::Zero(z.size(), z.size())); }};
}

AmbientFunction constant_function(int d, double c) {
  return {[c](const Vec&) { return c; }, [d](const Vec&) { return Vec(Vec::Zero(d)); },
          [d](const Vec&) { return Mat(Mat::Zero(d, d)); }};
}

SphereQuadrature angle_grid(int n) {
  if (n < 3) throw std::invalid_argument("angle_grid: need at least 3 nodes");
  SphereQuadrature q;
  q.kind = QuadKind::AngleGrid;
  q.nodes.resize(2, n);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    q.nodes(0, k) = std::cos(a);
    q.nodes(1, k) = std::sin(a);
  }
  q.weights = Vec::Constant(n, 1.0 / n);
  return q;
}

Vec random_unit_vector(int d, Engine& eng) {
  std::normal_distribution<double> nd;
  Vec v(d);
  for (;;) {
    for (int i = 0; i < d; ++i) v[i] = nd(eng);
    const double n = v.norm();
    if (n > 1e-300) return v / n;
  }
}

SphereQuadrature monte_carlo(int d, Eigen::Index n, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("monte_carlo: d must be at least 2");
  if (n < 2) throw std::invalid_argument("monte_carlo: need at least 2 nodes");
  SphereQuadrature q;
  q.kind = QuadKind::MonteCarlo;
  q.nodes.resize(d, n);
  auto eng = make_stream(seed, 0x5FE4E);
  for (Eigen::Index k = 0; k < n; ++k) q.nodes.col(k) = random_unit_vector(d, eng);
  q.weights = Vec::Constant(n, 1.0 / static_cast<double>(n));
  return q;
}

Estimate integrate(const SphereQuadrature& q, const std::function<double(const Vec&)>& f) {
  const Eigen::Index n = q.size();
  Vec vals(n);
  for (Eigen::Index k = 0; k < n; ++k) vals[k] = f(q.nodes.col(k));
  const double mean = q.weights.dot(vals);
  if (q.kind == QuadKind::AngleGrid) return {mean, 0.0};
  return mean_se(std::span<const double>(vals.data(), static_cast<std::size_t>(n)));
}

Vec project_tangent(const UnitVector& w, const Vec& v) {
  if (v.size() != w.dim()) throw std::invalid_argument("project_tangent: dimension mismatch");
  const Vec& o = w.coords();
  return v - o * o.dot(v);
}

Vec spherical_gradient(const AmbientFunction& f, const UnitVector& w) {
  return project_tangent(w, f.gradient(w.coords()));
}

double laplace_beltrami(const AmbientFunction& f, const UnitVector& w) {
  if (!f.hessian) throw std::invalid_argument("laplace_beltrami: hessian evaluator required");
  const Vec& o = w.coords();
  const Mat h = f.hessian(o);
  const Vec g = f.gradient(o);
  return h.trace() - o.dot(h * o) - (w.dim() - 1) * o.dot(g);
}

double laplace_beltrami_nested(const AmbientFunction& f, const UnitVector& w) {
  if (!f.hessian) throw std::invalid_argument("laplace_beltrami_nested: hessian evaluator required");
  const Vec& o = w.coords();
  const int d = w.dim();
  const Mat h = f.hessian(o);
  const Vec g = f.gradient(o);
  const double og = o.dot(g);
  const Vec ho = h * o;
  double total = 0.0;
  for (int n = 0; n < d; ++n) {
    // ∂ⱼ gₙ for gₙ = ∂ₙf − ωₙ(ω·∇f)
    Vec dg(d);
    for (int j = 0; j < d; ++j)
      dg[j] = h(n, j) - (n == j ? og : 0.0) - o[n] * (g[j] + ho[j]);
    Vec tangent = -o[n] * o;
    tangent[n] += 1.0;
    total += tangent.dot(dg);
  }
  return total;
}

Estimate sphere_moment_linear(const Vec& z, const SphereQuadrature& q) {
  if (z.size() != q.dim()) throw std::invalid_argument("sphere_moment_linear: dimension mismatch");
  return integrate(q, [&](const Vec& w) { return z.dot(w); });
}

Estimate sphere_moment_quadratic(const Mat& b, const SphereQuadrature& q) {
  if (b.rows() != q.dim() || b.cols() != q.dim())
    throw std::invalid_argument("sphere_moment_quadratic: dimension mismatch");
  return integrate(q, [&](const Vec& w) { return w.dot(b * w); });
}

Estimate sphere_moment_bilinear(const Vec& z1, const Vec& z2, const SphereQuadrature& q) {
  if (z1.size() != q.dim() || z2.size() != q.dim())
    throw std::invalid_argument("sphere_moment_bilinear: dimension mismatch");
  return integrate(q, [&](const Vec& w) { return z1.dot(w) * z2.dot(w); });
}

namespace {

IdentityCheck judge(std::string name, const Estimate& e, double exact, double exact_tol, bool mc) {
  IdentityCheck c;
  c.name = std::move(name);
  c.violation = std::abs(e.value - exact);
  c.tolerance = mc ? std::max(3.0 * e.se, 1e-14) : exact_tol;
  c.passed = c.violation <= c.tolerance;
  return c;
}

}  // namespace

std::vector<IdentityCheck> identity_suite(const SphereQuadrature& q, Fault fault, double exact_tol) {
  const int d = q.dim();
  const bool mc = q.kind == QuadKind::MonteCarlo;
  const double sign = fault == Fault::SignFlip ? -1.0 : 1.0;
  auto lb = [&](const AmbientFunction& f, const UnitVector& w) { return sign * laplace_beltrami(f, w); };

  std::vector<IdentityCheck> out;

  Vec z(d), z2(d);
  for (int i = 0; i < d; ++i) {
    z[i] = 1.0 + i;
    z2[i] = (i % 2 == 0 ? 1.0 : -0.5) * (i + 1);
  }
  Mat b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b(i, j) = 0.3 * (i + 1) - 0.2 * j + (i == j ? 1.0 : 0.0);

  out.push_back(judge("moment_linear", sphere_moment_linear(z, q), 0.0, exact_tol, mc));
  out.push_back(judge("moment_quadratic", sphere_moment_quadratic(b, q), b.trace() / d, exact_tol, mc));
  out.push_back(judge("moment_bilinear", sphere_moment_bilinear(z, z2, q), z.dot(z2) / d, exact_tol, mc));

  // Eigenfunction relation for coordinate functions, checked at the nodes.
  {
    double worst = 0.0;
    const Eigen::Index m = std::min<Eigen::Index>(q.size(), 4096);
    for (int n = 0; n < d; ++n) {
      const auto f = linear_function(Vec::Unit(d, n));
      for (Eigen::Index k = 0; k < m; ++k) {
        const UnitVector w(q.nodes.col(k));
        worst = std::max(worst, std::abs(lb(f, w) + (d - 1) * w[n]));
      }
    }
    out.push_back({"laplace_beltrami_coordinate", worst, 1e-10, worst <= 1e-10});
  }

  Polynomial pf(d), pg(d);
  {
    auto mono = [&](std::initializer_list<std::pair<int, int>> ps) {
      std::vector<int> ex(d, 0);
      for (auto [i, p] : ps) ex[i] = p;
      return ex;
    };
    pf.add(1.0, mono({{0, 2}, {1, 1}})).add(0.5, mono({{0, 1}})).add(-0.7, mono({{1, 3}, {0, 1}}));
    pg.add(1.0, mono({{0, 1}, {1, 1}})).add(1.0, mono({{1, 1}})).add(0.25, mono({{0, 2}}));
  }
  const auto f = pf.function();
  const auto g = pg.function();

  {
    double worst = 0.0;
    const Eigen::Index m = std::min<Eigen::Index>(q.size(), 4096);
    for (Eigen::Index k = 0; k < m; ++k) {
      const UnitVector w(q.nodes.col(k));
      worst = std::max(worst, std::abs(lb(f, w) - laplace_beltrami_nested(f, w)));
    }
    out.push_back({"laplace_beltrami_nested", worst, 1e-6, worst <= 1e-6});
  }

  out.push_back(judge("green_identity",
                      integrate(q,
                                [&](const Vec& x) {
                                  const UnitVector w(x);
                                  return lb(f, w) * g.value(x) +
                                         spherical_gradient(f, w).dot(spherical_gradient(g, w));
                                }),
                      0.0, exact_tol, mc));

  const auto phi = linear_function(z);
  out.push_back(judge("gradient_pairing",
                      integrate(q,
                                [&](const Vec& x) {
                                  const UnitVector w(x);
                                  const double lhs = spherical_gradient(phi, w).dot(spherical_gradient(f, w));
                                  return lhs - sign * (d - 1) * f.value(x) * z.dot(x);
                                }),
                      0.0, exact_tol, mc));
  return out;
}

}  // namespace hypocert::sphere
