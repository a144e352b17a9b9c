#include "hypocert/disc.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace hypocert::disc {

using Triplet = Eigen::Triplet<double>;

GridMode parse_mode(const std::string& s) {
  if (s == "torus") return GridMode::Torus;
  if (s == "box") return GridMode::Box;
  throw std::invalid_argument("unknown grid mode '" + s + "' (expected torus or box)");
}

const char* to_string(GridMode m) { return m == GridMode::Torus ? "torus" : "box"; }

double XGrid::h() const {
  return mode == GridMode::Torus ? 2.0 * std::numbers::pi / n : 2.0 * half_width / (n - 1);
}

Eigen::Index XGrid::size() const {
  Eigen::Index s = 1;
  for (int k = 0; k < dim; ++k) s *= n;
  return s;
}

int XGrid::coord(Eigen::Index idx, int axis) const {
  for (int k = dim - 1; k > axis; --k) idx /= n;
  return static_cast<int>(idx % n);
}

Vec XGrid::node(Eigen::Index idx) const {
  Vec x(dim);
  const double hh = h();
  for (int k = 0; k < dim; ++k) {
    const int i = coord(idx, k);
    x[k] = mode == GridMode::Torus ? hh * i : -half_width + hh * i;
  }
  return x;
}

Eigen::Index XGrid::shift(Eigen::Index idx, int axis, int offset) const {
  Eigen::Index stride = 1;
  for (int k = dim - 1; k > axis; --k) stride *= n;
  const int i = coord(idx, axis);
  int j = i + offset;
  if (mode == GridMode::Torus) {
    j = ((j % n) + n) % n;
  } else if (j < 0 || j >= n) {
    return -1;
  }
  return idx + static_cast<Eigen::Index>(j - i) * stride;
}

XGrid torus_grid(int dim, int n) {
  if (dim < 1 || n < 3) throw std::invalid_argument("torus_grid: bad size");
  return {GridMode::Torus, dim, n, 0.0};
}

XGrid box_grid(int dim, int n, double half_width) {
  if (dim < 1 || n < 4 || !(half_width > 0.0)) throw std::invalid_argument("box_grid: bad size");
  return {GridMode::Box, dim, n, half_width};
}

SpMat diff1(const XGrid& g, int axis) {
  const Eigen::Index n = g.size();
  const double h = g.h();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(3 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index p = g.shift(i, axis, 1), m = g.shift(i, axis, -1);
    if (p >= 0 && m >= 0) {
      t.emplace_back(i, p, 0.5 / h);
      t.emplace_back(i, m, -0.5 / h);
    } else if (m < 0) {
      const Eigen::Index p2 = g.shift(p, axis, 1);
      t.emplace_back(i, i, -1.5 / h);
      t.emplace_back(i, p, 2.0 / h);
      t.emplace_back(i, p2, -0.5 / h);
    } else {
      const Eigen::Index m2 = g.shift(m, axis, -1);
      t.emplace_back(i, i, 1.5 / h);
      t.emplace_back(i, m, -2.0 / h);
      t.emplace_back(i, m2, 0.5 / h);
    }
  }
  SpMat d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SpMat diff2(const XGrid& g, int axis) {
  const Eigen::Index n = g.size();
  const double h2 = g.h() * g.h();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(4 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index p = g.shift(i, axis, 1), m = g.shift(i, axis, -1);
    if (p >= 0 && m >= 0) {
      t.emplace_back(i, p, 1.0 / h2);
      t.emplace_back(i, i, -2.0 / h2);
      t.emplace_back(i, m, 1.0 / h2);
    } else {
      const int dir = m < 0 ? 1 : -1;
      const Eigen::Index a = g.shift(i, axis, dir);
      const Eigen::Index b = g.shift(a, axis, dir);
      const Eigen::Index c = g.shift(b, axis, dir);
      t.emplace_back(i, i, 2.0 / h2);
      t.emplace_back(i, a, -5.0 / h2);
      t.emplace_back(i, b, 4.0 / h2);
      t.emplace_back(i, c, -1.0 / h2);
    }
  }
  SpMat d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

namespace {

double face_factor(const XGrid& g, Eigen::Index idx) {
  if (g.mode == GridMode::Torus) return 1.0;
  double f = 1.0;
  for (int k = 0; k < g.dim; ++k) {
    const int i = g.coord(idx, k);
    if (i == 0 || i == g.n - 1) f *= 0.5;
  }
  return f;
}

// e^{−(V − Vmin)} at the nodes together with Vmin, to keep box grids finite.
Vec shifted_density(const model::Potential& pot, const XGrid& g, double& vmin) {
  const Eigen::Index n = g.size();
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = pot.value(g.node(i));
  vmin = v.minCoeff();
  return (-(v.array() - vmin)).exp();
}

SpMat kron(const SpMat& a, const SpMat& b) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (int ka = 0; ka < a.outerSize(); ++ka)
    for (SpMat::InnerIterator ia(a, ka); ia; ++ia)
      for (int kb = 0; kb < b.outerSize(); ++kb)
        for (SpMat::InnerIterator ib(b, kb); ib; ++ib)
          t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
  SpMat k(a.rows() * b.rows(), a.cols() * b.cols());
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

SpMat identity(Eigen::Index n) {
  SpMat i(n, n);
  i.setIdentity();
  return i;
}

SpMat diag(const Vec& v) {
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < v.size(); ++i) t.emplace_back(i, i, v[i]);
  SpMat d(v.size(), v.size());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

// Periodic centered first and second differences on n angles.
SpMat angle_d1(int n, double h) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, (i + 1) % n, 0.5 / h);
    t.emplace_back(i, (i + n - 1) % n, -0.5 / h);
  }
  SpMat d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SpMat angle_d2(int n, double h) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, (i + 1) % n, 1.0 / (h * h));
    t.emplace_back(i, i, -2.0 / (h * h));
    t.emplace_back(i, (i + n - 1) % n, 1.0 / (h * h));
  }
  SpMat d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

}  // namespace

Vec x_masses(const model::Potential& pot, const XGrid& g) {
  if (pot.dim != g.dim) throw std::invalid_argument("x_masses: potential and grid dimensions differ");
  double vmin = 0.0;
  Vec rho = shifted_density(pot, g, vmin);
  for (Eigen::Index i = 0; i < rho.size(); ++i) rho[i] *= face_factor(g, i);
  return rho / rho.sum();
}

double boundary_mass(const model::Potential& pot, const XGrid& g) {
  if (g.mode == GridMode::Torus) return 0.0;
  const Vec rho = x_masses(pot, g);
  const double band = g.half_width - 3.0 * g.h();
  double m = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    if (g.node(i).cwiseAbs().maxCoeff() > band) m += rho[i];
  return m;
}

FiberDiscretization discretize_fiber(const model::FiberModel& m, const XGrid& g, int n_alpha) {
  if (m.d != 2 || g.dim != 2) throw std::invalid_argument("discretize_fiber: only d = 2 is supported");
  if (n_alpha < 8 || g.n < 8) throw std::invalid_argument("discretize_fiber: grid too coarse (need n_alpha >= 8 and n_x >= 8)");
  if (g.mode == GridMode::Torus && !m.potential.periodic)
    throw std::invalid_argument("discretize_fiber: torus grids need a periodic potential");

  const Eigen::Index nx = g.size();
  const Eigen::Index na = n_alpha;
  const Eigen::Index dim = nx * na;
  const double ha = 2.0 * std::numbers::pi / n_alpha;

  double vmin = 0.0;
  const Vec dens = shifted_density(m.potential, g, vmin);
  Vec rho = dens;
  for (Eigen::Index i = 0; i < nx; ++i) rho[i] *= face_factor(g, i);
  rho /= rho.sum();

  const SpMat ix = identity(nx), ia = identity(na);
  const SpMat da = kron(ix, angle_d1(n_alpha, ha));
  const SpMat daa = kron(ix, angle_d2(n_alpha, ha));
  const SpMat d1 = kron(diff1(g, 0), ia);
  const SpMat d2 = kron(diff1(g, 1), ia);
  SpMat lift = kron(ix, Vec::Ones(na).sparseView());

  // Stream functions ψ₁ = −sρ sin α, ψ₂ = sρ cos α with s = h/sin h, so that
  // D_α ψ reproduces −ρω exactly on the angle grid.
  const double s = ha / std::sin(ha);
  Vec psi1(dim), psi2(dim), rho_ph(dim);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index a = 0; a < na; ++a) {
      const double al = ha * static_cast<double>(a);
      psi1[i * na + a] = -s * dens[i] * std::sin(al);
      psi2[i * na + a] = s * dens[i] * std::cos(al);
      rho_ph[i * na + a] = dens[i] * face_factor(g, i);
    }
  const Vec jx1 = da * psi1;
  const Vec jx2 = da * psi2;
  const Vec ja = -(d1 * psi1) - (d2 * psi2);

  const SpMat k = diag(jx1) * d1 + diag(jx2) * d2 + diag(ja) * da;
  SpMat a = diag(rho_ph.cwiseInverse()) * (0.5 * (k - SpMat(k.transpose())));
  a.prune(0.0);
  SpMat sop = (0.5 * m.sigma * m.sigma) * daa;

  Vec w(dim);
  for (Eigen::Index i = 0; i < nx; ++i) w.segment(i * na, na).setConstant(rho[i] / static_cast<double>(na));
  w /= w.sum();
  hypo::WeightedSpace sp(w);

  // Basis (eⱼ − (ρⱼ/ρ_p) e_p)/√ρⱼ of the mean-zero x-functions, lifted, with p
  // the heaviest node. Its Gram matrix is I + vvᵀ with |v|² < 1.
  Eigen::Index piv = 0;
  rho.maxCoeff(&piv);
  std::vector<Triplet> qt;
  qt.reserve(static_cast<std::size_t>(2 * (nx - 1)));
  for (Eigen::Index i = 0, j = 0; i < nx; ++i) {
    if (i == piv) continue;
    const double sc = 1.0 / std::sqrt(rho[i]);
    qt.emplace_back(i, j, sc);
    qt.emplace_back(piv, j, -sc * rho[i] / rho[piv]);
    ++j;
  }
  SpMat cx(nx, nx - 1);
  cx.setFromTriplets(qt.begin(), qt.end());
  SpMat q = lift * cx;

  FiberDiscretization fd{hypo::OperatorSet{sp, sop, a, hypo::Projection(q, sp)}, g, n_alpha, rho, lift, 0.0};
  fd.boundary_mass = boundary_mass(m.potential, g);
  return fd;
}

Mat discrete_PA2P(const FiberDiscretization& fd) {
  const SpMat ae = fd.ops.A * fd.lift;
  const SpMat a2e = fd.ops.A * ae;
  const SpMat avg = (1.0 / fd.n_alpha) * SpMat(fd.lift.transpose());
  return Mat(avg * a2e);
}

SpMat x_generator(const model::Potential& pot, const XGrid& g, double c) {
  const Eigen::Index n = g.size();
  SpMat op(n, n);
  for (int k = 0; k < g.dim; ++k) {
    Vec gv(n);
    for (Eigen::Index i = 0; i < n; ++i) gv[i] = pot.gradient(g.node(i))[k];
    op += diff2(g, k) - diag(gv) * diff1(g, k);
  }
  return c * op;
}

SpMat dirichlet_form(const model::Potential& pot, const XGrid& g) {
  if (pot.dim != g.dim) throw std::invalid_argument("dirichlet_form: potential and grid dimensions differ");
  const Eigen::Index n = g.size();
  double vmin = 0.0;
  const Vec dens = shifted_density(pot, g, vmin);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) z += dens[i] * face_factor(g, i);
  const double h = g.h();
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < g.dim; ++k) {
      const Eigen::Index j = g.shift(i, k, 1);
      if (j < 0) continue;
      Vec mid = g.node(i);
      mid[k] += 0.5 * h;
      // Edge weight uses the transverse face factor so box faces stay consistent.
      double face = 1.0;
      if (g.mode == GridMode::Box)
        for (int l = 0; l < g.dim; ++l)
          if (l != k && (g.coord(i, l) == 0 || g.coord(i, l) == g.n - 1)) face *= 0.5;
      const double c = face * std::exp(-(pot.value(mid) - vmin)) / (z * h * h);
      t.emplace_back(i, i, c);
      t.emplace_back(j, j, c);
      t.emplace_back(i, j, -c);
      t.emplace_back(j, i, -c);
    }
  }
  SpMat kmat(n, n);
  kmat.setFromTriplets(t.begin(), t.end());
  return kmat;
}

PoincareResult poincare_constant(const model::Potential& pot, const XGrid& g, Eigen::Index dense_limit) {
  const SpMat k = dirichlet_form(pot, g);
  const Vec rho = x_masses(pot, g);
  const Eigen::Index n = g.size();
  PoincareResult res;
  if (n <= dense_limit) {
    const Vec is = rho.cwiseSqrt().cwiseInverse();
    Mat h = is.asDiagonal() * Mat(k) * is.asDiagonal();
    h = (0.5 * (h + h.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("poincare_constant: eigen-solver failed");
    res.lambda = es.eigenvalues()[1];
    res.dense = true;
    return res;
  }
  const double tau = 1e-3 * (k.diagonal().array() / rho.array()).mean();
  const SpMat shifted = k + tau * diag(rho);
  Eigen::SimplicialLDLT<SpMat> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("poincare_constant: factorization failed");
  LanczosOptions o;
  o.largest = true;
  o.max_iter = 400;
  o.tol = 1e-12;
  const auto r = weighted_lanczos([&](const Vec& v, Vec& y) { y = ldlt.solve(Vec(rho.cwiseProduct(v))); }, rho,
                                  [&](const Vec& v, Vec& y) { y = v.array() - rho.dot(v); }, o);
  if (!r.converged) throw std::runtime_error("poincare_constant: Lanczos did not converge");
  res.lambda = 1.0 / r.value - tau;
  res.dense = false;
  res.iterations = r.iterations;
  return res;
}

EllipticProblem::EllipticProblem(model::Potential pot, XGrid g, double c)
    : potential(std::move(pot)), grid(g), c1(c) {
  if (!(c1 > 0.0)) throw std::invalid_argument("EllipticProblem: c1 must be positive");
  if (potential.dim != grid.dim) throw std::invalid_argument("EllipticProblem: potential and grid dimensions differ");
}

Vec elliptic_solve(const EllipticProblem& prob, const Vec& g, double* residual) {
  const Vec rho = x_masses(prob.potential, prob.grid);
  if (g.size() != rho.size()) throw std::invalid_argument("elliptic_solve: right-hand side has the wrong size");
  const double gn = std::sqrt(rho.dot(g.cwiseAbs2()));
  if (std::abs(rho.dot(g)) > 1e-10 * std::max(1.0, gn))
    throw std::invalid_argument("elliptic_solve: right-hand side must have zero mean");
  if (gn == 0.0) {
    if (residual) *residual = 0.0;
    return Vec::Zero(g.size());
  }
  const SpMat k = dirichlet_form(prob.potential, prob.grid);
  const SpMat sys = diag(rho) + prob.c1 * k;
  Eigen::SimplicialLDLT<SpMat> ldlt(sys);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("elliptic_solve: factorization failed");
  const Vec rhs = rho.cwiseProduct(g);
  Vec u = ldlt.solve(rhs);
  const double res = (sys * u - rhs).norm() / rhs.norm();
  if (residual) *residual = res;
  if (!(res <= 1e-10)) throw std::runtime_error("elliptic_solve: residual above 1e-10");
  u.array() -= rho.dot(u);
  return u;
}

Vec random_smooth_function(const model::Potential& pot, const XGrid& g, Engine& eng) {
  constexpr int kmax = 4;
  const int side = 2 * kmax + 1;
  int modes = 1;
  for (int k = 0; k < g.dim; ++k) modes *= side;
  boost::random::normal_distribution<double> nd;
  std::vector<double> ca(static_cast<std::size_t>(modes)), cb(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    ca[static_cast<std::size_t>(m)] = nd(eng);
    cb[static_cast<std::size_t>(m)] = nd(eng);
  }
  const double scale = g.mode == GridMode::Torus ? 1.0 : std::numbers::pi / g.half_width;
  const Eigen::Index n = g.size();
  Vec f = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec x = g.node(i) * scale;
    for (int m = 0; m < modes; ++m) {
      int mm = m;
      double phase = 0.0;
      bool zero = true;
      for (int k = 0; k < g.dim; ++k) {
        const int kk = mm % side - kmax;
        mm /= side;
        phase += kk * x[k];
        zero = zero && kk == 0;
      }
      if (zero) continue;
      f[i] += ca[static_cast<std::size_t>(m)] * std::cos(phase) + cb[static_cast<std::size_t>(m)] * std::sin(phase);
    }
  }
  const Vec rho = x_masses(pot, g);
  f.array() -= rho.dot(f);
  return f;
}

N2Estimate estimate_N2(const model::FiberModel& m, const XGrid& g, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("estimate_N2: need at least one sample");
  const int dim = g.dim;
  if (m.d != dim) throw std::invalid_argument("estimate_N2: model and grid dimensions differ");
  const EllipticProblem prob(m.potential, g, 1.0 / m.d);
  const Vec rho = x_masses(m.potential, g);
  const Eigen::Index n = g.size();

  std::vector<SpMat> d1(static_cast<std::size_t>(dim)), d2(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) {
    d1[static_cast<std::size_t>(k)] = diff1(g, k);
    d2[static_cast<std::size_t>(k)] = diff2(g, k);
  }
  Vec gradv_norm(n);
  for (Eigen::Index i = 0; i < n; ++i) gradv_norm[i] = m.potential.gradient(g.node(i)).norm();
  auto l2 = [&](const Vec& v) { return std::sqrt(rho.dot(v.cwiseAbs2())); };

  N2Estimate est;
  est.samples = samples;
  for (int s = 0; s < samples; ++s) {
    auto eng = make_stream(seed, 0xE11, static_cast<std::uint64_t>(s));
    const Vec gv = random_smooth_function(m.potential, g, eng);
    const Vec u = elliptic_solve(prob, gv);
    std::vector<Vec> du(static_cast<std::size_t>(dim));
    Vec grad2 = Vec::Zero(n), hess2 = Vec::Zero(n);
    for (int k = 0; k < dim; ++k) {
      du[static_cast<std::size_t>(k)] = d1[static_cast<std::size_t>(k)] * u;
      grad2 += du[static_cast<std::size_t>(k)].cwiseAbs2();
    }
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        const Vec hij = i == j ? Vec(d2[static_cast<std::size_t>(i)] * u)
                               : Vec(d1[static_cast<std::size_t>(i)] * du[static_cast<std::size_t>(j)]);
        hess2 += hij.cwiseAbs2();
      }
    const double gn = l2(gv);
    if (gn == 0.0) continue;
    const double hr = l2(hess2.cwiseSqrt()) / gn;
    const double gr = l2(gradv_norm.cwiseProduct(grad2.cwiseSqrt())) / gn;
    est.hessian_ratio = std::max(est.hessian_ratio, hr);
    est.gradient_ratio = std::max(est.gradient_ratio, gr);
    est.value = std::max(est.value, hr + gr / (m.d - 1));
  }
  return est;
}

void write_triplets(std::ostream& os, const SpMat& m) {
  SpMat c = m;
  c.makeCompressed();
  os << c.rows() << ' ' << c.cols() << ' ' << c.nonZeros() << '\n';
  char buf[64];
  for (int k = 0; k < c.outerSize(); ++k)
    for (SpMat::InnerIterator it(c, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", static_cast<long long>(it.row() + 1),
                    static_cast<long long>(it.col() + 1), it.value());
      os << buf;
    }
}

}  // namespace hypocert::disc
