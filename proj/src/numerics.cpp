#include "hypocert/numerics.hpp"

#include "hypocert/rng.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hypocert {

Estimate mean_se(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_se: empty sample");
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  return {m, std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()))};
}

double sample_variance(std::span<const double> xs) {
  const auto n = xs.size();
  if (n < 2) return 0.0;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(n);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double student_t_quantile(double p, double dof) {
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, p);
}

namespace {

Vec random_vector(Eigen::Index n, std::uint64_t seed) {
  auto eng = make_stream(seed, 0xA11CE);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(eng);
  return v;
}

}  // namespace

LanczosResult weighted_lanczos(const LinOp& op, const Vec& w, const LinOp& deflate,
                               const LanczosOptions& opts) {
  const Eigen::Index n = w.size();
  const int m_max = static_cast<int>(std::min<Eigen::Index>(opts.max_iter, n));
  Mat V(n, m_max + 1);
  std::vector<double> alpha, beta;

  auto project = [&](Vec& v) {
    if (deflate) {
      Vec t;
      deflate(v, t);
      v = t;
    }
  };

  Vec v = random_vector(n, opts.seed);
  project(v);
  double nv = wnorm(w, v);
  if (nv == 0.0) throw std::runtime_error("weighted_lanczos: deflated space is empty");
  V.col(0) = v / nv;

  LanczosResult res;
  Vec y;
  for (int j = 0; j < m_max; ++j) {
    Vec q = V.col(j);
    op(q, y);
    project(y);
    const double a = wdot(w, q, y);
    alpha.push_back(a);
    // Two passes of classical Gram–Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      const Vec wy = w.cwiseProduct(y);
      const Vec c = V.leftCols(j + 1).transpose() * wy;
      y -= V.leftCols(j + 1) * c;
    }
    project(y);
    const double b = wnorm(w, y);

    const int k = j + 1;
    Eigen::SelfAdjointEigenSolver<Mat> es;
    Mat T = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    es.compute(T);
    const Eigen::Index idx = opts.largest ? k - 1 : 0;
    const double theta = es.eigenvalues()[idx];
    const double resid = std::abs(b * es.eigenvectors()(k - 1, idx));
    res.value = theta;
    res.residual = resid;
    res.iterations = k;
    const double scale = std::max(1.0, std::abs(theta));
    if (resid <= opts.tol * scale || b <= 1e-14 * scale || k == n) {
      res.converged = true;
      return res;
    }
    beta.push_back(b);
    V.col(j + 1) = y / b;
  }
  return res;
}

double weighted_power_norm(const LinOp& op, const LinOp& adjoint, const Vec& w, int max_iter,
                           double tol, std::uint64_t seed) {
  Vec v = random_vector(w.size(), seed);
  v /= wnorm(w, v);
  Vec y, z;
  double lam = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    op(v, y);
    adjoint(y, z);
    const double nz = wnorm(w, z);
    if (nz == 0.0) return 0.0;
    const double next = wdot(w, v, z);
    v = z / nz;
    if (it > 3 && std::abs(next - lam) <= tol * std::max(next, 1e-300)) {
      lam = next;
      break;
    }
    lam = next;
  }
  return std::sqrt(std::max(lam, 0.0));
}

double sym_max_eig(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[m.rows() - 1];
}

double sym_min_eig(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

double gershgorin_radius(const SpMat& m) {
  Vec rows = Vec::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

}  // namespace hypocert
