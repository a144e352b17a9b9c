#include "hypocert/hypo.hpp"

#include "hypocert/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace hypocert::hypo {

namespace {

constexpr Eigen::Index kDenseNormLimit = 800;

Mat dense(const SpMat& m) { return Mat(m); }

SpMat diag(const Vec& v) {
  SpMat d(v.size(), v.size());
  d.reserve(Eigen::VectorXi::Constant(v.size(), 1));
  for (Eigen::Index i = 0; i < v.size(); ++i) d.insert(i, i) = v[i];
  d.makeCompressed();
  return d;
}

// Weighted norm of a sparse operator; dense SVD when small, power iteration otherwise.
double sparse_weighted_norm(const SpMat& x, const WeightedSpace& sp) {
  if (x.nonZeros() == 0) return 0.0;
  if (sp.dim() <= kDenseNormLimit) return weighted_norm(dense(x), sp);
  const SpMat xa = weighted_adjoint(x, sp);
  return weighted_power_norm([&](const Vec& v, Vec& y) { y = x * v; },
                             [&](const Vec& v, Vec& y) { y = xa * v; }, sp.weights());
}

// Largest eigenvalue of a W-self-adjoint sparse operator.
double sparse_weighted_max_eig(const SpMat& x, const WeightedSpace& sp) {
  if (x.nonZeros() == 0) return 0.0;
  if (sp.dim() <= kDenseNormLimit) {
    const Vec sw = sp.weights().cwiseSqrt();
    Mat h = sw.asDiagonal() * dense(x) * sw.cwiseInverse().asDiagonal();
    h = (0.5 * (h + h.transpose())).eval();
    return sym_max_eig(h);
  }
  LanczosOptions o;
  o.largest = true;
  o.max_iter = 300;
  o.tol = 1e-10;
  return weighted_lanczos([&](const Vec& v, Vec& y) { y = x * v; }, sp.weights(), {}, o).value;
}

}  // namespace

WeightedSpace::WeightedSpace(Vec weights) : w_(std::move(weights)) {
  if (w_.size() == 0) throw std::invalid_argument("WeightedSpace: empty weight vector");
  if ((w_.array() <= 0.0).any() || !w_.allFinite())
    throw std::invalid_argument("WeightedSpace: weights must be positive and finite");
  if (std::abs(w_.sum() - 1.0) > 1e-10) throw std::invalid_argument("WeightedSpace: weights must sum to 1");
}

Mat weighted_adjoint(const Mat& m, const WeightedSpace& sp) {
  if (m.rows() != sp.dim() || m.cols() != sp.dim()) throw std::invalid_argument("weighted_adjoint: dimension mismatch");
  const Vec& w = sp.weights();
  return w.cwiseInverse().asDiagonal() * m.transpose() * w.asDiagonal();
}

SpMat weighted_adjoint(const SpMat& m, const WeightedSpace& sp) {
  if (m.rows() != sp.dim() || m.cols() != sp.dim()) throw std::invalid_argument("weighted_adjoint: dimension mismatch");
  const Vec& w = sp.weights();
  SpMat t = m.transpose();
  return diag(w.cwiseInverse()) * t * diag(w);
}

double weighted_norm(const Mat& m, const WeightedSpace& sp) {
  const Vec sw = sp.weights().cwiseSqrt();
  const Mat h = sw.asDiagonal() * m * sw.cwiseInverse().asDiagonal();
  if (h.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(h);
  return svd.singularValues()[0];
}

Projection::Projection(SpMat basis, const WeightedSpace& sp) : q_(std::move(basis)), w_(sp.weights()) {
  if (q_.rows() != sp.dim()) throw std::invalid_argument("Projection: basis row count does not match the space");
  q_.makeCompressed();
  const SpMat wq = diag(w_) * q_;
  g_ = dense(SpMat(q_.transpose() * wq));
  g_ = (0.5 * (g_ + g_.transpose())).eval();
  if (q_.cols() > 0) {
    llt_.compute(g_);
    if (llt_.info() != Eigen::Success) throw std::invalid_argument("Projection: basis is rank deficient");
    const Vec means = SpMat(q_.transpose()) * w_;
    for (Eigen::Index j = 0; j < q_.cols(); ++j) {
      const double nj = std::sqrt(g_(j, j));
      mean_violation = std::max(mean_violation, std::abs(means[j]) / nj);
    }
    if (mean_violation > 1e-8)
      throw std::invalid_argument("Projection: basis vectors must be orthogonal to the constants");
  }
}

Projection Projection::from_matrix(const Mat& p, const WeightedSpace& sp) {
  const Eigen::Index n = sp.dim();
  if (p.rows() != n || p.cols() != n) throw std::invalid_argument("Projection::from_matrix: dimension mismatch");
  const Vec sw = sp.weights().cwiseSqrt();
  const Mat h = sw.asDiagonal() * p * sw.cwiseInverse().asDiagonal();
  const double sym = (0.5 * (h - h.transpose())).norm() > 0.0
                         ? Eigen::BDCSVD<Mat>(0.5 * (h - h.transpose())).singularValues()[0]
                         : 0.0;
  const double idem = weighted_norm(p * p - p, sp);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (h + h.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (es.eigenvalues()[i] > 0.5) keep.push_back(i);
  Mat q(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    q.col(static_cast<Eigen::Index>(j)) = sw.cwiseInverse().asDiagonal() * es.eigenvectors().col(keep[j]);
  // Columns are W-unit vectors, so their means measure the overlap with 1.
  double mean = 0.0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double m = sp.mean(q.col(j));
    mean = std::max(mean, std::abs(m));
    q.col(j).array() -= m;
  }
  if (mean > 1e-8 && q.cols() > 0) {
    // Re-extract an independent basis after removing the constant direction.
    const Mat y = sw.asDiagonal() * q;
    Eigen::ColPivHouseholderQR<Mat> qr(y);
    qr.setThreshold(1e-8);
    const Mat thin = Mat(qr.householderQ()).leftCols(qr.rank());
    q = sw.cwiseInverse().asDiagonal() * thin;
  }
  Projection out(q.sparseView(1e-300, 1.0), sp);
  out.symmetry_violation = sym;
  out.idempotency_violation = idem;
  out.mean_violation = std::max(out.mean_violation, mean);
  return out;
}

Vec Projection::coefficients(const Vec& f) const {
  if (q_.cols() == 0) return Vec();
  return llt_.solve(Vec(q_.transpose() * w_.cwiseProduct(f)));
}

Vec Projection::apply(const Vec& f) const {
  if (q_.cols() == 0) return Vec::Zero(f.size());
  return q_ * coefficients(f);
}

Vec Projection::apply_S(const Vec& f) const {
  Vec out = apply(f);
  out.array() += w_.dot(f);
  return out;
}

Mat Projection::to_dense() const {
  if (q_.cols() == 0) return Mat::Zero(q_.rows(), q_.rows());
  const Mat qd = dense(q_);
  return qd * llt_.solve(Mat(qd.transpose() * w_.asDiagonal()));
}

const CheckItem* StructureReport::find(const std::string& name) const {
  for (const auto& it : items)
    if (it.name == name) return &it;
  return nullptr;
}

StructureReport check_structure(const OperatorSet& ops, double tol) {
  const auto& sp = ops.space;
  const Vec& w = sp.weights();
  const Eigen::Index n = sp.dim();
  if (ops.S.rows() != n || ops.S.cols() != n || ops.A.rows() != n || ops.A.cols() != n)
    throw std::invalid_argument("check_structure: operator dimensions do not match the space");

  StructureReport rep;
  auto add = [&](std::string name, double v) {
    CheckItem c{std::move(name), v, tol, v <= tol};
    rep.passed = rep.passed && c.passed;
    rep.items.push_back(c);
  };

  const SpMat s_adj = weighted_adjoint(ops.S, sp);
  const SpMat a_adj = weighted_adjoint(ops.A, sp);
  const SpMat s_anti = 0.5 * (ops.S - s_adj);
  const SpMat s_sym = 0.5 * (ops.S + s_adj);
  const SpMat a_sym = 0.5 * (ops.A + a_adj);
  const SpMat l = ops.L();

  add("S_symmetric", sparse_weighted_norm(s_anti, sp));
  add("S_nonpositive", std::max(0.0, sparse_weighted_max_eig(s_sym, sp)));
  add("A_antisymmetric", sparse_weighted_norm(a_sym, sp));
  add("P_symmetric", ops.P.symmetry_violation);
  add("P_idempotent", ops.P.idempotency_violation);
  add("P_mean_zero", ops.P.mean_violation);

  const Eigen::Index r = ops.P.rank();
  double sp_norm = 0.0, pap = 0.0;
  if (r > 0) {
    const auto& llt = ops.P.gram_llt();
    const Mat lmat = llt.matrixL();
    const SpMat sq = ops.S * ops.P.basis();
    const SpMat aq = ops.A * ops.P.basis();
    const Mat x = dense(SpMat(SpMat(sq.transpose()) * diag(w) * sq));
    // L⁻¹ X L⁻ᵀ
    Mat t = lmat.triangularView<Eigen::Lower>().solve(x);
    t = lmat.triangularView<Eigen::Lower>().solve(Mat(t.transpose()));
    sp_norm = std::sqrt(std::max(0.0, sym_max_eig(0.5 * (t + t.transpose()))));
    const Mat y = dense(SpMat(SpMat(ops.P.basis().transpose()) * diag(w) * aq));
    Mat u = lmat.triangularView<Eigen::Lower>().solve(y);
    u = lmat.triangularView<Eigen::Lower>().solve(Mat(u.transpose())).transpose();
    pap = Eigen::BDCSVD<Mat>(u).singularValues()[0];
  }
  add("SP_zero", sp_norm);
  const Vec one = sp.unit();
  add("L_one_zero", sp.norm(l * one));
  add("L_mean_zero", sp.norm(weighted_adjoint(l, sp) * one));
  add("PAP_zero", pap);
  rep.pap_norm = pap;

  const SpMat l_sym = s_sym - a_sym;
  rep.dissipativity = sparse_weighted_max_eig(l_sym, sp);
  add("L_dissipative", std::max(0.0, rep.dissipativity));
  return rep;
}

AuxOperator::AuxOperator(const OperatorSet& ops) : ops_(&ops) {
  const Vec& w = ops.space.weights();
  aq_ = ops.A * ops.P.basis();
  r_ = SpMat(aq_.transpose()) * diag(w);
  m_ = dense(SpMat(r_ * aq_));
  m_ = (0.5 * (m_ + m_.transpose())).eval();
  if (ops.P.rank() > 0) {
    const Mat gm = ops.P.gram() + m_;
    gm_.compute(gm);
    if (gm_.info() != Eigen::Success) throw std::runtime_error("build_B: G + M is not positive definite");
    Eigen::SelfAdjointEigenSolver<Mat> es(gm, Eigen::EigenvaluesOnly);
    cond_ = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  }
}

Vec AuxOperator::coefficients(const Vec& f) const {
  if (ops_->P.rank() == 0) return Vec();
  return gm_.solve(Vec(r_ * f));
}

Vec AuxOperator::apply(const Vec& f) const {
  if (ops_->P.rank() == 0) return Vec::Zero(f.size());
  return ops_->P.basis() * coefficients(f);
}

Mat AuxOperator::to_dense() const {
  const Eigen::Index n = ops_->space.dim();
  if (ops_->P.rank() == 0) return Mat::Zero(n, n);
  return dense(ops_->P.basis()) * gm_.solve(dense(r_));
}

AuxOperator build_B(const OperatorSet& ops) { return AuxOperator(ops); }

double aux_norm(const OperatorSet& ops, const AuxOperator& b, const SpMat& z, bool use_ps) {
  if (ops.P.rank() == 0) return 0.0;
  const Vec& w = ops.space.weights();
  const SpMat y = b.r() * z;
  const SpMat yq = y * ops.P.basis();
  const Mat yqd = dense(yq);
  Mat c = dense(SpMat(y * diag(w.cwiseInverse()) * SpMat(y.transpose())));
  c -= yqd * ops.P.gram_llt().solve(Mat(yqd.transpose()));
  if (use_ps) {
    const Vec y1 = y * ops.space.unit();
    c -= y1 * y1.transpose();
  }
  const Mat x = b.gm_llt().solve(Mat(b.gm_llt().solve(c).transpose()));
  const Mat lmat = ops.P.gram_llt().matrixL();
  Mat t = lmat.transpose() * x * lmat;
  t = (0.5 * (t + t.transpose())).eval();
  return std::sqrt(std::max(0.0, sym_max_eig(t)));
}

std::optional<double> measure_lambda_m(const OperatorSet& ops, const MeasureOptions& opts) {
  const auto& sp = ops.space;
  const Eigen::Index n = sp.dim();
  const Eigen::Index rank_ps = ops.P.rank() + 1;
  if (rank_ps >= n) return std::nullopt;
  const Vec& w = sp.weights();

  if (n <= opts.dense_limit && !opts.force_iterative) {
    const Vec sw = w.cwiseSqrt();
    Mat k = -(sw.asDiagonal() * dense(ops.S) * sw.cwiseInverse().asDiagonal());
    k = (0.5 * (k + k.transpose())).eval();
    Mat basis(n, rank_ps);
    if (ops.P.rank() > 0) basis.leftCols(ops.P.rank()) = sw.asDiagonal() * dense(ops.P.basis());
    basis.col(rank_ps - 1) = sw;
    Eigen::HouseholderQR<Mat> qr(basis);
    const Mat qh = qr.householderQ() * Mat::Identity(n, rank_ps);
    const Mat pi = qh * qh.transpose();
    const Mat comp = Mat::Identity(n, n) - pi;
    const double shift = 1.0 + 2.0 * std::max(std::abs(sym_max_eig(k)), std::abs(sym_min_eig(k)));
    const Mat kc = comp * k * comp + shift * pi;
    return sym_min_eig(0.5 * (kc + kc.transpose()));
  }

  // Shift-invert Lanczos on (−S + τ)⁻¹ restricted to range(I − P_S).
  double dmax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(ops.S.coeff(i, i)));
  const double tau = 1e-3 * dmax + 1e-12;
  SpMat k = diag(w) * (-ops.S);
  k = 0.5 * (k + SpMat(k.transpose()));
  k += tau * diag(w);
  Eigen::SimplicialLDLT<SpMat> ldlt(k);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("measure_lambda_m: factorization failed");
  LanczosOptions o;
  o.largest = true;
  o.max_iter = 300;
  o.tol = 1e-12;
  const auto res = weighted_lanczos([&](const Vec& v, Vec& y) { y = ldlt.solve(Vec(w.cwiseProduct(v))); }, w,
                                    [&](const Vec& v, Vec& y) { y = v - ops.P.apply_S(v); }, o);
  if (!res.converged) throw std::runtime_error("measure_lambda_m: Lanczos did not converge");
  return 1.0 / res.value - tau;
}

MeasuredConstants measure_constants(const OperatorSet& ops, const AuxOperator& b, const MeasureOptions& opts) {
  MeasuredConstants mc;
  mc.lambda_m = measure_lambda_m(ops, opts);
  if (ops.P.rank() > 0) {
    const Mat lmat = ops.P.gram_llt().matrixL();
    Mat t = lmat.triangularView<Eigen::Lower>().solve(b.m());
    t = lmat.triangularView<Eigen::Lower>().solve(Mat(t.transpose()));
    mc.lambda_M = sym_min_eig(0.5 * (t + t.transpose()));
  }
  mc.n1_ps = aux_norm(ops, b, ops.S, true);
  mc.n1_p = aux_norm(ops, b, ops.S, false);
  // BA(I − P): Π is applied on the right of A.
  mc.n2_p = aux_norm(ops, b, ops.A, false);
  mc.n2_ps = aux_norm(ops, b, ops.A, true);
  return mc;
}

double entropy(const AuxOperator& b, double eps, const Vec& f, const WeightedSpace& sp) {
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("entropy: eps must lie in [0, 1)");
  return 0.5 * sp.dot(f, f) + eps * sp.dot(b.apply(f), f);
}

Dissipation dissipation_terms(const OperatorSet& ops, const AuxOperator& b, const Vec& f) {
  const auto& sp = ops.space;
  const Vec lf = ops.S * f - ops.A * f;
  return {-sp.dot(lf, f), sp.dot(b.apply(lf), f), sp.dot(b.apply(f), lf)};
}

double rate_objective(double lm, double lM, double n1, double n2, double delta, double eps) {
  if (!(delta > 0.0)) return -std::numeric_limits<double>::infinity();
  const double b = 1.0 + n1 + n2;
  const double c_perp = lm - eps * b * (1.0 + delta * delta) / (2.0 * delta);
  const double c_par = eps * (lM / (1.0 + lM) - b * delta / 2.0);
  return std::min(c_perp, c_par) / (1.0 + eps);
}

namespace {

struct DeltaEval {
  double eps;
  double kappa2;
};

// Best ε for a fixed δ: κ₂ increases while c_∥ is active and decreases once
// c_⊥ is, so the optimum sits where they cross (clamped inside (0, 1)).
DeltaEval best_eps(double lm, double a, double b, double delta) {
  const double k = a - b * delta / 2.0;
  if (!(k > 0.0) || !(delta > 0.0)) return {0.0, -std::numeric_limits<double>::infinity()};
  const double q = b * (1.0 + delta * delta) / (2.0 * delta);
  const double eps = std::min(lm / (k + q), 1.0 - 1e-9);
  const double kappa = std::min(lm - eps * q, eps * k);
  return {eps, kappa / (1.0 + eps)};
}

}  // namespace

RateResult optimize_rate(double lm, double lM, double n1, double n2) {
  if (!(lm > 0.0) || !(lM > 0.0)) throw std::invalid_argument("optimize_rate: Lambda_m and Lambda_M must be positive");
  if (!(n1 >= 0.0) || !(n2 >= 0.0)) throw std::invalid_argument("optimize_rate: N1 and N2 must be nonnegative");
  const double a = lM / (1.0 + lM);
  const double b = 1.0 + n1 + n2;
  const double dmax = 2.0 * a / b;

  constexpr int kGrid = 2000;
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double d = dmax * (i + 0.5) / kGrid;
    const double v = best_eps(lm, a, b, d).kappa2;
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = dmax * std::max(0.0, best - 0.5) / kGrid;
  double hi = dmax * std::min<double>(kGrid, best + 1.5) / kGrid;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = best_eps(lm, a, b, x1).kappa2, f2 = best_eps(lm, a, b, x2).kappa2;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * dmax; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = best_eps(lm, a, b, x2).kappa2;
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = best_eps(lm, a, b, x1).kappa2;
    }
  }
  double delta = 0.5 * (lo + hi);
  DeltaEval e = best_eps(lm, a, b, delta);
  if (e.kappa2 < best_val) {
    delta = dmax * (best + 0.5) / kGrid;
    e = best_eps(lm, a, b, delta);
  }
  if (!(e.kappa2 > 0.0)) throw std::runtime_error("optimize_rate: no feasible (delta, eps) found");

  RateResult r;
  r.delta = delta;
  r.eps = e.eps;
  r.c_perp = lm - e.eps * b * (1.0 + delta * delta) / (2.0 * delta);
  r.c_par = e.eps * (a - b * delta / 2.0);
  r.kappa = std::min(r.c_perp, r.c_par);
  r.kappa1 = std::sqrt((1.0 + r.eps) / (1.0 - r.eps));
  r.kappa2 = r.kappa / (1.0 + r.eps);
  if (!(r.c_perp > 0.0 && r.c_par > 0.0)) throw std::runtime_error("optimize_rate: optimum is not strictly feasible");
  return r;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Analytic: return "analytic";
    case Provenance::Measured: return "measured";
    case Provenance::Elliptic: return "elliptic";
    case Provenance::User: return "user";
  }
  return "unknown";
}

HypoCertificate certificate_from(const MeasuredConstants& mc) {
  if (!mc.lambda_m || !mc.lambda_M) throw std::runtime_error("certificate: Lambda_m or Lambda_M not applicable");
  HypoCertificate best;
  bool have = false;
  const std::pair<const char*, double> n1s[] = {{"P_S", mc.n1_ps}, {"P", mc.n1_p}};
  const std::pair<const char*, double> n2s[] = {{"P", mc.n2_p}, {"P_S", mc.n2_ps}};
  for (const auto& [p1, n1] : n1s) {
    for (const auto& [p2, n2] : n2s) {
      const RateResult r = optimize_rate(*mc.lambda_m, *mc.lambda_M, n1, n2);
      if (!have || r.kappa2 > best.rate.kappa2) {
        best.lambda_m = *mc.lambda_m;
        best.lambda_M = *mc.lambda_M;
        best.n1 = n1;
        best.n2 = n2;
        best.n1_projection = p1;
        best.n2_projection = p2;
        best.rate = r;
        have = true;
      }
    }
  }
  return best;
}

std::vector<Mat> propagate(const OperatorSet& ops, const Mat& f0, const std::vector<double>& times,
                           const PropagateOptions& opts, int* halvings) {
  const auto& sp = ops.space;
  if (f0.rows() != sp.dim()) throw std::invalid_argument("propagate: initial data dimension mismatch");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1]))
      throw std::invalid_argument("propagate: times must be nonnegative and nondecreasing");

  const SpMat l = ops.L();
  std::vector<Mat> out;
  out.reserve(times.size());
  Mat f = f0;
  double t = 0.0;
  int halved = 0;

  if (sp.dim() <= opts.dense_limit) {
    const Mat ld = dense(l);
    std::map<double, Mat> cache;
    for (double target : times) {
      const double gap = target - t;
      if (gap > 0.0) {
        auto it = cache.find(gap);
        if (it == cache.end()) it = cache.emplace(gap, Mat((ld * gap).exp())).first;
        f = it->second * f;
        t = target;
      }
      out.push_back(f);
    }
    return out;
  }

  const double rho = gershgorin_radius(l);
  double h_max = std::min(opts.max_rk_step, rho > 0.0 ? 2.5 / rho : opts.max_rk_step);
  auto norms = [&](const Mat& m) {
    Vec n(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) n[j] = sp.norm(m.col(j));
    return n;
  };
  // Classical RK4; false if some column norm grows (L is dissipative, so growth means instability).
  auto advance = [&](Mat& g, double h, long steps) {
    Vec prev = norms(g);
    for (long s = 0; s < steps; ++s) {
      const Mat k1 = l * g;
      const Mat k2 = l * (g + 0.5 * h * k1);
      const Mat k3 = l * (g + 0.5 * h * k2);
      const Mat k4 = l * (g + h * k3);
      g += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const Vec now = norms(g);
      if (((now.array() - prev.array()) > 1e-12 * prev.array().max(1e-300)).any()) return false;
      prev = now;
    }
    return true;
  };

  // Step-doubling probe on a short horizon fixes h for the whole run.
  const double horizon = times.empty() ? 0.0 : std::min(times.back(), 0.5);
  if (horizon > 0.0 && f.norm() > 0.0) {
    long n = static_cast<long>(std::ceil(horizon / h_max));
    const double scale = norms(f).norm();
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 20) throw std::runtime_error("propagate: no step size met the accuracy target");
      Mat a = f, b = f;
      const bool ok = advance(a, horizon / static_cast<double>(n), n) &&
                      advance(b, horizon / static_cast<double>(2 * n), 2 * n);
      if (ok && norms(Mat(a - b)).norm() <= opts.rk_tol * scale) break;
      n *= 2;
      ++halved;
    }
    h_max = horizon / static_cast<double>(2 * n);
  }

  for (double target : times) {
    const double gap = target - t;
    if (gap > 0.0) {
      long steps = static_cast<long>(std::ceil(gap / h_max));
      for (int attempt = 0;; ++attempt) {
        Mat g = f;
        if (advance(g, gap / static_cast<double>(steps), steps)) {
          f = g;
          break;
        }
        if (attempt >= 20) throw std::runtime_error("propagate: time stepping unstable after repeated halving");
        steps *= 2;
        ++halved;
      }
      t = target;
    }
    out.push_back(f);
  }
  if (halvings) *halvings = halved;
  return out;
}

DecayReport certify_decay(const OperatorSet& ops, const HypoCertificate& cert, const Mat& g,
                          const std::vector<double>& times, double slack, const PropagateOptions& opts) {
  const auto& sp = ops.space;
  Mat f0 = g;
  for (Eigen::Index j = 0; j < f0.cols(); ++j) f0.col(j).array() -= sp.mean(f0.col(j));
  Vec n0(f0.cols());
  for (Eigen::Index j = 0; j < f0.cols(); ++j) n0[j] = sp.norm(f0.col(j));

  DecayReport rep;
  rep.times = times;
  const auto fs = propagate(ops, f0, times, opts, &rep.step_halvings);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double env = cert.rate.kappa1 * std::exp(-cert.rate.kappa2 * times[k]);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < f0.cols(); ++j) {
      if (n0[j] == 0.0) continue;
      worst = std::max(worst, sp.norm(fs[k].col(j)) / (env * n0[j]));
    }
    rep.ratios.push_back(worst);
    rep.max_ratio = std::max(rep.max_ratio, worst);
  }
  rep.passed = rep.max_ratio <= 1.0 + slack;
  return rep;
}

OperatorSet random_admissible_instance(Eigen::Index dim, std::uint64_t seed) {
  if (dim < 4) throw std::invalid_argument("random_admissible_instance: dim must be at least 4");
  auto eng = make_stream(seed, 0xAD1);
  boost::random::normal_distribution<double> nd;
  boost::random::uniform_real_distribution<double> ud(0.0, 1.0);

  Vec w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) w[i] = 0.2 + ud(eng);
  w /= w.sum();
  WeightedSpace sp(w);
  const Vec one = Vec::Ones(dim);

  const Eigen::Index rmax = std::max<Eigen::Index>(1, dim / 3);
  const Eigen::Index r = 1 + static_cast<Eigen::Index>(ud(eng) * static_cast<double>(rmax));
  Mat q(dim, std::min(r, rmax));
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) q(i, j) = nd(eng);
    q.col(j).array() -= w.dot(q.col(j));
  }
  Projection p(q.sparseView(1e-300, 1.0), sp);
  const Mat pd = p.to_dense();
  const Mat pi = Mat::Identity(dim, dim) - one * w.transpose();
  const Mat ps = pd + one * w.transpose();
  const Mat comp_s = Mat::Identity(dim, dim) - ps;

  Mat k(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) k(i, j) = nd(eng);
  k = (k - k.transpose()).eval() / std::sqrt(static_cast<double>(dim));
  const Mat a0 = w.cwiseInverse().asDiagonal() * k;
  const Mat a1 = pi * a0 * pi;
  Mat a = a1 - pd * a1 * pd;

  Mat gmat(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) gmat(i, j) = nd(eng);
  Mat s0 = -(w.cwiseInverse().asDiagonal() * (gmat.transpose() * gmat));
  s0 *= (0.5 + 2.5 * ud(eng)) / weighted_norm(s0, sp);
  Mat s = comp_s * s0 * comp_s;

  return OperatorSet{sp, s.sparseView(1e-300, 1.0), a.sparseView(1e-300, 1.0), p};
}

std::string instance_hash(const OperatorSet& ops) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_sparse = [&](const SpMat& m) {
    SpMat c = m;
    c.makeCompressed();
    const Eigen::Index dims[2] = {c.rows(), c.cols()};
    mix(dims, sizeof dims);
    for (int k = 0; k < c.outerSize(); ++k)
      for (SpMat::InnerIterator it(c, k); it; ++it) {
        const Eigen::Index ij[2] = {it.row(), it.col()};
        const double v = it.value();
        mix(ij, sizeof ij);
        mix(&v, sizeof v);
      }
  };
  mix(ops.space.weights().data(), sizeof(double) * static_cast<std::size_t>(ops.space.dim()));
  mix_sparse(ops.S);
  mix_sparse(ops.A);
  mix_sparse(ops.P.basis());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hypocert::hypo
