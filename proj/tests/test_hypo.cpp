#include "hypocert/hypo.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

using namespace hypocert;
using namespace hypocert::hypo;

using oracle::brute_force_kappa2;
using oracle::expm_oracle;
using oracle::rate_oracle;

namespace {

// Similarity to the Euclidean picture: M ↦ W^{1/2} M W^{−1/2}.
Mat euclid(const Mat& m, const Vec& w) {
  const Vec s = w.cwiseSqrt();
  return s.asDiagonal() * m * s.cwiseInverse().asDiagonal();
}

double oracle_norm(const Mat& m, const Vec& w) {
  return Eigen::JacobiSVD<Mat>(euclid(m, w)).singularValues()[0];
}

// Orthonormal basis (Euclidean picture) of the range of a weighted projector.
Mat range_basis(const Mat& proj, const Vec& w) {
  Eigen::JacobiSVD<Mat> svd(euclid(proj, w), Eigen::ComputeThinU);
  Eigen::Index r = 0;
  while (r < svd.singularValues().size() && svd.singularValues()[r] > 1e-8) ++r;
  return svd.matrixU().leftCols(r);
}

double min_eig(const Mat& m) {
  return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (m + m.transpose())).eigenvalues()[0];
}

struct Dense {
  Vec w;
  Mat S, A, P, PS, I;
};

Dense dense(const OperatorSet& ops) {
  Dense d;
  d.w = ops.space.weights();
  const Eigen::Index n = d.w.size();
  d.S = Mat(ops.S);
  d.A = Mat(ops.A);
  d.P = ops.P.to_dense();
  d.PS = d.P + Vec::Ones(n) * d.w.transpose();
  d.I = Mat::Identity(n, n);
  return d;
}

Mat oracle_B(const Dense& d) {
  const Mat t = d.A * d.P;
  const Mat ts = d.w.cwiseInverse().asDiagonal() * t.transpose() * d.w.asDiagonal();
  return (d.I + ts * t).partialPivLu().solve(ts);
}

Vec mean_zero(const Vec& f, const Vec& w) { return (f.array() - w.dot(f)).matrix(); }

}  // namespace

TEST_CASE("weighted adjoint") {
  std::mt19937_64 eng(3);
  const Eigen::Index n = 9;
  Mat m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) m.col(j) = oracle::random_vec(eng, n);

  SUBCASE("uniform weights give the transpose") {
    const WeightedSpace sp(Vec::Constant(n, 1.0 / n));
    CHECK((weighted_adjoint(m, sp) - m.transpose()).norm() < 1e-13);
  }
  SUBCASE("inner product identity and involution") {
    Vec w = oracle::random_vec(eng, n).cwiseAbs().array() + 0.1;
    w /= w.sum();
    const WeightedSpace sp(w);
    const Mat adj = weighted_adjoint(m, sp);
    CHECK((weighted_adjoint(adj, sp) - m).norm() < 1e-12);
    for (int rep = 0; rep < 5; ++rep) {
      const Vec f = oracle::random_vec(eng, n), g = oracle::random_vec(eng, n);
      CHECK(std::abs(sp.dot(m * f, g) - sp.dot(f, adj * g)) < 1e-12);
    }
    const SpMat ms = m.sparseView();
    CHECK((Mat(weighted_adjoint(ms, sp)) - adj).norm() < 1e-12);
    CHECK(weighted_norm(m, sp) == doctest::Approx(oracle_norm(m, w)).epsilon(1e-9));
  }
}

TEST_CASE("weighted space rejects bad weights") {
  CHECK_THROWS(WeightedSpace(Vec::Constant(3, 0.5)));
  Vec w(3);
  w << 0.5, 0.6, -0.1;
  CHECK_THROWS(WeightedSpace(w));
}

TEST_CASE("random admissible instances satisfy the structure exactly") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto ops = random_admissible_instance(12 + 3 * static_cast<Eigen::Index>(seed), seed);
    const auto rep = check_structure(ops);
    CAPTURE(seed);
    CHECK(rep.passed);
    for (const auto& it : rep.items) {
      CAPTURE(it.name);
      CHECK(it.violation < 1e-12);
    }
    CHECK(rep.pap_norm < 1e-12);
    CHECK(rep.dissipativity <= 1e-10);
  }
}

TEST_CASE("symmetric noise in A is detected") {
  auto ops = random_admissible_instance(20, 4);
  const Dense d = dense(ops);
  std::mt19937_64 eng(9);
  Mat k(20, 20);
  for (int j = 0; j < 20; ++j) k.col(j) = oracle::random_vec(eng, 20);
  // W-symmetric perturbation W⁻¹(K + Kᵀ) scaled to weighted norm 1e−3.
  Mat noise = d.w.cwiseInverse().asDiagonal() * (k + k.transpose());
  noise *= 1e-3 / oracle_norm(noise, d.w);
  ops.A = (d.A + noise).sparseView();
  const auto rep = check_structure(ops);
  CHECK_FALSE(rep.passed);
  const auto* item = rep.find("A_antisymmetric");
  REQUIRE(item != nullptr);
  CHECK_FALSE(item->passed);
  CHECK(item->violation == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("projection from a dense matrix records its defects") {
  const auto ops = random_admissible_instance(15, 2);
  const WeightedSpace& sp = ops.space;
  const Mat p = ops.P.to_dense();
  const auto good = Projection::from_matrix(p, sp);
  CHECK(good.rank() == ops.P.rank());
  CHECK(good.symmetry_violation < 1e-10);
  CHECK(good.idempotency_violation < 1e-10);
  CHECK((good.to_dense() - p).norm() < 1e-9);

  Mat skew = p;
  skew(0, 1) += 0.05;
  const auto bad = Projection::from_matrix(skew, sp);
  CHECK(bad.symmetry_violation > 1e-3);

  // A projector whose range contains the constants.
  const Mat one_proj = p + Vec::Ones(15) * sp.weights().transpose();
  const auto leaky = Projection::from_matrix(one_proj, sp);
  CHECK(leaky.mean_violation > 0.5);
}

TEST_CASE("B matches its defining solve and obeys the norm bounds") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto ops = random_admissible_instance(18, seed);
    const Dense d = dense(ops);
    const AuxOperator b(ops);
    const Mat bd = b.to_dense();
    CAPTURE(seed);
    CHECK((bd - oracle_B(d)).norm() < 1e-10);
    CHECK((d.P * bd - bd).norm() < 1e-10);
    CHECK((d.S * bd).norm() < 1e-10);

    std::mt19937_64 eng(seed);
    const WeightedSpace& sp = ops.space;
    for (int rep = 0; rep < 50; ++rep) {
      const Vec f = oracle::random_vec(eng, 18);
      const Vec bf = b.apply(f);
      CHECK((bf - bd * f).norm() < 1e-10);
      const double perp = sp.norm(f - d.P * f);
      CHECK(sp.norm(bf) <= 0.5 * perp + 1e-10);
      CHECK(sp.norm(d.A * d.P * bf) <= perp + 1e-10);
      CHECK((ops.P.basis() * b.coefficients(f) - bf).norm() < 1e-10);
    }
    // Range of P is annihilated.
    const Vec pf = d.P * oracle::random_vec(eng, 18);
    CHECK(sp.norm(b.apply(pf)) < 1e-12);
  }
}

TEST_CASE("B vanishes without transport") {
  auto ops = random_admissible_instance(10, 5);
  ops.A = SpMat(10, 10);
  const AuxOperator b(ops);
  CHECK(b.to_dense().norm() == 0.0);
}

TEST_CASE("measured constants agree with dense eigen oracles") {
  for (std::uint64_t seed = 2; seed <= 5; ++seed) {
    const auto ops = random_admissible_instance(21, seed);
    const Dense d = dense(ops);
    const AuxOperator b(ops);
    const auto mc = measure_constants(ops, b);
    CAPTURE(seed);
    REQUIRE(mc.lambda_m);
    REQUIRE(mc.lambda_M);

    const Mat u_perp = range_basis(d.I - d.PS, d.w);
    CHECK(*mc.lambda_m == doctest::Approx(min_eig(u_perp.transpose() * euclid(-d.S, d.w) * u_perp)).epsilon(1e-8));

    const Mat u_par = range_basis(d.P, d.w);
    const Mat au = euclid(d.A, d.w) * u_par;
    CHECK(*mc.lambda_M == doctest::Approx(min_eig(au.transpose() * au)).epsilon(1e-8));

    const Mat bd = oracle_B(d);
    CHECK(mc.n1_ps == doctest::Approx(oracle_norm(bd * d.S * (d.I - d.PS), d.w)).epsilon(1e-7));
    CHECK(mc.n2_p == doctest::Approx(oracle_norm(bd * d.A * (d.I - d.P), d.w)).epsilon(1e-7));
    // Relative to the larger norm ‖(I−P)f‖ the constants can only shrink.
    CHECK(mc.n1_p <= mc.n1_ps + 1e-9);
    CHECK(mc.n2_ps >= mc.n2_p - 1e-9);

    const auto iter = measure_lambda_m(ops, {.force_iterative = true});
    REQUIRE(iter);
    CHECK(*iter == doctest::Approx(*mc.lambda_m).epsilon(1e-7));
  }
}

TEST_CASE("scaling S scales the microscopic constants") {
  auto ops = random_admissible_instance(16, 7);
  const auto base = measure_constants(ops, AuxOperator(ops));
  const double t = 2.5;
  ops.S = ops.S * t;
  const auto scaled = measure_constants(ops, AuxOperator(ops));
  CHECK(*scaled.lambda_m == doctest::Approx(t * *base.lambda_m).epsilon(1e-9));
  CHECK(scaled.n1_ps == doctest::Approx(t * base.n1_ps).epsilon(1e-7));
  CHECK(*scaled.lambda_M == doctest::Approx(*base.lambda_M).epsilon(1e-9));
}

TEST_CASE("entropy functional") {
  const auto ops = random_admissible_instance(14, 3);
  const AuxOperator b(ops);
  const WeightedSpace& sp = ops.space;
  std::mt19937_64 eng(13);
  for (int rep = 0; rep < 30; ++rep) {
    const Vec f = oracle::random_vec(eng, 14);
    const double n2 = sp.dot(f, f);
    CHECK(entropy(b, 0.0, f, sp) == doctest::Approx(0.5 * n2).epsilon(1e-14));
    for (double eps : {0.1, 0.5, 0.9}) {
      const double h = entropy(b, eps, f, sp);
      CHECK(h >= (1 - eps) / 2 * n2 - 1e-12);
      CHECK(h <= (1 + eps) / 2 * n2 + 1e-12);
    }
  }
}

TEST_CASE("entropy dissipation along the matrix flow") {
  const auto ops = random_admissible_instance(16, 6);
  const Dense d = dense(ops);
  const AuxOperator b(ops);
  const WeightedSpace& sp = ops.space;
  const Mat l = d.S - d.A;
  std::mt19937_64 eng(21);
  const Vec f0 = mean_zero(oracle::random_vec(eng, 16), d.w);
  const double eps = 0.3, h = 1e-4;
  for (double t : {0.0, 0.4, 1.3}) {
    auto H = [&](double s) { return entropy(b, eps, expm_oracle(l, s) * f0, sp); };
    const double fd = -(-H(t + 2 * h) + 8 * H(t + h) - 8 * H(t - h) + H(t - 2 * h)) / (12 * h);
    const auto di = dissipation_terms(ops, b, expm_oracle(l, t) * f0);
    const double expect = di.i1 - eps * di.i2 - eps * di.i3;
    CAPTURE(t);
    CHECK(std::abs(fd - expect) <= 1e-6 * std::abs(expect));
  }
}

TEST_CASE("dissipation term bounds with measured constants") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto ops = random_admissible_instance(20, seed);
    const Dense d = dense(ops);
    const AuxOperator b(ops);
    const auto mc = measure_constants(ops, b);
    const WeightedSpace& sp = ops.space;
    const double lm = *mc.lambda_m, lM = *mc.lambda_M;
    std::mt19937_64 eng(100 + seed);
    for (int rep = 0; rep < 40; ++rep) {
      const Vec f = mean_zero(oracle::random_vec(eng, 20), d.w);
      const double perp = sp.norm(f - d.P * f), par = sp.norm(d.P * f);
      const auto di = dissipation_terms(ops, b, f);
      CHECK(di.i3 <= perp * sp.norm(f) + 1e-10);
      CHECK(di.i1 >= lm * perp * perp - 1e-10);
      CHECK(di.i2 <= -(lM / (1 + lM)) * par * par + (mc.n1_ps + mc.n2_p) * perp * par + 1e-10);
    }
  }
}

TEST_CASE("rate objective") {
  CHECK(rate_objective(1.0, 0.5, 0.25, 0.3, 0.2, 0.0) == 0.0);
  for (double eps : {0.01, 0.2, 0.7})
    for (double delta : {0.05, 0.1, 0.3})
      CHECK(rate_objective(0.5, 1.0, 0.25, 0.4, delta, eps) ==
            doctest::Approx(rate_oracle(0.5, 1.0, 0.25, 0.4, delta, eps)).epsilon(1e-14));
}

TEST_CASE("optimized rate matches an exhaustive search") {
  const double cases[][4] = {{0.5, 1.0, 0.25, 0.5}, {1.0, 0.2, 0.25, 1.0}, {0.05, 3.0, 0.1, 0.1}, {2.0, 0.5, 1.5, 2.0}};
  for (const auto& c : cases) {
    const auto r = optimize_rate(c[0], c[1], c[2], c[3]);
    CAPTURE(c[0]);
    CAPTURE(c[1]);
    CHECK(std::abs(r.kappa2 - brute_force_kappa2(c[0], c[1], c[2], c[3])) <= 1e-6);
    CHECK(r.eps > 0.0);
    CHECK(r.eps < 1.0);
    CHECK(r.delta > 0.0);
    CHECK(r.c_perp > 0.0);
    CHECK(r.c_par > 0.0);
    CHECK(r.kappa == doctest::Approx(std::min(r.c_perp, r.c_par)).epsilon(1e-12));
    CHECK(r.kappa1 == doctest::Approx(std::sqrt((1 + r.eps) / (1 - r.eps))).epsilon(1e-12));
    CHECK(r.kappa2 == doctest::Approx(r.kappa / (1 + r.eps)).epsilon(1e-12));
  }
}

TEST_CASE("optimized rate is monotone in the microscopic constant") {
  double prev = 0.0;
  for (double lm = 0.05; lm <= 4.0; lm *= 1.3) {
    const double k = optimize_rate(lm, 0.7, 0.3, 0.6).kappa2;
    CHECK(k >= prev - 1e-9);
    prev = k;
  }
}

TEST_CASE("optimize_rate rejects nonpositive constants") {
  CHECK_THROWS_AS(optimize_rate(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(optimize_rate(1.0, -1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(optimize_rate(1.0, 1.0, -0.1, 1.0), std::invalid_argument);
  CHECK_NOTHROW(optimize_rate(1.0, 1.0, 0.0, 0.0));
}

TEST_CASE("certificate keeps the best projection pairing") {
  MeasuredConstants mc;
  mc.lambda_m = 0.5;
  mc.lambda_M = 1.0;
  mc.n1_ps = 0.25;
  mc.n1_p = 0.2;
  mc.n2_p = 0.6;
  mc.n2_ps = 0.9;
  const auto cert = certificate_from(mc);
  CHECK(cert.n1 == 0.2);
  CHECK(cert.n2 == 0.6);
  CHECK(cert.rate.kappa2 == doctest::Approx(optimize_rate(0.5, 1.0, 0.2, 0.6).kappa2));

  MeasuredConstants missing = mc;
  missing.lambda_M.reset();
  CHECK_THROWS(certificate_from(missing));
}

TEST_CASE("propagation agrees with the exponential oracle") {
  const auto ops = random_admissible_instance(24, 8);
  const Dense d = dense(ops);
  const Mat l = d.S - d.A;
  std::mt19937_64 eng(31);
  Mat f0(24, 3);
  for (int j = 0; j < 3; ++j) f0.col(j) = oracle::random_vec(eng, 24);
  const std::vector<double> times{0.0, 0.5, 2.0, 7.5};

  const auto dense_out = propagate(ops, f0, times);
  PropagateOptions rk;
  rk.dense_limit = 0;
  int halvings = 0;
  const auto rk_out = propagate(ops, f0, times, rk, &halvings);
  CHECK(halvings > 0);
  REQUIRE(dense_out.size() == times.size());
  REQUIRE(rk_out.size() == times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Mat ref = expm_oracle(l, times[k]) * f0;
    CAPTURE(times[k]);
    CHECK((dense_out[k] - ref).norm() <= 1e-10 * (1 + ref.norm()));
    CHECK((rk_out[k] - ref).norm() <= 1e-7 * f0.norm());
  }
  CHECK_THROWS(propagate(ops, f0, {1.0, 0.5}));
  CHECK_THROWS(propagate(ops, f0, {-1.0}));
}

TEST_CASE("decay certification on admissible instances") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto ops = random_admissible_instance(20, seed);
    const AuxOperator b(ops);
    const auto cert = certificate_from(measure_constants(ops, b));
    std::mt19937_64 eng(seed);
    Mat g(20, 5);
    for (int j = 0; j < 5; ++j) g.col(j) = oracle::random_vec(eng, 20);
    std::vector<double> times;
    for (int k = 0; k < 40; ++k) times.push_back(0.1 * std::pow(100.0, k / 39.0));
    const auto rep = certify_decay(ops, cert, g, times);
    CAPTURE(seed);
    CHECK(rep.passed);
    CHECK(rep.max_ratio <= 1.0 + 1e-8);
    CHECK(rep.times == times);
  }
}

TEST_CASE("constant data decays trivially") {
  const auto ops = random_admissible_instance(12, 2);
  const auto cert = certificate_from(measure_constants(ops, AuxOperator(ops)));
  const auto rep = certify_decay(ops, cert, Mat::Constant(12, 1, 3.0), {0.5, 1.0});
  CHECK(rep.passed);
  CHECK(rep.max_ratio == 0.0);
}

TEST_CASE("instance hash") {
  const auto a = random_admissible_instance(10, 1);
  const auto b = random_admissible_instance(10, 1);
  const auto c = random_admissible_instance(10, 2);
  CHECK(instance_hash(a) == instance_hash(b));
  CHECK(instance_hash(a) != instance_hash(c));
  CHECK(instance_hash(a).size() == 16);
  auto tweaked = a;
  tweaked.S.coeffRef(0, 0) += 1e-15;
  CHECK(instance_hash(tweaked) != instance_hash(a));
}
