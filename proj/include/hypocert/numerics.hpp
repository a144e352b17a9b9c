#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hypocert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

/// A Monte Carlo or quadrature value with its standard error (0 when exact).
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Sample mean and standard error of the mean.
Estimate mean_se(std::span<const double> xs);

/// Unbiased sample variance; 0 for fewer than two samples.
double sample_variance(std::span<const double> xs);

/// Two-sample Kolmogorov–Smirnov statistic sup |F_a − F_b|.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Quantile of Student's t distribution with `dof` degrees of freedom.
double student_t_quantile(double p, double dof);

/// y = Op x. Operators are passed around matrix-free.
using LinOp = std::function<void(const Vec& x, Vec& y)>;

/// Options for the weighted Lanczos solver.
struct LanczosOptions {
  int max_iter = 400;
  double tol = 1e-11;
  std::uint64_t seed = 7;
  bool largest = false;
};

struct LanczosResult {
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Extreme eigenvalue of an operator that is self-adjoint in ⟨x,y⟩ = Σ wᵢxᵢyᵢ.
///
/// `deflate` (optional) is applied to every Krylov vector and must be the
/// W-orthogonal projector onto the subspace of interest, so the solver stays
/// inside it. Full reorthogonalization keeps the basis clean; this is only
/// meant for problems where a few hundred steps suffice.
LanczosResult weighted_lanczos(const LinOp& op, const Vec& weights, const LinOp& deflate,
                               const LanczosOptions& opts);

/// Largest singular value of a W-weighted operator by power iteration on Op*Op.
double weighted_power_norm(const LinOp& op, const LinOp& adjoint, const Vec& weights,
                           int max_iter = 500, double tol = 1e-10, std::uint64_t seed = 11);

/// ⟨x,y⟩_w.
inline double wdot(const Vec& w, const Vec& x, const Vec& y) {
  return (w.array() * x.array() * y.array()).sum();
}

inline double wnorm(const Vec& w, const Vec& x) { return std::sqrt(wdot(w, x, x)); }

/// Largest eigenvalue of a symmetric dense matrix.
double sym_max_eig(const Mat& m);

/// Smallest eigenvalue of a symmetric dense matrix.
double sym_min_eig(const Mat& m);

/// Largest absolute row sum, an upper bound for the spectral radius.
double gershgorin_radius(const SpMat& m);

}  // namespace hypocert
