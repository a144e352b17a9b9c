#pragma once

#include "hypocert/numerics.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hypocert::hypo {

/// Discrete L²(μ): ⟨f, g⟩ = Σ wᵢ fᵢ gᵢ with Σ wᵢ = 1.
class WeightedSpace {
 public:
  explicit WeightedSpace(Vec weights);

  Eigen::Index dim() const { return w_.size(); }
  const Vec& weights() const { return w_; }
  Vec unit() const { return Vec::Ones(w_.size()); }
  double dot(const Vec& a, const Vec& b) const { return wdot(w_, a, b); }
  double norm(const Vec& a) const { return wnorm(w_, a); }
  double mean(const Vec& a) const { return w_.dot(a); }

 private:
  Vec w_;
};

/// W⁻¹MᵀW, the adjoint in the weighted inner product.
Mat weighted_adjoint(const Mat& m, const WeightedSpace& sp);
SpMat weighted_adjoint(const SpMat& m, const WeightedSpace& sp);

/// Weighted operator norm of a dense matrix.
double weighted_norm(const Mat& m, const WeightedSpace& sp);

/// Orthogonal projection P onto span(Q) with Q ⊥ 1. P_S = P + 1⟨·,1⟩.
class Projection {
 public:
  Projection(SpMat basis, const WeightedSpace& sp);
  /// Extracts a basis from a dense projector, recording how far it is from
  /// being a weighted-orthogonal projection.
  static Projection from_matrix(const Mat& p, const WeightedSpace& sp);

  Vec apply(const Vec& f) const;
  Vec apply_S(const Vec& f) const;
  Mat to_dense() const;

  Eigen::Index rank() const { return q_.cols(); }
  const SpMat& basis() const { return q_; }
  const Mat& gram() const { return g_; }
  const Eigen::LLT<Mat>& gram_llt() const { return llt_; }
  /// Coefficients c with P f = Q c.
  Vec coefficients(const Vec& f) const;

  double symmetry_violation = 0.0;
  double idempotency_violation = 0.0;
  double mean_violation = 0.0;

 private:
  SpMat q_;
  Vec w_;
  Mat g_;
  Eigen::LLT<Mat> llt_;
};

struct OperatorSet {
  WeightedSpace space;
  SpMat S;
  SpMat A;
  Projection P;

  SpMat L() const { return S - A; }
};

struct CheckItem {
  std::string name;
  double violation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct StructureReport {
  std::vector<CheckItem> items;
  bool passed = true;
  double pap_norm = 0.0;
  double dissipativity = 0.0;  // largest eigenvalue of the symmetric part of L
  const CheckItem* find(const std::string& name) const;
};

/// Violation norms of the data conditions and of PAP = 0.
StructureReport check_structure(const OperatorSet& ops, double tol = 1e-10);

/// B = (I + (AP)*AP)⁻¹(AP)*, kept in factored low-rank form Q (G+M)⁻¹ (AQ)ᵀW.
class AuxOperator {
 public:
  explicit AuxOperator(const OperatorSet& ops);

  Vec apply(const Vec& f) const;
  /// Coefficients c with B f = Q c.
  Vec coefficients(const Vec& f) const;
  Mat to_dense() const;

  const SpMat& aq() const { return aq_; }
  const SpMat& r() const { return r_; }
  const Mat& m() const { return m_; }
  const Eigen::LLT<Mat>& gm_llt() const { return gm_; }
  double condition_number() const { return cond_; }

 private:
  const OperatorSet* ops_;
  SpMat aq_;
  SpMat r_;
  Mat m_;
  Eigen::LLT<Mat> gm_;
  double cond_ = 1.0;
};

AuxOperator build_B(const OperatorSet& ops);

struct MeasuredConstants {
  std::optional<double> lambda_m;
  std::optional<double> lambda_M;
  double n1_ps = 0.0;  // relative to ‖(I − P_S)f‖
  double n1_p = 0.0;   // relative to ‖(I − P)f‖
  double n2_p = 0.0;
  double n2_ps = 0.0;
};

struct MeasureOptions {
  Eigen::Index dense_limit = 1500;  // above this, shift-invert Lanczos for Λ_m
  bool force_iterative = false;
};

MeasuredConstants measure_constants(const OperatorSet& ops, const AuxOperator& b, const MeasureOptions& opts = {});

/// Λ_m alone (smallest eigenvalue of −S on range(I − P_S)).
std::optional<double> measure_lambda_m(const OperatorSet& ops, const MeasureOptions& opts = {});

/// ‖B Z Π‖ with Π = I − P (use_ps false) or I − P_S (use_ps true).
double aux_norm(const OperatorSet& ops, const AuxOperator& b, const SpMat& z, bool use_ps);

double entropy(const AuxOperator& b, double eps, const Vec& f, const WeightedSpace& sp);

struct Dissipation {
  double i1 = 0.0;
  double i2 = 0.0;
  double i3 = 0.0;
};

Dissipation dissipation_terms(const OperatorSet& ops, const AuxOperator& b, const Vec& f);

struct RateResult {
  double delta = 0.0;
  double eps = 0.0;
  double kappa = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double c_perp = 0.0;
  double c_par = 0.0;
};

/// min(c_⊥, c_∥)/(1 + ε) at a given (δ, ε); may be negative.
double rate_objective(double lm, double lM, double n1, double n2, double delta, double eps);

/// Maximizes κ₂ over δ > 0, ε ∈ (0, 1). Throws std::invalid_argument for
/// nonpositive constants and std::runtime_error if no feasible point is found.
RateResult optimize_rate(double lm, double lM, double n1, double n2);

enum class Provenance { Analytic, Measured, Elliptic, User };
const char* to_string(Provenance p);

struct HypoCertificate {
  double lambda_m = 0.0;
  double lambda_M = 0.0;
  double n1 = 0.0;
  double n2 = 0.0;
  Provenance lambda_m_src = Provenance::Measured;
  Provenance lambda_M_src = Provenance::Measured;
  Provenance n1_src = Provenance::Measured;
  Provenance n2_src = Provenance::Measured;
  std::string n1_projection = "P_S";
  std::string n2_projection = "P";
  RateResult rate;
};

/// Optimizes every (N₁, N₂) projection pairing and keeps the best κ₂.
HypoCertificate certificate_from(const MeasuredConstants& mc);

struct DecayReport {
  std::vector<double> times;
  std::vector<double> ratios;  // ‖f(t)‖ / (κ₁ e^{−κ₂t} ‖f(0)‖)
  double max_ratio = 0.0;
  bool passed = false;
  int step_halvings = 0;
};

struct PropagateOptions {
  Eigen::Index dense_limit = 2000;  // matrix exponential up to here, RK4 beyond
  double max_rk_step = 0.02;
  double rk_tol = 1e-9;  // step-doubling difference allowed on the probe horizon
};

/// e^{tL}F for each requested time (times must be nondecreasing and ≥ 0).
std::vector<Mat> propagate(const OperatorSet& ops, const Mat& f0, const std::vector<double>& times,
                           const PropagateOptions& opts = {}, int* halvings = nullptr);

DecayReport certify_decay(const OperatorSet& ops, const HypoCertificate& cert, const Mat& g,
                          const std::vector<double>& times, double slack = 1e-8, const PropagateOptions& opts = {});

/// Random instance satisfying (H1) and the data conditions exactly.
OperatorSet random_admissible_instance(Eigen::Index dim, std::uint64_t seed);

/// FNV-1a digest of weights, S, A and the projection basis.
std::string instance_hash(const OperatorSet& ops);

}  // namespace hypocert::hypo
