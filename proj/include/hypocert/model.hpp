#pragma once

#include "hypocert/numerics.hpp"
#include "hypocert/sphere.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hypocert::model {

/// Confining potential V, normalized so that e^{−V} is a probability density
/// whenever that is possible (`normalized == true`).
struct Potential {
  std::string family = "custom";
  std::vector<double> params;
  int dim = 0;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;  // optional outside C3/A3/elliptic use
  // Allocation-free gradient used by the SDE integrator when present.
  std::function<void(const double* x, double* g)> gradient_raw;
  double log_normalizer = 0.0;
  bool normalized = false;
  bool periodic = false;
  std::optional<double> poincare;
  std::optional<double> hessian_growth_c;
};

/// V(x) = Σ aᵢxᵢ² + Σ ½log(π/aᵢ). Poincaré constant 2·min aᵢ.
Potential quadratic(std::vector<double> a);
/// V(x) = a Σ (1 − cos xᵢ) + log-normalizer on the torus [0, 2π)ᵈ.
/// The Poincaré constant is left empty; disc::poincare_constant measures it.
Potential torus(int d, double a);
/// V ≡ 0 on ℝᵈ. Not normalizable; used for free transport experiments.
Potential free(int d);
/// V(x) = g·x on ℝᵈ. Not normalizable; used to probe the growth checks.
Potential linear(const Vec& g);

struct FiberModel {
  int d = 2;
  double sigma = 1.0;
  Potential potential;

  FiberModel() = default;
  FiberModel(int d_, double sigma_, Potential pot);
};

struct PhasePoint {
  Vec x;
  sphere::UnitVector omega;
};

/// Test function f(x, ω) with ambient derivatives in ω.
struct PhaseFunction {
  std::function<double(const Vec&, const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> grad_x;
  std::function<Vec(const Vec&, const Vec&)> grad_omega;
  std::function<Mat(const Vec&, const Vec&)> hess_omega;  // optional
  // Support of x ↦ f(x, ·) is contained in the closed ball of this radius.
  std::optional<double> support_radius;
  Vec support_center;
};

/// f(x, ω) = c.
PhaseFunction constant(int d, double c);
/// f(x, ω) = ωₙ.
PhaseFunction omega_coordinate(int d, int n);
/// f(x, ω) = xₙ.
PhaseFunction x_coordinate(int d, int n);
/// Smooth bump in x times ωₙ (or times 1 when `omega_index < 0`).
PhaseFunction bump(const Vec& center, double radius, int omega_index);

double phi(const FiberModel& m, const Vec& x, const sphere::UnitVector& w);
double apply_A(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p);
double apply_S(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p);
/// S f − A f.
double apply_L(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p);
/// ω·∇ₓf − grad_S Φ·grad_S f + (σ²/2)Δ_S f written out directly.
double apply_L_direct(const FiberModel& m, const PhaseFunction& f, const PhasePoint& p);

struct AnalyticConstants {
  double lambda_m = 0.0;
  double lambda_M = 0.0;
  double n1 = 0.0;
};

/// Throws std::invalid_argument if the potential carries no Poincaré constant.
AnalyticConstants analytic_constants(const FiberModel& m);

/// Uniform tensor grid of probe points on [lo, hi]ᵈ.
std::vector<Vec> probe_grid(int d, double lo, double hi, int n_per_axis);

/// max over probes of |∇²V|_F / (1 + |∇V|).
double check_C3(const Potential& pot, const std::vector<Vec>& probes);

struct A3Report {
  double c3 = 0.0;
  double c2 = 0.0;  // smallest c₂ that works on the probes
};

/// max over probes of ΔV − c₃|∇V|². Requires c₃ ∈ [0, 1/2).
A3Report check_A3(const Potential& pot, const std::vector<Vec>& probes, double c3);

/// Trapezoid tensor quadrature on [lo, hi]ᵈ with masses e^{−V}hᵈ.
struct XQuadrature {
  Mat nodes;  // d × n
  Vec weights;
  double lo = 0.0;
  double hi = 0.0;
};

XQuadrature x_quadrature(const Potential& pot, double lo, double hi, int n_per_axis);

/// Quadrature value of ∫ Lf dμ. Throws if the support of f leaves the box.
double check_invariance(const FiberModel& m, const PhaseFunction& f, const XQuadrature& xq,
                        const sphere::SphereQuadrature& sq);

}  // namespace hypocert::model
