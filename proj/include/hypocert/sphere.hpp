#pragma once

#include "hypocert/numerics.hpp"
#include "hypocert/rng.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hypocert::sphere {

/// Point on S^{d-1} ⊂ ℝᵈ. Normalized on construction.
class UnitVector {
 public:
  explicit UnitVector(Vec coords);
  static UnitVector from_angle(double alpha);
  static UnitVector basis(int d, int n);

  const Vec& coords() const { return v_; }
  int dim() const { return static_cast<int>(v_.size()); }
  double operator[](int i) const { return v_[i]; }

 private:
  Vec v_;
};

/// Smooth ambient extension f̃ of a function on the sphere.
struct AmbientFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;  // optional
};

/// Sparse multivariate polynomial with exact derivatives.
class Polynomial {
 public:
  explicit Polynomial(int d) : d_(d) {}
  Polynomial& add(double coef, std::vector<int> exps);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  int degree() const;
  int dim() const { return d_; }
  AmbientFunction function() const;

 private:
  struct Term {
    double coef;
    std::vector<int> exps;
  };
  int d_;
  std::vector<Term> terms_;
};

AmbientFunction linear_function(const Vec& z);
AmbientFunction constant_function(int d, double c);

enum class QuadKind { AngleGrid, MonteCarlo };

struct SphereQuadrature {
  Mat nodes;  // d × n, unit columns
  Vec weights;
  QuadKind kind = QuadKind::AngleGrid;

  int dim() const { return static_cast<int>(nodes.rows()); }
  Eigen::Index size() const { return nodes.cols(); }
};

/// Uniform grid α_k = 2πk/n on the circle, weights 1/n.
SphereQuadrature angle_grid(int n);
/// n uniform draws on S^{d−1}, weights 1/n.
SphereQuadrature monte_carlo(int d, Eigen::Index n, std::uint64_t seed);

/// Uniform direction from normalized Gaussians.
Vec random_unit_vector(int d, Engine& eng);

/// Quadrature value; for Monte Carlo the SE is the sample standard error.
Estimate integrate(const SphereQuadrature& q, const std::function<double(const Vec&)>& f);

Vec project_tangent(const UnitVector& w, const Vec& v);
Vec spherical_gradient(const AmbientFunction& f, const UnitVector& w);

/// Δ_S f = Δf̃ − ωᵀ∇²f̃ ω − (d−1) ω·∇f̃.
double laplace_beltrami(const AmbientFunction& f, const UnitVector& w);
/// Σₙ Sₙ(Sₙ f) with Sₙ = (eₙ − ωₙω)·∇, differentiated analytically.
double laplace_beltrami_nested(const AmbientFunction& f, const UnitVector& w);

Estimate sphere_moment_linear(const Vec& z, const SphereQuadrature& q);
Estimate sphere_moment_quadratic(const Mat& b, const SphereQuadrature& q);
Estimate sphere_moment_bilinear(const Vec& z1, const Vec& z2, const SphereQuadrature& q);

struct IdentityCheck {
  std::string name;
  double violation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

enum class Fault { None, SignFlip };

/// Moment, Laplace–Beltrami, Green and gradient-pairing identities on `q`.
/// Exact quadratures use tolerance `exact_tol`; Monte Carlo uses 3 SE.
std::vector<IdentityCheck> identity_suite(const SphereQuadrature& q, Fault fault = Fault::None,
                                          double exact_tol = 1e-8);

}  // namespace hypocert::sphere
