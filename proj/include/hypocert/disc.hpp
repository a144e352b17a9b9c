#pragma once

#include "hypocert/hypo.hpp"
#include "hypocert/model.hpp"
#include "hypocert/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace hypocert::disc {

enum class GridMode { Torus, Box };

GridMode parse_mode(const std::string& s);
const char* to_string(GridMode m);

/// Tensor grid with n nodes per axis: the torus [0, 2π)^dim, or the box
/// [−X, X]^dim including both end points.
struct XGrid {
  GridMode mode = GridMode::Torus;
  int dim = 2;
  int n = 32;
  double half_width = 6.0;

  double h() const;
  Eigen::Index size() const;
  Vec node(Eigen::Index idx) const;
  /// Neighbor index along `axis` at offset ±1, or −1 outside the box.
  Eigen::Index shift(Eigen::Index idx, int axis, int offset) const;
  int coord(Eigen::Index idx, int axis) const;
};

XGrid torus_grid(int dim, int n);
XGrid box_grid(int dim, int n, double half_width);

/// Centered first difference along `axis` (one-sided second order at box edges).
SpMat diff1(const XGrid& g, int axis);
/// Second difference along `axis` (one-sided second order at box edges).
SpMat diff2(const XGrid& g, int axis);

/// Normalized μ-masses e^{−V}h^dim on the x-grid (half cells on box faces).
Vec x_masses(const model::Potential& pot, const XGrid& g);

/// μ-mass within 3h of the box boundary (0 on the torus).
double boundary_mass(const model::Potential& pot, const XGrid& g);

struct FiberDiscretization {
  hypo::OperatorSet ops;
  XGrid grid;
  int n_alpha = 32;
  Vec rho;     // normalized x-masses
  SpMat lift;  // x-function → phase function (constant in α)
  double boundary_mass = 0.0;
};

/// d = 2 fiber generator on x-grid × uniform angle grid. The drift is built
/// from a discrete stream function so the transport part is exactly
/// antisymmetric and divergence free on the torus.
FiberDiscretization discretize_fiber(const model::FiberModel& m, const XGrid& g, int n_alpha);

/// P A² P reduced to x-functions (n_x × n_x).
Mat discrete_PA2P(const FiberDiscretization& fd);

/// c (Δ − ∇V·∇) by centered differences.
SpMat x_generator(const model::Potential& pot, const XGrid& g, double c);

/// Symmetric weighted Dirichlet form Σ_edges e^{−V(mid)} (Fᵢ − Fⱼ)² h^{dim−2}/Z.
SpMat dirichlet_form(const model::Potential& pot, const XGrid& g);

struct PoincareResult {
  double lambda = 0.0;
  bool dense = true;
  int iterations = 0;
};

PoincareResult poincare_constant(const model::Potential& pot, const XGrid& g, Eigen::Index dense_limit = 4000);

struct EllipticProblem {
  model::Potential potential;
  XGrid grid;
  double c1 = 0.5;

  EllipticProblem(model::Potential pot, XGrid g, double c);
};

/// Solves u − c₁(Δu − ∇V·∇u) = g for mean-zero g; u is returned mean-zero.
Vec elliptic_solve(const EllipticProblem& prob, const Vec& g, double* residual = nullptr);

/// Random mean-zero trigonometric polynomial with |k|∞ ≤ 4 sampled on the grid.
/// Coefficients depend only on the engine, so the same draw can be evaluated on
/// different grids.
Vec random_smooth_function(const model::Potential& pot, const XGrid& g, Engine& eng);

struct N2Estimate {
  double value = 0.0;
  double hessian_ratio = 0.0;   // max ‖∇²u‖/‖g‖
  double gradient_ratio = 0.0;  // max ‖|∇V||∇u|‖/‖g‖
  int samples = 0;
};

N2Estimate estimate_N2(const model::FiberModel& m, const XGrid& g, int samples, std::uint64_t seed);

/// "rows cols nnz" header, then 1-based "row col value" lines.
void write_triplets(std::ostream& os, const SpMat& m);

}  // namespace hypocert::disc
