#pragma once

#include "hypocert/model.hpp"
#include "hypocert/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace hypocert::sampler {

using model::PhasePoint;

sphere::UnitVector sample_sphere_uniform(int d, Engine& eng);

struct MalaOptions {
  double step = 0.1;  // initial step, adapted during burn-in
  int burn_in = 2000;
  int thin = 5;
  double target_accept = 0.574;
};

struct EquilibriumSample {
  Mat x;  // d × n
  double acceptance = 1.0;
  bool direct = true;  // exact Gaussian draws, no chain
  bool acceptance_ok = true;  // acceptance within [0.2, 0.8]
};

/// n draws from e^{−V}dx. Quadratic potentials are sampled exactly,
/// everything else by a MALA chain (wrapped to [0, 2π) on the torus).
EquilibriumSample sample_equilibrium_x(const model::Potential& pot, Eigen::Index n, Engine& eng,
                                       const MalaOptions& opts = {}, bool force_mala = false);

/// n draws (x, ω) from μ = e^{−V}dx ⊗ ν.
std::vector<PhasePoint> sample_equilibrium(const model::FiberModel& m, Eigen::Index n, Engine& eng);

struct SdeConfig {
  double dt = 1e-3;
  long steps = 1000;
  std::uint64_t seed = 1;
  long stride = 1;
};

/// True when dt·σ² exceeds the recommended 0.1.
bool step_size_warning(const model::FiberModel& m, double dt);

/// One projected Euler step; throws if the pre-normalization velocity collapses.
PhasePoint sde_step(const model::FiberModel& m, const PhasePoint& p, double dt, Engine& eng);

/// Same step with the Gaussian increment supplied by the caller.
PhasePoint sde_step_with(const model::FiberModel& m, const PhasePoint& p, double dt, const Vec& dw);

/// Allocation-free projected Euler stepping on raw (x, ω) buffers.
class Integrator {
 public:
  Integrator(const model::FiberModel& m, double dt);

  /// Advances (x, ω) in place by one step.
  void step(double* x, double* w, Engine& eng);
  void advance(double* x, double* w, long n, Engine& eng) {
    for (long k = 0; k < n; ++k) step(x, w, eng);
  }
  double dt() const { return dt_; }

 private:
  const model::FiberModel& m_;
  double dt_;
  double sqdt_;
  std::vector<double> g_, dw_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> states;
};

/// Iterates sde_step from p0 using stream (cfg.seed, path_id).
Trajectory simulate(const model::FiberModel& m, const PhasePoint& p0, const SdeConfig& cfg,
                    std::uint64_t path_id = 0);

/// Columns t, x_1..x_d, omega_1..omega_d.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

}  // namespace hypocert::sampler
