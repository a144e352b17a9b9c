#pragma once

#include "hypocert/model.hpp"
#include "hypocert/numerics.hpp"
#include "hypocert/sampler.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hypocert::decay {

/// Observable by name: "omega_k", "x_k" (windowed by exp(−|x|²/8)), or a
/// product of those joined by '*'. Indices are 1-based.
model::PhaseFunction observable(const std::string& name, int d);

struct McConfig {
  double dt = 1e-3;
  std::uint64_t seed = 1;
  int outer = 512;
  int inner = 256;
};

/// T(t)g(p0) = E[g(X_t)] from `inner` paths using streams (seed, outer_id, i).
Estimate estimate_Ttg(const model::FiberModel& m, const model::PhaseFunction& g, const model::PhasePoint& p0,
                      double t, int inner, const McConfig& cfg, std::uint64_t outer_id = 0);

struct DecayCurve {
  std::vector<double> times;
  std::vector<double> estimate;   // raw squared-norm estimate
  std::vector<double> corrected;  // inner-variance corrected, clamped at 0
  std::vector<double> se;
  std::vector<bool> clamped;
  std::vector<double> mean_shift;  // μ̂(T(t)g) − μ̂(g)
  std::vector<double> mean_shift_se;
  std::vector<double> bound;  // (κ₁e^{−κ₂t})²‖g − μ(g)‖², empty without certificate
  Mat cov;  // covariance of the corrected estimates across times (same outer points)
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double g_variance = 0.0;
  int outer = 0;
  int inner = 0;
};

/// Nested Monte Carlo estimate of ‖T(t)g − μ(g)‖² at the given times from
/// the supplied outer points (which should be drawn from μ).
DecayCurve decay_curve(const model::FiberModel& m, const model::PhaseFunction& g, const std::vector<double>& times,
                       const std::vector<model::PhasePoint>& outer_points, const McConfig& cfg);

/// Fills `bound` from a certified pair (κ₁, κ₂).
void attach_bound(DecayCurve& c, double kappa1, double kappa2);

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int points = 0;
};

/// Least squares of log(value) on t; the rate is −slope/2 because the values
/// are squared norms. The curve overload uses the corrected column and its
/// covariance (generalized least squares); the vector overload weights by
/// (value/se)². With known errors the residual scale is floored at 1.
RateFit fit_rate(const DecayCurve& c);
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& value, const std::vector<double>& se);

/// Columns t, estimate, se, corrected, bound.
void write_decay_csv(std::ostream& os, const DecayCurve& c);

}  // namespace hypocert::decay
