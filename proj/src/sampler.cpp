#include "hypocert/sampler.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <limits>
#include <stdexcept>
#include <string>

namespace hypocert::sampler {

namespace {

double wrap_angle(double v) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  v = std::fmod(v, two_pi);
  return v < 0.0 ? v + two_pi : v;
}

double min_image(double v) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return v - two_pi * std::round(v / two_pi);
}

// log Σ_k exp(−(u + 2πk)²/(4τ)) over enough images for τ ≤ kMaxPeriodicStep.
double log_wrapped(double u, double tau) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double best = -std::numeric_limits<double>::infinity();
  double terms[9];
  for (int k = -4; k <= 4; ++k) {
    terms[k + 4] = -(u + two_pi * k) * (u + two_pi * k) / (4.0 * tau);
    best = std::max(best, terms[k + 4]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - best);
  return best + std::log(s);
}

constexpr double kMaxPeriodicStep = 4.0;

}  // namespace

sphere::UnitVector sample_sphere_uniform(int d, Engine& eng) {
  if (d < 2) throw std::invalid_argument("sample_sphere_uniform: d must be at least 2");
  boost::random::normal_distribution<double> nd;
  Vec v(d);
  for (;;) {
    for (int i = 0; i < d; ++i) v[i] = nd(eng);
    if (v.squaredNorm() > 1e-300) return sphere::UnitVector(v);
  }
}

EquilibriumSample sample_equilibrium_x(const model::Potential& pot, Eigen::Index n, Engine& eng,
                                       const MalaOptions& opts, bool force_mala) {
  const int d = pot.dim;
  boost::random::normal_distribution<double> nd;
  EquilibriumSample out;
  out.x.resize(d, n);

  if (pot.family == "quadratic" && !force_mala) {
    for (Eigen::Index k = 0; k < n; ++k)
      for (int i = 0; i < d; ++i) out.x(i, k) = nd(eng) / std::sqrt(2.0 * pot.params[i]);
    return out;
  }
  if (!pot.value || !pot.gradient) throw std::invalid_argument("sample_equilibrium_x: value and gradient required");

  out.direct = false;
  boost::random::uniform_01<double> unif;
  Vec x = Vec::Zero(d);
  double vx = pot.value(x);
  Vec gx = pot.gradient(x);
  double tau = opts.step;

  auto log_q = [&](const Vec& to, const Vec& from, const Vec& grad_from) {
    if (!pot.periodic) return -(to - from + tau * grad_from).squaredNorm() / (4.0 * tau);
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += log_wrapped(min_image(to[i] - from[i] + tau * grad_from[i]), tau);
    return s;
  };

  auto move = [&]() {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = x[i] - tau * gx[i] + std::sqrt(2.0 * tau) * nd(eng);
    if (pot.periodic)
      for (int i = 0; i < d; ++i) y[i] = wrap_angle(y[i]);
    const double vy = pot.value(y);
    const Vec gy = pot.gradient(y);
    const double log_a = -vy + vx + log_q(x, y, gy) - log_q(y, x, gx);
    if (std::log(unif(eng)) < log_a) {
      x = y;
      vx = vy;
      gx = gy;
      return true;
    }
    return false;
  };

  for (int k = 0; k < opts.burn_in; ++k) {
    const bool acc = move();
    tau *= std::exp(0.05 * ((acc ? 1.0 : 0.0) - opts.target_accept));
    if (pot.periodic) tau = std::min(tau, kMaxPeriodicStep);
  }

  long accepted = 0, proposed = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int t = 0; t < opts.thin; ++t) {
      accepted += move() ? 1 : 0;
      ++proposed;
    }
    out.x.col(k) = x;
  }
  out.acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 1.0;
  out.acceptance_ok = out.acceptance >= 0.2 && out.acceptance <= 0.8;
  return out;
}

std::vector<PhasePoint> sample_equilibrium(const model::FiberModel& m, Eigen::Index n, Engine& eng) {
  const auto xs = sample_equilibrium_x(m.potential, n, eng);
  std::vector<PhasePoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) out.push_back({xs.x.col(k), sample_sphere_uniform(m.d, eng)});
  return out;
}

bool step_size_warning(const model::FiberModel& m, double dt) { return dt * m.sigma * m.sigma > 0.1; }

Integrator::Integrator(const model::FiberModel& m, double dt)
    : m_(m), dt_(dt), sqdt_(std::sqrt(dt)), g_(m.d), dw_(m.d) {
  if (!(dt > 0.0)) throw std::invalid_argument("Integrator: dt must be positive");
}

void Integrator::step(double* x, double* w, Engine& eng) {
  const int d = m_.d;
  if (m_.potential.gradient_raw) {
    m_.potential.gradient_raw(x, g_.data());
  } else {
    const Vec gv = m_.potential.gradient(Eigen::Map<const Vec>(x, d));
    for (int i = 0; i < d; ++i) g_[i] = gv[i];
  }
  boost::random::normal_distribution<double> nd;
  for (int i = 0; i < d; ++i) dw_[i] = sqdt_ * nd(eng);

  double wg = 0.0, wdw = 0.0;
  for (int i = 0; i < d; ++i) {
    wg += w[i] * g_[i];
    wdw += w[i] * dw_[i];
  }
  const double drift = dt_ / (d - 1);
  double n2 = 0.0;
  for (int i = 0; i < d; ++i) {
    x[i] += w[i] * dt_;
    const double wt = w[i] - drift * (g_[i] - w[i] * wg) + m_.sigma * (dw_[i] - w[i] * wdw);
    g_[i] = wt;
    n2 += wt * wt;
  }
  const double nrm = std::sqrt(n2);
  if (nrm < 1e-8)
    throw std::runtime_error("sde_step: velocity collapsed before projection; reduce dt (dt*sigma^2 <= 0.1)");
  for (int i = 0; i < d; ++i) w[i] = g_[i] / nrm;
}

PhasePoint sde_step_with(const model::FiberModel& m, const PhasePoint& p, double dt, const Vec& dw) {
  const Vec& w = p.omega.coords();
  const Vec g = m.potential.gradient(p.x);
  const Vec wt = w - dt / (m.d - 1) * sphere::project_tangent(p.omega, g) +
                 m.sigma * sphere::project_tangent(p.omega, dw);
  if (wt.norm() < 1e-8)
    throw std::runtime_error("sde_step: velocity collapsed before projection; reduce dt (dt*sigma^2 <= 0.1)");
  return {p.x + w * dt, sphere::UnitVector(wt)};
}

PhasePoint sde_step(const model::FiberModel& m, const PhasePoint& p, double dt, Engine& eng) {
  boost::random::normal_distribution<double> nd;
  Vec dw(m.d);
  for (int i = 0; i < m.d; ++i) dw[i] = std::sqrt(dt) * nd(eng);
  return sde_step_with(m, p, dt, dw);
}

Trajectory simulate(const model::FiberModel& m, const PhasePoint& p0, const SdeConfig& cfg, std::uint64_t path_id) {
  if (cfg.steps < 0) throw std::invalid_argument("simulate: steps must be nonnegative");
  if (cfg.stride < 1) throw std::invalid_argument("simulate: stride must be positive");
  if (p0.x.size() != m.d || p0.omega.dim() != m.d) throw std::invalid_argument("simulate: state dimension mismatch");
  auto eng = make_stream(cfg.seed, path_id);
  Integrator integ(m, cfg.dt);
  Vec x = p0.x;
  Vec w = p0.omega.coords();
  Trajectory tr;
  tr.times.push_back(0.0);
  tr.states.push_back(p0);
  for (long k = 1; k <= cfg.steps; ++k) {
    integ.step(x.data(), w.data(), eng);
    if (k % cfg.stride == 0 || k == cfg.steps) {
      tr.times.push_back(static_cast<double>(k) * cfg.dt);
      tr.states.push_back({x, sphere::UnitVector(w)});
    }
  }
  return tr;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  if (tr.states.empty()) return;
  const int d = tr.states.front().omega.dim();
  os << "t";
  for (int i = 1; i <= d; ++i) os << ",x_" << i;
  for (int i = 1; i <= d; ++i) os << ",omega_" << i;
  os << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    put(tr.times[k]);
    for (int i = 0; i < d; ++i) {
      os << ',';
      put(tr.states[k].x[i]);
    }
    for (int i = 0; i < d; ++i) {
      os << ',';
      put(tr.states[k].omega[i]);
    }
    os << '\n';
  }
}

}  // namespace hypocert::sampler
