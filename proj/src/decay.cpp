#include "hypocert/decay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hypocert::decay {

namespace {

std::function<double(const Vec&, const Vec&)> factor(const std::string& tok, int d) {
  auto index = [&](const std::string& rest) {
    std::size_t pos = 0;
    int k = 0;
    try {
      k = std::stoi(rest, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("observable: bad index in '" + tok + "'");
    }
    if (pos != rest.size() || k < 1 || k > d) throw std::invalid_argument("observable: index out of range in '" + tok + "'");
    return k - 1;
  };
  if (tok.rfind("omega_", 0) == 0) {
    const int k = index(tok.substr(6));
    return [k](const Vec&, const Vec& w) { return w[k]; };
  }
  if (tok.rfind("x_", 0) == 0) {
    const int k = index(tok.substr(2));
    return [k](const Vec& x, const Vec&) { return x[k] * std::exp(-x.squaredNorm() / 8.0); };
  }
  throw std::invalid_argument("observable: unknown factor '" + tok + "'");
}

}  // namespace

model::PhaseFunction observable(const std::string& name, int d) {
  std::vector<std::function<double(const Vec&, const Vec&)>> parts;
  std::stringstream ss(name);
  std::string tok;
  if (name.empty() || name.back() == '*') throw std::invalid_argument("observable: empty factor in '" + name + "'");
  while (std::getline(ss, tok, '*')) {
    if (tok.empty()) throw std::invalid_argument("observable: empty factor in '" + name + "'");
    parts.push_back(factor(tok, d));
  }
  model::PhaseFunction f;
  f.value = [parts](const Vec& x, const Vec& w) {
    double v = 1.0;
    for (const auto& p : parts) v *= p(x, w);
    return v;
  };
  return f;
}

Estimate estimate_Ttg(const model::FiberModel& m, const model::PhaseFunction& g, const model::PhasePoint& p0,
                      double t, int inner, const McConfig& cfg, std::uint64_t outer_id) {
  if (t < 0.0) throw std::invalid_argument("estimate_Ttg: t must be nonnegative");
  if (inner < 1) throw std::invalid_argument("estimate_Ttg: need at least one inner path");
  if (t == 0.0) return {g.value(p0.x, p0.omega.coords()), 0.0};
  const long steps = std::max(1L, std::lround(t / cfg.dt));
  sampler::Integrator integ(m, t / static_cast<double>(steps));
  std::vector<double> vals(static_cast<std::size_t>(inner));
  Vec x(m.d), w(m.d);
  for (int i = 0; i < inner; ++i) {
    auto eng = make_stream(cfg.seed, outer_id, static_cast<std::uint64_t>(i));
    x = p0.x;
    w = p0.omega.coords();
    integ.advance(x.data(), w.data(), steps, eng);
    vals[static_cast<std::size_t>(i)] = g.value(x, w);
  }
  Estimate e = mean_se(vals);
  if (sample_variance(vals) == 0.0) e.se = 0.0;
  return e;
}

DecayCurve decay_curve(const model::FiberModel& m, const model::PhaseFunction& g, const std::vector<double>& times,
                       const std::vector<model::PhasePoint>& outer_points, const McConfig& cfg) {
  if (outer_points.size() < 2) throw std::invalid_argument("decay_curve: need at least two outer points");
  if (cfg.inner < 2) throw std::invalid_argument("decay_curve: need at least two inner paths");
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] < 0.0 || (k > 0 && times[k] <= times[k - 1]))
      throw std::invalid_argument("decay_curve: times must be nonnegative and increasing");

  const std::size_t nt = times.size();
  const std::size_t no = outer_points.size();
  const int ni = cfg.inner;
  std::vector<long> at_step(nt);
  for (std::size_t k = 0; k < nt; ++k) at_step[k] = std::lround(times[k] / cfg.dt);

  // y[k][j]: inner mean at time k for outer point j; v[k][j]: its squared SE.
  std::vector<std::vector<double>> y(nt, std::vector<double>(no)), v(nt, std::vector<double>(no));
  std::vector<double> g0(no);
  sampler::Integrator integ(m, cfg.dt);
  std::vector<double> sum(nt), sum2(nt);
  Vec x(m.d), w(m.d);
  for (std::size_t j = 0; j < no; ++j) {
    const auto& p = outer_points[j];
    g0[j] = g.value(p.x, p.omega.coords());
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sum2.begin(), sum2.end(), 0.0);
    for (int i = 0; i < ni; ++i) {
      auto eng = make_stream(cfg.seed, j, static_cast<std::uint64_t>(i));
      x = p.x;
      w = p.omega.coords();
      long done = 0;
      for (std::size_t k = 0; k < nt; ++k) {
        integ.advance(x.data(), w.data(), at_step[k] - done, eng);
        done = at_step[k];
        const double gv = g.value(x, w);
        sum[k] += gv;
        sum2[k] += gv * gv;
      }
    }
    for (std::size_t k = 0; k < nt; ++k) {
      const double mean = sum[k] / ni;
      const double var = std::max(0.0, (sum2[k] - ni * mean * mean) / (ni - 1));
      y[k][j] = mean;
      v[k][j] = at_step[k] == 0 ? 0.0 : var / ni;
    }
  }

  DecayCurve c;
  c.times = times;
  c.outer = static_cast<int>(no);
  c.inner = ni;
  c.g_variance = sample_variance(g0);
  const double n = static_cast<double>(no);
  const double g0_mean = mean_se(g0).value;
  Mat z(no, nt);
  for (std::size_t k = 0; k < nt; ++k) {
    const double raw = sample_variance(y[k]);
    double inner_var = 0.0;
    for (double vv : v[k]) inner_var += vv;
    inner_var /= n;
    const double corr = raw - inner_var;
    const double ybar = mean_se(y[k]).value;
    std::vector<double> shift(no);
    for (std::size_t j = 0; j < no; ++j) {
      z(j, k) = (y[k][j] - ybar) * (y[k][j] - ybar) * n / (n - 1.0) - v[k][j];
      shift[j] = y[k][j] - g0[j];
    }
    const Estimate ms = mean_se(shift);
    c.estimate.push_back(raw);
    c.corrected.push_back(std::max(0.0, corr));
    c.clamped.push_back(corr < 0.0);
    c.mean_shift.push_back(ybar - g0_mean);
    c.mean_shift_se.push_back(ms.se);
  }
  const Mat zc = z.rowwise() - z.colwise().mean();
  c.cov = (zc.transpose() * zc) / ((n - 1.0) * n);
  for (std::size_t k = 0; k < nt; ++k) c.se.push_back(std::sqrt(c.cov(k, k)));
  return c;
}

void attach_bound(DecayCurve& c, double kappa1, double kappa2) {
  c.kappa1 = kappa1;
  c.kappa2 = kappa2;
  c.bound.clear();
  for (double t : c.times) {
    const double env = kappa1 * std::exp(-kappa2 * t);
    c.bound.push_back(env * env * c.g_variance);
  }
}

namespace {

// Generalized least squares of y on (1, t) with error covariance `sigma`.
// `known` floors the residual scale at 1 (errors given in absolute units).
RateFit gls_fit(const Vec& t, const Vec& y, const Mat& sigma, bool known) {
  const Eigen::Index n = t.size();
  if (n < 4) throw std::invalid_argument("fit_rate: fewer than 4 usable points");
  if (t.maxCoeff() == t.minCoeff()) throw std::invalid_argument("fit_rate: times are all equal");
  Mat x(n, 2);
  x.col(0).setOnes();
  x.col(1) = t;
  const Eigen::LDLT<Mat> ldlt(sigma);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::invalid_argument("fit_rate: covariance is not positive definite");
  const Mat xtsx = x.transpose() * ldlt.solve(x);
  const Eigen::LDLT<Mat> normal(xtsx);
  const Vec beta = normal.solve(x.transpose() * ldlt.solve(y));
  const Vec r = y - x * beta;
  const double rss = r.dot(ldlt.solve(r));
  double s2 = rss / static_cast<double>(n - 2);
  if (known) s2 = std::max(1.0, s2);
  const Mat vb = normal.solve(Mat::Identity(2, 2));
  const double se_slope = std::sqrt(s2 * vb(1, 1));
  const double q = student_t_quantile(0.975, static_cast<double>(n - 2));
  const double slope = beta[1];

  RateFit f;
  f.rate = -slope / 2.0;
  f.intercept = beta[0];
  f.ci_low = -(slope + q * se_slope) / 2.0;
  f.ci_high = -(slope - q * se_slope) / 2.0;
  f.points = static_cast<int>(n);
  return f;
}

}  // namespace

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& value, const std::vector<double>& se) {
  if (t.size() != value.size() || t.size() != se.size()) throw std::invalid_argument("fit_rate: column sizes differ");
  std::vector<Eigen::Index> use;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (value[k] > 0.0) use.push_back(static_cast<Eigen::Index>(k));
  const Eigen::Index n = static_cast<Eigen::Index>(use.size());
  Vec tt(n), yy(n), var(n);
  bool known = n > 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(use[static_cast<std::size_t>(i)]);
    tt[i] = t[k];
    yy[i] = std::log(value[k]);
    const double rel = se[k] / value[k];
    var[i] = rel * rel;
    if (!(rel > 0.0)) known = false;
  }
  if (!known) var.setOnes();
  return gls_fit(tt, yy, var.asDiagonal(), known);
}

RateFit fit_rate(const DecayCurve& c) {
  const std::size_t nt = c.times.size();
  if (c.cov.rows() != static_cast<Eigen::Index>(nt)) return fit_rate(c.times, c.corrected, c.se);
  std::vector<Eigen::Index> use;
  for (std::size_t k = 0; k < nt; ++k)
    if (c.corrected[k] > 0.0) use.push_back(static_cast<Eigen::Index>(k));
  const Eigen::Index n = static_cast<Eigen::Index>(use.size());
  Vec tt(n), yy(n);
  Mat sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index ki = use[static_cast<std::size_t>(i)];
    tt[i] = c.times[static_cast<std::size_t>(ki)];
    yy[i] = std::log(c.corrected[static_cast<std::size_t>(ki)]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index kj = use[static_cast<std::size_t>(j)];
      sigma(i, j) = c.cov(ki, kj) / (c.corrected[static_cast<std::size_t>(ki)] * c.corrected[static_cast<std::size_t>(kj)]);
    }
  }
  return gls_fit(tt, yy, sigma, true);
}

void write_decay_csv(std::ostream& os, const DecayCurve& c) {
  os << "t,estimate,se,corrected,bound\n";
  char buf[160];
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    const double b = k < c.bound.size() ? c.bound[k] : std::nan("");
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", c.times[k], c.estimate[k], c.se[k],
                  c.corrected[k], b);
    os << buf;
  }
}

}  // namespace hypocert::decay
