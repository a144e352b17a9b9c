#include "hypocert/commands.hpp"

#include "hypocert/decay.hpp"
#include "hypocert/disc.hpp"
#include "hypocert/hypo.hpp"
#include "hypocert/sampler.hpp"
#include "hypocert/sphere.hpp"

#include <boost/random/normal_distribution.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace hypocert::commands {

using nlohmann::json;
using config::ConfigError;
using config::RunConfig;

namespace {

constexpr std::uint64_t kStartStream = 0x5171;
constexpr std::uint64_t kOuterStream = 0xDEC;
constexpr std::uint64_t kProbeStream = 0xCE27;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json metadata(const std::string& command, const RunConfig& cfg) {
  return {{"tool", "hypocert"},
          {"command", command},
          {"timestamp", utc_timestamp()},
          {"seed", cfg.sampler.seed},
          {"config", config_json(cfg)}};
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::filesystem::path out_dir(const RunConfig& cfg) {
  std::filesystem::path p(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("output: cannot create directory " + cfg.out_dir + ": " + ec.message());
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("output: cannot write " + path.string());
  os << text;
}

void finish(Result& r, const std::string& name, const RunConfig& cfg, const Flags& flags) {
  r.report["passed"] = r.exit_code == 0;
  if (flags.write_files) write_text(out_dir(cfg) / (name + ".json"), r.report.dump(2) + "\n");
}

json rate_json(const hypo::RateResult& r) {
  return {{"delta", r.delta}, {"eps", r.eps},       {"kappa", r.kappa}, {"kappa1", r.kappa1},
          {"kappa2", r.kappa2}, {"c_perp", r.c_perp}, {"c_par", r.c_par}};
}

json check_json(const std::string& name, double value, double tol, bool passed) {
  return {{"name", name}, {"violation", num(value)}, {"tolerance", tol}, {"passed", passed}};
}

/// Grid for x-space problems; a torus grid needs a periodic potential.
disc::XGrid grid_for(const RunConfig& cfg, const model::Potential& pot, int dim) {
  if (cfg.grid.mode == "torus" && !pot.periodic)
    throw ConfigError("grid.mode = torus needs a periodic potential (model.potential = torus); use grid.mode = box");
  try {
    return config::make_grid(cfg, dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) t[static_cast<std::size_t>(k)] = n == 1 ? a : a + (b - a) * k / (n - 1);
  return t;
}

}  // namespace

json config_json(const RunConfig& c) {
  json model{{"d", c.model.d},
             {"sigma", c.model.sigma},
             {"potential", c.model.potential},
             {"a", c.model.a},
             {"poincare", opt(c.model.poincare)},
             {"hessian_growth_c", opt(c.model.hessian_growth_c)},
             {"n2", opt(c.model.n2)}};
  json grid = c.has_grid ? json{{"mode", c.grid.mode},
                                {"n_x", c.grid.n_x},
                                {"n_alpha", c.grid.n_alpha},
                                {"box_half_width", c.grid.box_half_width}}
                         : json(nullptr);
  json sampler{{"dt", c.sampler.dt},       {"steps", c.sampler.steps}, {"seed", c.sampler.seed},
               {"stride", c.sampler.stride}, {"paths", c.sampler.paths}, {"outer", c.sampler.outer},
               {"inner", c.sampler.inner},   {"times", c.sampler.times}, {"observable", c.sampler.observable}};
  json certify{{"n_g", c.certify.n_g},
               {"t_min", c.certify.t_min},
               {"t_max", c.certify.t_max},
               {"t_points", c.certify.t_points},
               {"slack_tol", c.certify.slack_tol},
               {"structure_tol", c.certify.structure_tol},
               {"export_operators", c.certify.export_operators},
               {"n2_samples", c.certify.n2_samples},
               {"gap_tol", c.certify.gap_tol}};
  json sph{{"n_grid", c.sphere.n_grid}, {"mc_nodes", c.sphere.mc_nodes}};
  return {{"model", model},     {"grid", grid},   {"sampler", sampler},
          {"certify", certify}, {"sphere", sph}, {"output", {{"dir", c.out_dir}}}};
}

Result cmd_verify_sphere(const RunConfig& cfg, const Flags& flags) {
  sphere::Fault fault = sphere::Fault::None;
  if (flags.fault == "sign-flip") fault = sphere::Fault::SignFlip;
  else if (!flags.fault.empty()) throw ConfigError("verify-sphere: unknown fault '" + flags.fault + "'");
  const int d = cfg.model.d;
  if (d < 2) throw ConfigError("verify-sphere: model.d must be at least 2");

  const auto q = d == 2 ? sphere::angle_grid(cfg.sphere.n_grid)
                        : sphere::monte_carlo(d, cfg.sphere.mc_nodes, cfg.sampler.seed);
  const auto checks = sphere::identity_suite(q, fault);

  Result r;
  r.report["metadata"] = metadata("verify-sphere", cfg);
  r.report["quadrature"] = {{"kind", d == 2 ? "angle_grid" : "monte_carlo"}, {"d", d}, {"nodes", q.size()}};
  json items = json::array(), failed = json::array();
  for (const auto& c : checks) {
    items.push_back(check_json(c.name, c.violation, c.tolerance, c.passed));
    if (!c.passed) failed.push_back(c.name);
  }
  r.report["identities"] = items;
  r.report["failed"] = failed;
  r.exit_code = failed.empty() ? 0 : 1;
  finish(r, "verify-sphere", cfg, flags);
  return r;
}

Result cmd_rates(const RunConfig& cfg, const Flags& flags) {
  auto pot = config::make_potential(cfg);
  const int d = cfg.model.d;
  if (d < 2) throw ConfigError("rates: model.d must be at least 2");

  std::string source;
  if (cfg.model.poincare) {
    source = "config";
  } else if (pot.poincare) {
    source = "analytic";
  } else if (cfg.has_grid) {
    pot.poincare = disc::poincare_constant(pot, grid_for(cfg, pot, d)).lambda;
    source = "grid";
  } else {
    throw ConfigError("rates: missing input: Poincare constant of potential '" + cfg.model.potential +
                      "' is unknown; set model.poincare or add a [grid] section to measure it");
  }
  const model::FiberModel m(d, cfg.model.sigma, pot);
  const auto ac = model::analytic_constants(m);
  const auto lambda_src = source == "grid" ? hypo::Provenance::Measured
                          : source == "config" ? hypo::Provenance::User
                                               : hypo::Provenance::Analytic;

  Result r;
  r.report["metadata"] = metadata("rates", cfg);
  r.report["constants"] = {{"lambda", *pot.poincare},
                           {"lambda_source", source},
                           {"lambda_m", ac.lambda_m},
                           {"lambda_M", ac.lambda_M},
                           {"n1", ac.n1}};

  std::optional<double> n2;
  std::string n2_src = "none";
  if (cfg.model.n2) {
    n2 = *cfg.model.n2;
    n2_src = hypo::to_string(hypo::Provenance::User);
  } else if (flags.n2) {
    const auto est = disc::estimate_N2(m, grid_for(cfg, pot, d), cfg.certify.n2_samples, cfg.sampler.seed);
    n2 = est.value;
    n2_src = hypo::to_string(hypo::Provenance::Elliptic);
    r.report["elliptic"] = {{"n2", est.value},
                            {"hessian_ratio", est.hessian_ratio},
                            {"gradient_ratio", est.gradient_ratio},
                            {"samples", est.samples},
                            {"c1", 1.0 / d}};
  }
  r.report["constants"]["n2"] = opt(n2);
  r.report["provenance"] = {{"lambda_m", hypo::to_string(hypo::Provenance::Analytic)},
                            {"lambda_M", hypo::to_string(lambda_src)},
                            {"n1", hypo::to_string(hypo::Provenance::Analytic)},
                            {"n2", n2_src}};
  if (n2) {
    r.report["optimizer"] = rate_json(hypo::optimize_rate(ac.lambda_m, ac.lambda_M, ac.n1, *n2));
  } else {
    r.report["optimizer"] = nullptr;
    r.report["note"] = "N2 unknown: pass --n2 or set model.n2 to optimize the rate";
  }
  finish(r, "rates", cfg, flags);
  return r;
}

namespace {

struct FiberRun {
  disc::FiberDiscretization fd;
  hypo::StructureReport structure;
  std::optional<hypo::MeasuredConstants> mc;
  std::string measure_error;
};

FiberRun run_fiber(const model::FiberModel& m, const disc::XGrid& g, int n_alpha, const RunConfig& cfg,
                   const std::string& fault) {
  FiberRun run{disc::discretize_fiber(m, g, n_alpha), {}, std::nullopt, {}};
  if (fault == "zero-S") run.fd.ops.S = SpMat(run.fd.ops.S.rows(), run.fd.ops.S.cols());
  run.structure = hypo::check_structure(run.fd.ops, cfg.certify.structure_tol);
  try {
    const hypo::AuxOperator b(run.fd.ops);
    run.mc = hypo::measure_constants(run.fd.ops, b);
  } catch (const std::exception& e) {
    run.measure_error = e.what();
  }
  return run;
}

json refine_entry(double coarse, double fine, std::optional<double> reference) {
  json e{{"coarse", coarse}, {"fine", fine}, {"reference", opt(reference)}};
  if (reference) {
    const double ec = std::abs(coarse - *reference), ef = std::abs(fine - *reference);
    e["ratio"] = num(ec / ef);
    e["order"] = num(std::log2(ec / ef));
  } else {
    e["ratio"] = nullptr;
    e["order"] = nullptr;
  }
  return e;
}

}  // namespace

Result cmd_certify(const RunConfig& cfg, const Flags& flags) {
  if (cfg.model.d != 2) throw ConfigError("certify: the generator discretization needs model.d = 2");
  if (!flags.fault.empty() && flags.fault != "zero-S") throw ConfigError("certify: unknown fault '" + flags.fault + "'");
  const auto m = config::make_model(cfg);
  const auto g = grid_for(cfg, m.potential, 2);

  FiberRun run = [&] {
    try {
      return run_fiber(m, g, cfg.grid.n_alpha, cfg, flags.fault);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("certify: ") + e.what());
    }
  }();
  const auto& ops = run.fd.ops;
  const double tol = cfg.certify.structure_tol;

  Result r;
  r.report["metadata"] = metadata("certify", cfg);
  r.report["instance_hash"] = hypo::instance_hash(ops);
  r.report["discretization"] = {{"mode", disc::to_string(g.mode)},
                                {"n_x", g.n},
                                {"n_alpha", run.fd.n_alpha},
                                {"dim", ops.space.dim()},
                                {"rank_P", ops.P.rank()},
                                {"boundary_mass", run.fd.boundary_mass}};

  json checks = json::array();
  bool ok = run.structure.passed;
  for (const auto& it : run.structure.items) checks.push_back(check_json(it.name, it.violation, it.tolerance, it.passed));

  std::optional<double> lm, lM;
  if (run.mc) {
    lm = run.mc->lambda_m;
    lM = run.mc->lambda_M;
  }
  const bool h2 = lm && *lm > tol;
  const bool h3 = lM && *lM > tol;
  checks.push_back(check_json("H2_lambda_m_positive", lm ? -*lm : NAN, tol, h2));
  checks.push_back(check_json("H3_lambda_M_positive", lM ? -*lM : NAN, tol, h3));
  ok = ok && h2 && h3;
  r.report["checks"] = checks;
  if (!run.measure_error.empty()) r.report["measure_error"] = run.measure_error;

  json constants{{"lambda_m", opt(lm)}, {"lambda_M", opt(lM)}};
  if (run.mc) {
    constants["n1_ps"] = run.mc->n1_ps;
    constants["n1_p"] = run.mc->n1_p;
    constants["n2_p"] = run.mc->n2_p;
    constants["n2_ps"] = run.mc->n2_ps;
  }
  r.report["measured"] = constants;

  const double poincare_x = disc::poincare_constant(m.potential, g).lambda;
  const double s2 = m.sigma * m.sigma;
  const bool flat = m.potential.periodic && m.potential.params.size() == 1 && m.potential.params[0] == 0.0;
  r.report["reference"] = {{"lambda_m", s2 / 2.0},
                           {"lambda_M", poincare_x / 2.0},
                           {"poincare_x_grid", poincare_x},
                           {"n1", flat ? json(s2 / 4.0) : json(nullptr)}};

  if (ok) {
    try {
      auto cert = hypo::certificate_from(*run.mc);
      auto eng = make_stream(cfg.sampler.seed, kProbeStream);
      boost::random::normal_distribution<double> nd;
      Mat probes(ops.space.dim(), cfg.certify.n_g);
      for (Eigen::Index j = 0; j < probes.cols(); ++j)
        for (Eigen::Index i = 0; i < probes.rows(); ++i) probes(i, j) = nd(eng);
      const auto times = linspace(cfg.certify.t_min, cfg.certify.t_max, cfg.certify.t_points);
      const auto dec = hypo::certify_decay(ops, cert, probes, times, cfg.certify.slack_tol);

      r.report["certificate"] = {
          {"constants",
           {{"lambda_m", {{"value", cert.lambda_m}, {"provenance", hypo::to_string(cert.lambda_m_src)}}},
            {"lambda_M", {{"value", cert.lambda_M}, {"provenance", hypo::to_string(cert.lambda_M_src)}}},
            {"n1", {{"value", cert.n1}, {"provenance", hypo::to_string(cert.n1_src)}}},
            {"n2", {{"value", cert.n2}, {"provenance", hypo::to_string(cert.n2_src)}}}}},
          {"n1_projection", cert.n1_projection},
          {"n2_projection", cert.n2_projection},
          {"rate", rate_json(cert.rate)},
          {"tolerances", {{"slack", cfg.certify.slack_tol}, {"structure", tol}}},
          {"instance_hash", r.report["instance_hash"]},
          {"seed", cfg.sampler.seed}};
      r.report["decay"] = {{"times", dec.times},
                           {"ratios", dec.ratios},
                           {"max_ratio", dec.max_ratio},
                           {"probes", cfg.certify.n_g},
                           {"step_halvings", dec.step_halvings},
                           {"passed", dec.passed}};
      ok = dec.passed;
    } catch (const std::exception& e) {
      r.report["certificate"] = nullptr;
      r.report["certify_error"] = e.what();
      ok = false;
    }
  } else {
    r.report["certificate"] = nullptr;
  }

  if (flags.refine) {
    const FiberRun fine = run_fiber(m, g, 2 * cfg.grid.n_alpha, cfg, flags.fault);
    json ref;
    if (run.mc && fine.mc && run.mc->lambda_m && fine.mc->lambda_m) {
      ref["lambda_m"] = refine_entry(*run.mc->lambda_m, *fine.mc->lambda_m, s2 / 2.0);
      ref["n1_ps"] = refine_entry(run.mc->n1_ps, fine.mc->n1_ps, flat ? std::optional(s2 / 4.0) : std::nullopt);
      if (run.mc->lambda_M && fine.mc->lambda_M)
        ref["lambda_M"] = refine_entry(*run.mc->lambda_M, *fine.mc->lambda_M, std::nullopt);
    }
    ref["n_alpha"] = {cfg.grid.n_alpha, 2 * cfg.grid.n_alpha};
    r.report["refinement"] = ref;
  }

  if (flags.write_files && cfg.certify.export_operators) {
    const auto dir = out_dir(cfg);
    auto dump = [&](const char* name, const SpMat& mat) {
      std::ostringstream os;
      disc::write_triplets(os, mat);
      write_text(dir / name, os.str());
    };
    dump("S.txt", ops.S);
    dump("A.txt", ops.A);
    dump("P_basis.txt", ops.P.basis());
    SpMat w(ops.space.dim(), 1);
    for (Eigen::Index i = 0; i < ops.space.dim(); ++i) w.insert(i, 0) = ops.space.weights()[i];
    dump("weights.txt", w);
  }

  r.exit_code = ok ? 0 : 1;
  finish(r, "certify", cfg, flags);
  return r;
}

namespace {

model::PhasePoint start_point(const model::FiberModel& m, Engine& eng) {
  if (m.potential.normalized) return sampler::sample_equilibrium(m, 1, eng).front();
  return {Vec::Zero(m.d), sampler::sample_sphere_uniform(m.d, eng)};
}

}  // namespace

Result cmd_simulate(const RunConfig& cfg, const Flags& flags) {
  const auto m = config::make_model(cfg);
  const auto& s = cfg.sampler;
  const sampler::SdeConfig sc{s.dt, s.steps, s.seed, s.stride};

  Result r;
  r.report["metadata"] = metadata("simulate", cfg);
  r.report["step_size_warning"] = sampler::step_size_warning(m, s.dt);
  json files = json::array();
  try {
    for (int k = 0; k < s.paths; ++k) {
      auto eng = make_stream(s.seed, kStartStream, static_cast<std::uint64_t>(k));
      const auto tr = sampler::simulate(m, start_point(m, eng), sc, static_cast<std::uint64_t>(k));
      const std::string name = "trajectory_" + std::to_string(k) + ".csv";
      if (flags.write_files) {
        std::ostringstream os;
        sampler::write_trajectory_csv(os, tr);
        write_text(out_dir(cfg) / name, os.str());
      }
      files.push_back(name);
    }
  } catch (const std::runtime_error& e) {
    r.report["error"] = e.what();
    r.exit_code = 1;
  }
  r.report["files"] = files;
  finish(r, "simulate", cfg, flags);
  return r;
}

Result cmd_decay(const RunConfig& cfg, const Flags& flags) {
  const auto m = config::make_model(cfg);
  const auto& s = cfg.sampler;
  if (s.times.size() < 2) throw ConfigError("decay: sampler.times needs at least two entries");
  model::PhaseFunction g;
  try {
    g = decay::observable(s.observable, m.d);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("decay: ") + e.what());
  }
  const bool uses_x = s.observable.find("x_") != std::string::npos;
  if (!m.potential.normalized && (uses_x || m.potential.family != "free"))
    throw ConfigError("decay: equilibrium sampling needs a normalizable potential for this observable");

  auto eng = make_stream(s.seed, kOuterStream);
  std::vector<model::PhasePoint> outer;
  if (m.potential.normalized) {
    outer = sampler::sample_equilibrium(m, s.outer, eng);
  } else {
    for (int j = 0; j < s.outer; ++j) outer.push_back({Vec::Zero(m.d), sampler::sample_sphere_uniform(m.d, eng)});
  }
  const decay::McConfig mc{s.dt, s.seed, s.outer, s.inner};
  auto curve = decay::decay_curve(m, g, s.times, outer, mc);

  Result r;
  r.report["metadata"] = metadata("decay", cfg);
  r.report["observable"] = s.observable;

  // Certified envelope from analytic constants when Λ and N₂ are available.
  json env = nullptr;
  if (m.potential.poincare) {
    const auto ac = model::analytic_constants(m);
    std::optional<double> n2 = cfg.model.n2;
    std::string n2_src = "user";
    if (!n2) {
      RunConfig gc = cfg;
      gc.grid.mode = m.potential.periodic ? "torus" : "box";
      n2 = disc::estimate_N2(m, grid_for(gc, m.potential, m.d), cfg.certify.n2_samples, s.seed).value;
      n2_src = "elliptic";
    }
    const auto rate = hypo::optimize_rate(ac.lambda_m, ac.lambda_M, ac.n1, *n2);
    decay::attach_bound(curve, rate.kappa1, rate.kappa2);
    env = {{"kappa1", rate.kappa1}, {"kappa2", rate.kappa2}, {"n2", *n2}, {"n2_source", n2_src}};
  }
  r.report["envelope"] = env;

  bool ok = true;
  json pts = json::array();
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const bool mean_ok = std::abs(curve.mean_shift[k]) <= 3.0 * curve.mean_shift_se[k] + 1e-12;
    const bool bound_ok = curve.bound.empty() || curve.corrected[k] <= curve.bound[k] + 3.0 * curve.se[k];
    ok = ok && mean_ok && bound_ok;
    pts.push_back({{"t", curve.times[k]},
                   {"estimate", curve.estimate[k]},
                   {"corrected", curve.corrected[k]},
                   {"se", curve.se[k]},
                   {"clamped", static_cast<bool>(curve.clamped[k])},
                   {"bound", curve.bound.empty() ? json(nullptr) : json(curve.bound[k])},
                   {"mean_shift", curve.mean_shift[k]},
                   {"mean_shift_se", curve.mean_shift_se[k]},
                   {"mean_ok", mean_ok},
                   {"bound_ok", bound_ok}});
  }
  r.report["points"] = pts;
  r.report["g_variance"] = curve.g_variance;

  try {
    const auto fit = decay::fit_rate(curve);
    json fj{{"rate", fit.rate}, {"intercept", fit.intercept}, {"ci", {fit.ci_low, fit.ci_high}}, {"points", fit.points}};
    // Free transport: ω-coordinates decay at σ²(d−1)/2 in norm.
    if (m.potential.family == "free" && s.observable.rfind("omega_", 0) == 0 &&
        s.observable.find('*') == std::string::npos) {
      const double ref = m.sigma * m.sigma * (m.d - 1) / 2.0;
      const bool in_ci = fit.ci_low <= ref && ref <= fit.ci_high;
      fj["reference"] = ref;
      fj["reference_in_ci"] = in_ci;
      ok = ok && in_ci;
    }
    r.report["fit"] = fj;
  } catch (const std::invalid_argument& e) {
    r.report["fit"] = nullptr;
    r.report["fit_error"] = e.what();
  }

  if (flags.write_files) {
    std::ostringstream os;
    decay::write_decay_csv(os, curve);
    write_text(out_dir(cfg) / "decay.csv", os.str());
  }
  r.exit_code = ok ? 0 : 1;
  finish(r, "decay", cfg, flags);
  return r;
}

Result cmd_elliptic(const RunConfig& cfg, const Flags& flags) {
  const auto m = config::make_model(cfg);
  const auto g = grid_for(cfg, m.potential, m.d);
  const int ns = cfg.certify.n2_samples;
  const auto est = disc::estimate_N2(m, g, ns, cfg.sampler.seed);

  Result r;
  r.report["metadata"] = metadata("elliptic", cfg);
  r.report["estimate"] = {{"n2", est.value},
                          {"hessian_ratio", est.hessian_ratio},
                          {"gradient_ratio", est.gradient_ratio},
                          {"samples", est.samples},
                          {"c1", 1.0 / m.d}};

  const auto probes = model::probe_grid(m.d, g.mode == disc::GridMode::Torus ? 0.0 : -g.half_width,
                                        g.mode == disc::GridMode::Torus ? 2.0 * std::numbers::pi : g.half_width, 9);
  json cond{{"c3_ratio", model::check_C3(m.potential, probes)}};
  if (m.potential.hessian) {
    const auto a3 = model::check_A3(m.potential, probes, 0.25);
    cond["a3"] = {{"c3", a3.c3}, {"c2", a3.c2}};
  }
  r.report["conditions"] = cond;

  bool ok = std::isfinite(est.value);
  if (flags.refine) {
    disc::XGrid fine = g;
    fine.n *= 2;
    const double grid_val = disc::estimate_N2(m, fine, ns, cfg.sampler.seed).value;
    const double samp_val = disc::estimate_N2(m, g, 2 * ns, cfg.sampler.seed).value;
    const double grid_rel = std::abs(grid_val - est.value) / est.value;
    const double samp_rel = std::abs(samp_val - est.value) / est.value;
    r.report["refinement"] = {{"grid_doubled", grid_val},
                              {"grid_relative_change", grid_rel},
                              {"grid_tolerance", 0.2},
                              {"samples_doubled", samp_val},
                              {"samples_relative_change", samp_rel},
                              {"samples_tolerance", 0.1}};
    ok = ok && grid_rel <= 0.2 && samp_rel <= 0.1;
  }
  r.exit_code = ok ? 0 : 1;
  finish(r, "elliptic", cfg, flags);
  return r;
}

Result cmd_gap(const RunConfig& cfg, const Flags& flags) {
  const auto pot = config::make_potential(cfg);
  if (!pot.normalized) throw ConfigError("gap: potential '" + cfg.model.potential + "' is not normalizable");
  const auto g = grid_for(cfg, pot, cfg.model.d);
  const auto res = disc::poincare_constant(pot, g);

  Result r;
  r.report["metadata"] = metadata("gap", cfg);
  r.report["lambda"] = res.lambda;
  r.report["dense"] = res.dense;
  r.report["iterations"] = res.iterations;
  r.report["nodes"] = g.size();
  r.report["boundary_mass"] = disc::boundary_mass(pot, g);
  bool ok = std::isfinite(res.lambda) && res.lambda > 0.0;
  if (pot.poincare) {
    const double rel = std::abs(res.lambda - *pot.poincare) / *pot.poincare;
    r.report["reference"] = {{"lambda", *pot.poincare}, {"relative_error", rel}, {"tolerance", cfg.certify.gap_tol}};
    ok = ok && rel <= cfg.certify.gap_tol;
  } else {
    r.report["reference"] = nullptr;
  }
  r.exit_code = ok ? 0 : 1;
  finish(r, "gap", cfg, flags);
  return r;
}

Result run(const std::string& name, const RunConfig& cfg, const Flags& flags) {
  if (name == "verify-sphere") return cmd_verify_sphere(cfg, flags);
  if (name == "rates") return cmd_rates(cfg, flags);
  if (name == "certify") return cmd_certify(cfg, flags);
  if (name == "simulate") return cmd_simulate(cfg, flags);
  if (name == "decay") return cmd_decay(cfg, flags);
  if (name == "elliptic") return cmd_elliptic(cfg, flags);
  if (name == "gap") return cmd_gap(cfg, flags);
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace hypocert::commands
