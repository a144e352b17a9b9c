#include "hypocert/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hypocert::config {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"model", {"d", "sigma", "potential", "a", "poincare", "hessian_growth_c", "n2"}},
      {"grid", {"mode", "n_x", "n_alpha", "box_half_width"}},
      {"sampler", {"dt", "steps", "seed", "stride", "paths", "outer", "inner", "times", "observable"}},
      {"certify",
       {"n_g", "t_min", "t_max", "t_points", "slack_tol", "structure_tol", "export_operators", "n2_samples",
        "gap_tol"}},
      {"sphere", {"n_grid", "mc_nodes"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + fmt(v[k]);
  return s;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <class T>
  void get(const char* section, const char* key, T& out) const {
    if (auto s = raw(section, key)) out = convert<T>(*s, section, key);
  }
  template <class T>
  void get(const char* section, const char* key, std::optional<T>& out) const {
    if (auto s = raw(section, key)) out = convert<T>(*s, section, key);
  }
  void get(const char* section, const char* key, std::vector<double>& out) const {
    auto s = raw(section, key);
    if (!s) return;
    out.clear();
    std::stringstream ss(*s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(convert<double>(tok, section, key));
    if (out.empty()) throw ConfigError(std::string(section) + "." + key + ": empty list");
  }

 private:
  std::optional<std::string> raw(const char* section, const char* key) const {
    auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  }

  template <class T>
  static T convert(const std::string& s, const char* section, const char* key) {
    std::istringstream is(s);
    T v{};
    if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      throw ConfigError(std::string(section) + "." + key + ": expected true or false, got '" + s + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else {
      is >> v;
      if (!is || !(is >> std::ws).eof())
        throw ConfigError(std::string(section) + "." + key + ": cannot parse '" + s + "'");
      return v;
    }
  }

  const pt::ptree& tree_;
};

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  const auto& m = c.model;
  need(m.d >= 1, "model.d must be at least 1");
  need(m.sigma > 0.0, "model.sigma must be positive");
  need(m.potential == "quadratic" || m.potential == "torus" || m.potential == "free" || m.potential == "linear",
       "model.potential must be one of quadratic, torus, free, linear");
  need(!m.poincare || *m.poincare > 0.0, "model.poincare must be positive");
  need(!m.n2 || *m.n2 >= 0.0, "model.n2 must be nonnegative");
  need(c.grid.mode == "torus" || c.grid.mode == "box", "grid.mode must be torus or box");
  need(c.grid.n_x >= 4 && c.grid.n_alpha >= 8, "grid.n_x must be at least 4 and grid.n_alpha at least 8");
  need(c.grid.box_half_width > 0.0, "grid.box_half_width must be positive");
  const auto& s = c.sampler;
  need(s.dt > 0.0 && s.steps >= 1 && s.stride >= 1, "sampler.dt, steps and stride must be positive");
  need(s.paths >= 1 && s.outer >= 2 && s.inner >= 2, "sampler.paths >= 1, outer >= 2 and inner >= 2 required");
  for (std::size_t k = 0; k < s.times.size(); ++k)
    need(s.times[k] >= 0.0 && (k == 0 || s.times[k] > s.times[k - 1]), "sampler.times must be increasing and >= 0");
  const auto& q = c.certify;
  need(q.n_g >= 1 && q.t_points >= 1 && q.n2_samples >= 1, "certify.n_g, t_points and n2_samples must be positive");
  need(q.t_min > 0.0 && q.t_max >= q.t_min, "certify requires 0 < t_min <= t_max");
  need(q.slack_tol >= 0.0 && q.structure_tol > 0.0 && q.gap_tol > 0.0, "certify tolerances must be positive");
  need(c.sphere.n_grid >= 4 && c.sphere.mc_nodes >= 2, "sphere.n_grid >= 4 and sphere.mc_nodes >= 2 required");
}

}  // namespace

RunConfig parse(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    auto it = keys.find(section);
    if (it == keys.end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& kv : body)
      if (!it->second.count(kv.first)) throw ConfigError("config: unknown key " + section + "." + kv.first);
  }

  RunConfig c;
  Reader r(tree);
  r.get("model", "d", c.model.d);
  r.get("model", "sigma", c.model.sigma);
  r.get("model", "potential", c.model.potential);
  r.get("model", "a", c.model.a);
  r.get("model", "poincare", c.model.poincare);
  r.get("model", "hessian_growth_c", c.model.hessian_growth_c);
  r.get("model", "n2", c.model.n2);
  c.has_grid = tree.get_child_optional("grid").has_value();
  r.get("grid", "mode", c.grid.mode);
  r.get("grid", "n_x", c.grid.n_x);
  r.get("grid", "n_alpha", c.grid.n_alpha);
  r.get("grid", "box_half_width", c.grid.box_half_width);
  r.get("sampler", "dt", c.sampler.dt);
  r.get("sampler", "steps", c.sampler.steps);
  r.get("sampler", "seed", c.sampler.seed);
  r.get("sampler", "stride", c.sampler.stride);
  r.get("sampler", "paths", c.sampler.paths);
  r.get("sampler", "outer", c.sampler.outer);
  r.get("sampler", "inner", c.sampler.inner);
  r.get("sampler", "times", c.sampler.times);
  r.get("sampler", "observable", c.sampler.observable);
  r.get("certify", "n_g", c.certify.n_g);
  r.get("certify", "t_min", c.certify.t_min);
  r.get("certify", "t_max", c.certify.t_max);
  r.get("certify", "t_points", c.certify.t_points);
  r.get("certify", "slack_tol", c.certify.slack_tol);
  r.get("certify", "structure_tol", c.certify.structure_tol);
  r.get("certify", "export_operators", c.certify.export_operators);
  r.get("certify", "n2_samples", c.certify.n2_samples);
  r.get("certify", "gap_tol", c.certify.gap_tol);
  r.get("sphere", "n_grid", c.sphere.n_grid);
  r.get("sphere", "mc_nodes", c.sphere.mc_nodes);
  r.get("output", "dir", c.out_dir);
  validate(c);
  return c;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse(in);
}

void write(std::ostream& os, const RunConfig& c) {
  os << "[model]\n";
  os << "d = " << c.model.d << "\n";
  os << "sigma = " << fmt(c.model.sigma) << "\n";
  os << "potential = " << c.model.potential << "\n";
  os << "a = " << fmt_list(c.model.a) << "\n";
  if (c.model.poincare) os << "poincare = " << fmt(*c.model.poincare) << "\n";
  if (c.model.hessian_growth_c) os << "hessian_growth_c = " << fmt(*c.model.hessian_growth_c) << "\n";
  if (c.model.n2) os << "n2 = " << fmt(*c.model.n2) << "\n";
  if (c.has_grid) {
    os << "\n[grid]\n";
    os << "mode = " << c.grid.mode << "\n";
    os << "n_x = " << c.grid.n_x << "\n";
    os << "n_alpha = " << c.grid.n_alpha << "\n";
    os << "box_half_width = " << fmt(c.grid.box_half_width) << "\n";
  }
  os << "\n[sampler]\n";
  os << "dt = " << fmt(c.sampler.dt) << "\n";
  os << "steps = " << c.sampler.steps << "\n";
  os << "seed = " << c.sampler.seed << "\n";
  os << "stride = " << c.sampler.stride << "\n";
  os << "paths = " << c.sampler.paths << "\n";
  os << "outer = " << c.sampler.outer << "\n";
  os << "inner = " << c.sampler.inner << "\n";
  os << "times = " << fmt_list(c.sampler.times) << "\n";
  os << "observable = " << c.sampler.observable << "\n";
  os << "\n[certify]\n";
  os << "n_g = " << c.certify.n_g << "\n";
  os << "t_min = " << fmt(c.certify.t_min) << "\n";
  os << "t_max = " << fmt(c.certify.t_max) << "\n";
  os << "t_points = " << c.certify.t_points << "\n";
  os << "slack_tol = " << fmt(c.certify.slack_tol) << "\n";
  os << "structure_tol = " << fmt(c.certify.structure_tol) << "\n";
  os << "export_operators = " << (c.certify.export_operators ? "true" : "false") << "\n";
  os << "n2_samples = " << c.certify.n2_samples << "\n";
  os << "gap_tol = " << fmt(c.certify.gap_tol) << "\n";
  os << "\n[sphere]\n";
  os << "n_grid = " << c.sphere.n_grid << "\n";
  os << "mc_nodes = " << c.sphere.mc_nodes << "\n";
  os << "\n[output]\n";
  os << "dir = " << c.out_dir << "\n";
}

model::Potential make_potential(const RunConfig& cfg) {
  const auto& m = cfg.model;
  const int d = m.d;
  auto broadcast = [&](const char* what) {
    if (m.a.size() == 1) return std::vector<double>(static_cast<std::size_t>(d), m.a[0]);
    if (static_cast<int>(m.a.size()) != d)
      throw ConfigError(std::string("model.a: ") + what + " needs 1 or d = " + std::to_string(d) + " values");
    return m.a;
  };
  model::Potential pot;
  try {
    if (m.potential == "quadratic") {
      pot = model::quadratic(broadcast("quadratic"));
    } else if (m.potential == "torus") {
      if (m.a.size() != 1) throw ConfigError("model.a: torus takes a single amplitude");
      pot = model::torus(d, m.a[0]);
    } else if (m.potential == "free") {
      pot = model::free(d);
    } else {
      auto g = broadcast("linear");
      pot = model::linear(Eigen::Map<const Vec>(g.data(), d));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (m.poincare) pot.poincare = *m.poincare;
  if (m.hessian_growth_c) pot.hessian_growth_c = *m.hessian_growth_c;
  return pot;
}

model::FiberModel make_model(const RunConfig& cfg) {
  if (cfg.model.d < 2) throw ConfigError("model.d must be at least 2 for the fiber model");
  try {
    return model::FiberModel(cfg.model.d, cfg.model.sigma, make_potential(cfg));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

disc::XGrid make_grid(const RunConfig& cfg, int dim) {
  if (cfg.grid.mode == "torus") return disc::torus_grid(dim, cfg.grid.n_x);
  return disc::box_grid(dim, cfg.grid.n_x, cfg.grid.box_half_width);
}

}  // namespace hypocert::config
