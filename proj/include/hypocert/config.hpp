#pragma once

#include "hypocert/disc.hpp"
#include "hypocert/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypocert::config {

/// Bad or unknown configuration input (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelBlock {
  int d = 2;
  double sigma = 1.0;
  std::string potential = "torus";
  std::vector<double> a{1.0};
  std::optional<double> poincare;
  std::optional<double> hessian_growth_c;
  std::optional<double> n2;

  bool operator==(const ModelBlock&) const = default;
};

struct GridBlock {
  std::string mode = "torus";
  int n_x = 33;
  int n_alpha = 32;
  double box_half_width = 6.0;

  bool operator==(const GridBlock&) const = default;
};

struct SamplerBlock {
  double dt = 1e-3;
  long steps = 1000;
  std::uint64_t seed = 1;
  long stride = 10;
  int paths = 4;
  int outer = 512;
  int inner = 256;
  std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
  std::string observable = "omega_1";

  bool operator==(const SamplerBlock&) const = default;
};

struct CertifyBlock {
  int n_g = 20;
  double t_min = 0.1;
  double t_max = 10.0;
  int t_points = 40;
  double slack_tol = 1e-8;
  double structure_tol = 1e-10;
  bool export_operators = false;
  int n2_samples = 16;
  double gap_tol = 0.05;

  bool operator==(const CertifyBlock&) const = default;
};

struct SphereBlock {
  int n_grid = 64;
  long mc_nodes = 1000000;

  bool operator==(const SphereBlock&) const = default;
};

struct RunConfig {
  ModelBlock model;
  GridBlock grid;
  bool has_grid = true;  // false when a config file omits [grid]
  SamplerBlock sampler;
  CertifyBlock certify;
  SphereBlock sphere;
  std::string out_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Parses INI text. Unknown sections or keys and malformed values throw ConfigError.
RunConfig parse(std::istream& is);
RunConfig load(const std::string& path);
void write(std::ostream& os, const RunConfig& cfg);

/// Potential for the configured family and dimension (d ≥ 1).
model::Potential make_potential(const RunConfig& cfg);
/// Fiber model (d ≥ 2).
model::FiberModel make_model(const RunConfig& cfg);
disc::XGrid make_grid(const RunConfig& cfg, int dim);

}  // namespace hypocert::config
