#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "impact/grid.hpp"
#include "impact/model.hpp"

namespace impact {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "constant 0.2" / "affine a b" / "affine_saturated a b lo hi"
struct FieldSpec {
  std::string kind = "constant";
  std::vector<double> params{0.0};
};

struct MarketSpec {
  FieldSpec mu{"constant", {0.0}};
  FieldSpec sigma{"constant", {0.2}};
  FieldSpec f{"constant", {0.5}};
};

struct CapSpec {
  FieldSpec gamma_bar{"constant", {1.75}};
  double iota = 0.1;
  double k_lower = 0.0;
};

struct PayoffSpec {
  std::string kind = "call_spread";
  std::vector<double> strikes{-1.0, 1.0};
  std::vector<double> knots_x, knots_y;  // piecewise_linear / sampled
};

struct GridSpec {
  double x_min = -3.0;
  double x_max = 3.0;
  int n_x = 300;
  int n_t = 2000;
  double horizon = 2.0;
  int levels = 3;
  double margin = 0.0;        // <= 0: automatic
  int surface_stride = 0;     // <= 0: automatic (~200 exported rows)
};

struct SimSpec {
  int n_paths = 1000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  double eps = 0.0;
  bool eps_relative = false;  // eps given as a fraction of the price
  double rho = 0.0;
  double r0 = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double v0 = 0.0;
  double a0 = 0.3;
  double b0 = 0.0;
  double smoothing_delta = -1.0;  // < 0: automatic (2 h_x)
  bool dump_paths = false;
  int substeps = 16;
  std::vector<int> n_values{16, 32, 64, 128, 256, 512, 1024};
};

struct ExperimentConfig {
  std::string mode = "price";
  MarketSpec market;
  CapSpec cap;
  PayoffSpec payoff;
  GridSpec grid;
  SimSpec sim;
};

// INI-style text: [section] headers, key = value lines, # or ; comments.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
// Canonical form: fixed section/key order, %.17g numbers. parse/serialize
// round-trips to the identical string.
std::string serialize_config(const ExperimentConfig& cfg);
// FNV-1a of the canonical form.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Validated object builders (field-level ConfigError on violations).
ScalarField build_field(const FieldSpec& spec, const std::string& where);
ImpactMarket build_market(const ExperimentConfig& cfg);
GammaCap build_cap(const ExperimentConfig& cfg);
Payoff build_payoff(const ExperimentConfig& cfg);
Grid build_grid(const ExperimentConfig& cfg);

// Cross-checks everything the run needs (cap admissibility on the grid,
// finite parameters). Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

}  // namespace impact
