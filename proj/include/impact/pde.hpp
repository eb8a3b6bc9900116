#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "impact/grid.hpp"
#include "impact/model.hpp"
#include "impact/types.hpp"

namespace impact {

// Node diagnostic flags stored per lattice point.
enum NodeFlag : std::uint8_t {
  kFlagClampLow = 1,    // value truncated at the lower analytic bound
  kFlagClampHigh = 2,   // value truncated at the upper analytic bound
  kFlagCapBind = 4,     // discrete gamma within the one-step window of the cap
  kFlagCapBranch = 8,   // curvature root y2 taken (cap residual exactly zero)
};

// Centered second difference against the next time row:
// (phi(t+ht, x+hx) + phi(t+ht, x-hx) - 2 y) / hx^2.
double discrete_gamma(const ArrayXd& next_row, Index j, double y, double h_x);

struct NodeParams {
  double phi_center = 0.0;  // next-row value at x
  double phi_plus = 0.0;    // next-row value at x + hx
  double phi_minus = 0.0;   // next-row value at x - hx
  double sigma = 0.0;
  double f = 0.0;
  double gamma_cap = 0.0;
  double h_t = 0.0;
  double h_x = 0.0;
  double w_low = 0.0;   // may be -inf
  double w_high = 0.0;  // may be +inf
  double tol = 1e-12;
};

struct NodeResult {
  double y = 0.0;         // clamped node value
  double y_root = 0.0;    // root of min(L1, L2) before clamping
  double res_l1 = 0.0;    // L1 at the stored value
  double res_l2 = 0.0;    // L2 at the stored value
  std::uint8_t flags = 0;
  int iterations = 0;
};

// Solves min(L1, L2)(y) = 0 and applies the analytic clamps. The curvature
// root y2 is evaluated first so the nonlinearity is never sampled on the
// singular side of 1 - f G.
NodeResult node_solve(const NodeParams& p);

struct PriceSurface {
  Grid grid;
  RowMatrixXd values;       // (n_t + 1) x (n_x + 1), row i = time i * h_t
  double lower_bound = 0.0;
  ArrayXd upper_bound;      // per column, uniform in time
  RowMatrixXu8 flags;
  RowMatrixXf residual_l1;
  RowMatrixXf residual_l2;

  double value(Index i, Index j) const { return values(i, j); }
  // Bilinear interpolation inside the lattice.
  double value_at(double t, double x) const;
};

struct SolveOptions {
  double tol = 1e-12;
  int threads = 1;
  // Multiplier of the one-step relaxation depth (h_t/h_x^2) N(gamma_bar)
  // used for the kFlagCapBind diagnostic.
  double cap_bind_factor = 4.0;
};

PriceSurface solve_surface(const ImpactMarket& market, const GammaCap& cap,
                           const FaceLiftedPayoff& lifted, const Grid& grid,
                           const SolveOptions& options = {});

// Streaming variant: rows are produced from maturity backwards and handed to
// the sink as (row index, values, flags, L1 residuals, L2 residuals); nothing
// is retained. solve_surface and the refinement driver share this path.
using RowSink = std::function<void(Index, const ArrayXd&, const std::vector<std::uint8_t>&,
                                   const ArrayXd&, const ArrayXd&)>;
void solve_surface_streaming(const ImpactMarket& market, const GammaCap& cap,
                             const FaceLiftedPayoff& lifted, const Grid& grid,
                             const SolveOptions& options, const RowSink& sink);

// Terminal data for the constant-volatility benchmark price: piecewise
// smooth between the listed kinks (jumps allowed at kinks).
struct TerminalCurve {
  std::function<double(double)> eval;
  std::vector<double> kinks;
};

TerminalCurve to_terminal_curve(const Payoff& payoff);

// E[ g(x + sigma0 sqrt(T - t) Z) ] by kink-split Gauss-Legendre panels.
double heat_price_oracle(const TerminalCurve& terminal, double sigma0, double t,
                         double x, double T);

struct RefineOptions {
  SolveOptions solve;
  // h_t is rescaled by 2^{-refine_exponent} per level so h_t/h_x^2 vanishes.
  double refine_exponent = 2.5;
  // Extra time rows to capture per level (nearest lattice time).
  std::vector<double> capture_times;
  FaceLiftOptions face_lift;
};

struct RefinementLevel {
  Grid grid;
  double max_diff = 0.0;  // against the previous level, central half, t = 0
  double ratio = 0.0;     // contraction vs the previous difference
  ArrayXd t0_row;
  std::map<double, ArrayXd> captured;  // requested time -> row
};

struct RefinementReport {
  std::vector<RefinementLevel> levels;
};

RefinementReport refine_and_estimate(const ImpactMarket& market, const GammaCap& cap,
                                     const Payoff& payoff, const Grid& base_grid,
                                     int levels, const RefineOptions& options = {});

}  // namespace impact
