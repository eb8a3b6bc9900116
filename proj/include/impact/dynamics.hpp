#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "impact/model.hpp"
#include "impact/types.hpp"

namespace impact {

// One simulated trajectory. R stays identically zero for the simulators
// without resilience.
struct SimPath {
  ArrayXd times;
  ArrayXd x;  // price
  ArrayXd y;  // shares held
  ArrayXd v;  // wealth = cash + y * x
  ArrayXd a;  // diffusion control in force on [t_k, t_{k+1})
  ArrayXd r;  // resilience state
};

// Hedge controls. Markov closures of (t, x, y) cover the verification use;
// the Ito form (a integrated from a0 with alpha/beta) matches the admissible
// class used by the coupling study. When `bound` is finite the integrated
// control is truncated at +-bound.
struct ControlProcess {
  using Fn = std::function<double(double, double, double)>;
  double a0 = 0.0;
  Fn a;      // if set, a is the Markov map a(t, x, y)
  Fn b;      // drift control, defaults to 0
  Fn alpha;  // da = beta dt + alpha dW when a is not set
  Fn beta;
  double bound = std::numeric_limits<double>::infinity();

  static ControlProcess markov(Fn a_fn, Fn b_fn) {
    ControlProcess c;
    c.a = std::move(a_fn);
    c.b = std::move(b_fn);
    return c;
  }
  static ControlProcess ito(double a0, Fn alpha_fn, Fn beta_fn, Fn b_fn,
                            double bound) {
    ControlProcess c;
    c.a0 = a0;
    c.alpha = std::move(alpha_fn);
    c.beta = std::move(beta_fn);
    c.b = std::move(b_fn);
    c.bound = bound;
    return c;
  }
};

// One Euler step of the impacted state. dV charges Y dX plus the execution
// profit a^2 f dt / 2; dR accumulates the trade impact f dY + a sigma f' dt
// and relaxes at rate rho. With rho = 0 the relaxation term is exactly zero,
// so the plain-impact simulators share this code path bit for bit.
struct StepState {
  double x = 0.0, y = 0.0, v = 0.0, r = 0.0;
};

inline void impact_step(StepState& s, double a, double b, double dt, double dw,
                        const ImpactMarket& m, double rho) {
  const double fx = m.f(s.x);
  const double sig = m.sigma(s.x);
  const double fp = m.f_prime(s.x);
  const double sig_x = sig + a * fx;
  const double mu_x = m.mu(s.x) + b * fx + a * sig * fp - rho * s.r;
  const double dx = mu_x * dt + sig_x * dw;
  s.v += s.y * dx + 0.5 * a * a * fx * dt;
  s.r += (b * fx + a * sig * fp - rho * s.r) * dt + a * fx * dw;
  s.x += dx;
  s.y += b * dt + a * dw;
}

// Discrete rebalancing: between trade dates X runs Euler on mu dt + sigma dW;
// at each trade date t_i (i = 1..n) the position jumps to y_targets[i], the
// price moves by delta f(X-) and the wealth gains the execution profit
// delta^2 f(X-) / 2. `noise` holds the n * substeps Brownian increments.
SimPath simulate_discrete(const ImpactMarket& market, const VectorXd& y_targets,
                          int n, const VectorXd& noise, int substeps, double x0,
                          double v0, double horizon);

SimPath simulate_continuous(const ImpactMarket& market,
                            const ControlProcess& controls, double y0, double x0,
                            double v0, const VectorXd& noise, double dt);

SimPath simulate_resilience(const ImpactMarket& market, double rho, double r0,
                            const ControlProcess& controls, double y0, double x0,
                            double v0, const VectorXd& noise, double dt);

struct CouplingStudySpec {
  std::vector<int> n_values;  // increasing, each divides the fine resolution
  int n_paths = 1000;
  double dt_fine = 0.0;  // <= 0 selects (T / max n) / 16
  double horizon = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double v0 = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct CouplingRateRow {
  int n = 0;
  double sup_mse = 0.0;  // sup over the comparison mesh of E |Z^n - Z|^2
  double stderr_at_sup = 0.0;
};

struct CouplingRateReport {
  double slope = 0.0;  // least-squares slope of log sup-MSE vs log n
  std::vector<CouplingRateRow> rows;
};

// Couples the discrete-rebalancing dynamics to its continuous limit on shared
// Brownian increments and estimates the strong rate. The comparison mesh is
// the trade dates plus interval midpoints.
CouplingRateReport convergence_study(const ImpactMarket& market,
                                     const ControlProcess& controls,
                                     const CouplingStudySpec& spec);

// Smooth bounded benchmark controls for the rate study.
ControlProcess smooth_benchmark_controls();

}  // namespace impact
