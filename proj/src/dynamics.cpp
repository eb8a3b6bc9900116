#include "impact/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "impact/parallel.hpp"
#include "impact/rng.hpp"

namespace impact {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_finite_state(const StepState& s, Index step) {
  if (!(std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.v) &&
        std::isfinite(s.r)))
    throw std::runtime_error("simulation diverged at step " +
                             std::to_string(step));
}

double eval_or(const ControlProcess::Fn& fn, double t, double x, double y,
               double fallback) {
  return fn ? fn(t, x, y) : fallback;
}

SimPath run_continuous(const ImpactMarket& market, double rho, double r0,
                       const ControlProcess& controls, double y0, double x0,
                       double v0, const VectorXd& noise, double dt,
                       bool track_r) {
  require(dt > 0.0, "simulate: dt must be positive");
  const Index steps = noise.size();

  SimPath path;
  path.times.resize(steps + 1);
  path.x.resize(steps + 1);
  path.y.resize(steps + 1);
  path.v.resize(steps + 1);
  path.a.resize(steps + 1);
  path.r.resize(steps + 1);

  StepState s{x0, y0, v0, r0};
  double a_state = controls.a0;

  for (Index k = 0; k <= steps; ++k) {
    const double t = dt * static_cast<double>(k);
    double a_k;
    if (controls.a) {
      a_k = controls.a(t, s.x, s.y);
    } else {
      a_k = a_state;
      if (std::isfinite(controls.bound))
        a_k = std::clamp(a_k, -controls.bound, controls.bound);
    }
    const double b_k = eval_or(controls.b, t, s.x, s.y, 0.0);

    path.times[k] = t;
    path.x[k] = s.x;
    path.y[k] = s.y;
    path.v[k] = s.v;
    path.a[k] = a_k;
    path.r[k] = track_r ? s.r : 0.0;
    if (k == steps) break;

    const double dw = noise[k];
    if (!controls.a) {
      const double alpha_k = eval_or(controls.alpha, t, s.x, s.y, 0.0);
      const double beta_k = eval_or(controls.beta, t, s.x, s.y, 0.0);
      a_state += beta_k * dt + alpha_k * dw;
    }
    impact_step(s, a_k, b_k, dt, dw, market, rho);
    check_finite_state(s, k + 1);
  }
  return path;
}

}  // namespace

SimPath simulate_continuous(const ImpactMarket& market,
                            const ControlProcess& controls, double y0, double x0,
                            double v0, const VectorXd& noise, double dt) {
  return run_continuous(market, 0.0, 0.0, controls, y0, x0, v0, noise, dt,
                        /*track_r=*/false);
}

SimPath simulate_resilience(const ImpactMarket& market, double rho, double r0,
                            const ControlProcess& controls, double y0, double x0,
                            double v0, const VectorXd& noise, double dt) {
  require(rho >= 0.0, "simulate_resilience: rho must be nonnegative");
  return run_continuous(market, rho, r0, controls, y0, x0, v0, noise, dt,
                        /*track_r=*/true);
}

SimPath simulate_discrete(const ImpactMarket& market, const VectorXd& y_targets,
                          int n, const VectorXd& noise, int substeps, double x0,
                          double v0, double horizon) {
  require(n >= 1, "simulate_discrete: need n >= 1");
  require(substeps >= 1, "simulate_discrete: need substeps >= 1");
  require(y_targets.size() == n + 1,
          "simulate_discrete: y_targets must have n + 1 entries");
  require(noise.size() == static_cast<Index>(n) * substeps,
          "simulate_discrete: noise length must equal n * substeps");
  require(horizon > 0.0, "simulate_discrete: horizon must be positive");

  const Index steps = noise.size();
  const double dt = horizon / static_cast<double>(steps);

  SimPath path;
  path.times.resize(steps + 1);
  path.x.resize(steps + 1);
  path.y.resize(steps + 1);
  path.v.resize(steps + 1);
  path.a.setZero(steps + 1);
  path.r.setZero(steps + 1);

  double x = x0, v = v0, y = y_targets[0];
  path.times[0] = 0.0;
  path.x[0] = x;
  path.y[0] = y;
  path.v[0] = v;

  for (Index k = 0; k < steps; ++k) {
    // Diffusion within the current trade interval.
    const double dx = market.mu(x) * dt + market.sigma(x) * noise[k];
    v += y * dx;
    x += dx;

    // Trade at the right endpoint when the interval boundary is a trade date.
    if ((k + 1) % substeps == 0) {
      const Index i = (k + 1) / substeps;
      const double delta = y_targets[i] - y;
      const double fx = market.f(x);
      const double jump = delta * fx;
      v += y * jump + 0.5 * delta * delta * fx;
      x += jump;
      y = y_targets[i];
    }

    path.times[k + 1] = dt * static_cast<double>(k + 1);
    path.x[k + 1] = x;
    path.y[k + 1] = y;
    path.v[k + 1] = v;
    if (!(std::isfinite(x) && std::isfinite(v)))
      throw std::runtime_error("simulate_discrete diverged at step " +
                               std::to_string(k + 1));
  }
  return path;
}

// ---------------------------------------------------------------------------
// Coupled rate study
// ---------------------------------------------------------------------------

ControlProcess smooth_benchmark_controls() {
  return ControlProcess::markov(
      [](double t, double x, double /*y*/) {
        return 0.3 + 0.2 * std::sin(1.1 * x) * std::cos(0.5 * t);
      },
      [](double /*t*/, double x, double /*y*/) {
        return 0.15 * std::cos(0.7 * x);
      });
}

CouplingRateReport convergence_study(const ImpactMarket& market,
                                     const ControlProcess& controls,
                                     const CouplingStudySpec& spec) {
  require(spec.n_paths >= 100, "convergence_study: need at least 100 paths");
  require(!spec.n_values.empty(), "convergence_study: n_values empty");
  require(spec.horizon > 0.0, "convergence_study: horizon must be positive");
  for (size_t i = 1; i < spec.n_values.size(); ++i)
    require(spec.n_values[i] > spec.n_values[i - 1],
            "convergence_study: n_values must be increasing");

  const int n_max = spec.n_values.back();
  double dt_fine = spec.dt_fine;
  if (dt_fine <= 0.0) dt_fine = spec.horizon / (16.0 * n_max);
  Index fine_steps =
      static_cast<Index>(std::llround(spec.horizon / dt_fine));
  // Round the fine resolution up to a multiple of 2 * n for every n so trade
  // dates and interval midpoints are lattice points.
  Index quantum = 1;
  for (int n : spec.n_values) quantum = std::lcm(quantum, 2 * static_cast<Index>(n));
  fine_steps = ((fine_steps + quantum - 1) / quantum) * quantum;
  dt_fine = spec.horizon / static_cast<double>(fine_steps);
  for (int n : spec.n_values)
    require(fine_steps % (2 * n) == 0,
            "convergence_study: fine resolution incompatible with n_values");

  const size_t n_count = spec.n_values.size();
  // Comparison mesh per n: trade dates 0..n and interval midpoints.
  std::vector<std::vector<Index>> mesh(n_count);
  for (size_t ni = 0; ni < n_count; ++ni) {
    const Index n = spec.n_values[ni];
    const Index sub = fine_steps / n;
    for (Index i = 0; i <= n; ++i) {
      mesh[ni].push_back(i * sub);
      if (i < n) mesh[ni].push_back(i * sub + sub / 2);
    }
  }

  // Per-path squared gaps at every mesh point; reduced serially afterwards so
  // the result does not depend on the thread partition.
  std::vector<RowMatrixXd> sq(n_count);
  for (size_t ni = 0; ni < n_count; ++ni)
    sq[ni].setZero(spec.n_paths, static_cast<Index>(mesh[ni].size()));

  const int threads = resolve_threads(spec.threads);
  parallel_chunks(spec.n_paths, threads, [&](std::ptrdiff_t pb, std::ptrdiff_t pe) {
    VectorXd noise(fine_steps);
    for (std::ptrdiff_t p = pb; p < pe; ++p) {
      GaussianStream gs = GaussianStream::for_path(spec.seed, static_cast<std::uint64_t>(p));
      const double sq_dt = std::sqrt(dt_fine);
      for (Index k = 0; k < fine_steps; ++k) noise[k] = sq_dt * gs.next();

      const SimPath cont = simulate_continuous(market, controls, spec.y0,
                                               spec.x0, spec.v0, noise, dt_fine);

      for (size_t ni = 0; ni < n_count; ++ni) {
        const int n = spec.n_values[ni];
        const Index sub = fine_steps / n;
        VectorXd y_targets(n + 1);
        for (Index i = 0; i <= n; ++i) y_targets[i] = cont.y[i * sub];
        const SimPath disc =
            simulate_discrete(market, y_targets, n, noise,
                              static_cast<int>(sub), spec.x0, spec.v0,
                              spec.horizon);
        for (size_t mi = 0; mi < mesh[ni].size(); ++mi) {
          const Index k = mesh[ni][mi];
          const double ex = disc.x[k] - cont.x[k];
          const double ey = disc.y[k] - cont.y[k];
          const double ev = disc.v[k] - cont.v[k];
          sq[ni](p, static_cast<Index>(mi)) = ex * ex + ey * ey + ev * ev;
        }
      }
    }
  });

  CouplingRateReport report;
  report.rows.resize(n_count);
  for (size_t ni = 0; ni < n_count; ++ni) {
    const Index m = static_cast<Index>(mesh[ni].size());
    double best_mse = -1.0;
    Index best_col = 0;
    for (Index c = 0; c < m; ++c) {
      double acc = 0.0;
      for (Index p = 0; p < spec.n_paths; ++p) acc += sq[ni](p, c);
      const double mse = acc / spec.n_paths;
      if (mse > best_mse) {
        best_mse = mse;
        best_col = c;
      }
    }
    double var = 0.0;
    for (Index p = 0; p < spec.n_paths; ++p) {
      const double d = sq[ni](p, best_col) - best_mse;
      var += d * d;
    }
    var /= std::max(1, spec.n_paths - 1);
    report.rows[ni].n = spec.n_values[ni];
    report.rows[ni].sup_mse = best_mse;
    report.rows[ni].stderr_at_sup = std::sqrt(var / spec.n_paths);
  }

  // Least-squares slope of log sup-MSE against log n.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& row : report.rows) {
    const double lx = std::log(static_cast<double>(row.n));
    const double ly = std::log(std::max(row.sup_mse, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(report.rows.size());
  report.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return report;
}

}  // namespace impact
