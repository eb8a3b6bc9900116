#include "impact/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "impact/parallel.hpp"
#include "impact/rng.hpp"

namespace impact {

namespace {

std::vector<double> bump_weights(int half_width) {
  std::vector<double> w(2 * half_width + 1);
  double sum = 0.0;
  for (int q = -half_width; q <= half_width; ++q) {
    const double u = static_cast<double>(q) / (half_width + 1);
    w[q + half_width] = std::exp(-1.0 / (1.0 - u * u));
    sum += w[q + half_width];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<double> one_sided_weights(int depth) {
  std::vector<double> w(depth + 1);
  double sum = 0.0;
  for (int p = 0; p <= depth; ++p) {
    const double u = static_cast<double>(p) / (depth + 1);
    w[p] = std::exp(-1.0 / (1.0 - u * u));
    sum += w[p];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

PriceSurface mollify_surface(const PriceSurface& surface, double delta) {
  if (delta < 0.0) throw std::invalid_argument("mollify_surface: delta < 0");
  if (delta == 0.0) return surface;
  const Grid& g = surface.grid;
  if (delta > 0.25 * (g.x_max - g.x_min))
    throw std::invalid_argument(
        "mollify_surface: delta exceeds a quarter of the domain");

  const int q_half = std::max(1, static_cast<int>(std::lround(delta / g.h_x())));
  const int p_depth = std::min<int>(
      g.n_t, std::max(1, static_cast<int>(std::lround(delta * delta / g.h_t()))));
  const std::vector<double> wx = bump_weights(q_half);
  const std::vector<double> wt = one_sided_weights(p_depth);

  const Index rows = g.n_t + 1, cols = g.n_x + 1;

  // Separable product kernel: one-sided pass over earlier rows, then the
  // symmetric spatial pass with a window that shrinks near the columns'
  // edges (keeps the zero first moment, so affine rows are preserved).
  RowMatrixXd tpass(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (int p = 0; p <= p_depth; ++p) {
        const Index ip = std::max<Index>(0, i - p);
        acc += wt[static_cast<size_t>(p)] * surface.values(ip, j);
      }
      tpass(i, j) = acc;
    }
  }

  PriceSurface out;
  out.grid = g;
  out.lower_bound = surface.lower_bound;
  out.upper_bound = surface.upper_bound;
  out.values.resize(rows, cols);
  out.flags.setZero(rows, cols);
  out.residual_l1.setZero(rows, cols);
  out.residual_l2.setZero(rows, cols);

  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const int qj = std::min<int>(
          q_half, static_cast<int>(std::min<Index>(j, cols - 1 - j)));
      double val;
      if (qj == 0) {
        val = tpass(i, j);
      } else if (qj == q_half) {
        double acc = 0.0;
        for (int q = -q_half; q <= q_half; ++q)
          acc += wx[static_cast<size_t>(q + q_half)] * tpass(i, j + q);
        val = acc;
      } else {
        const std::vector<double> wshrunk = bump_weights(qj);
        double acc = 0.0;
        for (int q = -qj; q <= qj; ++q)
          acc += wshrunk[static_cast<size_t>(q + qj)] * tpass(i, j + q);
        val = acc;
      }
      const double hi = out.upper_bound.size() > 0 ? out.upper_bound[j]
                                                   : std::numeric_limits<double>::infinity();
      double clamped = std::min(std::max(val, out.lower_bound), hi);
      if (clamped > val) out.flags(i, j) |= kFlagClampLow;
      if (clamped < val) out.flags(i, j) |= kFlagClampHigh;
      out.values(i, j) = clamped;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SurfaceDerivatives
// ---------------------------------------------------------------------------

SurfaceDerivatives::SurfaceDerivatives(const PriceSurface& surface,
                                       double smoothing_delta)
    : grid_(surface.grid), delta_(smoothing_delta) {
  if (smoothing_delta > 0.0) {
    v_ = mollify_surface(surface, smoothing_delta).values;
  } else {
    v_ = surface.values;
  }
  lower_bound_ = surface.lower_bound;
  upper_bound_ = surface.upper_bound;
}

double SurfaceDerivatives::vx(Index i, Index j) const {
  const double hx = grid_.h_x();
  const Index n = grid_.n_x;
  if (j == 0) return (v_(i, 1) - v_(i, 0)) / hx;
  if (j == n) return (v_(i, n) - v_(i, n - 1)) / hx;
  return (v_(i, j + 1) - v_(i, j - 1)) / (2.0 * hx);
}

double SurfaceDerivatives::vxx(Index i, Index j) const {
  const Index n = grid_.n_x;
  const Index jc = std::clamp<Index>(j, 1, n - 1);
  const double hx = grid_.h_x();
  return (v_(i, jc + 1) + v_(i, jc - 1) - 2.0 * v_(i, jc)) / (hx * hx);
}

double SurfaceDerivatives::vtx(Index i, Index j) const {
  const Index ic = std::min<Index>(i, grid_.n_t - 1);
  return (vx(ic + 1, j) - vx(ic, j)) / grid_.h_t();
}

double SurfaceDerivatives::vxxx(Index i, Index j) const {
  const Index n = grid_.n_x;
  const Index jc = std::clamp<Index>(j, 2, n - 2);
  const double hx = grid_.h_x();
  return (v_(i, jc + 2) - 2.0 * v_(i, jc + 1) + 2.0 * v_(i, jc - 1) -
          v_(i, jc - 2)) /
         (2.0 * hx * hx * hx);
}

double SurfaceDerivatives::interp(NodeFn fn, double t, double x) const {
  const double ti = std::clamp(t, 0.0, grid_.horizon) / grid_.h_t();
  const double xj = (std::clamp(x, grid_.x_min, grid_.x_max) - grid_.x_min) /
                    grid_.h_x();
  Index i = std::clamp<Index>(static_cast<Index>(ti), 0, grid_.n_t - 1);
  Index j = std::clamp<Index>(static_cast<Index>(xj), 0, grid_.n_x - 1);
  const double wt = std::clamp(ti - static_cast<double>(i), 0.0, 1.0);
  const double wx = std::clamp(xj - static_cast<double>(j), 0.0, 1.0);
  return (1.0 - wt) * ((1.0 - wx) * (this->*fn)(i, j) + wx * (this->*fn)(i, j + 1)) +
         wt * ((1.0 - wx) * (this->*fn)(i + 1, j) + wx * (this->*fn)(i + 1, j + 1));
}

double SurfaceDerivatives::max_gamma_excess(const GammaCap& cap) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i <= grid_.n_t; ++i)
    for (Index j = 1; j < grid_.n_x; ++j)
      worst = std::max(worst, vxx(i, j) - cap.gamma_bar(grid_.x(j)));
  return worst;
}

// ---------------------------------------------------------------------------
// Controls
// ---------------------------------------------------------------------------

double gamma_of_a(double a, double x, const ImpactMarket& market) {
  const double denom = market.sigma(x) + market.f(x) * a;
  if (std::abs(denom) < 1e-14)
    throw std::runtime_error("gamma_of_a: sigma + f a vanishes at x=" +
                             std::to_string(x));
  return a / denom;
}

HedgeControls controls_from_surface(const SurfaceDerivatives& derivs,
                                    const ImpactMarket& market, double t,
                                    double x) {
  const double vxx = derivs.vxx_at(t, x);
  const double fx = market.f(x);
  const double denom = 1.0 - fx * vxx;
  if (denom < 1e-12) {
    std::ostringstream os;
    os << "controls_from_surface: 1 - f vxx = " << denom << " at (t=" << t
       << ", x=" << x << ", vxx=" << vxx << ")";
    throw std::runtime_error(os.str());
  }
  const double sig = market.sigma(x);
  HedgeControls c;
  c.a = sig * vxx / denom;
  const double sig_x = sig + c.a * fx;
  c.b = (derivs.vtx_at(t, x) +
         vxx * (market.mu(x) + c.a * sig * market.f_prime(x)) +
         0.5 * derivs.vxxx_at(t, x) * sig_x * sig_x) /
        denom;
  return c;
}

// ---------------------------------------------------------------------------
// Monte Carlo verification
// ---------------------------------------------------------------------------

namespace {

struct PathOutcome {
  double slack = 0.0;
  bool exited = false;
  long checks = 0;
  long violations = 0;
  long lower_breaches = 0;
  double y_gap = 0.0;
};

}  // namespace

HedgeReport verify_superhedge(const SurfaceDerivatives& derivs,
                              const ImpactMarket& market, const GammaCap& cap,
                              const Payoff& payoff, const HedgeOptions& options) {
  if (options.eps < 0.0)
    throw std::invalid_argument("verify_superhedge: eps must be nonnegative");
  if (options.n_paths < 1)
    throw std::invalid_argument("verify_superhedge: need at least one path");
  const Grid& g = derivs.grid();
  if (options.x0 <= g.x_min || options.x0 >= g.x_max)
    throw std::invalid_argument("verify_superhedge: x0 outside the grid");

  const double T = g.horizon;
  const long steps = std::max<long>(1, std::lround(T / options.dt));
  const double dt = T / static_cast<double>(steps);
  const double sqdt = std::sqrt(dt);

  const double price0 = derivs.v_at(0.0, options.x0);
  const double delta0 = derivs.vx_at(0.0, options.x0);
  const double tol_pay = 1e-4 * (1.0 + std::abs(price0));

  // Stay two cells away from the boundary so every derivative stencil and
  // interpolation is interior.
  const double x_safe_lo = g.x_min + 2.0 * g.h_x();
  const double x_safe_hi = g.x_max - 2.0 * g.h_x();

  const double gbar_max =
      cap.gamma_bar_field().max_on(g.x_min, g.x_max);
  const double k_monitor = 10.0 * gbar_max;

  std::vector<PathOutcome> outcomes(static_cast<size_t>(options.n_paths));
  const int threads = resolve_threads(options.threads);

  parallel_chunks(options.n_paths, threads, [&](std::ptrdiff_t pb, std::ptrdiff_t pe) {
    for (std::ptrdiff_t p = pb; p < pe; ++p) {
      GaussianStream gs =
          GaussianStream::for_path(options.seed, static_cast<std::uint64_t>(p));
      PathOutcome& oc = outcomes[static_cast<size_t>(p)];
      StepState s{options.x0, delta0, price0 + options.eps, options.r0};
      for (long k = 0; k < steps; ++k) {
        const double t = dt * static_cast<double>(k);
        if (s.x < x_safe_lo || s.x > x_safe_hi) {
          oc.exited = true;
          break;
        }
        const HedgeControls hc = controls_from_surface(derivs, market, t, s.x);
        const double gamma_y = gamma_of_a(hc.a, s.x, market);
        oc.checks += 1;
        if (gamma_y > cap.gamma_bar(s.x) * (1.0 + options.gamma_violation_slack))
          oc.violations += 1;
        if (gamma_y < -k_monitor) oc.lower_breaches += 1;
        oc.y_gap = std::max(oc.y_gap, std::abs(s.y - derivs.vx_at(t, s.x)));

        impact_step(s, hc.a, hc.b, dt, sqdt * gs.next(), market, options.rho);
      }
      if (!oc.exited) oc.slack = s.v - payoff(s.x);
    }
  });

  // Serial reduction in path order keeps the report independent of the
  // thread partition.
  HedgeReport rep;
  rep.n_paths = options.n_paths;
  rep.price_v0 = price0;
  rep.y0 = delta0;
  rep.tol_pay = tol_pay;
  rep.x0 = options.x0;
  rep.eps = options.eps;
  rep.dt = dt;
  rep.rho = options.rho;
  rep.seed = options.seed;

  std::vector<double> shortfalls;
  shortfalls.reserve(outcomes.size());
  long successes = 0;
  long checks = 0, violations = 0;
  double slack_sum = 0.0;
  for (const PathOutcome& oc : outcomes) {
    checks += oc.checks;
    violations += oc.violations;
    rep.lower_gamma_breaches += oc.lower_breaches;
    rep.max_y_gap = std::max(rep.max_y_gap, oc.y_gap);
    if (oc.exited) {
      rep.n_excluded += 1;
      continue;
    }
    shortfalls.push_back(-oc.slack);
    slack_sum += oc.slack;
    if (oc.slack >= -tol_pay) successes += 1;
  }

  const double exit_fraction =
      static_cast<double>(rep.n_excluded) / options.n_paths;
  if (exit_fraction > options.exit_fraction_limit) {
    std::ostringstream os;
    os << "verify_superhedge: " << (100.0 * exit_fraction)
       << "% of paths left the grid; solve on a wider spatial domain";
    throw std::runtime_error(os.str());
  }

  const long included = options.n_paths - rep.n_excluded;
  rep.success_rate =
      included > 0 ? static_cast<double>(successes) / included : 0.0;
  rep.mean_slack = included > 0 ? slack_sum / included : 0.0;
  rep.gamma_violation_rate =
      checks > 0 ? static_cast<double>(violations) / checks : 0.0;

  std::sort(shortfalls.begin(), shortfalls.end());
  auto quantile = [&shortfalls](double q) {
    if (shortfalls.empty()) return 0.0;
    const long m = static_cast<long>(shortfalls.size());
    long idx = static_cast<long>(std::ceil(q * m)) - 1;
    idx = std::clamp<long>(idx, 0, m - 1);
    return shortfalls[static_cast<size_t>(idx)];
  };
  rep.shortfall_q50 = quantile(0.50);
  rep.shortfall_q95 = quantile(0.95);
  rep.shortfall_q99 = quantile(0.99);
  return rep;
}

HedgeReport verify_superhedge(const PriceSurface& surface,
                              const ImpactMarket& market, const GammaCap& cap,
                              const Payoff& payoff, const HedgeOptions& options) {
  const SurfaceDerivatives derivs(surface, 2.0 * surface.grid.h_x());
  return verify_superhedge(derivs, market, cap, payoff, options);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

std::string HedgeReport::to_kv() const {
  std::ostringstream os;
  os << "n_paths=" << n_paths << "\n"
     << "n_excluded=" << n_excluded << "\n"
     << "success_rate=" << fmt(success_rate) << "\n"
     << "shortfall_q50=" << fmt(shortfall_q50) << "\n"
     << "shortfall_q95=" << fmt(shortfall_q95) << "\n"
     << "shortfall_q99=" << fmt(shortfall_q99) << "\n"
     << "mean_slack=" << fmt(mean_slack) << "\n"
     << "gamma_violation_rate=" << fmt(gamma_violation_rate) << "\n"
     << "lower_gamma_breaches=" << lower_gamma_breaches << "\n"
     << "max_y_gap=" << fmt(max_y_gap) << "\n"
     << "price_v0=" << fmt(price_v0) << "\n"
     << "y0=" << fmt(y0) << "\n"
     << "tol_pay=" << fmt(tol_pay) << "\n"
     << "x0=" << fmt(x0) << "\n"
     << "eps=" << fmt(eps) << "\n"
     << "dt=" << fmt(dt) << "\n"
     << "rho=" << fmt(rho) << "\n"
     << "seed=" << seed << "\n";
  return os.str();
}

std::string HedgeReport::csv_header() {
  return "n_paths,n_excluded,success_rate,shortfall_q50,shortfall_q95,"
         "shortfall_q99,mean_slack,gamma_violation_rate,lower_gamma_breaches,"
         "max_y_gap,price_v0,y0,tol_pay,x0,eps,dt,rho,seed";
}

std::string HedgeReport::csv_row() const {
  std::ostringstream os;
  os << n_paths << ',' << n_excluded << ',' << fmt(success_rate) << ','
     << fmt(shortfall_q50) << ',' << fmt(shortfall_q95) << ','
     << fmt(shortfall_q99) << ',' << fmt(mean_slack) << ','
     << fmt(gamma_violation_rate) << ',' << lower_gamma_breaches << ','
     << fmt(max_y_gap) << ',' << fmt(price_v0) << ',' << fmt(y0) << ','
     << fmt(tol_pay) << ',' << fmt(x0) << ',' << fmt(eps) << ',' << fmt(dt)
     << ',' << fmt(rho) << ',' << seed;
  return os.str();
}

}  // namespace impact
