#include "impact/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "impact/parallel.hpp"

namespace impact {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double nonlinearity(double sigma, double f, double g) {
  // sigma^2 G / (2 (1 - f G)); callers keep G on the subcritical side.
  return 0.5 * sigma * sigma * g / (1.0 - f * g);
}

struct NodeFunctions {
  const NodeParams& p;
  double hx2;

  double gamma_at(double y) const {
    return (p.phi_plus + p.phi_minus - 2.0 * y) / hx2;
  }
  double l1(double y) const {
    const double g = gamma_at(y);
    return (y - p.phi_center) / p.h_t - nonlinearity(p.sigma, p.f, g);
  }
  double l1_prime(double y) const {
    const double g = gamma_at(y);
    const double d = 1.0 - p.f * g;
    return 1.0 / p.h_t + p.sigma * p.sigma / (hx2 * d * d);
  }
  double l2(double y) const { return p.gamma_cap - gamma_at(y); }
};

}  // namespace

double discrete_gamma(const ArrayXd& next_row, Index j, double y, double h_x) {
  if (j < 1 || j + 1 >= next_row.size())
    throw std::out_of_range("discrete_gamma: index must be interior");
  return (next_row[j + 1] + next_row[j - 1] - 2.0 * y) / (h_x * h_x);
}

NodeResult node_solve(const NodeParams& p) {
  if (!(std::isfinite(p.phi_center) && std::isfinite(p.phi_plus) &&
        std::isfinite(p.phi_minus)))
    throw std::runtime_error("node_solve: non-finite next-row data");
  if (!(p.h_t > 0.0) || !(p.h_x > 0.0))
    throw std::runtime_error("node_solve: invalid mesh sizes");

  NodeFunctions fn{p, p.h_x * p.h_x};
  NodeResult out;

  // Explicit root of L2; at this point G = gamma_cap so 1 - f G >= iota f,
  // and L1 is evaluated on [y2, inf) only.
  const double y2 =
      0.5 * (p.phi_plus + p.phi_minus - p.gamma_cap * fn.hx2);
  const double cap_rate = nonlinearity(p.sigma, p.f, p.gamma_cap);

  double root;
  if (fn.l1(y2) >= 0.0) {
    root = y2;
    out.flags |= kFlagCapBranch;
  } else {
    double lo = y2;
    double hi = std::max(y2, p.phi_center + p.h_t * cap_rate) +
                1e-6 * (1.0 + std::abs(y2));
    double f_hi = fn.l1(hi);
    int expand = 0;
    while (f_hi < 0.0 && expand < 64) {
      lo = hi;
      hi += (hi - y2 + 1.0);
      f_hi = fn.l1(hi);
      ++expand;
    }
    if (f_hi < 0.0) {
      std::ostringstream os;
      os << "node_solve: failed to bracket the L1 root (phi_c=" << p.phi_center
         << ", y2=" << y2 << ")";
      throw std::runtime_error(os.str());
    }

    // Safeguarded Newton inside [lo, hi].
    double y = 0.5 * (lo + hi);
    const double y_tol = std::max(1e-15, p.tol * std::max(1.0, std::abs(y2)));
    for (int it = 0; it < 100; ++it) {
      ++out.iterations;
      const double fy = fn.l1(y);
      if (fy == 0.0) break;
      if (fy > 0.0)
        hi = y;
      else
        lo = y;
      const double dy = fy / fn.l1_prime(y);
      double next = y - dy;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - y) <= y_tol && std::abs(fy) <=
              fn.l1_prime(y) * 4.0 * y_tol) {
        y = next;
        break;
      }
      y = next;
    }
    root = y;
  }

  out.y_root = root;
  out.y = std::min(std::max(root, p.w_low), p.w_high);
  if (out.y > root) out.flags |= kFlagClampLow;
  if (out.y < root) out.flags |= kFlagClampHigh;

  out.res_l1 = fn.l1(out.y);
  out.res_l2 = fn.l2(out.y);

  // Diagnostic: discrete gamma within the scheme's own one-step relaxation
  // window of the cap. The strict cap branch is flagged separately.
  const double window =
      4.0 * (p.h_t / fn.hx2) * std::max(cap_rate, 0.0) + p.tol;
  if (out.res_l2 <= window) out.flags |= kFlagCapBind;
  return out;
}

// ---------------------------------------------------------------------------
// Surface solve
// ---------------------------------------------------------------------------

void solve_surface_streaming(const ImpactMarket& market, const GammaCap& cap,
                             const FaceLiftedPayoff& lifted, const Grid& grid,
                             const SolveOptions& options, const RowSink& sink) {
  const Index n = grid.n_x;
  const ArrayXd xs = grid.x_nodes();
  market.validate_on(xs);
  cap.validate_against(market, xs);

  ArrayXd ghat(n + 1);
  for (Index j = 0; j <= n; ++j) {
    const Index idx = lifted.index_of(xs[j], 1e-7);
    if (idx < 0)
      throw std::runtime_error(
          "solve_surface: face-lift samples do not contain grid node x=" +
          std::to_string(xs[j]));
    ghat[j] = lifted.g_hat[idx];
  }

  const GrowthBounds gb = growth_bounds_from_constants(
      lifted.payoff_c0, lifted.payoff_c1, lifted.payoff_inf, cap, market,
      grid.horizon, grid.x_min, grid.x_max);

  ArrayXd sigma_j(n + 1), f_j(n + 1), gbar_j(n + 1), whigh_j(n + 1);
  for (Index j = 0; j <= n; ++j) {
    sigma_j[j] = market.sigma(xs[j]);
    f_j[j] = market.f(xs[j]);
    gbar_j[j] = cap.gamma_bar(xs[j]);
    whigh_j[j] = gb.upper(0.0, xs[j]);
    if (whigh_j[j] < ghat[j] - 1e-9)
      throw std::runtime_error(
          "solve_surface: upper growth bound below the terminal condition "
          "at x=" + std::to_string(xs[j]));
  }

  const double h_t = grid.h_t();
  const double h_x = grid.h_x();
  const int threads = resolve_threads(options.threads);

  ArrayXd prev = ghat;
  ArrayXd cur(n + 1);
  ArrayXd res1 = ArrayXd::Zero(n + 1), res2 = ArrayXd::Zero(n + 1);
  std::vector<std::uint8_t> flags(static_cast<size_t>(n) + 1, 0);

  sink(grid.n_t, prev, flags, res1, res2);

  for (Index i = grid.n_t - 1; i >= 0; --i) {
    cur[0] = ghat[0];
    cur[n] = ghat[n];
    res1[0] = res1[n] = 0.0;
    res2[0] = res2[n] = 0.0;
    flags[0] = flags[static_cast<size_t>(n)] = 0;

    std::exception_ptr error;
    std::mutex error_mutex;
    parallel_chunks(n - 1, threads, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
      try {
        for (std::ptrdiff_t k = b; k < e; ++k) {
          const Index j = static_cast<Index>(k) + 1;
          NodeParams np;
          np.phi_center = prev[j];
          np.phi_plus = prev[j + 1];
          np.phi_minus = prev[j - 1];
          np.sigma = sigma_j[j];
          np.f = f_j[j];
          np.gamma_cap = gbar_j[j];
          np.h_t = h_t;
          np.h_x = h_x;
          np.w_low = gb.lower;
          np.w_high = whigh_j[j];
          np.tol = options.tol;
          const NodeResult r = node_solve(np);
          cur[j] = r.y;
          res1[j] = r.res_l1;
          res2[j] = r.res_l2;
          flags[static_cast<size_t>(j)] = r.flags;
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
    if (error) {
      try {
        std::rethrow_exception(error);
      } catch (const std::exception& ex) {
        throw std::runtime_error("solve_surface: row " + std::to_string(i) +
                                 ": " + ex.what());
      }
    }

    sink(i, cur, flags, res1, res2);
    std::swap(prev, cur);
  }
}

PriceSurface solve_surface(const ImpactMarket& market, const GammaCap& cap,
                           const FaceLiftedPayoff& lifted, const Grid& grid,
                           const SolveOptions& options) {
  PriceSurface s;
  s.grid = grid;
  s.values.resize(grid.n_t + 1, grid.n_x + 1);
  s.flags.setZero(grid.n_t + 1, grid.n_x + 1);
  s.residual_l1.setZero(grid.n_t + 1, grid.n_x + 1);
  s.residual_l2.setZero(grid.n_t + 1, grid.n_x + 1);

  solve_surface_streaming(
      market, cap, lifted, grid, options,
      [&](Index i, const ArrayXd& row, const std::vector<std::uint8_t>& fl,
          const ArrayXd& r1, const ArrayXd& r2) {
        for (Index j = 0; j <= grid.n_x; ++j) {
          s.values(i, j) = row[j];
          s.flags(i, j) = fl[static_cast<size_t>(j)];
          s.residual_l1(i, j) = static_cast<float>(r1[j]);
          s.residual_l2(i, j) = static_cast<float>(r2[j]);
        }
      });

  const GrowthBounds gb = growth_bounds_from_constants(
      lifted.payoff_c0, lifted.payoff_c1, lifted.payoff_inf, cap, market,
      grid.horizon, grid.x_min, grid.x_max);
  s.lower_bound = gb.lower;
  s.upper_bound.resize(grid.n_x + 1);
  const ArrayXd xs = grid.x_nodes();
  for (Index j = 0; j <= grid.n_x; ++j) s.upper_bound[j] = gb.upper(0.0, xs[j]);
  return s;
}

double PriceSurface::value_at(double t, double x) const {
  const double ht = grid.h_t();
  const double hx = grid.h_x();
  double ti = std::clamp(t, 0.0, grid.horizon) / ht;
  double xj = (std::clamp(x, grid.x_min, grid.x_max) - grid.x_min) / hx;
  Index i = std::min<Index>(static_cast<Index>(ti), grid.n_t - 1);
  Index j = std::min<Index>(static_cast<Index>(xj), grid.n_x - 1);
  i = std::max<Index>(i, 0);
  j = std::max<Index>(j, 0);
  const double wt = std::clamp(ti - static_cast<double>(i), 0.0, 1.0);
  const double wx = std::clamp(xj - static_cast<double>(j), 0.0, 1.0);
  return (1.0 - wt) * ((1.0 - wx) * values(i, j) + wx * values(i, j + 1)) +
         wt * ((1.0 - wx) * values(i + 1, j) + wx * values(i + 1, j + 1));
}

// ---------------------------------------------------------------------------
// Constant-volatility benchmark price
// ---------------------------------------------------------------------------

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
// Legendre recurrence.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

const std::vector<double>& gl_nodes() {
  static std::vector<double> x, w;
  if (x.empty()) gauss_legendre(20, x, w);
  return x;
}
const std::vector<double>& gl_weights() {
  static std::vector<double> x, w;
  if (w.empty()) gauss_legendre(20, x, w);
  return w;
}

}  // namespace

TerminalCurve to_terminal_curve(const Payoff& payoff) {
  TerminalCurve c;
  c.eval = [payoff](double x) { return payoff(x); };
  c.kinks = payoff.breakpoints();
  return c;
}

double heat_price_oracle(const TerminalCurve& terminal, double sigma0, double t,
                         double x, double T) {
  if (!(std::isfinite(sigma0) && std::isfinite(t) && std::isfinite(x) &&
        std::isfinite(T)))
    throw std::invalid_argument("heat_price_oracle: non-finite input");
  const double tau = T - t;
  if (tau < 0.0) throw std::invalid_argument("heat_price_oracle: t > T");
  const double s = sigma0 * std::sqrt(tau);
  if (s <= 0.0) return terminal.eval(x);

  constexpr double z_max = 10.0;
  std::vector<double> cuts;
  cuts.push_back(-z_max);
  for (double k : terminal.kinks) {
    const double z = (k - x) / s;
    if (z > -z_max && z < z_max) cuts.push_back(z);
  }
  cuts.push_back(z_max);
  std::sort(cuts.begin(), cuts.end());

  const auto& gx = gl_nodes();
  const auto& gw = gl_weights();
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;

  double total = 0.0;
  for (size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    if (b - a <= 1e-14) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.5)));
    const double pw = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double lo = a + p * pw;
      const double mid = lo + 0.5 * pw;
      const double half = 0.5 * pw;
      double acc = 0.0;
      for (size_t q = 0; q < gx.size(); ++q) {
        const double z = mid + half * gx[q];
        acc += gw[q] * terminal.eval(x + s * z) *
               std::exp(-0.5 * z * z);
      }
      total += acc * half * inv_sqrt_2pi;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Refinement study
// ---------------------------------------------------------------------------

RefinementReport refine_and_estimate(const ImpactMarket& market,
                                     const GammaCap& cap, const Payoff& payoff,
                                     const Grid& base_grid, int levels,
                                     const RefineOptions& options) {
  if (levels < 2)
    throw std::invalid_argument("refine_and_estimate: need at least 2 levels");

  RefinementReport report;
  report.levels.reserve(static_cast<size_t>(levels));

  for (int lvl = 0; lvl < levels; ++lvl) {
    const int nx = base_grid.n_x << lvl;
    const double ht_target =
        base_grid.h_t() * std::pow(2.0, -options.refine_exponent * lvl);
    const int nt = static_cast<int>(std::ceil(base_grid.horizon / ht_target));
    Grid g(base_grid.x_min, base_grid.x_max, nx, nt, base_grid.horizon);

    const FaceLiftedPayoff lifted =
        face_lift(payoff, cap, g.x_nodes(), options.face_lift);

    RefinementLevel level;
    level.grid = g;
    std::vector<Index> capture_idx;
    for (double tc : options.capture_times) {
      const Index i = std::clamp<Index>(
          static_cast<Index>(std::lround(tc / g.h_t())), 0, g.n_t);
      capture_idx.push_back(i);
    }

    solve_surface_streaming(
        market, cap, lifted, g, options.solve,
        [&](Index i, const ArrayXd& row, const std::vector<std::uint8_t>&,
            const ArrayXd&, const ArrayXd&) {
          if (i == 0) level.t0_row = row;
          for (size_t k = 0; k < capture_idx.size(); ++k)
            if (capture_idx[k] == i)
              level.captured[options.capture_times[k]] = row;
        });

    if (lvl > 0) {
      const RefinementLevel& prevl = report.levels.back();
      const double quarter = 0.25 * (g.x_max - g.x_min);
      const double lo = g.x_min + quarter, hi = g.x_max - quarter;
      double md = 0.0;
      for (Index j = 0; j <= prevl.grid.n_x; ++j) {
        const double xv = prevl.grid.x(j);
        if (xv < lo || xv > hi) continue;
        md = std::max(md, std::abs(level.t0_row[2 * j] - prevl.t0_row[j]));
      }
      level.max_diff = md;
      if (report.levels.size() >= 2 && prevl.max_diff > 0.0)
        level.ratio = md / prevl.max_diff;
    }
    report.levels.push_back(std::move(level));
  }
  return report;
}

}  // namespace impact
