#include "impact/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace impact {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_strictly_increasing(const ArrayXd& xs, const char* who) {
  require(xs.size() >= 2, std::string(who) + ": need at least 2 grid points");
  for (Index j = 1; j < xs.size(); ++j)
    require(xs[j] > xs[j - 1], std::string(who) + ": grid not strictly increasing");
}

}  // namespace

// ---------------------------------------------------------------------------
// ImpactMarket / GammaCap
// ---------------------------------------------------------------------------

ImpactMarket ImpactMarket::make(ScalarField mu, ScalarField sigma, ScalarField f,
                                double domain_lo, double domain_hi) {
  require(domain_lo < domain_hi, "ImpactMarket: empty reference domain");
  ImpactMarket m;
  m.mu_ = std::move(mu);
  m.sigma_ = std::move(sigma);
  m.f_ = std::move(f);
  m.f_min_ = m.f_.min_on(domain_lo, domain_hi);
  m.f_max_ = m.f_.max_on(domain_lo, domain_hi);
  m.sigma_min_ = m.sigma_.min_on(domain_lo, domain_hi);
  m.sigma_max_ = m.sigma_.max_on(domain_lo, domain_hi);
  require(std::isfinite(m.f_min_) && m.f_min_ >= 0.0,
          "ImpactMarket: impact function must be nonnegative and bounded");
  require(std::isfinite(m.sigma_max_) && m.sigma_min_ > 0.0,
          "ImpactMarket: volatility must satisfy 0 < inf sigma <= sup sigma < inf");

  double lip = 0.0;
  constexpr int kProbe = 257;
  for (int i = 0; i < kProbe; ++i) {
    const double x =
        domain_lo + (domain_hi - domain_lo) * static_cast<double>(i) / (kProbe - 1);
    lip = std::max(lip, std::abs(m.mu_.derivative(x)));
    lip = std::max(lip, std::abs(m.sigma_.derivative(x)));
    require(std::isfinite(m.mu_(x)), "ImpactMarket: drift not finite on domain");
  }
  m.lipschitz_bound_ = lip;
  return m;
}

void ImpactMarket::validate_on(const ArrayXd& xs) const {
  for (Index j = 0; j < xs.size(); ++j) {
    const double x = xs[j];
    const double fx = f_(x), sx = sigma_(x), mx = mu_(x);
    if (!std::isfinite(fx) || fx < 0.0)
      throw std::runtime_error("ImpactMarket: f invalid at x=" + std::to_string(x));
    if (!std::isfinite(sx) || sx <= 0.0)
      throw std::runtime_error("ImpactMarket: sigma invalid at x=" + std::to_string(x));
    if (!std::isfinite(mx))
      throw std::runtime_error("ImpactMarket: mu invalid at x=" + std::to_string(x));
  }
}

GammaCap::GammaCap(ScalarField gamma_bar, double iota, double k_lower)
    : gamma_bar_(std::move(gamma_bar)), iota_(iota), k_lower_(k_lower) {
  require(iota_ > 0.0, "GammaCap: iota must be positive");
  require(k_lower_ >= 0.0, "GammaCap: k_lower must be nonnegative");
}

void GammaCap::validate_against(const ImpactMarket& market, const ArrayXd& xs) const {
  constexpr double tol = 1e-12;
  for (Index j = 0; j < xs.size(); ++j) {
    const double x = xs[j];
    const double g = gamma_bar_(x);
    if (!std::isfinite(g))
      throw std::runtime_error("GammaCap: gamma_bar not finite at x=" + std::to_string(x));
    if (g < iota_ - tol)
      throw std::runtime_error("GammaCap: gamma_bar below iota at x=" + std::to_string(x));
    const double fx = market.f(x);
    if (fx > 0.0 && g > 1.0 / fx - iota_ + tol)
      throw std::runtime_error("GammaCap: gamma_bar above 1/f - iota at x=" +
                               std::to_string(x));
  }
}

// ---------------------------------------------------------------------------
// Payoff
// ---------------------------------------------------------------------------

Payoff Payoff::call_spread(double k1, double k2) {
  require(k1 < k2, "call_spread: strikes must be ordered");
  Payoff p;
  p.kind_ = Kind::call_spread;
  p.knots_x_ = {k1, k2};
  p.knots_y_ = {0.0, k2 - k1};
  p.params_ = {k1, k2};
  p.finalize();
  return p;
}

Payoff Payoff::butterfly(double k1, double k2, double k3) {
  require(k1 < k2 && k2 < k3, "butterfly: strikes must be ordered");
  Payoff p;
  p.kind_ = Kind::butterfly;
  p.knots_x_ = {k1, k2, k3};
  p.knots_y_ = {0.0, k2 - k1, 2.0 * k2 - k1 - k3};
  p.params_ = {k1, k2, k3};
  p.finalize();
  return p;
}

Payoff Payoff::digital(double k) {
  Payoff p;
  p.kind_ = Kind::digital;
  p.knots_x_ = {k};
  p.knots_y_ = {1.0};
  p.params_ = {k};
  p.finalize();
  return p;
}

Payoff Payoff::piecewise_linear(std::vector<double> xs, std::vector<double> ys) {
  require(xs.size() == ys.size() && xs.size() >= 2,
          "piecewise_linear: need matching knot arrays with >= 2 points");
  Payoff p;
  p.kind_ = Kind::piecewise_linear;
  p.knots_x_ = std::move(xs);
  p.knots_y_ = std::move(ys);
  p.finalize();
  return p;
}

Payoff Payoff::sampled(ArrayXd xs, ArrayXd ys) {
  require(xs.size() == ys.size() && xs.size() >= 2,
          "sampled: need matching sample arrays with >= 2 points");
  Payoff p;
  p.kind_ = Kind::sampled;
  p.knots_x_.assign(xs.data(), xs.data() + xs.size());
  p.knots_y_.assign(ys.data(), ys.data() + ys.size());
  p.finalize();
  return p;
}

void Payoff::finalize() {
  for (size_t i = 0; i + 1 < knots_x_.size(); ++i)
    require(knots_x_[i] < knots_x_[i + 1], "payoff knots not strictly increasing");
  for (double y : knots_y_)
    require(std::isfinite(y), "payoff values must be finite");

  if (kind_ == Kind::digital) {
    slope_left_ = slope_right_ = 0.0;
  } else if (knots_x_.size() >= 2) {
    slope_left_ = (knots_y_[1] - knots_y_[0]) / (knots_x_[1] - knots_x_[0]);
    const size_t n = knots_x_.size();
    slope_right_ =
        (knots_y_[n - 1] - knots_y_[n - 2]) / (knots_x_[n - 1] - knots_x_[n - 2]);
    if (kind_ == Kind::call_spread || kind_ == Kind::butterfly)
      slope_left_ = slope_right_ = 0.0;  // flat tails by construction
  }

  c1_ = std::max(std::abs(slope_left_), std::abs(slope_right_));

  // sup of g(x) - c1 |x| is attained at a knot or at the kink of |x|.
  double c0_upper = (*this)(0.0);
  for (size_t i = 0; i < knots_x_.size(); ++i)
    c0_upper = std::max(c0_upper, knots_y_[i] - c1_ * std::abs(knots_x_[i]));
  if (kind_ == Kind::digital) c0_upper = std::max(c0_upper, 1.0);

  if (slope_left_ > 0.0 || slope_right_ < 0.0) {
    inf_value_ = -kInf;
  } else {
    double lo = knots_y_.empty() ? 0.0 : knots_y_[0];
    for (double y : knots_y_) lo = std::min(lo, y);
    if (kind_ == Kind::digital) lo = std::min(lo, 0.0);
    inf_value_ = lo;
  }

  const double c0_lower = std::isfinite(inf_value_) ? std::max(0.0, -inf_value_) : 0.0;
  c0_ = std::max({c0_upper, c0_lower, 1e-12});
}

double Payoff::operator()(double x) const {
  if (kind_ == Kind::digital) return x >= knots_x_[0] ? 1.0 : 0.0;
  const auto& xs = knots_x_;
  const auto& ys = knots_y_;
  if (x <= xs.front()) return ys.front() + slope_left_ * (x - xs.front());
  if (x >= xs.back()) return ys.back() + slope_right_ * (x - xs.back());
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const size_t i = static_cast<size_t>(it - xs.begin()) - 1;
  const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return ys[i] + w * (ys[i + 1] - ys[i]);
}

std::string Payoff::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::call_spread: os << "call_spread"; break;
    case Kind::butterfly: os << "butterfly"; break;
    case Kind::digital: os << "digital"; break;
    case Kind::piecewise_linear: os << "piecewise_linear"; break;
    case Kind::sampled: os << "sampled"; break;
  }
  if (!params_.empty()) {
    for (double v : params_) os << " " << v;
  } else {
    os << " (" << knots_x_.size() << " knots)";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Face-lift ingredients
// ---------------------------------------------------------------------------

ArrayXd gamma_antiderivative(const GammaCap& cap, const ArrayXd& grid_x) {
  check_strictly_increasing(grid_x, "gamma_antiderivative");
  const Index n = grid_x.size();
  const Index m = n / 2;

  ArrayXd gb(n);
  for (Index j = 0; j < n; ++j) gb[j] = cap.gamma_bar(grid_x[j]);

  // First antiderivative s (s(x_m) = 0), then the second, both by trapezoid.
  ArrayXd s(n);
  s[m] = 0.0;
  for (Index j = m + 1; j < n; ++j)
    s[j] = s[j - 1] + 0.5 * (gb[j - 1] + gb[j]) * (grid_x[j] - grid_x[j - 1]);
  for (Index j = m - 1; j >= 0; --j)
    s[j] = s[j + 1] - 0.5 * (gb[j] + gb[j + 1]) * (grid_x[j + 1] - grid_x[j]);

  ArrayXd big(n);
  big[m] = 0.0;
  for (Index j = m + 1; j < n; ++j)
    big[j] = big[j - 1] + 0.5 * (s[j - 1] + s[j]) * (grid_x[j] - grid_x[j - 1]);
  for (Index j = m - 1; j >= 0; --j)
    big[j] = big[j + 1] - 0.5 * (s[j] + s[j + 1]) * (grid_x[j + 1] - grid_x[j]);

  // Remove the affine part so the centered slope vanishes exactly.
  if (m > 0 && m + 1 < n) {
    const double slope =
        (big[m + 1] - big[m - 1]) / (grid_x[m + 1] - grid_x[m - 1]);
    for (Index j = 0; j < n; ++j) big[j] -= slope * (grid_x[j] - grid_x[m]);
  }
  return big;
}

ArrayXd concave_envelope(const ArrayXd& xs, const ArrayXd& ys) {
  check_strictly_increasing(xs, "concave_envelope");
  require(ys.size() == xs.size(), "concave_envelope: size mismatch");
  for (Index j = 0; j < ys.size(); ++j)
    require(std::isfinite(ys[j]), "concave_envelope: values must be finite");

  const Index n = xs.size();
  std::vector<Index> hull;
  hull.reserve(static_cast<size_t>(n));
  for (Index j = 0; j < n; ++j) {
    // Pop while the previous vertex sits on or below the chord formed with
    // the new point (upper hull keeps clockwise turns only).
    while (hull.size() >= 2) {
      const Index a = hull[hull.size() - 2];
      const Index b = hull[hull.size() - 1];
      const double cross = (xs[b] - xs[a]) * (ys[j] - ys[a]) -
                           (ys[b] - ys[a]) * (xs[j] - xs[a]);
      if (cross >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(j);
  }

  ArrayXd env(n);
  size_t seg = 0;
  for (Index j = 0; j < n; ++j) {
    while (seg + 1 < hull.size() && xs[hull[seg + 1]] < xs[j]) ++seg;
    const Index a = hull[seg];
    if (a == j || seg + 1 >= hull.size()) {
      env[j] = ys[a == j ? j : hull.back()];
      continue;
    }
    const Index b = hull[seg + 1];
    const double w = (xs[j] - xs[a]) / (xs[b] - xs[a]);
    env[j] = ys[a] + w * (ys[b] - ys[a]);
  }
  // Guard against interpolation rounding dipping below the data.
  for (Index j = 0; j < n; ++j) env[j] = std::max(env[j], ys[j]);
  return env;
}

namespace {

// Assemble the abscissae the hull runs on: the extended coarse grid, plus
// payoff breakpoints, plus (for payoffs that are exact between breakpoints)
// a uniform refinement fine enough that secant-vs-tangent error stays below
// the face-lift accuracy target.
struct HullGrid {
  std::vector<double> x;
  std::vector<Index> coarse_pos;  // position of each coarse node inside x
};

HullGrid build_hull_grid(const std::vector<double>& coarse,
                         const std::vector<double>& inner_points,
                         double refine_step) {
  HullGrid out;
  out.coarse_pos.reserve(coarse.size());
  std::vector<double> extras = inner_points;
  std::sort(extras.begin(), extras.end());
  size_t e = 0;
  const double scale = std::max(std::abs(coarse.front()), std::abs(coarse.back()));
  const double same_tol = 1e-12 * (1.0 + scale);

  for (size_t i = 0; i < coarse.size(); ++i) {
    out.coarse_pos.push_back(static_cast<Index>(out.x.size()));
    out.x.push_back(coarse[i]);
    if (i + 1 == coarse.size()) break;
    const double a = coarse[i], b = coarse[i + 1];

    std::vector<double> mids;
    while (e < extras.size() && extras[e] <= a + same_tol) ++e;
    size_t e2 = e;
    while (e2 < extras.size() && extras[e2] < b - same_tol) mids.push_back(extras[e2++]);
    e = e2;

    if (refine_step > 0.0) {
      const int parts = static_cast<int>(std::ceil((b - a) / refine_step));
      if (parts > 1) {
        for (int p = 1; p < parts; ++p)
          mids.push_back(a + (b - a) * static_cast<double>(p) / parts);
        std::sort(mids.begin(), mids.end());
      }
    }
    double last = a;
    for (double v : mids) {
      if (v > last + same_tol && v < b - same_tol) {
        out.x.push_back(v);
        last = v;
      }
    }
  }
  return out;
}

}  // namespace

FaceLiftedPayoff face_lift(const Payoff& payoff, const GammaCap& cap,
                           const ArrayXd& grid_x, const FaceLiftOptions& options) {
  check_strictly_increasing(grid_x, "face_lift");
  const Index n = grid_x.size();
  const double x_lo = grid_x[0];
  const double x_hi = grid_x[n - 1];
  const double h_lo = grid_x[1] - grid_x[0];
  const double h_hi = grid_x[n - 1] - grid_x[n - 2];

  double margin = options.margin;
  if (margin <= 0.0) {
    const double reach = payoff.c1() / cap.iota();
    margin = 2.0 * (reach + std::max(std::abs(x_lo), std::abs(x_hi)));
  }
  margin = std::max(margin, 2.0 * std::max(h_lo, h_hi));

  // Extended coarse grid, keeping the boundary spacings.
  std::vector<double> coarse;
  const int n_lo = static_cast<int>(std::ceil(margin / h_lo));
  const int n_hi = static_cast<int>(std::ceil(margin / h_hi));
  coarse.reserve(static_cast<size_t>(n) + n_lo + n_hi);
  for (int k = n_lo; k >= 1; --k) coarse.push_back(x_lo - k * h_lo);
  for (Index j = 0; j < n; ++j) coarse.push_back(grid_x[j]);
  for (int k = 1; k <= n_hi; ++k) coarse.push_back(x_hi + k * h_hi);

  const double ext_lo = coarse.front();
  const double ext_hi = coarse.back();
  const double gbar_max = cap.gamma_bar_field().max_on(ext_lo, ext_hi);

  double refine_step = options.refine_step;
  if (payoff.exact_between_breakpoints()) {
    if (refine_step <= 0.0)
      refine_step = std::sqrt(2e-9 / std::max(gbar_max, 1e-8));
    refine_step = std::min({refine_step, h_lo, h_hi});
    // Keep the hull workload bounded on very wide extensions.
    const double min_step = (ext_hi - ext_lo) / 8.0e6;
    refine_step = std::max(refine_step, min_step);
  } else {
    refine_step = 0.0;  // sampled data is the ground truth; no subdivision
  }

  // Breakpoints (or sample abscissae) always join the hull grid verbatim.
  HullGrid hg = build_hull_grid(coarse, payoff.breakpoints(), refine_step);

  const Index m = static_cast<Index>(hg.x.size());
  ArrayXd xs = Eigen::Map<const ArrayXd>(hg.x.data(), m);
  ArrayXd g(m);
  for (Index j = 0; j < m; ++j) g[j] = payoff(xs[j]);
  ArrayXd big_gamma = gamma_antiderivative(cap, xs);
  ArrayXd p = g - big_gamma;
  ArrayXd env = concave_envelope(xs, p);

  // Margin sufficiency: the chord incident to an extension endpoint must not
  // reach into the requested domain. Detect by checking that the envelope
  // touches the data at or before the domain edge on each side.
  {
    const double touch_tol = 1e-11 * (1.0 + p.abs().maxCoeff());
    Index left_touch = -1;
    for (Index j = 0; j < m; ++j) {
      if (xs[j] > x_lo) break;
      if (env[j] - p[j] <= touch_tol) left_touch = j;
    }
    Index right_touch = -1;
    for (Index j = m - 1; j >= 0; --j) {
      if (xs[j] < x_hi) break;
      if (env[j] - p[j] <= touch_tol) right_touch = j;
    }
    if (left_touch < 0 || right_touch < 0) {
      std::ostringstream os;
      os << "face_lift: extension margin " << margin
         << " too small, the concave hull is still chord-active at the "
         << (left_touch < 0 ? "left" : "right")
         << " boundary; enlarge the margin";
      throw std::runtime_error(os.str());
    }
  }

  ArrayXd ghat_fine = env + big_gamma;

  FaceLiftedPayoff out;
  const Index nc = static_cast<Index>(coarse.size());
  out.x.resize(nc);
  out.g.resize(nc);
  out.g_hat.resize(nc);
  out.gamma_bar.resize(nc);
  out.gamma_antideriv.resize(nc);
  for (Index i = 0; i < nc; ++i) {
    const Index j = hg.coarse_pos[static_cast<size_t>(i)];
    out.x[i] = xs[j];
    out.g[i] = g[j];
    out.g_hat[i] = std::max(ghat_fine[j], g[j]);
    out.gamma_bar[i] = cap.gamma_bar(xs[j]);
    out.gamma_antideriv[i] = big_gamma[j];
  }
  out.margin = margin;
  out.source_kind = payoff.kind();
  out.payoff_c0 = payoff.c0();
  out.payoff_c1 = payoff.c1();
  out.payoff_inf = payoff.inf_value();
  out.closed_form_known =
      payoff.exact_between_breakpoints() &&
      cap.gamma_bar_field().kind() == ScalarField::Kind::constant &&
      payoff.kind() != Payoff::Kind::piecewise_linear;
  return out;
}

double FaceLiftedPayoff::value_at(double xq) const {
  const Index n = x.size();
  if (xq <= x[0]) return g_hat[0];
  if (xq >= x[n - 1]) return g_hat[n - 1];
  const double* begin = x.data();
  const double* it = std::upper_bound(begin, begin + n, xq);
  const Index i = static_cast<Index>(it - begin) - 1;
  const double w = (xq - x[i]) / (x[i + 1] - x[i]);
  return g_hat[i] + w * (g_hat[i + 1] - g_hat[i]);
}

Index FaceLiftedPayoff::index_of(double xq, double tol) const {
  const Index n = x.size();
  const double* begin = x.data();
  const double* it = std::lower_bound(begin, begin + n, xq);
  const double scale = 1.0 + std::abs(xq);
  Index best = -1;
  double best_gap = tol * scale;
  for (const double* c : {it, it == begin ? it : it - 1}) {
    if (c >= begin && c < begin + n) {
      const double gap = std::abs(*c - xq);
      if (gap <= best_gap) {
        best_gap = gap;
        best = static_cast<Index>(c - begin);
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Growth bounds
// ---------------------------------------------------------------------------

GrowthBounds growth_bounds(const Payoff& payoff, const GammaCap& cap,
                           const ImpactMarket& market, double horizon,
                           double domain_lo, double domain_hi) {
  return growth_bounds_from_constants(payoff.c0(), payoff.c1(),
                                      payoff.inf_value(), cap, market, horizon,
                                      domain_lo, domain_hi);
}

GrowthBounds growth_bounds_from_constants(double c0, double c1, double inf_g,
                                          const GammaCap& cap,
                                          const ImpactMarket& market,
                                          double horizon, double domain_lo,
                                          double domain_hi) {
  require(horizon > 0.0, "growth_bounds: horizon must be positive");
  require(domain_lo < domain_hi, "growth_bounds: empty domain");

  GrowthBounds gb;
  gb.lower = inf_g;
  gb.c0 = c0;
  gb.c1 = c1;

  const double f_max = market.f_field().max_on(domain_lo, domain_hi);
  const double inv_f = f_max > 0.0 ? 1.0 / f_max : kInf;
  gb.eta = 0.5 * std::min(cap.iota(), inv_f);

  double peak = 0.0;
  constexpr int kProbe = 1025;
  for (int i = 0; i < kProbe; ++i) {
    const double x =
        domain_lo + (domain_hi - domain_lo) * static_cast<double>(i) / (kProbe - 1);
    const double s = market.sigma(x);
    const double fg = market.f(x) * cap.gamma_bar(x);
    const double denom = 1.0 - fg;
    if (denom <= 0.0)
      throw std::runtime_error("growth_bounds: f * gamma_bar >= 1 at x=" +
                               std::to_string(x));
    peak = std::max(peak, s * s * cap.gamma_bar(x) / (2.0 * denom));
  }
  gb.horizon_charge = horizon * peak;

  gb.x_flat = gb.c1 / gb.eta;
  gb.hull_peak = 1.0 + 2.0 * gb.c0 + 0.5 * gb.c1 * gb.c1 / gb.eta;
  return gb;
}

}  // namespace impact
