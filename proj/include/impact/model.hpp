#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "impact/fields.hpp"
#include "impact/types.hpp"

namespace impact {

// Market primitives: drift mu, volatility sigma and the permanent impact
// function f (price move per share traded). Bounds are derived from the
// field catalog over a reference domain at construction; f_min = 0 is
// accepted so impact-free simulation setups remain expressible, while the
// cap/PDE layers check positivity pointwise where the nonlinearity needs it.
class ImpactMarket {
 public:
  static ImpactMarket make(ScalarField mu, ScalarField sigma, ScalarField f,
                           double domain_lo = -10.0, double domain_hi = 10.0);

  double mu(double x) const { return mu_(x); }
  double sigma(double x) const { return sigma_(x); }
  double f(double x) const { return f_(x); }
  double f_prime(double x) const { return f_.derivative(x); }

  const ScalarField& mu_field() const { return mu_; }
  const ScalarField& sigma_field() const { return sigma_; }
  const ScalarField& f_field() const { return f_; }

  double f_min() const { return f_min_; }
  double f_max() const { return f_max_; }
  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  double lipschitz_bound() const { return lipschitz_bound_; }

  // Re-checks the construction bounds on a concrete grid.
  void validate_on(const ArrayXd& xs) const;

 private:
  ScalarField mu_ = ScalarField::constant(0.0);
  ScalarField sigma_ = ScalarField::constant(1.0);
  ScalarField f_ = ScalarField::constant(0.0);
  double f_min_ = 0.0, f_max_ = 0.0;
  double sigma_min_ = 0.0, sigma_max_ = 0.0;
  double lipschitz_bound_ = 0.0;
};

// Curvature cap gamma_bar with its margin iota (the cap must stay in
// [iota, 1/f - iota]) and the monitored lower bound k on the hedge gamma.
class GammaCap {
 public:
  GammaCap(ScalarField gamma_bar, double iota, double k_lower = 0.0);

  double gamma_bar(double x) const { return gamma_bar_(x); }
  const ScalarField& gamma_bar_field() const { return gamma_bar_; }
  double iota() const { return iota_; }
  double k_lower() const { return k_lower_; }

  // iota <= gamma_bar(x) <= 1/f(x) - iota at every sample.
  void validate_against(const ImpactMarket& market, const ArrayXd& xs) const;

 private:
  ScalarField gamma_bar_;
  double iota_;
  double k_lower_;
};

// Terminal claim. All kinds are piecewise linear between breakpoints
// (digital carries a jump at its strike); `sampled` is discrete data and is
// honored exactly at its sample abscissae.
class Payoff {
 public:
  enum class Kind { call_spread, butterfly, digital, piecewise_linear, sampled };

  static Payoff call_spread(double k1, double k2);
  static Payoff butterfly(double k1, double k2, double k3);
  static Payoff digital(double k);
  // Knots with linear extrapolation by the end slopes outside the range.
  static Payoff piecewise_linear(std::vector<double> xs, std::vector<double> ys);
  static Payoff sampled(ArrayXd xs, ArrayXd ys);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& breakpoints() const { return knots_x_; }
  const std::vector<double>& knot_values() const { return knots_y_; }
  bool has_jump() const { return kind_ == Kind::digital; }
  // Sampled data is kept verbatim; analytic kinds may be resampled freely.
  bool exact_between_breakpoints() const { return kind_ != Kind::sampled; }

  double left_slope() const { return slope_left_; }
  double right_slope() const { return slope_right_; }

  // Growth constants: g(x) <= c0 + c1 |x| everywhere and inf g >= -c0
  // whenever inf g is finite.
  double c0() const { return c0_; }
  double c1() const { return c1_; }
  // May be -inf (e.g. an affine payoff); the PDE lower clamp is then inert.
  double inf_value() const { return inf_value_; }

  std::string describe() const;

 private:
  void finalize();

  Kind kind_ = Kind::call_spread;
  std::vector<double> knots_x_, knots_y_;
  double slope_left_ = 0.0, slope_right_ = 0.0;
  double c0_ = 0.0, c1_ = 0.0;
  double inf_value_ = 0.0;
  std::vector<double> params_;
};

// Face-lifted terminal condition sampled on an extended grid.
struct FaceLiftedPayoff {
  ArrayXd x;                 // extended grid (strictly increasing)
  ArrayXd g;                 // payoff samples
  ArrayXd g_hat;             // face-lifted samples, g_hat >= g
  ArrayXd gamma_bar;         // cap samples on the same grid
  ArrayXd gamma_antideriv;   // curvature antiderivative samples
  double margin = 0.0;
  Payoff::Kind source_kind = Payoff::Kind::call_spread;
  bool closed_form_known = false;  // catalog payoff + constant cap
  // Growth data of the source payoff, carried along for the scheme clamps.
  double payoff_c0 = 0.0;
  double payoff_c1 = 0.0;
  double payoff_inf = 0.0;

  double value_at(double xq) const;       // linear interpolation of g_hat
  Index index_of(double xq, double tol = 1e-9) const;  // exact node lookup
};

struct FaceLiftOptions {
  // Grid extension on each side; <= 0 selects 2*(c1/iota + max|x|).
  double margin = 0.0;
  // Target spacing of the internal hull refinement for analytic payoffs;
  // <= 0 selects sqrt(2e-9 / max gamma_bar) capped to the grid spacing.
  double refine_step = 0.0;
};

// Antiderivative of the cap: second differences reproduce gamma_bar at
// interior nodes, normalized to value 0 and zero centered slope at the grid
// center (the face-lift is invariant to the affine part).
ArrayXd gamma_antiderivative(const GammaCap& cap, const ArrayXd& grid_x);

// Least concave majorant of the sampled data, evaluated at every sample.
ArrayXd concave_envelope(const ArrayXd& xs, const ArrayXd& ys);

FaceLiftedPayoff face_lift(const Payoff& payoff, const GammaCap& cap,
                           const ArrayXd& grid_x,
                           const FaceLiftOptions& options = {});

// Analytic clamp bounds for the scheme: lower = inf g, upper = the explicit
// concave-hull growth envelope plus the horizon charge.
struct GrowthBounds {
  double lower = 0.0;       // may be -inf
  double c0 = 0.0, c1 = 0.0;
  double eta = 0.0;         // curvature of the comparison parabola
  double x_flat = 0.0;      // hull is flat on [-x_flat, x_flat]
  double hull_peak = 0.0;   // hull value minus the parabola on that plateau
  double horizon_charge = 0.0;  // T * sup sigma^2 gamma_bar / (2 (1 - f gamma_bar))

  // Uniform-in-time upper bound; the time argument is kept for the
  // interface, the horizon charge already covers [0, T].
  double upper(double /*t*/, double x) const {
    const double ax = std::abs(x);
    const double base = (ax <= x_flat) ? hull_peak + 0.5 * eta * x * x
                                       : 1.0 + 2.0 * c0 + c1 * ax;
    return base + 1.0 + horizon_charge;
  }
};

GrowthBounds growth_bounds(const Payoff& payoff, const GammaCap& cap,
                           const ImpactMarket& market, double horizon,
                           double domain_lo, double domain_hi);

// Same envelope built from the growth constants alone (used by the solver,
// which only sees the face-lifted samples).
GrowthBounds growth_bounds_from_constants(double c0, double c1, double inf_g,
                                          const GammaCap& cap,
                                          const ImpactMarket& market,
                                          double horizon, double domain_lo,
                                          double domain_hi);

}  // namespace impact
