#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "impact/rng.hpp"
#include "impact/types.hpp"

namespace testing_support {

using impact::ArrayXd;
using impact::Index;

inline ArrayXd linspace(double a, double b, Index n) {
  ArrayXd xs(n);
  for (Index j = 0; j < n; ++j)
    xs[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(n - 1);
  return xs;
}

// O(n^2)-chord majorant: the reference the hull implementation must match.
inline ArrayXd brute_force_envelope(const ArrayXd& xs, const ArrayXd& ys) {
  const Index n = xs.size();
  ArrayXd env(n);
  for (Index j = 0; j < n; ++j) {
    double best = ys[j];
    for (Index i = 0; i <= j; ++i) {
      for (Index k = j; k < n; ++k) {
        if (i == k) continue;
        const double w = (xs[j] - xs[i]) / (xs[k] - xs[i]);
        best = std::max(best, ys[i] + w * (ys[k] - ys[i]));
      }
    }
    env[j] = best;
  }
  return env;
}

// Standard normal cdf / pdf for the closed-form benchmark values.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) * 0.39894228040143267794;
}

// Bachelier call value: E[(X - k)^+], X ~ N(mean, s^2).
inline double bachelier_call(double mean, double s, double k) {
  if (s <= 0.0) return std::max(mean - k, 0.0);
  const double d = (mean - k) / s;
  return (mean - k) * norm_cdf(d) + s * norm_pdf(d);
}

// Closed-form face-lifts for constant caps (printed piecewise formulas).
inline double call_spread_facelift(double x, double gbar, double k1, double k2) {
  const double xm = k1 - 0.5 / gbar;
  const double xp = k1 + 0.5 / gbar;
  if (x < xm) return 0.0;
  if (x < xp) return 0.5 * gbar * (x - xm) * (x - xm);
  if (x < k2) return x - k1;
  return k2 - k1;
}

inline double butterfly_facelift(double x, double gbar, double k1, double k2,
                                 double k3) {
  const double x1m = k1 - 0.5 / gbar, x1p = k1 + 0.5 / gbar;
  const double x2m = k3 - 0.5 / gbar, x2p = k3 + 0.5 / gbar;
  if (x < x1m) return 0.0;
  if (x < x1p) return 0.5 * gbar * (x - x1m) * (x - x1m);
  if (x < k2) return x - k1;
  if (x < x2m) return (x - k1) - 2.0 * (x - k2);
  if (x < x2p) return 0.5 * gbar * (x - x2p) * (x - x2p) + 2.0 * k2 - k1 - k3;
  return 2.0 * k2 - k1 - k3;
}

inline double digital_facelift(double x, double gbar, double k) {
  const double xo = k - std::sqrt(2.0 / gbar);
  if (x < xo) return 0.0;
  return std::min(1.0, 0.5 * gbar * (x - xo) * (x - xo));
}

}  // namespace testing_support
