#pragma once

#include <stdexcept>

#include "impact/types.hpp"

namespace impact {

// Uniform space-time lattice for the backward scheme.
struct Grid {
  double x_min = -1.0;
  double x_max = 1.0;
  int n_x = 4;   // spatial intervals
  int n_t = 1;   // time steps
  double horizon = 1.0;

  Grid() = default;
  Grid(double lo, double hi, int nx, int nt, double T)
      : x_min(lo), x_max(hi), n_x(nx), n_t(nt), horizon(T) {
    if (!(x_min < x_max)) throw std::invalid_argument("Grid: x_min >= x_max");
    if (n_x < 4) throw std::invalid_argument("Grid: need n_x >= 4");
    if (n_t < 1) throw std::invalid_argument("Grid: need n_t >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("Grid: horizon must be positive");
  }

  double h_x() const { return (x_max - x_min) / n_x; }
  double h_t() const { return horizon / n_t; }
  // Parabolic mesh ratio; the convergence theory wants this to vanish
  // under refinement.
  double mesh_ratio() const { return h_t() / (h_x() * h_x()); }

  double x(Index j) const { return x_min + h_x() * static_cast<double>(j); }
  double t(Index i) const { return h_t() * static_cast<double>(i); }

  ArrayXd x_nodes() const {
    ArrayXd xs(n_x + 1);
    for (Index j = 0; j <= n_x; ++j) xs[j] = x(j);
    return xs;
  }

  ArrayXd t_nodes() const {
    ArrayXd ts(n_t + 1);
    for (Index i = 0; i <= n_t; ++i) ts[i] = t(i);
    return ts;
  }
};

}  // namespace impact
