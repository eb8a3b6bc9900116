#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace impact {

// A named scalar coefficient function of the spot. The catalog kinds carry
// analytic derivatives and exact range bounds; `custom` is an escape hatch
// (mostly for tests) with sampled bounds and central-difference derivative.
class ScalarField {
 public:
  enum class Kind { constant, affine, affine_saturated, custom };

  static ScalarField constant(double c) {
    ScalarField f;
    f.kind_ = Kind::constant;
    f.p_[0] = c;
    return f;
  }

  // intercept + slope * x
  static ScalarField affine(double intercept, double slope) {
    ScalarField f;
    f.kind_ = Kind::affine;
    f.p_[0] = intercept;
    f.p_[1] = slope;
    return f;
  }

  // clamp(intercept + slope * x, lo, hi)
  static ScalarField affine_saturated(double intercept, double slope,
                                      double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("affine_saturated: lo > hi");
    ScalarField f;
    f.kind_ = Kind::affine_saturated;
    f.p_[0] = intercept;
    f.p_[1] = slope;
    f.p_[2] = lo;
    f.p_[3] = hi;
    return f;
  }

  static ScalarField custom(std::function<double(double)> value,
                            std::function<double(double)> derivative = {},
                            std::string label = "custom") {
    ScalarField f;
    f.kind_ = Kind::custom;
    f.fn_ = std::move(value);
    f.dfn_ = std::move(derivative);
    f.label_ = std::move(label);
    return f;
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::constant: return p_[0];
      case Kind::affine: return p_[0] + p_[1] * x;
      case Kind::affine_saturated:
        return std::clamp(p_[0] + p_[1] * x, p_[2], p_[3]);
      case Kind::custom: return fn_(x);
    }
    return 0.0;
  }

  double derivative(double x) const {
    switch (kind_) {
      case Kind::constant: return 0.0;
      case Kind::affine: return p_[1];
      case Kind::affine_saturated: {
        const double raw = p_[0] + p_[1] * x;
        return (raw > p_[2] && raw < p_[3]) ? p_[1] : 0.0;
      }
      case Kind::custom: {
        if (dfn_) return dfn_(x);
        const double h = 1e-6 * (1.0 + std::abs(x));
        return (fn_(x + h) - fn_(x - h)) / (2.0 * h);
      }
    }
    return 0.0;
  }

  double min_on(double a, double b) const { return extremum_on(a, b, false); }
  double max_on(double a, double b) const { return extremum_on(a, b, true); }

  Kind kind() const { return kind_; }
  bool is_catalog() const { return kind_ != Kind::custom; }
  const double* params() const { return p_; }

  std::string describe() const {
    switch (kind_) {
      case Kind::constant: return "constant " + num(p_[0]);
      case Kind::affine: return "affine " + num(p_[0]) + " " + num(p_[1]);
      case Kind::affine_saturated:
        return "affine_saturated " + num(p_[0]) + " " + num(p_[1]) + " " +
               num(p_[2]) + " " + num(p_[3]);
      case Kind::custom: return label_;
    }
    return "";
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  double extremum_on(double a, double b, bool want_max) const {
    if (a > b) std::swap(a, b);
    switch (kind_) {
      case Kind::constant: return p_[0];
      case Kind::affine:
      case Kind::affine_saturated: {
        const double va = (*this)(a);
        const double vb = (*this)(b);
        return want_max ? std::max(va, vb) : std::min(va, vb);
      }
      case Kind::custom: {
        constexpr int kProbe = 513;
        double best = (*this)(a);
        for (int i = 1; i < kProbe; ++i) {
          const double x = a + (b - a) * static_cast<double>(i) / (kProbe - 1);
          const double v = (*this)(x);
          best = want_max ? std::max(best, v) : std::min(best, v);
        }
        return best;
      }
    }
    return 0.0;
  }

  Kind kind_ = Kind::constant;
  double p_[4] = {0, 0, 0, 0};
  std::function<double(double)> fn_;
  std::function<double(double)> dfn_;
  std::string label_;
};

}  // namespace impact
