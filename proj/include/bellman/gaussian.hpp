#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "bellman/errors.hpp"

namespace bellman {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

// Acklam's rational approximation, relative error about 1e-9.
inline double acklam_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= 1 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const double q = std::sqrt(-2 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

}  // namespace detail

/// Inverse of the standard normal CDF on (0,1).
inline double normal_quantile(double s) {
  if (!(s > 0.0 && s < 1.0)) {
    throw domain_error("normal_quantile: argument " + std::to_string(s) + " outside (0,1)");
  }
  // Work in the lower tail so the residual Phi(x) - s keeps full relative
  // precision; 1 - s is exact for s >= 1/2.
  const bool upper = s > 0.5;
  const double q = upper ? 1.0 - s : s;
  double x = detail::acklam_quantile(q);
  for (int it = 0; it < 3; ++it) {
    const double e = normal_cdf(x) - q;
    const double u = e / normal_pdf(x);
    const double step = u / (1.0 + 0.5 * x * u);  // Halley
    x -= step;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
  }
  return upper ? -x : x;
}

/// A smooth positive density phi with cumulative Phi, its inverse on the
/// range of Phi, and (log phi)'. Three kinds are supported: the standard
/// normal, phi = Phi = exp (range (0, inf)), and a user table of log phi on a
/// uniform grid (piecewise-linear log density, constant slope extension).
class ProfileFunction {
 public:
  enum class Kind { gaussian, exponential, tabulated };

  static ProfileFunction gaussian() { return ProfileFunction(Kind::gaussian); }
  static ProfileFunction exponential() { return ProfileFunction(Kind::exponential); }

  /// log phi sampled at x0, x0 + dx, ...; the outer slopes extend linearly
  /// and must make phi integrable (left slope > 0, right slope < 0).
  static ProfileFunction tabulated(double x0, double dx, std::vector<double> log_phi) {
    if (log_phi.size() < 3 || !(dx > 0)) {
      throw usage_error("tabulated profile: need >= 3 samples and dx > 0");
    }
    ProfileFunction f(Kind::tabulated);
    auto t = std::make_shared<Table>();
    t->x0 = x0;
    t->dx = dx;
    t->logf = std::move(log_phi);
    const std::size_t m = t->logf.size();
    t->left_slope = (t->logf[1] - t->logf[0]) / dx;
    t->right_slope = (t->logf[m - 1] - t->logf[m - 2]) / dx;
    if (!(t->left_slope > 0) || !(t->right_slope < 0)) {
      throw usage_error("tabulated profile: tails must decay");
    }
    t->cum.assign(m, 0.0);
    t->cum[0] = std::exp(t->logf[0]) / t->left_slope;
    for (std::size_t i = 1; i < m; ++i) {
      t->cum[i] = t->cum[i - 1] + segment_integral(t->logf[i - 1], t->logf[i], dx);
    }
    t->total = t->cum[m - 1] + std::exp(t->logf[m - 1]) / (-t->right_slope);
    f.table_ = std::move(t);
    return f;
  }

  Kind kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case Kind::gaussian: return "gaussian";
      case Kind::exponential: return "exp";
      default: return "tabulated";
    }
  }

  double density(double x) const {
    switch (kind_) {
      case Kind::gaussian: return normal_pdf(x);
      case Kind::exponential: return std::exp(x);
      default: return std::exp(table_log(x));
    }
  }

  double cdf(double x) const {
    switch (kind_) {
      case Kind::gaussian: return normal_cdf(x);
      case Kind::exponential: return std::exp(x);
      default: return table_cdf(x);
    }
  }

  /// (log phi)'(x).
  double log_density_derivative(double x) const {
    switch (kind_) {
      case Kind::gaussian: return -x;
      case Kind::exponential: return 1.0;
      default: {
        const auto& t = *table_;
        const double s = (x - t.x0) / t.dx;
        if (s <= 0) return t.left_slope;
        const std::size_t m = t.logf.size();
        if (s >= static_cast<double>(m - 1)) return t.right_slope;
        const auto i = static_cast<std::size_t>(s);
        return (t.logf[i + 1] - t.logf[i]) / t.dx;
      }
    }
  }

  /// phi'(x) = phi(x) (log phi)'(x).
  double density_derivative(double x) const { return density(x) * log_density_derivative(x); }

  /// Open range of Phi.
  double range_lo() const { return 0.0; }
  double range_hi() const {
    switch (kind_) {
      case Kind::gaussian: return 1.0;
      case Kind::exponential: return std::numeric_limits<double>::infinity();
      default: return table_->total;
    }
  }

  bool in_range(double s) const { return s > range_lo() && s < range_hi(); }

  double quantile(double s) const {
    if (!in_range(s)) {
      throw domain_error(name() + " profile: quantile argument " + std::to_string(s) +
                         " outside the range of Phi");
    }
    switch (kind_) {
      case Kind::gaussian: return normal_quantile(s);
      case Kind::exponential: return std::log(s);
      default: return table_quantile(s);
    }
  }

 private:
  struct Table {
    double x0 = 0, dx = 1;
    std::vector<double> logf;
    std::vector<double> cum;
    double left_slope = 1, right_slope = -1, total = 1;
  };

  explicit ProfileFunction(Kind k) : kind_(k) {}

  // Integral of exp of the linear interpolant between l0 and l1 over a cell.
  static double segment_integral(double l0, double l1, double dx) {
    const double d = l1 - l0;
    if (std::abs(d) < 1e-8) return dx * std::exp(l0) * (1 + 0.5 * d + d * d / 6);
    return dx * (std::exp(l1) - std::exp(l0)) / d;
  }

  double table_log(double x) const {
    const auto& t = *table_;
    const double s = (x - t.x0) / t.dx;
    const std::size_t m = t.logf.size();
    if (s <= 0) return t.logf[0] + t.left_slope * (x - t.x0);
    if (s >= static_cast<double>(m - 1)) {
      return t.logf[m - 1] + t.right_slope * (x - (t.x0 + t.dx * static_cast<double>(m - 1)));
    }
    const auto i = static_cast<std::size_t>(s);
    const double f = s - static_cast<double>(i);
    return (1 - f) * t.logf[i] + f * t.logf[i + 1];
  }

  double table_cdf(double x) const {
    const auto& t = *table_;
    const double s = (x - t.x0) / t.dx;
    const std::size_t m = t.logf.size();
    if (s <= 0) return std::exp(table_log(x)) / t.left_slope;
    if (s >= static_cast<double>(m - 1)) {
      return t.total - std::exp(table_log(x)) / (-t.right_slope);
    }
    const auto i = static_cast<std::size_t>(s);
    const double xi = t.x0 + t.dx * static_cast<double>(i);
    const double slope = (t.logf[i + 1] - t.logf[i]) / t.dx;
    const double w = x - xi;
    double part;
    if (std::abs(slope * w) < 1e-8) {
      part = w * std::exp(t.logf[i]) * (1 + 0.5 * slope * w);
    } else {
      part = std::exp(t.logf[i]) * std::expm1(slope * w) / slope;
    }
    return t.cum[i] + part;
  }

  double table_quantile(double s) const {
    const auto& t = *table_;
    const std::size_t m = t.logf.size();
    // Bracket, then Newton safeguarded by bisection.
    double lo, hi;
    if (s <= t.cum[0]) {
      lo = t.x0 + std::log(s * t.left_slope) / t.left_slope - t.logf[0] / t.left_slope;
      return lo;
    }
    if (s >= t.cum[m - 1]) {
      const double xe = t.x0 + t.dx * static_cast<double>(m - 1);
      return xe + (std::log((t.total - s) * (-t.right_slope)) - t.logf[m - 1]) / t.right_slope;
    }
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), s);
    const auto i = static_cast<std::size_t>(it - t.cum.begin()) - 1;
    lo = t.x0 + t.dx * static_cast<double>(i);
    hi = lo + t.dx;
    double x = 0.5 * (lo + hi);
    for (int k = 0; k < 100; ++k) {
      const double e = table_cdf(x) - s;
      if (std::abs(e) <= 1e-15 * std::max(1.0, s)) break;
      if (e > 0) hi = x; else lo = x;
      double nx = x - e / density(x);
      if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
      x = nx;
    }
    return x;
  }

  Kind kind_;
  std::shared_ptr<const Table> table_;
};

inline ProfileFunction std_normal() { return ProfileFunction::gaussian(); }

}  // namespace bellman
