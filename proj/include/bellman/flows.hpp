#pragma once

// Modified heat flows of special initial data F(a.x), the Ornstein-Uhlenbeck
// semigroup and the composed functions V(x,t) = B(u_1(a_1.x,t), ...).
// No time stepping: every U(., t) comes from its integral representation.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bellman/catalog.hpp"
#include "bellman/errors.hpp"
#include "bellman/gaussian.hpp"
#include "bellman/matrix_kernel.hpp"
#include "bellman/quadrature.hpp"

namespace bellman {

inline constexpr int kSmoothOrder = 64;
inline constexpr int kIndicatorOrder = 256;

/// Arbitrary smooth bounded datum; flows are computed with the supplied
/// Gauss-Hermite rule.
struct SmoothDatum {
  std::function<double(double)> f;
};

/// Piecewise-linear interpolant of (x_i, y_i), constant outside [x_0, x_m].
struct PiecewiseLinearDatum {
  std::vector<double> x, y;
};

/// base + scale * Σ 1_{(l_i, r_i)} convolved with a Gaussian of width w.
/// Endpoints may be infinite. width = 0 means the raw indicator.
struct IndicatorDatum {
  std::vector<std::pair<double, double>> intervals;
  double width = 1e-3;
  double base = 0.0;
  double scale = 1.0;
};

/// base + amplitude * exp(-(y - center)^2 / (2 width^2)).
struct BumpDatum {
  double base = 0.0;
  double amplitude = 1.0;
  double center = 0.0;
  double width = 1.0;
};

using InitialDatum = std::variant<SmoothDatum, PiecewiseLinearDatum, IndicatorDatum, BumpDatum>;

namespace detail {

inline double pl_value(const PiecewiseLinearDatum& d, double y) {
  const auto& xs = d.x;
  if (y <= xs.front()) return d.y.front();
  if (y >= xs.back()) return d.y.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), y);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double f = (y - xs[i]) / (xs[i + 1] - xs[i]);
  return (1 - f) * d.y[i] + f * d.y[i + 1];
}

// Φ(b) - Φ(a) without cancellation in the upper tail.
inline double normal_mass(double a, double b) {
  if (a > 0) return normal_cdf(-a) - normal_cdf(-b);
  return normal_cdf(b) - normal_cdf(a);
}

// E F(y + σZ) and its first two y-derivatives for a piecewise-linear F.
inline std::array<double, 3> pl_smoothing(const PiecewiseLinearDatum& d, double y, double sigma) {
  const auto& xs = d.x;
  const auto& ys = d.y;
  const std::size_t m = xs.size();
  double v = 0, d1 = 0, d2 = 0;
  const double a0 = (xs.front() - y) / sigma;
  v += ys.front() * normal_cdf(a0);
  const double an = (xs.back() - y) / sigma;
  v += ys.back() * normal_cdf(-an);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double al = (xs[i] - y) / sigma, be = (xs[i + 1] - y) / sigma;
    if (al > 40 || be < -40) continue;
    const double slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    const double mass = normal_mass(al, be);
    const double pa = normal_pdf(al), pb = normal_pdf(be);
    v += (ys[i] + slope * (y - xs[i])) * mass + slope * sigma * (pa - pb);
    d1 += slope * mass;
    d2 += slope * (pa - pb) / sigma;
  }
  return {v, d1, d2};
}

}  // namespace detail

/// F(y) at t = 0.
inline double datum_value(const InitialDatum& datum, double y) {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SmoothDatum>) {
          return d.f(y);
        } else if constexpr (std::is_same_v<T, PiecewiseLinearDatum>) {
          return detail::pl_value(d, y);
        } else if constexpr (std::is_same_v<T, IndicatorDatum>) {
          double s = 0;
          for (const auto& [l, r] : d.intervals) {
            if (d.width > 0) {
              s += detail::normal_mass((l - y) / d.width, (r - y) / d.width);
            } else {
              s += (y > l && y < r) ? 1.0 : 0.0;
            }
          }
          return d.base + d.scale * s;
        } else {
          const double z = (y - d.center) / d.width;
          return d.base + d.amplitude * std::exp(-0.5 * z * z);
        }
      },
      datum);
}

/// Validates the datum's shape (sorted knots, positive widths).
inline void validate_datum(const InitialDatum& datum) {
  if (const auto* pl = std::get_if<PiecewiseLinearDatum>(&datum)) {
    if (pl->x.size() < 2 || pl->x.size() != pl->y.size()) {
      throw usage_error("piecewise-linear datum: need >= 2 knots with matching values");
    }
    for (std::size_t i = 0; i + 1 < pl->x.size(); ++i) {
      if (!(pl->x[i] < pl->x[i + 1])) throw usage_error("piecewise-linear datum: knots must increase");
    }
  } else if (const auto* ind = std::get_if<IndicatorDatum>(&datum)) {
    if (ind->width < 0) throw usage_error("indicator datum: negative mollification width");
    for (const auto& [l, r] : ind->intervals) {
      if (!(l < r)) throw usage_error("indicator datum: empty interval");
    }
  } else if (const auto* b = std::get_if<BumpDatum>(&datum)) {
    if (!(b->width > 0)) throw usage_error("bump datum: width must be positive");
  } else if (!std::get<SmoothDatum>(datum).f) {
    throw usage_error("smooth datum: empty callable");
  }
}

struct Smoothed {
  double value = 0;
  double d1 = 0;  // d/dy
  double d2 = 0;  // d^2/dy^2
};

/// E F(y + σZ), Z standard normal, with y-derivatives. Exact closed forms for
/// piecewise-linear, indicator and bump data; Gauss-Hermite plus Stein's
/// identity for smooth data.
inline Smoothed gaussian_smoothing(const InitialDatum& datum, double y, double sigma,
                                   const QuadratureRule& rule) {
  if (sigma < 0) throw usage_error("gaussian_smoothing: negative sigma");
  return std::visit(
      [&](const auto& d) -> Smoothed {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SmoothDatum>) {
          if (sigma == 0) {
            const double h = fd_step(y);
            const double f0 = d.f(y), fp = d.f(y + h), fm = d.f(y - h);
            return {f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)};
          }
          double v = 0, g1 = 0, g2 = 0;
          for (int i = 0; i < rule.order(); ++i) {
            const double z = rule.nodes[i];
            const double f = d.f(y + sigma * z);
            v += rule.weights[i] * f;
            g1 += rule.weights[i] * f * z;
            g2 += rule.weights[i] * f * (z * z - 1);
          }
          return {v, g1 / sigma, g2 / (sigma * sigma)};
        } else if constexpr (std::is_same_v<T, PiecewiseLinearDatum>) {
          if (sigma == 0) {
            const double h = fd_step(y);
            return {detail::pl_value(d, y),
                    (detail::pl_value(d, y + h) - detail::pl_value(d, y - h)) / (2 * h), 0.0};
          }
          const auto r = detail::pl_smoothing(d, y, sigma);
          return {r[0], r[1], r[2]};
        } else if constexpr (std::is_same_v<T, IndicatorDatum>) {
          const double w = std::sqrt(d.width * d.width + sigma * sigma);
          Smoothed s;
          if (w == 0) {
            s.value = datum_value(datum, y);
            return s;
          }
          for (const auto& [l, r] : d.intervals) {
            const double al = (l - y) / w, be = (r - y) / w;
            s.value += detail::normal_mass(al, be);
            const double pa = std::isfinite(al) ? normal_pdf(al) : 0.0;
            const double pb = std::isfinite(be) ? normal_pdf(be) : 0.0;
            s.d1 += (pa - pb) / w;
            s.d2 += ((std::isfinite(al) ? al * pa : 0.0) - (std::isfinite(be) ? be * pb : 0.0)) / (w * w);
          }
          s.value = d.base + d.scale * s.value;
          s.d1 *= d.scale;
          s.d2 *= d.scale;
          return s;
        } else {
          const double w2 = d.width * d.width + sigma * sigma;
          const double z = y - d.center;
          const double g = d.amplitude * d.width / std::sqrt(w2) * std::exp(-0.5 * z * z / w2);
          return {d.base + g, -g * z / w2, g * (z * z / w2 - 1) / w2};
        }
      },
      datum);
}

/// Default rule for a datum: smooth data use order 64, everything else is
/// exact and ignores the rule.
inline const QuadratureRule& default_rule(const InitialDatum& datum) {
  return gauss_hermite(std::holds_alternative<SmoothDatum>(datum) ? kSmoothOrder : kIndicatorOrder);
}

/// Datum F, direction a and speed <Ca, a> > 0.
struct SpecialFlow {
  InitialDatum datum;
  Vector a;
  double speed = 1.0;
};

inline SpecialFlow make_special_flow(InitialDatum datum, const Vector& a, const SymMatrix& c) {
  if (a.size() != c.dim()) throw usage_error("special flow: a and C have different dimensions");
  const double speed = a.dot(c.matrix() * a);
  if (!(speed > 0)) {
    throw usage_error("special flow: <Ca, a> = " + std::to_string(speed) + " must be positive");
  }
  validate_datum(datum);
  return {std::move(datum), a, speed};
}

inline void check_time(double t) {
  if (!(t >= 0)) throw usage_error("flow time must be >= 0, got " + std::to_string(t));
}

/// U(y, t) = ∫ F(y + z sqrt(2 t <Ca,a>)) dγ1(z).
inline double heat_flow_special(const SpecialFlow& flow, double y, double t, const QuadratureRule& rule) {
  check_time(t);
  if (t == 0) return datum_value(flow.datum, y);
  return gaussian_smoothing(flow.datum, y, std::sqrt(2 * t * flow.speed), rule).value;
}

inline double heat_flow_special(const SpecialFlow& flow, double y, double t) {
  return heat_flow_special(flow, y, t, default_rule(flow.datum));
}

/// U and its y-derivatives at (y, t).
inline Smoothed heat_flow_jet(const SpecialFlow& flow, double y, double t, const QuadratureRule& rule) {
  check_time(t);
  return gaussian_smoothing(flow.datum, y, std::sqrt(2 * t * flow.speed), rule);
}

/// Central-difference estimate of ∂_t U - speed ∂_yy U.
inline double flow_pde_residual(const SpecialFlow& flow, double y, double t, double h,
                                const QuadratureRule& rule) {
  if (!(t > h && h > 0)) throw usage_error("flow_pde_residual: need t > h > 0");
  auto u = [&](double yy, double tt) { return heat_flow_special(flow, yy, tt, rule); };
  const double ut = (u(y, t + h) - u(y, t - h)) / (2 * h);
  const double uyy = (u(y + h, t) - 2 * u(y, t) + u(y - h, t)) / (h * h);
  return ut - flow.speed * uyy;
}

/// max_i |∂_{x_i} U(a.x, t) - a_i U'(a.x, t)|, the left side by central
/// differences.
inline double gradient_identity_check(const SpecialFlow& flow, const Vector& x, double t,
                                      const QuadratureRule& rule) {
  if (!(t > 0)) throw usage_error("gradient_identity_check: need t > 0");
  if (x.size() != flow.a.size()) throw usage_error("gradient_identity_check: dimension mismatch");
  const double y = flow.a.dot(x);
  const double du = heat_flow_jet(flow, y, t, rule).d1;
  double worst = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x(i));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (heat_flow_special(flow, flow.a.dot(xp), t, rule) -
                       heat_flow_special(flow, flow.a.dot(xm), t, rule)) / (2 * h);
    worst = std::max(worst, std::abs(fd - flow.a(i) * du));
  }
  return worst;
}

/// Ornstein-Uhlenbeck semigroup on R^k: ∫ f(e^{-t}x + sqrt(1-e^{-2t}) y) dγ_k(y).
template <typename F>
double ou_semigroup(F&& f, double t, const Vector& x, const QuadratureRule& rule) {
  check_time(t);
  if (t == 0) return f(x);
  const double e = std::exp(-t), s = std::sqrt(-std::expm1(-2 * t));
  return tensor_expectation([&](const Vector& y) { return f(Vector(e * x + s * y)); },
                            static_cast<int>(x.size()), rule);
}

/// One-dimensional OU flow of a datum (exact for the closed-form kinds).
inline double ou_semigroup(const InitialDatum& datum, double t, double x, const QuadratureRule& rule) {
  check_time(t);
  if (t == 0) return datum_value(datum, x);
  return gaussian_smoothing(datum, std::exp(-t) * x, std::sqrt(-std::expm1(-2 * t)), rule).value;
}

/// F(xA) flowed by the heat semigroup of L_C; A is k x s, x in R^k.
struct GeneralFlow {
  std::function<double(const Vector&)> f;
  Matrix a;
  SymMatrix c;
};

inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
      throw precondition_error("psd_sqrt: matrix has negative eigenvalue " + std::to_string(ev(i)));
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double heat_flow_general(const GeneralFlow& gf, const Vector& x, double t, const QuadratureRule& rule) {
  check_time(t);
  if (x.size() != gf.a.rows()) throw usage_error("heat_flow_general: x has wrong dimension");
  const Matrix acA = gf.a.transpose() * gf.c.matrix() * gf.a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(acA, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0)) {
    throw precondition_error("heat_flow_general: A*CA is not positive definite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
  const Vector xa = gf.a.transpose() * x;
  if (t == 0) return gf.f(xa);
  const Matrix root = psd_sqrt(2 * t * acA);
  return tensor_expectation([&](const Vector& y) { return gf.f(Vector(xa + root * y)); },
                            static_cast<int>(xa.size()), rule);
}

struct ComposedValue {
  double value = 0;
  int clamps = 0;
};

inline constexpr double kClampBudget = 1e-6;

/// V(x,t) = B(u_1(a_1.x, t), ..., u_n(a_n.x, t)), each flow at its own speed.
/// Flow values are clamped into the δ-shrunk domain; leaving the unshrunk
/// domain by more than kClampBudget is an error.
inline ComposedValue compose_V(const BellmanCandidate& b, const std::vector<SpecialFlow>& flows,
                               const Vector& x, double t, double delta = kDomainMargin) {
  if (static_cast<int>(flows.size()) != b.arity) {
    throw usage_error("compose_V: " + std::to_string(flows.size()) + " flows for arity " +
                      std::to_string(b.arity));
  }
  Vector u(b.arity);
  for (int j = 0; j < b.arity; ++j) {
    u(j) = heat_flow_special(flows[j], flows[j].a.dot(x), t, default_rule(flows[j].datum));
  }
  for (int j = 0; j < b.arity; ++j) {
    if (u(j) < b.domain.lo[j] - kClampBudget || u(j) > b.domain.hi[j] + kClampBudget) {
      throw domain_error("compose_V: flow " + std::to_string(j) + " value " + std::to_string(u(j)) +
                         " escapes the domain of " + b.name + " at x = " + format_point(x));
    }
  }
  ComposedValue out;
  out.clamps = b.domain.shrink(delta).clamp(u);
  out.value = b.eval_fn(u);
  return out;
}

}  // namespace bellman
