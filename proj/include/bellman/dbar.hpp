#pragma once

// Series solutions of ∂f/∂z̄ = f̄, the change of variables that carries them
// to the linear (N, M) system, and residual checks for the degenerate
// Monge-Ampère type equation c² B11 B22 = B12² and its linearizations.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include "bellman/catalog.hpp"
#include "bellman/pde_conditions.hpp"

namespace bellman {

using Complex = std::complex<double>;

struct BesselValue {
  double value = 0;
  double tail = 0;  // size of the first omitted term
};

/// J(r) = Σ_{j>=0} r^j / (j!)², truncated at j = m. J^(d)(r) =
/// Σ_{j>=d} r^{j-d} / ((j-d)! j!).
class BesselJ {
 public:
  explicit BesselJ(int m = 30) : m_(m) {
    if (m < 0 || m > 150) throw usage_error("BesselJ: order must be in [0, 150]");
    inv_fact_.assign(m + 2, 1.0);
    for (int j = 1; j <= m + 1; ++j) inv_fact_[j] = inv_fact_[j - 1] / j;
  }

  int order() const { return m_; }

  BesselValue eval(double r, int deriv = 0) const {
    if (deriv < 0 || deriv > m_) throw usage_error("BesselJ: need 0 <= deriv <= order");
    BesselValue out;
    // Horner in r over j = deriv..m.
    double s = 0;
    for (int j = m_; j >= deriv; --j) s = s * r + inv_fact_[j - deriv] * inv_fact_[j];
    out.value = s;
    const int j = m_ + 1;
    out.tail = std::pow(std::abs(r), j - deriv) * inv_fact_[j - deriv] * inv_fact_[j];
    return out;
  }

 private:
  int m_;
  std::vector<double> inv_fact_;
};

inline BesselValue bessel_eval(double r, int deriv, int m) { return BesselJ(m).eval(r, deriv); }

/// f(z) = Σ_k c_k J^(k)(z z̄) z^k + conj(c_k) J^(k+1)(z z̄) z̄^{k+1}.
struct DbarSolution {
  std::vector<Complex> coeffs;
  BesselJ bessel{30};

  DbarSolution() = default;
  DbarSolution(std::vector<Complex> c, int order) : coeffs(std::move(c)), bessel(order) {
    if (static_cast<int>(coeffs.size()) + 1 > order) {
      throw usage_error("DbarSolution: Bessel order must exceed the number of coefficients");
    }
  }

  Complex operator()(Complex z) const {
    const double r = std::norm(z);
    const Complex zb = std::conj(z);
    Complex f = 0, zk = 1, zbk = zb;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const int d = static_cast<int>(k);
      f += coeffs[k] * bessel.eval(r, d).value * zk + std::conj(coeffs[k]) * bessel.eval(r, d + 1).value * zbk;
      zk *= z;
      zbk *= zb;
    }
    return f;
  }
};

namespace detail {

// Central difference with one Richardson step (fourth order).
template <typename F>
auto richardson_d1(F&& f, double h) {
  using T = std::decay_t<decltype(f(0.0))>;
  auto d = [&](double s) -> T { return (f(s) - f(-s)) / (2 * s); };
  return T((4.0 * d(0.5 * h) - d(h)) / 3.0);
}

template <typename F>
auto richardson_d2(F&& f, double h) {
  using T = std::decay_t<decltype(f(0.0))>;
  const T f0 = f(0.0);
  auto d = [&](double s) -> T { return (f(s) - 2.0 * f0 + f(-s)) / (s * s); };
  return T((4.0 * d(0.5 * h) - d(h)) / 3.0);
}

}  // namespace detail

/// |(f_x + i f_y)/2 - conj(f)| at z by Richardson-extrapolated differences.
inline double dbar_residual(const DbarSolution& sol, Complex z, double h = 1e-4) {
  if (!(h > 1e-6 && h < 1e-2)) throw usage_error("dbar_residual: step must lie in (1e-6, 1e-2)");
  const Complex fx = detail::richardson_d1([&](double s) { return sol(z + Complex(s, 0)); }, h);
  const Complex fy = detail::richardson_d1([&](double s) { return sol(z + Complex(0, s)); }, h);
  return std::abs(0.5 * (fx + Complex(0, 1) * fy) - std::conj(sol(z)));
}

using Mat2 = Eigen::Matrix2d;

/// The two matrices B_1, B_2 built from an invertible B:
/// B_1 = ½(B I⁺ B⁻¹ e_1, B I⁻ B⁻¹ e_1), B_2 = ½(B I⁺ B⁻¹ e_2, B I⁻ B⁻¹ e_2).
inline std::pair<Mat2, Mat2> lemma_blocks(const Mat2& b) {
  if (std::abs(b.determinant()) < 1e-14) throw usage_error("lemma_blocks: B must be invertible");
  Mat2 ip, im;
  ip << 1, 0, 0, -1;
  im << 0, -1, -1, 0;
  const Mat2 binv = b.inverse();
  const Mat2 xp = b * ip * binv, xm = b * im * binv;
  Mat2 b1, b2;
  b1.col(0) = 0.5 * xp.col(0);
  b1.col(1) = 0.5 * xm.col(0);
  b2.col(0) = 0.5 * xp.col(1);
  b2.col(1) = 0.5 * xm.col(1);
  return {b1, b2};
}

/// [[-2 r.s/|s|², |r|²/|s|²], [-1, 0]] for B with rows r, s.
inline Mat2 b2b1inv_closed_form(const Mat2& b) {
  const Eigen::Vector2d r = b.row(0).transpose(), s = b.row(1).transpose();
  Mat2 m;
  m << -2 * r.dot(s) / s.squaredNorm(), r.squaredNorm() / s.squaredNorm(), -1, 0;
  return m;
}

struct HodographMaps {
  double c = 2, k = 1, t = 0.5, delta = 1;
  Mat2 p, q, b, a;
  Mat2 b1, b2;
  double compatibility = 0;  // max |QP⁻¹ - B₂B₁⁻¹|

  /// (N, M)(x, y) = B (U, V)(A (x, y)).
  Eigen::Vector2d inner(double x, double y) const { return a * Eigen::Vector2d(x, y); }
};

/// P = [[-1, 1], [-k, 0]], Q = [[0, -k], [1, -1]] with k = 2/c, t = 1/c,
/// δ = 1; B = [[t, sqrt(1-t²)], [1, 0]] and A = (P⁻¹ B_1)ᵀ.
inline HodographMaps hodograph_maps(double c) {
  if (!(std::abs(c) > 1) || !std::isfinite(c)) {
    throw domain_error("hodograph_maps: need |c| > 1, got c = " + std::to_string(c));
  }
  HodographMaps h;
  h.c = c;
  h.k = 2 / c;
  h.t = 1 / c;
  h.p << -1, 1, -h.k, 0;
  h.q << 0, -h.k, 1, -1;
  const double s = std::sqrt(h.delta * h.delta - h.t * h.t);
  h.b << h.t, s, 1, 0;
  std::tie(h.b1, h.b2) = lemma_blocks(h.b);
  h.a = (h.p.inverse() * h.b1).transpose();
  h.compatibility = (h.q * h.p.inverse() - h.b2 * h.b1.inverse()).cwiseAbs().maxCoeff();
  return h;
}

/// A in closed form: [[0, -1/2], [1/(4ts), -(2t²-1)/(4ts)]], s = sqrt(1-t²).
inline Mat2 hodograph_A_closed_form(double t) {
  const double s = std::sqrt(1 - t * t);
  Mat2 a;
  a << 0, -0.5, 1 / (4 * t * s), -(2 * t * t - 1) / (4 * t * s);
  return a;
}

struct MnValue {
  double n = 0, m = 0;
  double residual = 0;  // max of the two equation residuals
};

/// (N, M) at (x, y) from U = Re f, V = Im f, and the residuals of
/// N = -N_1 + N_2 - k M_2, M = -k N_1 + M_1 - M_2.
inline MnValue mn_from_dbar(const DbarSolution& sol, const HodographMaps& h, double x, double y,
                            double step = 1e-3) {
  auto nm = [&](double xx, double yy) {
    const Eigen::Vector2d w = h.inner(xx, yy);
    const Complex f = sol(Complex(w(0), w(1)));
    return Eigen::Vector2d(h.b * Eigen::Vector2d(f.real(), f.imag()));
  };
  const Eigen::Vector2d v = nm(x, y);
  const Eigen::Vector2d d1 = detail::richardson_d1([&](double s) { return Eigen::Vector2d(nm(x + s, y)); }, step);
  const Eigen::Vector2d d2 = detail::richardson_d1([&](double s) { return Eigen::Vector2d(nm(x, y + s)); }, step);
  MnValue out;
  out.n = v(0);
  out.m = v(1);
  const double r1 = v(0) - (-d1(0) + d2(0) - h.k * d2(1));
  const double r2 = v(1) - (-h.k * d1(0) + d1(1) - d2(1));
  out.residual = std::max(std::abs(r1), std::abs(r2));
  return out;
}

/// c² B11 B22 - B12² plus separate concavity B11, B22 <= tol.
inline CheckReport monge_ampere_residual(const BellmanCandidate& b, double c, const GridSpec& grid,
                                         double tol = 1e-6) {
  if (b.arity != 2) throw usage_error("monge_ampere_residual: B must have two arguments");
  auto rep = sweep("monge_ampere", grid, tol, {"worst_equation", "max_B11", "max_B22"}, [&](const Vector& x) {
    const SymMatrix h = b.hessian(x);
    const double eq = std::abs(c * c * h(0, 0) * h(1, 1) - h(0, 1) * h(0, 1));
    return PointEval{std::max({eq, h(0, 0), h(1, 1)}), {eq, h(0, 0), h(1, 1)}};
  });
  rep.extras["separately_concave"] =
      (rep.extras.count("max_B11") && rep.extras["max_B11"] <= tol && rep.extras["max_B22"] <= tol) ? 1.0 : 0.0;
  return rep;
}

/// Residuals of -2 p p_y = c(q p_x + p q_x) and -2 q q_x = c(q p_y + p q_y)
/// for p = sqrt(-B11), q = sqrt(-B22); B12 = c p q is checked first and
/// reported as b12_mismatch.
inline CheckReport hodograph_system_residual(const BellmanCandidate& b, double c, const GridSpec& grid,
                                             double tol = 1e-4, double step = 1e-3) {
  if (b.arity != 2) throw usage_error("hodograph_system_residual: B must have two arguments");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vector x = grid.point(i);
    const SymMatrix h = b.hessian(x);
    if (!(h(0, 0) < 0 && h(1, 1) < 0)) {
      throw precondition_error("hodograph system: need B11 < 0 and B22 < 0, fails at " + format_point(x));
    }
  }
  auto pq = [&](const Vector& x) {
    const SymMatrix h = b.hessian(x);
    return Eigen::Vector2d(std::sqrt(-h(0, 0)), std::sqrt(-h(1, 1)));
  };
  return sweep("hodograph_system", grid, tol, {"b12_mismatch", "eq1", "eq2"}, [&](const Vector& x) {
    const SymMatrix h = b.hessian(x);
    const Eigen::Vector2d v = pq(x);
    const double p = v(0), q = v(1);
    const double mismatch = std::abs(h(0, 1) - c * p * q);
    auto shifted = [&](int axis) {
      return [&, axis](double s) {
        Vector y = x;
        y(axis) += s;
        return Eigen::Vector2d(pq(y));
      };
    };
    const Eigen::Vector2d dx = detail::richardson_d1(shifted(0), step);
    const Eigen::Vector2d dy = detail::richardson_d1(shifted(1), step);
    const double e1 = std::abs(-2 * p * dy(0) - c * (q * dx(0) + p * dx(1)));
    const double e2 = std::abs(-2 * q * dx(1) - c * (q * dy(0) + p * dy(1)));
    return PointEval{std::max({mismatch, e1, e2}), {mismatch, e1, e2}};
  });
}

/// W(s, τ) with W_22 = W_1 (first argument time-like).
struct CaloricFunction {
  std::string name;
  std::function<double(double, double)> w;
};

inline CaloricFunction caloric_constant(double v = 1.0) {
  return {"constant", [v](double, double) { return v; }};
}

inline CaloricFunction caloric_quadratic() {
  return {"tau^2+2s", [](double s, double tau) { return tau * tau + 2 * s; }};
}

/// Heat kernel (4π(s + s0))^{-1/2} exp(-τ² / (4(s + s0))); defined for s > -s0.
inline CaloricFunction caloric_kernel(double s0 = 1.0) {
  return {"heat_kernel", [s0](double s, double tau) {
            const double u = s + s0;
            if (!(u > 0)) throw domain_error("heat kernel evaluated at non-positive time");
            return std::exp(-tau * tau / (4 * u)) / std::sqrt(4 * std::numbers::pi * u);
          }};
}

/// M(x, y) = e^{-c1 y/2 + c1² x/(4 c2)} W(-x/c2, y) against
/// M_22 + c1 M_2 + c2 M_1 = 0.
inline CheckReport parabolic_reduction_check(double c1, double c2, const CaloricFunction& w, const GridSpec& grid,
                                             double tol = 1e-6, double step = 1e-2) {
  if (c2 == 0) throw usage_error("parabolic_reduction_check: c2 must be nonzero");
  if (grid.dim() != 2) throw usage_error("parabolic_reduction_check: grid must be 2-D");
  auto m = [&](double x, double y) {
    return std::exp(-c1 * y / 2 + c1 * c1 * x / (4 * c2)) * w.w(-x / c2, y);
  };
  return sweep("parabolic_reduction", grid, tol, {}, [&](const Vector& p) {
    const double x = p(0), y = p(1);
    const double m1 = detail::richardson_d1([&](double s) { return m(x + s, y); }, step);
    const double m2 = detail::richardson_d1([&](double s) { return m(x, y + s); }, step);
    const double m22 = detail::richardson_d2([&](double s) { return m(x, y + s); }, step);
    return PointEval{std::abs(m22 + c1 * m2 + c2 * m1), {}};
  });
}

/// W with its Laplacian in closed form.
struct PlaneEigenfunction {
  std::string name;
  std::function<double(double, double)> w;
  std::function<double(double, double)> laplacian;
};

inline PlaneEigenfunction exp_eigenfunction(double alpha, double beta) {
  const double lam = alpha * alpha + beta * beta;
  return {"exp", [alpha, beta](double x, double y) { return std::exp(alpha * x + beta * y); },
          [alpha, beta, lam](double x, double y) { return lam * std::exp(alpha * x + beta * y); }};
}

inline PlaneEigenfunction harmonic_quadratic() {
  return {"x^2-y^2", [](double x, double y) { return x * x - y * y; }, [](double, double) { return 0.0; }};
}

/// M = e^{-c1 x/2 - c2 y/2} W against M_11 + M_22 + c1 M_1 + c2 M_2 = 0,
/// after checking ΔW = ((c1² + c2²)/4) W on the grid.
inline CheckReport elliptic_reduction_check(double c1, double c2, const PlaneEigenfunction& w,
                                            const GridSpec& grid, double tol = 1e-6, double step = 1e-2) {
  if (grid.dim() != 2) throw usage_error("elliptic_reduction_check: grid must be 2-D");
  const double lam = (c1 * c1 + c2 * c2) / 4;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vector p = grid.point(i);
    const double v = w.w(p(0), p(1));
    if (std::abs(w.laplacian(p(0), p(1)) - lam * v) > 1e-10 * (1 + std::abs(lam * v))) {
      throw precondition_error("elliptic_reduction_check: W is not an eigenfunction with eigenvalue " +
                               std::to_string(lam) + " at " + format_point(p));
    }
  }
  auto m = [&](double x, double y) { return std::exp(-c1 * x / 2 - c2 * y / 2) * w.w(x, y); };
  return sweep("elliptic_reduction", grid, tol, {}, [&](const Vector& p) {
    const double x = p(0), y = p(1);
    const double m1 = detail::richardson_d1([&](double s) { return m(x + s, y); }, step);
    const double m2 = detail::richardson_d1([&](double s) { return m(x, y + s); }, step);
    const double m11 = detail::richardson_d2([&](double s) { return m(x + s, y); }, step);
    const double m22 = detail::richardson_d2([&](double s) { return m(x, y + s); }, step);
    return PointEval{std::abs(m11 + m22 + c1 * m1 + c2 * m2), {}};
  });
}

}  // namespace bellman
