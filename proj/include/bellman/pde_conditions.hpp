#pragma once

// Pointwise checkers for the first and second Bellman PDE families and their
// reduced forms, plus the planar search for a matrix C with unit diagonal
// and <Cb, b> = 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bellman/catalog.hpp"
#include "bellman/errors.hpp"
#include "bellman/gaussian.hpp"
#include "bellman/matrix_kernel.hpp"
#include "bellman/parallel.hpp"

namespace bellman {

struct Axis {
  double lo = 0, hi = 1;
  int count = 2;
};

/// Tensor grid enumerated lexicographically, last axis fastest.
struct GridSpec {
  std::vector<Axis> axes;

  static GridSpec cube(int dim, double lo, double hi, int count) {
    GridSpec g;
    g.axes.assign(dim, Axis{lo, hi, count});
    g.validate();
    return g;
  }

  /// Grid over a candidate's domain shrunk by margin; every axis must be
  /// bounded after shrinking.
  static GridSpec over(const Box& domain, int count, double margin = kDomainMargin) {
    const Box b = domain.shrink(margin);
    GridSpec g;
    for (int i = 0; i < b.dim(); ++i) {
      if (!std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i])) {
        throw usage_error("GridSpec::over: unbounded axis " + std::to_string(i) +
                          "; give explicit bounds");
      }
      g.axes.push_back({b.lo[i], b.hi[i], count});
    }
    g.validate();
    return g;
  }

  void validate() const {
    if (axes.empty()) throw usage_error("GridSpec: no axes");
    for (const auto& a : axes) {
      if (!(a.lo < a.hi) || a.count < 2) {
        throw usage_error("GridSpec: each axis needs lo < hi and count >= 2");
      }
    }
  }

  int dim() const { return static_cast<int>(axes.size()); }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= static_cast<std::size_t>(a.count);
    return n;
  }

  Vector point(std::size_t index) const {
    Vector x(dim());
    for (int d = dim() - 1; d >= 0; --d) {
      const auto& a = axes[d];
      const auto c = static_cast<std::size_t>(a.count);
      const auto i = index % c;
      index /= c;
      x(d) = a.lo + (a.hi - a.lo) * static_cast<double>(i) / static_cast<double>(a.count - 1);
    }
    return x;
  }
};

enum class Verdict { pass, fail, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  if (s == "inconclusive") return Verdict::inconclusive;
  throw usage_error("unknown verdict '" + s + "'");
}

/// Output of every checker. verdict == pass iff max_residual <= tol, unless
/// the checker declared the run inconclusive.
struct CheckReport {
  std::string name;
  std::size_t grid_size = 0;
  double max_residual = 0;
  double mean_residual = 0;
  std::vector<double> argmax;
  Verdict verdict = Verdict::pass;
  double tol = kDefaultTol;
  double wall_ms = 0;
  std::size_t skipped = 0;
  std::map<std::string, double> extras;
  std::vector<std::string> notes;

  void decide() { verdict = max_residual <= tol ? Verdict::pass : Verdict::fail; }
  bool passed() const { return verdict == Verdict::pass; }
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Residual at one grid point plus named auxiliary maxima.
struct PointEval {
  double residual = 0;
  std::vector<double> aux;
  bool skip = false;
};

/// Data-parallel sweep with a deterministic fold: strict '>' keeps the first
/// (lexicographically smallest) maximizer. NaN residuals count as +inf.
/// Domain errors skip the point; other exceptions propagate.
template <typename Fn>
CheckReport sweep(const std::string& name, const GridSpec& grid, double tol,
                  const std::vector<std::string>& aux_names, Fn&& fn) {
  if (!(tol > 0)) throw usage_error(name + ": tolerance must be positive");
  grid.validate();
  Stopwatch sw;
  const std::size_t n = grid.size();
  std::vector<PointEval> results(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      results[i] = fn(grid.point(i));
    } catch (const domain_error&) {
      results[i].skip = true;
    }
  });
  CheckReport rep;
  rep.name = name;
  rep.grid_size = n;
  rep.tol = tol;
  std::vector<double> aux(aux_names.size(), -std::numeric_limits<double>::infinity());
  double sum = 0;
  std::size_t used = 0;
  bool have = false;
  bool saw_nan = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = results[i];
    if (r.skip) {
      ++rep.skipped;
      continue;
    }
    double v = r.residual;
    if (std::isnan(v)) {
      v = std::numeric_limits<double>::infinity();
      saw_nan = true;
    }
    if (!have || v > rep.max_residual) {
      rep.max_residual = v;
      const Vector p = grid.point(i);
      rep.argmax.assign(p.data(), p.data() + p.size());
      have = true;
    }
    sum += v;
    ++used;
    for (std::size_t k = 0; k < aux.size() && k < r.aux.size(); ++k) aux[k] = std::max(aux[k], r.aux[k]);
  }
  rep.mean_residual = used ? sum / static_cast<double>(used) : 0.0;
  for (std::size_t k = 0; k < aux.size(); ++k) {
    if (used) rep.extras[aux_names[k]] = aux[k];
  }
  if (rep.skipped) rep.extras["skipped_points"] = static_cast<double>(rep.skipped);
  if (saw_nan) rep.notes.push_back("non-finite residual encountered");
  rep.decide();
  if (!used) {
    rep.verdict = Verdict::inconclusive;
    rep.notes.push_back("every grid point was outside the domain");
  }
  rep.notes.push_back("grid evidence on " + std::to_string(used) + " points, not a proof");
  rep.wall_ms = sw.ms();
  return rep;
}

// ---------------------------------------------------------------------------

inline void check_arity(const BellmanCandidate& b, const ColumnSystem& sys, const SymMatrix& c) {
  if (b.arity != sys.n()) {
    throw usage_error(b.name + " has arity " + std::to_string(b.arity) + " but the system has n = " +
                      std::to_string(sys.n()));
  }
  if (c.dim() != sys.k()) {
    throw usage_error("C is " + std::to_string(c.dim()) + "x" + std::to_string(c.dim()) +
                      " but the columns live in R^" + std::to_string(sys.k()));
  }
}

/// First-type check: A*CA . Hess B <= 0 and det = 0. The residual is
/// max(largest eigenvalue^+, |det| / (1 + prod row norms)).
inline CheckReport check_first_type(const BellmanCandidate& b, const ColumnSystem& sys, const SymMatrix& c,
                                    const GridSpec& grid, double tol = kDefaultTol) {
  check_arity(b, sys, c);
  const SymMatrix gram = column_gram(sys, c);
  return sweep("first_type", grid, tol, {"worst_eigenvalue", "worst_det"}, [&](const Vector& x) {
    const SymMatrix m = schur_product(gram, b.hessian(x));
    const double eig = eigenvalues(m).maxCoeff();
    const double det = relative_determinant(m.matrix());
    return PointEval{std::max(std::max(eig, 0.0), det), {eig, det}};
  });
}

inline void check_column_speeds(const ColumnSystem& sys, const SymMatrix& c) {
  const SymMatrix gram = column_gram(sys, c);
  for (int j = 0; j < sys.n(); ++j) {
    if (!(gram(j, j) > 0)) {
      throw precondition_error("<C a_" + std::to_string(j + 1) + ", a_" + std::to_string(j + 1) +
                               "> = " + std::to_string(gram(j, j)) + " is not positive");
    }
  }
}

/// P M P for M = A*CA . Hess B and P the projector onto ker(A D).
inline SymMatrix projected_modified_hessian(const BellmanCandidate& b, const ColumnSystem& sys,
                                            const SymMatrix& c, const Vector& x) {
  const Projection p = kernel_projection(sys, b.gradient(x));
  const SymMatrix m = modified_hessian(sys, c, b.hessian(x));
  return SymMatrix(Matrix(p.entries * m.matrix() * p.entries));
}

/// Second-type check: P M P <= 0 and every (n-k)-minor of P M P vanishes.
/// Minors are scaled by 1 + ||PMP||_max^{n-k}. Numerical rank is reported.
inline CheckReport check_second_type(const BellmanCandidate& b, const ColumnSystem& sys, const SymMatrix& c,
                                     const GridSpec& grid, double tol = kDefaultTol) {
  check_arity(b, sys, c);
  check_column_speeds(sys, c);
  const int s = sys.n() - sys.k();
  return sweep("second_type", grid, tol, {"worst_eigenvalue", "worst_minor", "max_rank"},
               [&](const Vector& x) {
                 const SymMatrix pmp = projected_modified_hessian(b, sys, c, x);
                 const double eig = eigenvalues(pmp).maxCoeff();
                 double minor = 0;
                 double rank = 0;
                 if (s > 0) {
                   const auto mv = minors_vanish(pmp, s, tol);
                   const double scale = 1 + std::pow(pmp.matrix().cwiseAbs().maxCoeff(), s);
                   minor = mv.worst_minor / scale;
                   rank = mv.numerical_rank;
                 }
                 return PointEval{std::max(std::max(eig, 0.0), minor), {eig, minor, rank}};
               });
}

/// Σ_j B_jj <Ca_j,a_j> - Σ_ij B_ij B_i B_j <Ca_i,a_j> <(AD²A*)^{-1} a_i, a_j>,
/// the trace of the projected modified Hessian when k = n - 1.
inline double trace_condition(const BellmanCandidate& b, const ColumnSystem& sys, const SymMatrix& c,
                              const Vector& x) {
  check_arity(b, sys, c);
  if (sys.k() != sys.n() - 1) {
    throw usage_error("trace_condition: needs k = n - 1, got k = " + std::to_string(sys.k()) +
                      ", n = " + std::to_string(sys.n()));
  }
  const Vector g = b.gradient(x);
  const Matrix h = b.hessian(x).matrix();
  const Matrix ad = scaled_columns(sys, g);
  const Matrix gmat = ad * ad.transpose();
  Eigen::JacobiSVD<Matrix> svd(ad);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-10 * std::max(1.0, sv(0)))) {
    throw precondition_error("trace_condition: A D is rank deficient at " + format_point(x));
  }
  const Matrix gram = column_gram(sys, c).matrix();
  const Matrix ginv_cols = gmat.ldlt().solve(sys.matrix());  // G^{-1} a_j
  const Matrix inner = sys.matrix().transpose() * ginv_cols;  // <G^{-1} a_i, a_j>
  double t = 0;
  for (int j = 0; j < sys.n(); ++j) t += h(j, j) * gram(j, j);
  for (int i = 0; i < sys.n(); ++i)
    for (int j = 0; j < sys.n(); ++j) t -= h(i, j) * g(i) * g(j) * gram(i, j) * inner(i, j);
  return t;
}

enum class ReducedMode { inequality, equality };

inline constexpr double kVanishingPartial = 1e-10;

/// r(x) = Σ_ij H_ij / (H_i H_j) a_ni a_nj c_ij. Inequality mode passes iff
/// r >= -tol; equality mode iff |r| <= tol. Points with some |H_j| < 1e-10
/// are excluded and counted; if all are excluded the check fails loudly.
inline CheckReport reduced_H_condition(const SurfaceCandidate& h, const Vector& an, const SymMatrix& c,
                                       const GridSpec& grid, double tol = kDefaultTol,
                                       ReducedMode mode = ReducedMode::inequality) {
  const int k = h.arity;
  if (an.size() != k || c.dim() != k) {
    throw usage_error("reduced_H_condition: a_n and C must match the arity of " + h.name);
  }
  std::vector<char> excluded(grid.size(), 0);
  auto rep = sweep(mode == ReducedMode::equality ? "reduced_H_equality" : "reduced_H_inequality", grid, tol,
                   {"min_r", "max_r"}, [&](const Vector& x) {
                     const Vector g = h.gradient(x);
                     for (int j = 0; j < k; ++j) {
                       if (std::abs(g(j)) < kVanishingPartial) return PointEval{0, {}, true};
                     }
                     const Matrix hh = h.hessian(x).matrix();
                     double r = 0;
                     for (int i = 0; i < k; ++i)
                       for (int j = 0; j < k; ++j) r += hh(i, j) / (g(i) * g(j)) * an(i) * an(j) * c(i, j);
                     const double res = mode == ReducedMode::equality ? std::abs(r) : std::max(0.0, -r);
                     return PointEval{res, {-r, r}};
                   });
  if (rep.extras.count("min_r")) rep.extras["min_r"] = -rep.extras["min_r"];
  if (rep.skipped == rep.grid_size) {
    throw precondition_error("reduced_H_condition: a partial of " + h.name +
                             " vanishes (or leaves the domain) at every grid point, e.g. " +
                             format_point(grid.point(0)));
  }
  return rep;
}

/// Checks |α| + |β| >= 1 and ||α| - |β|| <= 1.
inline void check_glavnoe_coefficients(double alpha, double beta) {
  const double a = std::abs(alpha), b = std::abs(beta);
  if (!(a + b >= 1 - 1e-14)) {
    throw precondition_error("glavnoe: |alpha| + |beta| = " + std::to_string(a + b) + " < 1");
  }
  if (!(std::abs(a - b) <= 1 + 1e-14)) {
    throw precondition_error("glavnoe: ||alpha| - |beta|| = " + std::to_string(std::abs(a - b)) + " > 1");
  }
}

/// g = (1-α²-β²) H_x H_y H_xy + α² H_y² H_xx + β² H_x² H_yy >= -tol. The
/// extras carry the largest |g - r H_x² H_y²| against the reduced residual r
/// with c12 = (1-α²-β²)/(2αβ).
inline CheckReport glavnoe_check(const SurfaceCandidate& h, double alpha, double beta, const GridSpec& grid,
                                 double tol = kDefaultTol) {
  if (h.arity != 2) throw usage_error("glavnoe_check: H must have two arguments");
  check_glavnoe_coefficients(alpha, beta);
  const double q = 1 - alpha * alpha - beta * beta;
  const double c12 = q / (2 * alpha * beta);
  auto rep = sweep("glavnoe", grid, tol, {"crosscheck", "min_g_neg", "sign_mismatch"}, [&](const Vector& x) {
    const Vector g = h.gradient(x);
    if (std::abs(g(0)) < kVanishingPartial || std::abs(g(1)) < kVanishingPartial) return PointEval{0, {}, true};
    const Matrix m = h.hessian(x).matrix();
    const double hx = g(0), hy = g(1);
    const double val = q * hx * hy * m(0, 1) + alpha * alpha * hy * hy * m(0, 0) + beta * beta * hx * hx * m(1, 1);
    const double r = alpha * alpha * m(0, 0) / (hx * hx) + 2 * alpha * beta * c12 * m(0, 1) / (hx * hy) +
                     beta * beta * m(1, 1) / (hy * hy);
    const double scale = 1 + std::abs(val);
    const double cross = std::abs(val - r * hx * hx * hy * hy) / scale;
    const bool mismatch = (val < -tol) != (r * hx * hx * hy * hy < -tol);
    return PointEval{std::max(0.0, -val), {cross, -val, mismatch ? 1.0 : 0.0}};
  });
  if (rep.extras.count("min_g_neg")) {
    rep.extras["min_g"] = -rep.extras["min_g_neg"];
    rep.extras.erase("min_g_neg");
  }
  return rep;
}

struct LogdevWeights {
  double w0 = 1.0;
  std::vector<double> w;  // empty means all ones
};

/// w0 (log φ)'(Σ b_j y_j) >= Σ b_j w_j (log φ)'(y_j) - tol at each sample.
inline CheckReport logdev_check(const ProfileFunction& prof, const std::vector<double>& b,
                                const LogdevWeights& weights, const std::vector<Vector>& samples,
                                double tol = kDefaultTol) {
  if (!(tol > 0)) throw usage_error("logdev_check: tolerance must be positive");
  const std::size_t k = b.size();
  if (!weights.w.empty() && weights.w.size() != k) throw usage_error("logdev_check: weight count mismatch");
  Stopwatch sw;
  CheckReport rep;
  rep.name = "logdev";
  rep.tol = tol;
  rep.grid_size = samples.size();
  double sum = 0;
  bool first = true;
  for (const auto& y : samples) {
    if (static_cast<std::size_t>(y.size()) != k) throw usage_error("logdev_check: sample dimension mismatch");
    double s = 0, rhs = 0;
    for (std::size_t j = 0; j < k; ++j) {
      s += b[j] * y(j);
      rhs += b[j] * (weights.w.empty() ? 1.0 : weights.w[j]) * prof.log_density_derivative(y(j));
    }
    const double lhs = weights.w0 * prof.log_density_derivative(s);
    const double res = std::max(0.0, rhs - lhs);
    if (first || res > rep.max_residual) {
      rep.max_residual = res;
      rep.argmax.assign(y.data(), y.data() + y.size());
      first = false;
    }
    sum += res;
  }
  rep.mean_residual = samples.empty() ? 0 : sum / static_cast<double>(samples.size());
  rep.decide();
  rep.wall_ms = sw.ms();
  return rep;
}

/// Result of the planar search for C = V^T V with unit columns v_j.
struct A1Construction {
  std::optional<SymMatrix> c;
  std::vector<double> angles;
  std::string reason;  // why no C exists, when absent
};

/// Necessary conditions: Σ b_j >= 1 and b_j - Σ_{i≠j} b_i <= 1 for all j.
inline std::string a1_infeasibility(const std::vector<double>& b) {
  double sum = 0;
  for (double v : b) sum += v;
  if (sum < 1) {
    return "sum of b_j = " + std::to_string(sum) + " < 1 (need sum of b_j >= 1)";
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    const double d = b[j] - (sum - b[j]);
    if (d > 1) {
      return "b_" + std::to_string(j + 1) + " - sum_{i != " + std::to_string(j + 1) + "} b_i = " +
             std::to_string(d) + " > 1 (need b_j - sum_{i != j} b_i <= 1)";
    }
  }
  return "";
}

namespace detail {

// Angles making |Σ b_j e^{iφ_j}| minimal: max(0, b_max - rest).
inline std::vector<double> minimal_configuration(const std::vector<double>& b) {
  const std::size_t n = b.size();
  double sum = 0;
  for (double v : b) sum += v;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return b[x] > b[y]; });
  std::vector<double> ang(n, 0.0);
  const double bmax = b[order[0]];
  if (bmax >= sum - bmax) {
    for (std::size_t i = 1; i < n; ++i) ang[order[i]] = std::numbers::pi;
    return ang;
  }
  // Longest-processing-time split into three bins, each at most half the
  // total, then close the triangle with those side lengths.
  double bins[3] = {0, 0, 0};
  std::vector<int> bin_of(n);
  for (std::size_t idx : order) {
    int k = 0;
    for (int q = 1; q < 3; ++q) if (bins[q] < bins[k]) k = q;
    bins[k] += b[idx];
    bin_of[idx] = k;
  }
  double psi[3] = {0, 0, 0};
  const double b1 = bins[0], b2 = bins[1], b3 = bins[2];
  const double cos2 = std::clamp((b3 * b3 - b1 * b1 - b2 * b2) / (2 * b1 * b2), -1.0, 1.0);
  psi[1] = std::acos(cos2);
  if (b3 > 0) {
    const double x = -(b1 + b2 * std::cos(psi[1])), y = -(b2 * std::sin(psi[1]));
    psi[2] = std::atan2(y, x);
  }
  for (std::size_t i = 0; i < n; ++i) ang[i] = psi[bin_of[i]];
  return ang;
}

inline double resultant(const std::vector<double>& b, const std::vector<double>& ang, double s) {
  double x = 0, y = 0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    x += b[j] * std::cos(s * ang[j]);
    y += b[j] * std::sin(s * ang[j]);
  }
  return std::hypot(x, y);
}

}  // namespace detail

/// Finds C >= 0 with c_jj = 1 and <Cb, b> = 1 from unit vectors in a plane,
/// or reports which necessary condition fails.
inline A1Construction construct_C_for_b(const std::vector<double>& b) {
  if (b.empty()) throw usage_error("construct_C_for_b: empty b");
  for (double v : b) {
    if (!(v > 0)) throw usage_error("construct_C_for_b: coefficients must be positive");
  }
  A1Construction out;
  out.reason = a1_infeasibility(b);
  if (!out.reason.empty()) return out;
  const std::size_t n = b.size();
  const auto phi = detail::minimal_configuration(b);
  // |Σ b_j v_j(s)| goes from Σ b_j >= 1 at s = 0 to its minimum <= 1 at s = 1.
  double lo = 0, hi = 1;
  if (detail::resultant(b, phi, 1.0) > 1) {
    out.reason = "planar search failed to reach |sum b_j v_j| <= 1";
    return out;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    (detail::resultant(b, phi, mid) > 1 ? lo : hi) = mid;
  }
  const double s = std::abs(detail::resultant(b, phi, lo) - 1) < std::abs(detail::resultant(b, phi, hi) - 1) ? lo : hi;
  out.angles.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.angles[j] = s * phi[j];
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = std::cos(out.angles[i] - out.angles[j]);
  const SymMatrix cs(c);
  const Vector bv = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(n));
  const double cbb = bv.dot(cs.matrix() * bv);
  double diag = 0;
  for (std::size_t j = 0; j < n; ++j) diag = std::max(diag, std::abs(cs(j, j) - 1));
  const double min_eig = eigenvalues(cs).minCoeff();
  if (std::abs(cbb - 1) > 1e-10 || diag > 1e-10 || min_eig < -1e-12) {
    out.reason = "constructed C failed verification (|<Cb,b> - 1| = " + std::to_string(std::abs(cbb - 1)) + ")";
    return out;
  }
  out.c = cs;
  return out;
}

/// (a - 1)(b - 1) >= p^2.
inline bool hyper_region(double a, double b, double p) {
  if (!(a >= 1 && b >= 1)) throw usage_error("hyper_region: need a, b >= 1");
  if (!(p > 0 && p < 1)) throw usage_error("hyper_region: need p in (0,1)");
  return (a - 1) * (b - 1) >= p * p;
}

/// Q - 1 <= e^{2t} (P - 1), the same region with p = e^{-t}.
inline bool hyper_region_pqt(double big_p, double big_q, double t) {
  if (!(big_p > 1 && big_q > 1 && t >= 0)) throw usage_error("hyper_region_pqt: need P, Q > 1, t >= 0");
  return big_q - 1 <= std::exp(2 * t) * (big_p - 1);
}

}  // namespace bellman
