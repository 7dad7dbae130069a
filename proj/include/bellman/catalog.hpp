#pragma once

// Candidate Bellman functions B and surface functions H with analytic
// gradients and Hessians, plus finite-difference cross-checks.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bellman/errors.hpp"
#include "bellman/gaussian.hpp"
#include "bellman/matrix_kernel.hpp"
#include "bellman/quadrature.hpp"

namespace bellman {

inline constexpr double kDomainMargin = 1e-3;

/// Axis-aligned open box; hi may be +inf and lo may be -inf.
struct Box {
  std::vector<double> lo, hi;

  static Box cube(int dim, double lo, double hi) {
    return {std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vector& x) const {
    if (x.size() != dim()) return false;
    for (int i = 0; i < dim(); ++i) {
      if (!(x(i) > lo[i] && x(i) < hi[i])) return false;
    }
    return true;
  }

  /// Moves every finite face inward by delta.
  Box shrink(double delta) const {
    Box b = *this;
    for (int i = 0; i < dim(); ++i) {
      if (std::isfinite(b.lo[i])) b.lo[i] += delta;
      if (std::isfinite(b.hi[i])) b.hi[i] -= delta;
    }
    return b;
  }

  /// Projects x onto the closed box; returns the number of clamped axes.
  int clamp(Vector& x) const {
    int n = 0;
    for (int i = 0; i < dim(); ++i) {
      if (x(i) < lo[i]) { x(i) = lo[i]; ++n; }
      if (x(i) > hi[i]) { x(i) = hi[i]; ++n; }
    }
    return n;
  }
};

inline std::string format_point(const Vector& x) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

/// A function on a box with value, gradient and Hessian evaluators. The
/// public evaluators check the domain; the raw callables do not.
struct BellmanCandidate {
  std::string name;
  int arity = 0;
  Box domain;
  std::function<double(const Vector&)> eval_fn;
  std::function<Vector(const Vector&)> grad_fn;
  std::function<Matrix(const Vector&)> hess_fn;

  void check(const Vector& x) const {
    if (x.size() != arity) {
      throw usage_error(name + ": expected " + std::to_string(arity) + " arguments, got " +
                        std::to_string(x.size()));
    }
    if (!domain.contains(x)) throw domain_error(name + ": point " + format_point(x) + " outside domain");
  }
  double value(const Vector& x) const { check(x); return eval_fn(x); }
  Vector gradient(const Vector& x) const { check(x); return grad_fn(x); }
  SymMatrix hessian(const Vector& x) const { check(x); return SymMatrix(hess_fn(x)); }
};

/// H(x_1, ..., x_{n-1}); every partial is expected to be nonzero on the domain.
struct SurfaceCandidate : BellmanCandidate {};

// ---------------------------------------------------------------------------
// Finite differences.

inline double fd_step(double x) { return 1e-4 * (1.0 + std::abs(x)); }

template <typename F>
Vector fd_gradient(F&& f, const Vector& x) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x(i));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

/// Second derivatives: 3-point diagonal, 4-corner cross for mixed partials
/// (nine samples per 2-D slice).
template <typename F>
Matrix fd_hessian(F&& f, const Vector& x) {
  const Eigen::Index n = x.size();
  Matrix h(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = fd_step(x(i));
    Vector xp = x, xm = x;
    xp(i) += hi;
    xm(i) -= hi;
    h(i, i) = (f(xp) - 2 * f0 + f(xm)) / (hi * hi);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double hj = fd_step(x(j));
      auto at = [&](double si, double sj) {
        Vector y = x;
        y(i) += si * hi;
        y(j) += sj * hj;
        return f(y);
      };
      h(i, j) = h(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * hi * hj);
    }
  }
  return h;
}

struct DerivativeAgreement {
  double gradient_error = 0;  // max |fd - analytic| / max(1, ||analytic||_max)
  double hessian_error = 0;
};

inline DerivativeAgreement derivative_agreement(const BellmanCandidate& b, const Vector& x) {
  auto f = [&](const Vector& y) { return b.eval_fn(y); };
  const Vector g = b.gradient(x);
  const Matrix h = b.hessian(x).matrix();
  const Vector gf = fd_gradient(f, x);
  const Matrix hf = fd_hessian(f, x);
  DerivativeAgreement out;
  out.gradient_error = (gf - g).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff());
  out.hessian_error = (hf - h).cwiseAbs().maxCoeff() / std::max(1.0, h.cwiseAbs().maxCoeff());
  return out;
}

// ---------------------------------------------------------------------------
// Catalog.

/// Borell's noise-stability function: the probability that X < Φ^{-1}(u) and
/// pX + sqrt(1-p^2)Y < Φ^{-1}(v) for independent standard X, Y.
inline BellmanCandidate borell_B(double p) {
  if (!(p > 0 && p < 1)) throw usage_error("borell_B: p must lie in (0,1)");
  const double s = std::sqrt(1 - p * p);
  BellmanCandidate c;
  c.name = "borell(p=" + std::to_string(p) + ")";
  c.arity = 2;
  c.domain = Box::cube(2, 0.0, 1.0);
  c.eval_fn = [p, s](const Vector& x) {
    const double a = normal_quantile(x(0)), b = normal_quantile(x(1));
    auto integrand = [&](double sig) { return normal_cdf((b - p * sig) / s) * normal_pdf(sig); };
    // φ is below the smallest subnormal left of -38.6.
    const double lo = std::min(a, -38.6);
    return integrate(integrand, lo, a, 1e-13, 12).value;
  };
  c.grad_fn = [p, s](const Vector& x) {
    const double a = normal_quantile(x(0)), b = normal_quantile(x(1));
    Vector g(2);
    g << normal_cdf((b - p * a) / s), normal_cdf((a - p * b) / s);
    return g;
  };
  c.hess_fn = [p, s](const Vector& x) {
    const double a = normal_quantile(x(0)), b = normal_quantile(x(1));
    const double f1 = normal_pdf((b - p * a) / s), f2 = normal_pdf((a - p * b) / s);
    Matrix h(2, 2);
    h(0, 0) = -p * f1 / (s * normal_pdf(a));
    h(1, 1) = -p * f2 / (s * normal_pdf(b));
    h(0, 1) = h(1, 0) = f1 / (s * normal_pdf(b));
    return h;
  };
  return c;
}

/// The same function on the closed square, using the boundary law
/// B(0, v) = B(u, 0) = 0, B(1, v) = v, B(u, 1) = u.
inline double borell_orthant(double p, double u, double v) {
  if (u < 0 || u > 1 || v < 0 || v > 1) {
    throw domain_error("borell_orthant: (u, v) outside [0,1]^2");
  }
  if (u == 0 || v == 0) return 0.0;
  if (u == 1) return v;
  if (v == 1) return u;
  Vector x(2);
  x << u, v;
  return borell_B(p).eval_fn(x);
}

/// u^{1/a} v^{1/b} on the positive quadrant.
inline BellmanCandidate power_product(double a, double b) {
  if (!(a >= 1 && b >= 1)) throw usage_error("power_product: need a, b >= 1");
  const double ia = 1 / a, ib = 1 / b;
  BellmanCandidate c;
  c.name = "power(a=" + std::to_string(a) + ",b=" + std::to_string(b) + ")";
  c.arity = 2;
  const double inf = std::numeric_limits<double>::infinity();
  c.domain = Box::cube(2, 0.0, inf);
  c.eval_fn = [ia, ib](const Vector& x) { return std::pow(x(0), ia) * std::pow(x(1), ib); };
  c.grad_fn = [ia, ib](const Vector& x) {
    const double v = std::pow(x(0), ia) * std::pow(x(1), ib);
    Vector g(2);
    g << ia * v / x(0), ib * v / x(1);
    return g;
  };
  c.hess_fn = [ia, ib](const Vector& x) {
    const double v = std::pow(x(0), ia) * std::pow(x(1), ib);
    Matrix h(2, 2);
    h(0, 0) = ia * (ia - 1) * v / (x(0) * x(0));
    h(1, 1) = ib * (ib - 1) * v / (x(1) * x(1));
    h(0, 1) = h(1, 0) = ia * ib * v / (x(0) * x(1));
    return h;
  };
  return c;
}

/// H(x) = Φ(Σ b_j Φ^{-1}(x_j)) for the profile's Φ.
inline SurfaceCandidate phi_composition_H(const std::vector<double>& b, const ProfileFunction& prof) {
  if (b.empty()) throw usage_error("phi_composition_H: empty coefficient list");
  for (double bj : b) {
    if (!(bj > 0)) throw usage_error("phi_composition_H: coefficients must be positive");
  }
  const int k = static_cast<int>(b.size());
  SurfaceCandidate c;
  std::string coeffs;
  for (int j = 0; j < k; ++j) coeffs += (j ? ";" : "") + std::to_string(b[j]);
  c.name = "phicomp(" + prof.name() + ",b=" + coeffs + ")";
  c.arity = k;
  c.domain = Box::cube(k, prof.range_lo(), prof.range_hi());
  auto sum = [b, prof, k](const Vector& x, Vector& y) {
    double s = 0;
    for (int j = 0; j < k; ++j) {
      y(j) = prof.quantile(x(j));
      s += b[j] * y(j);
    }
    return s;
  };
  c.eval_fn = [sum, prof, k](const Vector& x) {
    Vector y(k);
    return prof.cdf(sum(x, y));
  };
  c.grad_fn = [sum, prof, b, k](const Vector& x) {
    Vector y(k);
    const double fs = prof.density(sum(x, y));
    Vector g(k);
    for (int j = 0; j < k; ++j) g(j) = fs * b[j] / prof.density(y(j));
    return g;
  };
  c.hess_fn = [sum, prof, b, k](const Vector& x) {
    Vector y(k);
    const double s = sum(x, y);
    const double fs = prof.density(s), dfs = prof.density_derivative(s);
    Vector fy(k);
    for (int j = 0; j < k; ++j) fy(j) = prof.density(y(j));
    Matrix h(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) h(i, j) = dfs * b[i] * b[j] / (fy(i) * fy(j));
      h(i, i) -= fs * b[i] * prof.density_derivative(y(i)) / (fy(i) * fy(i) * fy(i));
    }
    return h;
  };
  return c;
}

/// B(x_1, ..., x_n) = x_n - H(x_1, ..., x_{n-1}).
inline BellmanCandidate surface_to_bellman(const SurfaceCandidate& h, double last_lo, double last_hi) {
  const int k = h.arity;
  BellmanCandidate c;
  c.name = "x_n-" + h.name;
  c.arity = k + 1;
  c.domain = h.domain;
  c.domain.lo.push_back(last_lo);
  c.domain.hi.push_back(last_hi);
  c.eval_fn = [h, k](const Vector& x) { return x(k) - h.eval_fn(x.head(k)); };
  c.grad_fn = [h, k](const Vector& x) {
    Vector g(k + 1);
    g.head(k) = -h.grad_fn(x.head(k));
    g(k) = 1;
    return g;
  };
  c.hess_fn = [h, k](const Vector& x) {
    Matrix m = Matrix::Zero(k + 1, k + 1);
    m.topLeftCorner(k, k) = -h.hess_fn(x.head(k));
    return m;
  };
  return c;
}

/// u_n - Φ(Σ α_j Φ^{-1}(u_j)).
inline BellmanCandidate ehrhard_B(const std::vector<double>& alphas, const ProfileFunction& prof) {
  BellmanCandidate c = surface_to_bellman(phi_composition_H(alphas, prof), prof.range_lo(),
                                          prof.range_hi());
  std::string coeffs;
  for (std::size_t j = 0; j < alphas.size(); ++j) coeffs += (j ? ";" : "") + std::to_string(alphas[j]);
  c.name = "ehrhard(" + prof.name() + ",alpha=" + coeffs + ")";
  return c;
}

/// M_p(x, y; λ) = (λx^p + (1-λ)y^p)^{1/p}; p = 0 is x^λ y^{1-λ}.
inline SurfaceCandidate p_mean(double p, double lambda) {
  if (!(lambda > 0 && lambda < 1)) throw usage_error("p_mean: lambda must lie in (0,1)");
  SurfaceCandidate c;
  c.name = "pmean(p=" + std::to_string(p) + ",lambda=" + std::to_string(lambda) + ")";
  c.arity = 2;
  c.domain = Box::cube(2, 0.0, std::numeric_limits<double>::infinity());
  const double l = lambda, m = 1 - lambda;
  if (p == 0) {
    c.eval_fn = [l, m](const Vector& x) { return std::pow(x(0), l) * std::pow(x(1), m); };
    c.grad_fn = [l, m](const Vector& x) {
      const double h = std::pow(x(0), l) * std::pow(x(1), m);
      Vector g(2);
      g << l * h / x(0), m * h / x(1);
      return g;
    };
    c.hess_fn = [l, m](const Vector& x) {
      const double h = std::pow(x(0), l) * std::pow(x(1), m);
      Matrix r(2, 2);
      r(0, 0) = l * (l - 1) * h / (x(0) * x(0));
      r(1, 1) = m * (m - 1) * h / (x(1) * x(1));
      r(0, 1) = r(1, 0) = l * m * h / (x(0) * x(1));
      return r;
    };
    return c;
  }
  auto value = [p, l, m](const Vector& x) {
    return std::pow(l * std::pow(x(0), p) + m * std::pow(x(1), p), 1 / p);
  };
  c.eval_fn = value;
  c.grad_fn = [p, l, m, value](const Vector& x) {
    const double h = value(x);
    Vector g(2);
    g << l * std::pow(x(0) / h, p - 1), m * std::pow(x(1) / h, p - 1);
    return g;
  };
  c.hess_fn = [p, l, m, value](const Vector& x) {
    const double h = value(x);
    const double xr = x(0) / h, yr = x(1) / h;
    const double k = l * m * (p - 1) / h;
    Matrix r(2, 2);
    r(0, 0) = k * std::pow(xr, p - 2) * std::pow(yr, p);
    r(1, 1) = k * std::pow(yr, p - 2) * std::pow(xr, p);
    r(0, 1) = r(1, 0) = -k * std::pow(xr, p - 1) * std::pow(yr, p - 1);
    return r;
  };
  return c;
}

/// Σ w_j x_j on R^n.
inline BellmanCandidate linear_B(const std::vector<double>& w) {
  const int n = static_cast<int>(w.size());
  if (n < 1) throw usage_error("linear_B: empty weight list");
  const double inf = std::numeric_limits<double>::infinity();
  BellmanCandidate c;
  c.name = "linear";
  c.arity = n;
  c.domain = Box::cube(n, -inf, inf);
  Vector wv = Eigen::Map<const Vector>(w.data(), n);
  c.eval_fn = [wv](const Vector& x) { return wv.dot(x); };
  c.grad_fn = [wv](const Vector&) { return wv; };
  c.hess_fn = [n](const Vector&) { return Matrix(Matrix::Zero(n, n)); };
  return c;
}

/// -Σ x_j^2 on R^n.
inline BellmanCandidate negsq_B(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  BellmanCandidate c;
  c.name = "negsq";
  c.arity = n;
  c.domain = Box::cube(n, -inf, inf);
  c.eval_fn = [](const Vector& x) { return -x.squaredNorm(); };
  c.grad_fn = [](const Vector& x) { return Vector(-2 * x); };
  c.hess_fn = [n](const Vector&) { return Matrix(-2 * Matrix::Identity(n, n)); };
  return c;
}

// ---------------------------------------------------------------------------
// Name grammar: name[:key=value{,value}{,key=value...}]. A comma-separated
// token without '=' extends the previous key's list, so "b=3,1" is a list.

struct CandidateSpec {
  std::string name;
  std::map<std::string, std::vector<double>> params;
  std::map<std::string, std::string> words;

  double scalar(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end() || it->second.size() != 1) {
      throw usage_error("candidate '" + name + "': missing scalar parameter '" + key + "'");
    }
    return it->second.front();
  }
  double scalar_or(const std::string& key, double dflt) const {
    return params.count(key) ? scalar(key) : dflt;
  }
  std::vector<double> list(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end() || it->second.empty()) {
      throw usage_error("candidate '" + name + "': missing list parameter '" + key + "'");
    }
    return it->second;
  }
  std::string word_or(const std::string& key, const std::string& dflt) const {
    auto it = words.find(key);
    return it == words.end() ? dflt : it->second;
  }
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& tok, const std::string& context) {
  const std::string t = trim(tok);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw usage_error(context + ": '" + t + "' is not a number");
}

inline CandidateSpec parse_candidate_spec(const std::string& text) {
  CandidateSpec spec;
  const auto colon = text.find(':');
  spec.name = trim(text.substr(0, colon));
  if (spec.name.empty()) throw usage_error("candidate spec '" + text + "' has no name");
  if (colon == std::string::npos) return spec;
  std::string last_key;
  std::stringstream ss(text.substr(colon + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      if (last_key.empty() || !spec.params.count(last_key)) {
        throw usage_error("candidate spec '" + text + "': value '" + tok + "' has no key");
      }
      spec.params[last_key].push_back(parse_number(tok, "candidate spec"));
      continue;
    }
    last_key = trim(tok.substr(0, eq));
    const std::string val = trim(tok.substr(eq + 1));
    if (last_key == "profile") {
      spec.words[last_key] = val;
      last_key.clear();
    } else {
      spec.params[last_key] = {parse_number(val, "candidate spec '" + text + "'")};
    }
  }
  return spec;
}

inline ProfileFunction profile_by_name(const std::string& n) {
  if (n == "gaussian" || n == "normal") return ProfileFunction::gaussian();
  if (n == "exp") return ProfileFunction::exponential();
  throw usage_error("unknown profile '" + n + "' (expected gaussian or exp)");
}

namespace detail {

inline void require_keys(const CandidateSpec& s, std::initializer_list<const char*> allowed) {
  auto ok = [&](const std::string& k) {
    for (const char* a : allowed) if (k == a) return true;
    return false;
  };
  for (const auto& [k, v] : s.params) {
    if (!ok(k)) throw usage_error("candidate '" + s.name + "': unknown parameter '" + k + "'");
  }
  for (const auto& [k, v] : s.words) {
    if (!ok(k)) throw usage_error("candidate '" + s.name + "': unknown parameter '" + k + "'");
  }
}

}  // namespace detail

/// Bellman candidates: borell:p, power:a,b, ehrhard:alpha=...,profile,
/// linear:w=..., negsq:n.
inline BellmanCandidate make_candidate(const std::string& text) {
  const CandidateSpec s = parse_candidate_spec(text);
  if (s.name == "borell") {
    detail::require_keys(s, {"p"});
    return borell_B(s.scalar("p"));
  }
  if (s.name == "power") {
    detail::require_keys(s, {"a", "b"});
    return power_product(s.scalar("a"), s.scalar("b"));
  }
  if (s.name == "ehrhard") {
    detail::require_keys(s, {"alpha", "profile"});
    return ehrhard_B(s.list("alpha"), profile_by_name(s.word_or("profile", "gaussian")));
  }
  if (s.name == "linear") {
    detail::require_keys(s, {"w"});
    return linear_B(s.list("w"));
  }
  if (s.name == "negsq") {
    detail::require_keys(s, {"n"});
    return negsq_B(static_cast<int>(s.scalar_or("n", 2)));
  }
  throw usage_error("unknown candidate '" + s.name + "'");
}

/// Surface candidates: phicomp:b=...,profile and pmean:p,lambda.
inline SurfaceCandidate make_surface(const std::string& text) {
  const CandidateSpec s = parse_candidate_spec(text);
  if (s.name == "phicomp") {
    detail::require_keys(s, {"b", "profile"});
    return phi_composition_H(s.list("b"), profile_by_name(s.word_or("profile", "gaussian")));
  }
  if (s.name == "pmean") {
    detail::require_keys(s, {"p", "lambda"});
    return p_mean(s.scalar("p"), s.scalar("lambda"));
  }
  throw usage_error("unknown surface candidate '" + s.name + "'");
}

}  // namespace bellman
