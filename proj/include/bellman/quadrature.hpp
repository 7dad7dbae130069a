#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "bellman/errors.hpp"
#include "bellman/parallel.hpp"

namespace bellman {

/// Nodes and weights for integration against the standard Gaussian
/// measure dγ1 (weights sum to one).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

// Golub-Welsch: eigenvalues of the Jacobi matrix are the nodes, squared
// first eigenvector components times mu0 are the weights.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, int m) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) jac(i, i + 1) = jac(i + 1, i) = offdiag(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  QuadratureRule r;
  r.nodes.resize(m);
  r.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    r.nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    r.weights[i] = v * v;
  }
  return r;
}

inline QuadratureRule build_hermite(int m) {
  Eigen::VectorXd off(std::max(m - 1, 0));
  for (int i = 0; i + 1 < m; ++i) off(i) = std::sqrt(static_cast<double>(i + 1));
  QuadratureRule r = golub_welsch(off, m);
  // Symmetrize: the rule is exactly symmetric in exact arithmetic.
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (m % 2 == 1) r.nodes[m / 2] = 0.0;
  // Eigenvector weights are only absolutely accurate; recompute them from
  // the Christoffel sums 1 / Σ_k p_k(x)² of the orthonormal polynomials,
  // after a Newton polish of each node, so tail weights are relatively
  // accurate.
  for (int i = 0; i < m; ++i) {
    double x = r.nodes[i];
    double log_s = 0;
    for (int pass = 0; pass < 3; ++pass) {
      double p0 = 1, p1 = x, sum = 1 + (m > 1 ? x * x : 0), log_scale = 0;
      if (m == 1) p1 = 0;
      for (int k = 1; k + 1 <= m - 1; ++k) {
        const double p2 = (x * p1 - std::sqrt(static_cast<double>(k)) * p0) / std::sqrt(k + 1.0);
        p0 = p1;
        p1 = p2;
        sum += p1 * p1;
        if (std::abs(p1) > 1e100) {
          p0 *= 1e-100;
          p1 *= 1e-100;
          sum *= 1e-200;
          log_scale += 200 * std::log(10.0);
        }
      }
      log_s = std::log(sum) + log_scale;
      if (m == 1) break;
      // p_m(x) and p_m'(x) = sqrt(m) p_{m-1}(x).
      const double pm = (x * p1 - std::sqrt(m - 1.0) * p0) / std::sqrt(static_cast<double>(m));
      const double step = pm / (std::sqrt(static_cast<double>(m)) * p1);
      if (pass < 2 && std::isfinite(step) && std::abs(step) < 1e-6 * (1 + std::abs(x))) x -= step;
    }
    r.nodes[i] = x;
    r.weights[i] = std::exp(-log_s);
  }
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  double s = 0;
  for (double w : r.weights) s += w;
  for (double& w : r.weights) w /= s;
  return r;
}

}  // namespace detail

/// Probabilists' Gauss-Hermite rule of order m, cached per order.
inline const QuadratureRule& gauss_hermite(int m) {
  if (m < 1 || m > 1024) throw usage_error("gauss_hermite: order must be in [1, 1024]");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[m];
  if (!slot) slot = std::make_unique<QuadratureRule>(detail::build_hermite(m));
  return *slot;
}

/// Gauss-Legendre rule on [lo, hi] with weights summing to hi - lo.
inline QuadratureRule gauss_legendre(int m, double lo = -1.0, double hi = 1.0) {
  if (m < 1) throw usage_error("gauss_legendre: order must be positive");
  Eigen::VectorXd off(std::max(m - 1, 0));
  for (int i = 0; i + 1 < m; ++i) {
    const double n = i + 1;
    off(i) = n / std::sqrt(4 * n * n - 1);
  }
  QuadratureRule r = detail::golub_welsch(off, m);
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (int i = 0; i < m; ++i) {
    r.nodes[i] = mid + half * r.nodes[i];
    r.weights[i] *= 2 * half;
  }
  return r;
}

/// ∫ f dγ1.
template <typename F>
double expectation(F&& f, const QuadratureRule& rule) {
  double s = 0;
  for (int i = 0; i < rule.order(); ++i) s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

/// ∫ f dγ_d over the tensor product rule; f takes an Eigen vector.
template <typename F>
double tensor_expectation(F&& f, int dim, const QuadratureRule& rule) {
  if (dim < 1 || dim > 4) throw usage_error("tensor_expectation: dimension must be 1..4");
  const int m = rule.order();
  std::vector<int> idx(dim, 0);
  Eigen::VectorXd y(dim);
  double s = 0;
  while (true) {
    double w = 1;
    for (int d = 0; d < dim; ++d) {
      y(d) = rule.nodes[idx[d]];
      w *= rule.weights[idx[d]];
    }
    s += w * f(y);
    int d = dim - 1;
    while (d >= 0 && ++idx[d] == m) idx[d--] = 0;
    if (d < 0) break;
  }
  return s;
}

/// Composite Gauss-Legendre on [lo, hi]: `panels` equal panels of order m.
inline QuadratureRule composite_legendre(double lo, double hi, int panels, int m) {
  if (panels < 1 || !(lo < hi)) throw usage_error("composite_legendre: need panels >= 1 and lo < hi");
  const QuadratureRule base = gauss_legendre(m, 0.0, 1.0);
  QuadratureRule r;
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    for (int i = 0; i < m; ++i) {
      r.nodes.push_back(lo + h * (p + base.nodes[i]));
      r.weights.push_back(h * base.weights[i]);
    }
  }
  return r;
}

/// Tensor sum Σ w_i f(y_i) parallel over the outermost index; the partial
/// sums are folded in index order so the result does not depend on the
/// worker count. Weights are used as given (γ or Lebesgue).
template <typename F>
double parallel_tensor_sum(F&& f, int dim, const QuadratureRule& rule) {
  if (dim < 1 || dim > 4) throw usage_error("parallel_tensor_sum: dimension must be 1..4");
  const int m = rule.order();
  std::vector<double> partial(m, 0.0);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t outer) {
    std::vector<int> idx(dim, 0);
    idx[0] = static_cast<int>(outer);
    Eigen::VectorXd y(dim);
    double s = 0;
    while (true) {
      double w = 1;
      for (int d = 0; d < dim; ++d) {
        y(d) = rule.nodes[idx[d]];
        w *= rule.weights[idx[d]];
      }
      s += w * f(y);
      int d = dim - 1;
      while (d >= 1 && ++idx[d] == m) idx[d--] = 0;
      if (d < 1) break;
    }
    partial[outer] = s;
  });
  double s = 0;
  for (double v : partial) s += v;
  return s;
}

struct IntegralResult {
  double value = 0;
  double error = 0;
};

/// Adaptive 15-point Gauss-Kronrod on [a, b]; infinite limits allowed.
template <typename F>
IntegralResult integrate(F&& f, double a, double b, double tol = 1e-13, int max_depth = 15) {
  IntegralResult r;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, static_cast<unsigned>(max_depth), tol, &r.error);
  return r;
}

}  // namespace bellman
