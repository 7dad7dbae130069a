#pragma once

#include <random>

#include "bellman/matrix_kernel.hpp"

namespace testing_support {

using bellman::Matrix;
using bellman::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, int n) {
  return random_matrix(rng, n, 1).col(0);
}

inline Vector random_nonzero(std::mt19937_64& rng, int n, double floor = 0.2) {
  std::uniform_real_distribution<double> mag(floor, 2.0);
  std::bernoulli_distribution sign(0.5);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = (sign(rng) ? 1 : -1) * mag(rng);
  return v;
}

inline Matrix random_psd(std::mt19937_64& rng, int n) {
  const Matrix g = random_matrix(rng, n, n);
  return g * g.transpose();
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_support
