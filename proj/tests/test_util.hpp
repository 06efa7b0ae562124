// Copyright 2026 The gradnas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GRADNAS_TESTS_TEST_UTIL_HPP_
#define GRADNAS_TESTS_TEST_UTIL_HPP_

// Test-side oracles. Kept independent of the library's own grad_check so the
// two can disagree.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "gradnas/tensor.hpp"

namespace gradnas::testing {

// Central differences over every coordinate.
inline Matrix numeric_grad(const std::function<double(const Matrix&)>& f,
                           const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

// ||a - n||_inf / max(||n||_inf, tiny)
inline double rel_err(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed,
                            double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  }
  return m;
}

// Sum of upstream * y: a scalar whose gradient w.r.t. y is `upstream`.
inline double weighted_sum(const Matrix& y, const Matrix& upstream) {
  return (y.array() * upstream.array()).sum();
}

}  // namespace gradnas::testing

#endif  // GRADNAS_TESTS_TEST_UTIL_HPP_
