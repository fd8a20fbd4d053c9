// Copyright 2026 The Authors.
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

#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace juntaq {

/// Nodes and weights of an n-point Gauss rule, normalized so the weights
/// sum to 1 (i.e. an expectation under the underlying law).
template <typename Scalar>
struct GaussRule {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;
};

namespace internal {

// Golub-Welsch: eigen-decomposition of the Jacobi matrix with zero
// diagonal and off-diagonal entries `beta`.
template <typename Scalar>
GaussRule<Scalar> golub_welsch(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& beta, int n) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat jacobi = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = beta[i];
    jacobi(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  GaussRule<Scalar> rule;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  // Symmetric laws: fold tiny asymmetries so that odd moments vanish.
  for (int i = 0; i < n / 2; ++i) {
    const Scalar x = (rule.nodes[n - 1 - i] - rule.nodes[i]) / 2;
    const Scalar w = (rule.weights[n - 1 - i] + rule.weights[i]) / 2;
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0;
  return rule;
}

}  // namespace internal

/// Expectation rule for Unif([-1, 1]).
template <typename Scalar = double>
GaussRule<Scalar> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> beta(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) {
    beta[k - 1] = k / std::sqrt(Scalar(4) * k * k - 1);
  }
  return internal::golub_welsch<Scalar>(beta, n);
}

/// Expectation rule for N(0, 1) (probabilists' Hermite).
template <typename Scalar = double>
GaussRule<Scalar> gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> beta(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) beta[k - 1] = std::sqrt(Scalar(k));
  return internal::golub_welsch<Scalar>(beta, n);
}

}  // namespace juntaq
