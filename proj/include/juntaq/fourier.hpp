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

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "juntaq/junta.hpp"
#include "juntaq/set_system.hpp"

namespace juntaq {

/// Orthonormal basis of L^2(mu_x). Row j of psi tabulates psi_j over all
/// of X (zero on atoms of zero mass); psi_0 is the constant 1.
struct OrthonormalBasis {
  FiniteMarginal marginal;
  Eigen::MatrixXd psi;

  // Number of basis functions, i.e. atoms of positive mass.
  int size() const { return static_cast<int>(psi.rows()); }
  Eigen::VectorXd row(int j) const { return psi.row(j).transpose(); }
};

// Seeds 1, x, x^2, ... and orthogonalizes twice. Throws
// std::domain_error when two atoms share a symbol value.
OrthonormalBasis gram_schmidt(const FiniteMarginal& marginal);
// Same, but every non-constant seed is a random vector.
OrthonormalBasis gram_schmidt_random(const FiniteMarginal& marginal,
                                     std::uint64_t seed);

// <f, g> under the marginal.
double inner(const FiniteMarginal& marginal, const Eigen::VectorXd& f,
             const Eigen::VectorXd& g);

/// Unnormalized in-place Walsh-Hadamard butterfly:
/// v[U] <- sum_z v[z] (-1)^{|U & z|}.
template <typename Derived>
void wht_inplace(Eigen::MatrixBase<Derived>& v) {
  const Eigen::Index n = v.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("transform length must be a power of two");
  }
  for (Eigen::Index h = 1; h < n; h <<= 1) {
    for (Eigen::Index i = 0; i < n; i += h << 1) {
      for (Eigen::Index j = i; j < i + h; ++j) {
        const auto a = v[j];
        const auto b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
}

/// Coefficients c[U] = E_z[t(z) chi_U(z)] for z uniform on the cube.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> wht(
    const Eigen::MatrixBase<Derived>& table) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = table;
  wht_inplace(v);
  v /= static_cast<Scalar>(v.size());
  return v;
}

/// Table t(z) = sum_U c[U] chi_U(z).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> inverse_wht(
    const Eigen::MatrixBase<Derived>& coefs) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> v = coefs;
  wht_inplace(v);
  return v;
}

/// G[a, j] = E[1{y = a} prod_{i in U} psi_{j_i}(z_i)] over multi-indices
/// with every j_i >= 1. Column index is mixed radix in (j_i - 1), lowest
/// coordinate of U least significant.
struct MomentTensor {
  Subset u = 0;
  int order = 0;  // number of non-constant basis functions
  Eigen::MatrixXd g;

  // Basis indices (each >= 1), one per member of U in ascending order.
  std::vector<int> multi_index(Eigen::Index col) const;
};

MomentTensor conditional_moment_tensor(const JuntaProblem& problem,
                                       const OrthonormalBasis& basis,
                                       Subset u);

}  // namespace juntaq
