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

#include "juntaq/fourier.hpp"

#include <cmath>
#include <random>

namespace juntaq {
namespace {

constexpr double kDegenerate = 1e-10;

OrthonormalBasis orthonormalize(const FiniteMarginal& marginal,
                                std::vector<Eigen::VectorXd> seeds) {
  const int nx = marginal.size();
  std::vector<int> live;
  for (int x = 0; x < nx; ++x) {
    if (marginal.probs[x] > 0.0) live.push_back(x);
  }
  for (std::size_t a = 0; a < live.size(); ++a) {
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      if (marginal.values[live[a]] == marginal.values[live[b]]) {
        throw std::domain_error("marginal has two atoms with the same value");
      }
    }
  }
  const int n = static_cast<int>(live.size());
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n, nx);
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(nx);
  for (int x : live) mask[x] = 1.0;
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd f = seeds[j].cwiseProduct(mask);
    for (int pass = 0; pass < 2; ++pass) {
      for (int k = 0; k < j; ++k) {
        const Eigen::VectorXd prev = psi.row(k).transpose();
        f -= inner(marginal, f, prev) * prev;
      }
    }
    const double norm = std::sqrt(inner(marginal, f, f));
    if (norm < kDegenerate) {
      throw std::domain_error("Gram-Schmidt seed is numerically dependent");
    }
    psi.row(j) = (f / norm).transpose();
  }
  return OrthonormalBasis{marginal, std::move(psi)};
}

}  // namespace

double inner(const FiniteMarginal& marginal, const Eigen::VectorXd& f,
             const Eigen::VectorXd& g) {
  return (f.array() * g.array() * marginal.prob_vector().array()).sum();
}

OrthonormalBasis gram_schmidt(const FiniteMarginal& marginal) {
  const int nx = marginal.size();
  std::vector<Eigen::VectorXd> seeds;
  for (int k = 0; k < nx; ++k) {
    Eigen::VectorXd f(nx);
    for (int x = 0; x < nx; ++x) f[x] = std::pow(marginal.values[x], k);
    seeds.push_back(f);
  }
  return orthonormalize(marginal, std::move(seeds));
}

OrthonormalBasis gram_schmidt_random(const FiniteMarginal& marginal,
                                     std::uint64_t seed) {
  const int nx = marginal.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<Eigen::VectorXd> seeds{Eigen::VectorXd::Ones(nx)};
  for (int k = 1; k < nx; ++k) {
    Eigen::VectorXd f(nx);
    for (int x = 0; x < nx; ++x) f[x] = gauss(rng);
    seeds.push_back(f);
  }
  return orthonormalize(marginal, std::move(seeds));
}

std::vector<int> MomentTensor::multi_index(Eigen::Index col) const {
  std::vector<int> out;
  for (int k = 0; k < subset_size(u); ++k) {
    out.push_back(static_cast<int>(col % order) + 1);
    col /= order;
  }
  return out;
}

MomentTensor conditional_moment_tensor(const JuntaProblem& problem,
                                       const OrthonormalBasis& basis,
                                       Subset u) {
  if (u == 0) throw std::invalid_argument("moment tensor needs nonempty U");
  if (!is_subset_of(u, full_subset(problem.p()))) {
    throw std::invalid_argument("U is not a subset of [P]");
  }
  const auto members = subset_members(u);
  const int m = static_cast<int>(members.size());
  const int nx = problem.num_symbols();
  const int order = basis.size() - 1;

  // Marginalize the joint table onto the coordinates of U.
  std::int64_t nu = 1;
  for (int k = 0; k < m; ++k) nu *= nx;
  const Eigen::MatrixXd joint = problem.joint();
  Eigen::MatrixXd joint_u = Eigen::MatrixXd::Zero(nu, problem.num_labels());
  for (std::int64_t z = 0; z < problem.num_assignments(); ++z) {
    std::int64_t zu = 0;
    std::int64_t scale = 1;
    std::int64_t rest = z;
    int pos = 0;
    for (int i : members) {
      for (; pos < i; ++pos) rest /= nx;
      zu += scale * (rest % nx);
      scale *= nx;
    }
    joint_u.row(zu) += joint.row(z);
  }

  std::int64_t ncols = 1;
  for (int k = 0; k < m; ++k) ncols *= order;
  Eigen::MatrixXd kron(nu, ncols);
  for (std::int64_t zu = 0; zu < nu; ++zu) {
    for (std::int64_t col = 0; col < ncols; ++col) {
      double prod = 1.0;
      std::int64_t zr = zu;
      std::int64_t cr = col;
      for (int k = 0; k < m; ++k) {
        prod *= basis.psi(cr % order + 1, zr % nx);
        zr /= nx;
        cr /= order;
      }
      kron(zu, col) = prod;
    }
  }
  MomentTensor out;
  out.u = u;
  out.order = order;
  out.g = joint_u.transpose() * kron;
  return out;
}

}  // namespace juntaq
