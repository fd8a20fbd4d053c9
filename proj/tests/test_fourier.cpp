#include <doctest.h>

#include "juntaq/fourier.hpp"
#include "properties.hpp"

using namespace juntaq;

TEST_CASE("WHT agrees with the naive transform") {
  const auto r = juntaq::testing::wht_vs_naive(5, 21);
  INFO(r.first_failure);
  CHECK(r.ok());
}

TEST_CASE("WHT rejects lengths that are not powers of two") {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(6);
  CHECK_THROWS_AS(wht(v), std::invalid_argument);
}

TEST_CASE("WHT works in single precision") {
  Eigen::VectorXf v(4);
  v << 1, 2, 3, 4;
  const Eigen::VectorXf c = wht(v);
  CHECK(c[0] == doctest::Approx(2.5));
  CHECK((inverse_wht(c) - v).norm() < 1e-6f);
}

TEST_CASE("Gram-Schmidt basis is orthonormal") {
  const FiniteMarginal m({-1.0, 0.5, 2.0}, {0.25, 0.5, 0.25});
  for (const auto& b : {gram_schmidt(m), gram_schmidt_random(m, 4)}) {
    REQUIRE(b.size() == 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(inner(m, b.row(i), b.row(j)) ==
              doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0));
      }
    }
    CHECK((b.row(0).array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("moment tensor of a parity") {
  HypercubeJunta h;
  h.p = 2;
  h.fourier[subset_from_coords({1, 2})] = 1.0;
  const JuntaProblem p = expand_hypercube(h);
  const auto basis = gram_schmidt(p.marginal());
  const auto g1 = conditional_moment_tensor(p, basis, subset_from_coords({1}));
  CHECK(g1.g.cwiseAbs().maxCoeff() < 1e-14);
  const auto g12 = conditional_moment_tensor(p, basis, full_subset(2));
  CHECK(g12.g.cwiseAbs().maxCoeff() == doctest::Approx(0.5));
}
