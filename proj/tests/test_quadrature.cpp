#include <cmath>

#include <doctest.h>

#include "juntaq/quadrature.hpp"

using namespace juntaq;

TEST_CASE("Gauss-Legendre integrates uniform moments exactly") {
  const auto r = gauss_legendre(8);
  CHECK(r.weights.sum() == doctest::Approx(1.0));
  for (int k = 0; k <= 15; ++k) {
    const double want = k % 2 ? 0.0 : 1.0 / (k + 1);
    CHECK(r.nodes.array().pow(k).matrix().dot(r.weights) ==
          doctest::Approx(want).scale(1.0));
  }
}

TEST_CASE("Gauss-Hermite integrates Gaussian moments exactly") {
  const auto r = gauss_hermite(10);
  double double_factorial = 1.0;
  for (int k = 0; k <= 19; ++k) {
    if (k >= 2 && k % 2 == 0) double_factorial *= k - 1;
    const double want = k % 2 ? 0.0 : double_factorial;
    // Odd moments cancel between terms of size E|G|^k.
    const double size = r.nodes.array().abs().pow(k).matrix().dot(r.weights);
    CHECK(std::abs(r.nodes.array().pow(k).matrix().dot(r.weights) - want) <=
          1e-12 * size);
  }
}

TEST_CASE("rules are symmetric and templated on the scalar") {
  const auto r = gauss_hermite<long double>(7);
  CHECK(r.nodes[3] == 0.0L);
  CHECK(r.nodes[0] == -r.nodes[6]);
  CHECK(r.weights[1] == r.weights[5]);
  CHECK_THROWS_AS(gauss_legendre(0), std::invalid_argument);
}
