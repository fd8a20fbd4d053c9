#include <set>

#include <doctest.h>

#include "juntaq/junta.hpp"

using namespace juntaq;

namespace {
HypercubeJunta staircase() {
  HypercubeJunta h;
  h.p = 2;
  h.fourier[subset_from_coords({1})] = 1.0;
  h.fourier[subset_from_coords({1, 2})] = 1.0;
  return h;
}
}  // namespace

TEST_CASE("hypercube expansion follows the bit convention") {
  const JuntaProblem p = expand_hypercube(staircase());
  REQUIRE(p.num_assignments() == 4);
  // Bit i set means z_{i+1} = -1.
  for (std::int64_t z = 0; z < 4; ++z) {
    const double z1 = (z & 1) ? -1 : 1, z2 = (z & 2) ? -1 : 1;
    const double h = z1 + z1 * z2;
    double e = 0;
    for (int k = 0; k < p.num_labels(); ++k) e += p.cond()(z, k) * p.labels()[k];
    CHECK(e == doctest::Approx(h));
    CHECK(staircase().value(z) == doctest::Approx(h));
  }
  CHECK(p.assignment_probs().sum() == doctest::Approx(1.0));
}

TEST_CASE("problem json round trip") {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 20; ++n) {
    const JuntaProblem p = random_problem(rng, 3, 4, 3);
    const JuntaProblem q = problem_from_json(problem_to_json(p));
    CHECK(q.cond() == p.cond());
    CHECK(q.labels() == p.labels());
    CHECK(q.marginal().values == p.marginal().values);
    CHECK(q.marginal().probs == p.marginal().probs);
  }
}

TEST_CASE("random problems are valid conditional tables") {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 50; ++n) {
    const JuntaProblem p = random_problem(rng, 3, 4, 3);
    CHECK(p.p() >= 1);
    CHECK(p.p() <= 3);
    CHECK(p.num_symbols() <= 3);
    CHECK(p.num_labels() <= 4);
    for (Eigen::Index z = 0; z < p.cond().rows(); ++z) {
      CHECK(p.cond().row(z).sum() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(p.cond().row(z).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("hard instance has the requested marginals") {
  const FiniteMarginal x({-1.0, 0.0, 1.0}, {0.25, 0.5, 0.25});
  const JuntaProblem p =
      hard_instance({-1, 0, 1}, {0.25, 0.5, 0.25}, {1, -1, 1}, x, {0}, 4.0);
  const Eigen::VectorXd ly = p.label_marginal();
  CHECK((ly - Eigen::Vector3d(0.25, 0.5, 0.25)).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::VectorXd lx = p.joint().rowwise().sum();
  CHECK((lx - x.prob_vector()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("plantings are injective and in range") {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 100; ++n) {
    const auto s = random_planting(4, 9, rng);
    REQUIRE(s.size() == 4);
    CHECK(std::set<int>(s.begin(), s.end()).size() == 4);
    for (int c : s) CHECK((c >= 0 && c < 9));
  }
}

TEST_CASE("sampler reproduces the planted label") {
  PlantedInstance inst(expand_hypercube(staircase()), 6, {4, 1}, 3);
  Sampler sampler(inst, 11);
  const SampleSet s = sampler.draw(2000);
  CHECK(s.x.rows() == 2000);
  CHECK(s.x.cols() == 6);
  for (Eigen::Index n = 0; n < s.x.rows(); ++n) {
    const double z1 = s.x(n, 4), z2 = s.x(n, 1);
    CHECK(s.y[n] == z1 + z1 * z2);
  }
  // Off-support coordinates are fair signs.
  CHECK(std::abs(s.x.col(0).mean()) < 0.1);
  Sampler again(inst, 11);
  CHECK(again.draw(2000).x == s.x);
}
