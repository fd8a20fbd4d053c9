#include <algorithm>
#include <numeric>

#include <doctest.h>

#include "juntaq/dynamics.hpp"
#include "properties.hpp"

using namespace juntaq;
using K = LossSpec::Kind;

namespace {
JuntaProblem cube(int p, const std::vector<std::vector<int>>& sets) {
  HypercubeJunta h;
  h.p = p;
  for (const auto& s : sets) h.fourier[subset_from_coords(s)] = 1.0;
  return expand_hypercube(h);
}

JuntaProblem staircase2() { return cube(2, {{1}, {1, 2}}); }

InitSpec uniform_b() {
  InitSpec init;
  init.b_law = InitSpec::Law::kUniform;
  init.b_scale = 1.0;
  init.w_law = InitSpec::Law::kUniform;
  init.w_scale = 0.5;
  return init;
}

DFState small_state(const JuntaProblem& p) {
  DFState st = init_df(p.p(), uniform_b(), Activation::tanh(), 6, 3, 10);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  st.u = st.u.unaryExpr([&](double) { return u(rng); });
  st.c = st.c.unaryExpr([&](double) { return u(rng); });
  return st;
}

// Smallest eigenvalue by power iteration on (shift I - K).
double lambda_min_by_power(const Eigen::MatrixXd& k) {
  const double shift = k.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::MatrixXd b =
      shift * Eigen::MatrixXd::Identity(k.rows(), k.cols()) - k;
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(k.rows(), 1.0, 2.0);
  double mu = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd w = b * v;
    mu = v.dot(w);
    v = w.normalized();
  }
  return shift - mu;
}
}  // namespace

TEST_CASE("a zero step leaves the mean-field state unchanged") {
  const auto p = staircase2();
  DFState st = small_state(p);
  const DFState before = st;
  TrainConfig cfg;
  cfg.eta = 0.0;
  df_step(st, p, cfg, 1);
  CHECK(st.u == before.u);
  CHECK(st.a == before.a);
  CHECK(st.c == before.c);
  CHECK(st.s == before.s);
}

TEST_CASE("ridge terms shrink parameters linearly") {
  const auto p = staircase2();
  TrainConfig plain;
  plain.eta = 0.1;
  TrainConfig ridge = plain;
  ridge.lambda_a = 0.3;
  ridge.lambda_c = 0.2;
  DFState s1 = small_state(p), s2 = small_state(p);
  const DFState s0 = s1;
  df_step(s1, p, plain, 1);
  df_step(s2, p, ridge, 1);
  CHECK((s2.a - s1.a + 0.1 * 0.3 * s0.a).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s2.c - s1.c + 0.1 * 0.2 * s0.c).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("splitting a particle in two changes nothing") {
  const auto p = staircase2();
  DFState st = small_state(p);
  DFState dup = st;
  const int n = st.size();
  const auto twice = [n](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(2 * n);
    out << v, v;
    return out;
  };
  dup.weight = twice(st.weight) / 2;
  dup.a = twice(st.a);
  dup.b = twice(st.b);
  dup.c = twice(st.c);
  dup.s = twice(st.s);
  dup.u.resize(2 * n, st.p());
  dup.u << st.u, st.u;
  CHECK((df_predict(dup, p) - df_predict(st, p)).norm() < 1e-13);
  TrainConfig cfg;
  cfg.eta = 0.2;
  cfg.loss = LossSpec(K::kSquaredPlusCubic);
  df_step(st, p, cfg, 1);
  df_step(dup, p, cfg, 1);
  CHECK((dup.u.topRows(n) - st.u).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((dup.u.bottomRows(n) - st.u).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(df_risk(dup, p, cfg.loss) == doctest::Approx(df_risk(st, p, cfg.loss)));
}

TEST_CASE("Bayes risk is stable under grid refinement") {
  const auto p = cube(3, {{1}, {1, 2}, {1, 2, 3}});
  for (auto k : {K::kSquared, K::kAbs, K::kSquaredPlusCubic}) {
    const LossSpec loss(k);
    CHECK(std::abs(bayes_risk(p, loss, 2001) - bayes_risk(p, loss, 20001)) <=
          1e-8);
  }
  // Deterministic labels: the Bayes risk is zero.
  CHECK(bayes_risk(p, LossSpec(K::kSquared)) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("the feature kernel is PSD with the right smallest eigenvalue") {
  const auto p = staircase2();
  const DFState st = small_state(p);
  const KernelReport k = df_kernel(st, p);
  CHECK((k.k - k.k.transpose()).norm() < 1e-14);
  CHECK(k.lambda_min >= -1e-12);
  CHECK(k.lambda_min == doctest::Approx(lambda_min_by_power(k.k)).epsilon(1e-6));
}

TEST_CASE("layerwise training") {
  const auto p = staircase2();
  LayerwiseConfig cfg;
  cfg.k1 = 0;
  cfg.k2 = 5;
  const auto frozen = layerwise_train(p, cfg);
  // No first-layer steps: every feature is constant in z.
  CHECK(std::abs(frozen.kernel.lambda_min) < 1e-10);

  cfg.k1 = 2;
  cfg.k2 = 500;
  cfg.c_bar = 0.4;
  cfg.kappa = Eigen::Vector2d(0.7, 1.3);
  const auto res = layerwise_train(p, cfg);
  CHECK(res.state.b.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.state.s.cwiseAbs().maxCoeff() == 0.0);
  CHECK((res.state.c.array() == 0.4).all());
  CHECK(res.kernel.lambda_min > 1e-6);
  CHECK(res.small_u);
  CHECK(res.hit.has_value());
  CHECK(res.risk.size() == static_cast<std::size_t>(1 + 2 + 500));
  CHECK(res.excess.front() >= res.excess.back());
}

TEST_CASE("squared loss keeps the symmetric degree-3 junta frozen") {
  const auto p = cube(4, {{1, 2, 3}, {1, 2, 4}, {1, 3, 4}, {2, 3, 4}});
  InitSpec init;
  init.b_law = InitSpec::Law::kUniform;
  init.b_scale = 1.0;
  DFState st = init_df(4, init, Activation::tanh(), 16, 8, 12);
  DFRunConfig rc;
  rc.train.eta = 0.05;
  rc.steps = 200;
  rc.record_every = 50;
  run_df(st, p, rc);
  CHECK(st.u.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gradients agree with finite differences") {
  const auto r = juntaq::testing::gradient_checks(30, 41);
  INFO(r.first_failure);
  CHECK(r.ok());
}

TEST_CASE("ensemble gradient is equivariant under neuron permutation") {
  std::mt19937_64 rng(3);
  InitSpec init = uniform_b();
  const ParticleEnsemble net = init_ensemble(7, 5, init, Activation::tanh(), rng);
  PlantedInstance inst(staircase2(), 5, {2, 4}, 1);
  Sampler sampler(inst, 9);
  const SampleSet batch = sampler.draw(16);
  std::vector<int> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ParticleEnsemble q = net;
  for (int j = 0; j < 7; ++j) {
    q.a[j] = net.a[perm[j]];
    q.b[j] = net.b[perm[j]];
    q.c[j] = net.c[perm[j]];
    q.w.row(j) = net.w.row(perm[j]);
  }
  const LossSpec loss(K::kSquared);
  const auto g = ensemble_gradient(net, batch, loss);
  const auto h = ensemble_gradient(q, batch, loss);
  CHECK(h.batch_loss == doctest::Approx(g.batch_loss));
  for (int j = 0; j < 7; ++j) {
    CHECK(h.a[j] == doctest::Approx(g.a[perm[j]]));
    CHECK(h.b[j] == doctest::Approx(g.b[perm[j]]));
    CHECK((h.w.row(j) - g.w.row(perm[j])).norm() < 1e-12);
  }
}

TEST_CASE("SGD runs are reproducible and a zero-step run only records init") {
  PlantedInstance inst(staircase2(), 6, {0, 3}, 1);
  SgdRunConfig cfg;
  cfg.m = 16;
  cfg.steps = 0;
  cfg.test_samples = 200;
  cfg.init = uniform_b();
  const SgdTrace empty = run_sgd(inst, cfg);
  CHECK(empty.steps == std::vector<std::int64_t>{0});

  cfg.steps = 50;
  cfg.record_every = 10;
  cfg.train.eta = 0.05;
  const SgdTrace a = run_sgd(inst, cfg), b = run_sgd(inst, cfg);
  CHECK(a.steps.size() == 6);
  CHECK(a.test_risk == b.test_risk);
  CHECK(a.test_risk.front() == empty.test_risk.front());
}

TEST_CASE("divergence is reported, not propagated") {
  PlantedInstance inst(staircase2(), 4, {0, 1}, 1);
  SgdRunConfig cfg;
  cfg.m = 8;
  cfg.steps = 200;
  cfg.test_samples = 50;
  cfg.act = Activation::poly(16);
  cfg.init = uniform_b();
  cfg.train.eta = 50.0;
  CHECK_THROWS_AS(run_sgd(inst, cfg), DivergenceError);
}
