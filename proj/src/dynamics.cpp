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

#include "juntaq/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "juntaq/quadrature.hpp"

namespace juntaq {
namespace {

// Symbol values of every assignment, one row per assignment.
Eigen::MatrixXd assignment_values(const JuntaProblem& problem) {
  const auto n = problem.num_assignments();
  Eigen::MatrixXd z(n, problem.p());
  for (std::int64_t k = 0; k < n; ++k) {
    for (int i = 0; i < problem.p(); ++i) {
      z(k, i) = problem.marginal().values[problem.symbol(k, i)];
    }
  }
  return z;
}

Eigen::VectorXd regression_function(const JuntaProblem& problem) {
  return problem.cond() * problem.label_vector();
}

Eigen::VectorXd kappa_or_ones(const Eigen::VectorXd& kappa, int n) {
  if (kappa.size() == 0) return Eigen::VectorXd::Ones(n);
  if (kappa.size() != n) {
    throw std::invalid_argument("kappa has length " +
                                std::to_string(kappa.size()) + ", expected " +
                                std::to_string(n));
  }
  return kappa;
}

// Gauss rule for a one-dimensional initialization law.
GaussRule<double> law_rule(InitSpec::Law law, double scale, int order) {
  GaussRule<double> r;
  if (law == InitSpec::Law::kZero || scale == 0.0 || order <= 1) {
    r.nodes = Eigen::VectorXd::Zero(1);
    r.weights = Eigen::VectorXd::Ones(1);
    return r;
  }
  r = law == InitSpec::Law::kUniform ? gauss_legendre(order)
                                     : gauss_hermite(order);
  r.nodes *= scale;
  return r;
}

double draw(InitSpec::Law law, double scale, std::mt19937_64& rng) {
  switch (law) {
    case InitSpec::Law::kZero:
      return 0.0;
    case InitSpec::Law::kUniform:
      return std::uniform_real_distribution<double>(-scale, scale)(rng);
    case InitSpec::Law::kGaussian:
      return std::normal_distribution<double>(0.0, scale)(rng);
  }
  return 0.0;
}

RiskEstimate mean_and_se(const Eigen::ArrayXd& v) {
  RiskEstimate r;
  const auto n = v.size();
  r.mean = v.mean();
  if (n > 1) {
    const double var = (v - r.mean).square().sum() / (n - 1);
    r.stderr_ = std::sqrt(var / n);
  }
  return r;
}

// Feature tables of a DF state over the assignments: E_G sigma, E_G sigma'
// and E_G [sigma' G], each assignments x particles.
struct Features {
  Eigen::ArrayXXd phi, dphi, dphi_g;
};

Features df_features(const DFState& st, const Eigen::MatrixXd& z,
                     bool with_derivatives) {
  Eigen::ArrayXXd pre = (z * st.u.transpose()).array();
  pre.rowwise() += st.b.transpose().array();
  Features f;
  const bool has_s = (st.s.array() != 0.0).any();
  if (!has_s) {
    f.phi = st.act.value(pre);
    if (with_derivatives) {
      f.dphi = st.act.derivative(pre);
      f.dphi_g = Eigen::ArrayXXd::Zero(pre.rows(), pre.cols());
    }
    return f;
  }
  const auto gh = gauss_hermite(st.gh_order);
  f.phi = Eigen::ArrayXXd::Zero(pre.rows(), pre.cols());
  if (with_derivatives) {
    f.dphi = f.phi;
    f.dphi_g = f.phi;
  }
  for (Eigen::Index g = 0; g < gh.nodes.size(); ++g) {
    Eigen::ArrayXXd x = pre;
    x.rowwise() += (st.s.array() * gh.nodes[g]).transpose();
    f.phi += gh.weights[g] * st.act.value(x);
    if (with_derivatives) {
      const Eigen::ArrayXXd d = st.act.derivative(x);
      f.dphi += gh.weights[g] * d;
      f.dphi_g += (gh.weights[g] * gh.nodes[g]) * d;
    }
  }
  return f;
}

Eigen::VectorXd predict_from(const DFState& st, const Features& f) {
  const Eigen::VectorXd wa = st.weight.cwiseProduct(st.a);
  return (f.phi.matrix() * wa).array() + st.weight.dot(st.c);
}

void check_finite(const DFState& st, std::int64_t step) {
  if (!st.a.allFinite() || !st.b.allFinite() || !st.c.allFinite() ||
      !st.s.allFinite() || !st.u.allFinite()) {
    throw DivergenceError("mean-field dynamics produced non-finite values",
                          step);
  }
}

double golden_min(const std::function<double(double)>& f, double lo,
                  double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f1, f2, f(lo), f(hi)});
}

}  // namespace

// ---------------------------------------------------------------- Activation

Activation Activation::poly(int degree) {
  if (degree < 1) throw std::invalid_argument("poly degree must be >= 1");
  return Activation(Kind::kPoly, degree);
}

Activation Activation::from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "tanh") return tanh();
    throw std::invalid_argument("unknown activation: " + s);
  }
  if (!j.is_object()) throw std::invalid_argument("activation must be a string or object");
  for (const auto& [k, _] : j.items()) {
    if (k != "kind" && k != "degree") {
      throw std::invalid_argument("unknown activation key: " + k);
    }
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "tanh") return tanh();
  if (kind == "poly") return poly(j.at("degree").get<int>());
  throw std::invalid_argument("unknown activation: " + kind);
}

std::string Activation::name() const {
  return kind_ == Kind::kTanh ? "tanh" : "poly" + std::to_string(degree_);
}

nlohmann::json Activation::to_json() const {
  if (kind_ == Kind::kTanh) return {{"kind", "tanh"}};
  return {{"kind", "poly"}, {"degree", degree_}};
}

double Activation::value(double x) const {
  if (kind_ == Kind::kTanh) return std::tanh(x);
  return std::pow(1.0 + x, degree_);
}

double Activation::derivative(double x) const {
  if (kind_ == Kind::kTanh) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  return degree_ * std::pow(1.0 + x, degree_ - 1);
}

Eigen::ArrayXXd Activation::value(const Eigen::ArrayXXd& x) const {
  if (kind_ == Kind::kTanh) return x.tanh();
  return (1.0 + x).pow(static_cast<double>(degree_));
}

Eigen::ArrayXXd Activation::derivative(const Eigen::ArrayXXd& x) const {
  if (kind_ == Kind::kTanh) return 1.0 - x.tanh().square();
  return degree_ * (1.0 + x).pow(static_cast<double>(degree_ - 1));
}

double InitSpec::w_second_moment_root() const {
  switch (w_law) {
    case Law::kZero:
      return 0.0;
    case Law::kUniform:
      return w_scale / std::sqrt(3.0);
    case Law::kGaussian:
      return w_scale;
  }
  return 0.0;
}

// ------------------------------------------------------------ finite width

Eigen::VectorXd ParticleEnsemble::predict(const Eigen::MatrixXd& x) const {
  Eigen::ArrayXXd pre = (x * w.transpose()).array();
  pre.rowwise() += b.transpose().array();
  const Eigen::MatrixXd s = act.value(pre).matrix();
  return ((s * a).array() + c.sum()) / m();
}

ParticleEnsemble init_ensemble(int m, int d, const InitSpec& init,
                               const Activation& act, std::mt19937_64& rng) {
  if (m < 1 || d < 1) throw std::invalid_argument("need m >= 1 and d >= 1");
  ParticleEnsemble net;
  net.act = act;
  net.a.resize(m);
  net.b.resize(m);
  net.c = Eigen::VectorXd::Constant(m, init.c_bar);
  net.w.resize(m, d);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> ua(-init.a_scale, init.a_scale);
  for (int j = 0; j < m; ++j) {
    net.a[j] = init.a_scale > 0.0 ? ua(rng) : 0.0;
    net.b[j] = draw(init.b_law, init.b_scale, rng);
    for (int i = 0; i < d; ++i) {
      net.w(j, i) = draw(init.w_law, init.w_scale, rng) * inv_sqrt_d;
    }
  }
  return net;
}

EnsembleGradient ensemble_gradient(const ParticleEnsemble& net,
                                   const SampleSet& batch,
                                   const LossSpec& loss) {
  const auto n = batch.x.rows();
  if (n == 0) throw std::invalid_argument("empty batch");
  Eigen::ArrayXXd pre = (batch.x * net.w.transpose()).array();
  pre.rowwise() += net.b.transpose().array();
  const Eigen::MatrixXd s = net.act.value(pre).matrix();
  const Eigen::VectorXd f =
      ((s * net.a).array() + net.c.sum()) / net.m();

  Eigen::VectorXd g(n);
  EnsembleGradient out;
  for (Eigen::Index i = 0; i < n; ++i) {
    g[i] = loss.derivative(f[i], batch.y[i]);
    out.batch_loss += loss.value(f[i], batch.y[i]);
  }
  out.batch_loss /= n;
  const double inv_n = 1.0 / n;
  // tanh' = 1 - tanh^2 saves a second pass over the pre-activations.
  const Eigen::ArrayXXd ds = net.act.kind() == Activation::Kind::kTanh
                                 ? Eigen::ArrayXXd(1.0 - s.array().square())
                                 : net.act.derivative(pre);
  // Rows scaled by the loss derivative of each sample.
  const Eigen::MatrixXd gd = (ds.colwise() * g.array()).matrix();
  out.a = s.transpose() * g * inv_n;
  out.c = Eigen::VectorXd::Constant(net.m(), g.sum() * inv_n);
  out.b = net.a.cwiseProduct(gd.colwise().sum().transpose()) * inv_n;
  out.w.noalias() = gd.transpose() * batch.x;
  out.w = (net.a * inv_n).asDiagonal() * out.w;
  return out;
}

double sgd_step(ParticleEnsemble& net, const SampleSet& batch,
                const TrainConfig& cfg, std::int64_t step) {
  const auto g = ensemble_gradient(net, batch, cfg.loss);
  const Eigen::VectorXd kappa = kappa_or_ones(cfg.kappa, net.d());
  const double ea = cfg.eta * cfg.rate_a, ew = cfg.eta * cfg.rate_w;
  const double eb = cfg.eta * cfg.rate_b, ec = cfg.eta * cfg.rate_c;
  net.a -= ea * (g.a + cfg.lambda_a * net.a);
  net.b -= eb * (g.b + cfg.lambda_b * net.b);
  net.c -= ec * (g.c + cfg.lambda_c * net.c);
  net.w -= ew * ((g.w + cfg.lambda_w * net.w) * kappa.asDiagonal());
  if (!net.a.allFinite() || !net.b.allFinite() || !net.c.allFinite() ||
      !net.w.allFinite()) {
    throw DivergenceError("SGD produced non-finite weights", step);
  }
  return g.batch_loss;
}

namespace {

RiskEstimate risk_of(const Eigen::VectorXd& f, const SampleSet& samples,
                     const LossSpec& loss) {
  Eigen::ArrayXd v(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    v[i] = loss.value(f[i], samples.y[i]);
  }
  return mean_and_se(v);
}

RiskEstimate mse_of(const Eigen::VectorXd& f, const PlantedInstance& instance,
                    const SampleSet& samples) {
  const auto& problem = instance.problem;
  const auto& values = problem.marginal().values;
  std::map<double, int> symbol_of;
  for (int k = 0; k < static_cast<int>(values.size()); ++k) {
    if (!symbol_of.emplace(values[k], k).second) {
      throw std::invalid_argument("test MSE needs distinct symbol values");
    }
  }
  const Eigen::VectorXd h = regression_function(problem);
  Eigen::ArrayXd v(f.size());
  std::vector<int> sym(problem.p());
  for (Eigen::Index r = 0; r < f.size(); ++r) {
    for (int i = 0; i < problem.p(); ++i) {
      sym[i] = symbol_of.at(samples.x(r, instance.s_star[i]));
    }
    const double e = f[r] - h[problem.index_of(sym)];
    v[r] = e * e;
  }
  return mean_and_se(v);
}

}  // namespace

RiskEstimate empirical_risk(const ParticleEnsemble& net,
                            const SampleSet& samples, const LossSpec& loss) {
  return risk_of(net.predict(samples.x), samples, loss);
}

RiskEstimate test_mse(const ParticleEnsemble& net,
                      const PlantedInstance& instance,
                      const SampleSet& samples) {
  return mse_of(net.predict(samples.x), instance, samples);
}

// --------------------------------------------------------------- mean field

DFState init_df(int p, const InitSpec& init, const Activation& act,
                int a_order, int b_order, int gh_order) {
  if (p < 1) throw std::invalid_argument("P must be >= 1");
  const auto ra = law_rule(init.a_scale > 0.0 ? InitSpec::Law::kUniform
                                              : InitSpec::Law::kZero,
                           init.a_scale, a_order);
  const auto rb = law_rule(init.b_law, init.b_scale, b_order);
  const auto n = ra.nodes.size() * rb.nodes.size();
  DFState st;
  st.act = act;
  st.gh_order = gh_order;
  st.weight.resize(n);
  st.a.resize(n);
  st.b.resize(n);
  st.c = Eigen::VectorXd::Constant(n, init.c_bar);
  st.s = Eigen::VectorXd::Constant(n, init.w_second_moment_root());
  st.u = Eigen::MatrixXd::Zero(n, p);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < ra.nodes.size(); ++i) {
    for (Eigen::Index j = 0; j < rb.nodes.size(); ++j, ++k) {
      st.weight[k] = ra.weights[i] * rb.weights[j];
      st.a[k] = ra.nodes[i];
      st.b[k] = rb.nodes[j];
    }
  }
  return st;
}

Eigen::VectorXd df_predict(const DFState& state, const JuntaProblem& problem) {
  const auto z = assignment_values(problem);
  return predict_from(state, df_features(state, z, false));
}

void df_step(DFState& st, const JuntaProblem& problem, const TrainConfig& cfg,
             std::int64_t step) {
  if (st.p() != problem.p()) {
    throw std::invalid_argument("state and problem disagree on P");
  }
  const Eigen::MatrixXd z = assignment_values(problem);
  const Features f = df_features(st, z, true);
  const Eigen::VectorXd pred = predict_from(st, f);
  const auto& labels = problem.labels();
  const auto& cond = problem.cond();
  const auto& mu = problem.assignment_probs();

  // r(z) = mu(z) E[l'(f(z), y) | z].
  Eigen::VectorXd r(z.rows());
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    double acc = 0.0;
    for (int y = 0; y < problem.num_labels(); ++y) {
      if (cond(k, y) != 0.0) {
        acc += cond(k, y) * cfg.loss.derivative(pred[k], labels[y]);
      }
    }
    r[k] = mu[k] * acc;
  }

  const Eigen::VectorXd kappa = kappa_or_ones(cfg.kappa, st.p());
  const Eigen::VectorXd ga = f.phi.matrix().transpose() * r;
  const Eigen::MatrixXd rd = (f.dphi.colwise() * r.array()).matrix();
  const Eigen::MatrixXd gu = st.a.asDiagonal() * (rd.transpose() * z);
  const Eigen::VectorXd gb =
      st.a.cwiseProduct(rd.colwise().sum().transpose());
  const Eigen::VectorXd gs =
      st.a.cwiseProduct(f.dphi_g.matrix().transpose() * r);
  const double gc = r.sum();

  const double ea = cfg.eta * cfg.rate_a, ew = cfg.eta * cfg.rate_w;
  const double eb = cfg.eta * cfg.rate_b, ec = cfg.eta * cfg.rate_c;
  st.a -= ea * (ga + cfg.lambda_a * st.a);
  st.u -= ew * ((gu + cfg.lambda_w * st.u) * kappa.asDiagonal());
  st.s -= ew * (gs + cfg.lambda_w * st.s);
  st.b -= eb * (gb + cfg.lambda_b * st.b);
  st.c -= ec * (Eigen::VectorXd::Constant(st.size(), gc) +
                cfg.lambda_c * st.c);
  check_finite(st, step);
}

double df_risk(const DFState& state, const JuntaProblem& problem,
               const LossSpec& loss) {
  const Eigen::VectorXd f = df_predict(state, problem);
  const auto& cond = problem.cond();
  const auto& mu = problem.assignment_probs();
  double risk = 0.0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    double acc = 0.0;
    for (int y = 0; y < problem.num_labels(); ++y) {
      if (cond(k, y) != 0.0) {
        acc += cond(k, y) * loss.value(f[k], problem.labels()[y]);
      }
    }
    risk += mu[k] * acc;
  }
  return risk;
}

double df_mse(const DFState& state, const JuntaProblem& problem) {
  const Eigen::VectorXd e =
      df_predict(state, problem) - regression_function(problem);
  return problem.assignment_probs().dot(e.cwiseAbs2());
}

double bayes_risk(const JuntaProblem& problem, const LossSpec& loss,
                  int grid) {
  if (grid < 3) throw std::invalid_argument("grid needs >= 3 points");
  double ymax = 0.0;
  for (double y : problem.labels()) ymax = std::max(ymax, std::abs(y));
  const double big_r = 4.0 * ymax + 4.0;
  const auto& cond = problem.cond();
  const auto& mu = problem.assignment_probs();
  double total = 0.0;
  for (std::int64_t k = 0; k < problem.num_assignments(); ++k) {
    if (mu[k] == 0.0) continue;
    const auto phi = [&](double u) {
      double acc = 0.0;
      for (int y = 0; y < problem.num_labels(); ++y) {
        if (cond(k, y) != 0.0) {
          acc += cond(k, y) * loss.value(u, problem.labels()[y]);
        }
      }
      return acc;
    };
    const double h = 2.0 * big_r / (grid - 1);
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid; ++g) {
      const double v = phi(-big_r + g * h);
      if (v < best_v) {
        best_v = v;
        best = g;
      }
    }
    const double lo = -big_r + std::max(best - 1, 0) * h;
    const double hi = -big_r + std::min(best + 1, grid - 1) * h;
    total += mu[k] * std::min(best_v, golden_min(phi, lo, hi));
  }
  return total;
}

double df_excess_risk(const DFState& state, const JuntaProblem& problem,
                      const LossSpec& loss) {
  return df_risk(state, problem, loss) - bayes_risk(problem, loss);
}

KernelReport df_kernel(const DFState& state, const JuntaProblem& problem) {
  if (state.size() < 2) {
    throw std::invalid_argument("kernel needs at least 2 quadrature particles");
  }
  const auto z = assignment_values(problem);
  const Eigen::MatrixXd phi = df_features(state, z, false).phi.matrix();
  KernelReport rep;
  rep.k = phi * state.weight.asDiagonal() * phi.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.k,
                                                    Eigen::EigenvaluesOnly);
  rep.lambda_min = es.eigenvalues()[0];
  rep.lambda_max = es.eigenvalues()[es.eigenvalues().size() - 1];
  return rep;
}

DFTrace run_df(DFState& state, const JuntaProblem& problem,
               const DFRunConfig& cfg) {
  DFTrace trace;
  const auto record = [&](std::int64_t step) {
    trace.steps.push_back(step);
    trace.risk.push_back(df_risk(state, problem, cfg.train.loss));
    trace.mse.push_back(df_mse(state, problem));
    trace.max_abs_u.push_back(state.u.cwiseAbs().colwise().maxCoeff());
  };
  record(0);
  for (std::int64_t k = 1; k <= cfg.steps; ++k) {
    df_step(state, problem, cfg.train, k);
    if (k % cfg.record_every == 0 || k == cfg.steps) record(k);
  }
  return trace;
}

AlignmentReport support_alignment(const DFTrace& trace,
                                  const DetectReport& dlq, double threshold,
                                  double frozen_tol) {
  if (trace.max_abs_u.empty()) throw std::invalid_argument("empty trace");
  const int p = static_cast<int>(trace.max_abs_u.front().size());
  AlignmentReport rep;
  rep.first_active.assign(p, std::nullopt);
  rep.final_max_abs.assign(p, 0.0);
  std::vector<double> peak(p, 0.0);
  for (std::size_t r = 0; r < trace.max_abs_u.size(); ++r) {
    for (int i = 0; i < p; ++i) {
      const double v = trace.max_abs_u[r][i];
      peak[i] = std::max(peak[i], v);
      if (!rep.first_active[i] && v > threshold) {
        rep.first_active[i] = trace.steps[r];
      }
    }
  }
  for (int i = 0; i < p; ++i) rep.final_max_abs[i] = trace.max_abs_u.back()[i];
  if (dlq.system.p() != p) throw std::invalid_argument("P mismatch");
  rep.predicted = greedy_closure(dlq.system, 1, 0);
  rep.contract_ok = true;
  for (int i = 0; i < p; ++i) {
    if (!(rep.predicted >> i & 1u) && peak[i] > frozen_tol) {
      rep.contract_ok = false;
    }
  }
  return rep;
}

SgdTrace run_sgd(const PlantedInstance& instance, const SgdRunConfig& cfg,
                 ParticleEnsemble* final_net) {
  std::mt19937_64 rng(cfg.seed);
  ParticleEnsemble net =
      init_ensemble(cfg.m, instance.d, cfg.init, cfg.act, rng);
  Sampler train(instance, cfg.seed + 1);
  const SampleSet test = Sampler(instance, cfg.seed + 2).draw(cfg.test_samples);
  const double eta = cfg.train.eta;

  SgdTrace trace;
  double loss_acc = 0.0;
  std::int64_t loss_n = 0;
  const auto record = [&](std::int64_t step) {
    trace.steps.push_back(step);
    trace.t.push_back(step * eta);
    trace.train_loss.push_back(loss_n > 0 ? loss_acc / loss_n
                                          : std::nan(""));
    loss_acc = 0.0;
    loss_n = 0;
    const Eigen::VectorXd f = net.predict(test.x);
    const auto risk = risk_of(f, test, cfg.train.loss);
    trace.test_risk.push_back(risk.mean);
    trace.test_risk_se.push_back(risk.stderr_);
    const auto mse = mse_of(f, instance, test);
    trace.test_mse.push_back(mse.mean);
    trace.test_mse_se.push_back(mse.stderr_);
    Eigen::VectorXd u(instance.problem.p());
    for (int i = 0; i < instance.problem.p(); ++i) {
      u[i] = net.w.col(instance.s_star[i]).cwiseAbs().maxCoeff();
    }
    trace.max_abs_u.push_back(u);
  };
  record(0);
  for (std::int64_t k = 1; k <= cfg.steps; ++k) {
    const SampleSet batch = train.draw(cfg.batch);
    loss_acc += sgd_step(net, batch, cfg.train, k);
    ++loss_n;
    if (k % cfg.record_every == 0 || k == cfg.steps) record(k);
  }
  if (final_net) *final_net = std::move(net);
  return trace;
}

LayerwiseResult layerwise_train(const JuntaProblem& problem,
                                const LayerwiseConfig& cfg) {
  const int p = problem.p();
  InitSpec init;
  init.a_scale = 1.0;
  init.c_bar = cfg.c_bar;
  LayerwiseResult res;
  res.state = init_df(p, init, Activation::poly(cfg.degree), cfg.a_order);
  DFState& st = res.state;

  TrainConfig phase1;
  phase1.loss = cfg.loss;
  phase1.eta = cfg.eta;
  phase1.rate_a = phase1.rate_b = phase1.rate_c = 0.0;
  phase1.kappa = kappa_or_ones(cfg.kappa, p);
  const int k1 = cfg.k1 < 0 ? p : cfg.k1;
  const auto record = [&] {
    res.risk.push_back(df_risk(st, problem, cfg.loss));
    res.mse.push_back(df_mse(st, problem));
    res.max_abs_u.push_back(st.u.cwiseAbs().colwise().maxCoeff().transpose());
  };
  record();
  for (int k = 1; k <= k1; ++k) {
    df_step(st, problem, phase1, k);
    record();
  }

  res.max_u_l1 = st.u.cwiseAbs().rowwise().sum().maxCoeff();
  res.small_u = res.max_u_l1 <= 0.5;
  const double big_k = std::max(1.0, std::abs(cfg.c_bar));
  res.step_guard = k1 == 0 || cfg.eta < 1.0 / (4.0 * big_k * big_k *
                                                (1.0 + big_k) * p * k1);
  res.kernel = df_kernel(st, problem);

  res.eta2 = cfg.eta2;
  if (res.eta2 <= 0.0) {
    const Eigen::VectorXd root = problem.assignment_probs().cwiseSqrt();
    const Eigen::MatrixXd weighted =
        root.asDiagonal() * res.kernel.k * root.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(weighted,
                                                      Eigen::EigenvaluesOnly);
    res.eta2 = 0.75 / es.eigenvalues().maxCoeff();
  }
  TrainConfig phase2;
  phase2.loss = cfg.loss;
  phase2.eta = res.eta2;
  phase2.rate_w = phase2.rate_b = phase2.rate_c = 0.0;
  const double bayes = bayes_risk(problem, cfg.loss);
  res.excess.push_back(res.risk.back() - bayes);
  for (std::int64_t k = 1; k <= cfg.k2; ++k) {
    df_step(st, problem, phase2, k1 + k);
    record();
    res.excess.push_back(res.risk.back() - bayes);
    if (!res.hit && res.excess.back() <= cfg.excess_target) res.hit = k;
  }
  return res;
}

}  // namespace juntaq
