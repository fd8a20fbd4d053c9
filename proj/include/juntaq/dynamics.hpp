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
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "juntaq/detect.hpp"
#include "juntaq/junta.hpp"
#include "juntaq/loss.hpp"
#include "juntaq/set_system.hpp"

namespace juntaq {

class Activation {
 public:
  enum class Kind { kTanh, kPoly };

  static Activation tanh() { return Activation(Kind::kTanh, 0); }
  // (1 + x)^L.
  static Activation poly(int degree);
  static Activation from_json(const nlohmann::json& j);

  Kind kind() const { return kind_; }
  int degree() const { return degree_; }
  std::string name() const;
  nlohmann::json to_json() const;

  double value(double x) const;
  double derivative(double x) const;
  Eigen::ArrayXXd value(const Eigen::ArrayXXd& x) const;
  Eigen::ArrayXXd derivative(const Eigen::ArrayXXd& x) const;

 private:
  Activation(Kind kind, int degree) : kind_(kind), degree_(degree) {}
  Kind kind_;
  int degree_;
};

/// Initialization law mu_a x mu_b x mu_w^d x delta_{c_bar}. `w_scale` is
/// the law of sqrt(d) * w, so a neuron starts with ||w|| ~ w_scale.
struct InitSpec {
  enum class Law { kZero, kUniform, kGaussian };
  double a_scale = 1.0;  // a ~ Unif[-a_scale, a_scale]
  Law b_law = Law::kZero;
  double b_scale = 0.0;  // half-width (uniform) or std (gaussian)
  Law w_law = Law::kZero;
  double w_scale = 0.0;
  double c_bar = 0.0;

  // E[W^2]^{1/2} for W ~ mu_w: the starting residual scale s^0.
  double w_second_moment_root() const;
};

/// Step sizes: block k moves at eta * rate_k; first-layer coordinate i
/// additionally at kappa_i (empty kappa means all ones). lambda_k is the
/// ridge term, applied as -eta * rate_k * lambda_k * theta.
struct TrainConfig {
  LossSpec loss{LossSpec::Kind::kSquared};
  double eta = 0.01;
  double rate_a = 1.0;
  double rate_w = 1.0;
  double rate_b = 1.0;
  double rate_c = 1.0;
  double lambda_a = 0.0;
  double lambda_w = 0.0;
  double lambda_b = 0.0;
  double lambda_c = 0.0;
  Eigen::VectorXd kappa;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::int64_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)),
        step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

/// M neurons theta_j = (a_j, b_j, w_j, c_j) with
/// f(x) = (1/M) sum_j [a_j sigma(<w_j, x> + b_j) + c_j].
struct ParticleEnsemble {
  Activation act = Activation::tanh();
  Eigen::VectorXd a, b, c;
  Eigen::MatrixXd w;  // M x d

  int m() const { return static_cast<int>(a.size()); }
  int d() const { return static_cast<int>(w.cols()); }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

ParticleEnsemble init_ensemble(int m, int d, const InitSpec& init,
                               const Activation& act, std::mt19937_64& rng);

/// Per-neuron gradient directions of the batch loss, without the 1/M of
/// the network: the quantities the mean-field update moves along.
struct EnsembleGradient {
  Eigen::VectorXd a, b, c;
  Eigen::MatrixXd w;
  double batch_loss = 0.0;
};

EnsembleGradient ensemble_gradient(const ParticleEnsemble& net,
                                   const SampleSet& batch,
                                   const LossSpec& loss);

// One online step on `batch`, returning the batch loss before the step.
// Throws DivergenceError on non-finite weights.
double sgd_step(ParticleEnsemble& net, const SampleSet& batch,
              const TrainConfig& cfg, std::int64_t step);

struct RiskEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

RiskEstimate empirical_risk(const ParticleEnsemble& net,
                            const SampleSet& samples, const LossSpec& loss);
// Squared error against the regression function h(z) = E[y | z].
RiskEstimate test_mse(const ParticleEnsemble& net,
                      const PlantedInstance& instance,
                      const SampleSet& samples);

/// Discretized mean-field state on the support coordinates: a particle
/// per quadrature node of (a, b), each carrying (a, b, u, c, s) and a
/// probability weight. The network is
/// f(z) = sum_k weight_k [c_k + a_k E_G sigma(<u_k, z> + s_k G + b_k)].
struct DFState {
  Activation act = Activation::tanh();
  Eigen::VectorXd weight, a, b, c, s;
  Eigen::MatrixXd u;  // N x P
  int gh_order = 20;

  int size() const { return static_cast<int>(weight.size()); }
  int p() const { return static_cast<int>(u.cols()); }
};

// u = 0, s = E[W^2]^{1/2}, c = c_bar; a and b on Gauss rules of the given
// orders (a point mass when the law is degenerate).
DFState init_df(int p, const InitSpec& init, const Activation& act,
                int a_order = 64, int b_order = 16, int gh_order = 20);

// f(z) for every assignment of `problem`.
Eigen::VectorXd df_predict(const DFState& state, const JuntaProblem& problem);

// One step of the discretized dynamics, expectations exact over (z, y).
// kappa, when given, has length P.
void df_step(DFState& state, const JuntaProblem& problem,
             const TrainConfig& cfg, std::int64_t step);

double df_risk(const DFState& state, const JuntaProblem& problem,
               const LossSpec& loss);

// Risk of E[y | z] under squared loss of the network: E[(f - h)^2].
double df_mse(const DFState& state, const JuntaProblem& problem);

// inf_f E[l(f(z), y)], minimizing per assignment over [-R, R] with
// R = 4 max|y| + 4 by a grid of `grid` points and golden-section search.
double bayes_risk(const JuntaProblem& problem, const LossSpec& loss,
                  int grid = 2001);

double df_excess_risk(const DFState& state, const JuntaProblem& problem,
                      const LossSpec& loss);

/// Kernel K(z, z') = sum_k weight_k phi_k(z) phi_k(z') with
/// phi_k(z) = E_G sigma(<u_k, z> + s_k G + b_k).
struct KernelReport {
  Eigen::MatrixXd k;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

KernelReport df_kernel(const DFState& state, const JuntaProblem& problem);

/// First step at which max_a |u_i| exceeds the threshold, per support
/// coordinate; nullopt means the coordinate stayed frozen.
struct AlignmentReport {
  std::vector<std::optional<std::int64_t>> first_active;
  std::vector<double> final_max_abs;
  Subset predicted = 0;  // greedy closure of the DLQ system from the empty set
  bool contract_ok = false;
};

struct DFTrace {
  std::vector<std::int64_t> steps;
  std::vector<double> risk;
  std::vector<double> mse;
  std::vector<Eigen::VectorXd> max_abs_u;  // per recorded step, length P
};

struct DFRunConfig {
  TrainConfig train;
  std::int64_t steps = 1000;
  std::int64_t record_every = 1;
};

DFTrace run_df(DFState& state, const JuntaProblem& problem,
               const DFRunConfig& cfg);

// Coordinates outside the predicted set must stay at or below `frozen_tol`.
AlignmentReport support_alignment(const DFTrace& trace,
                                  const DetectReport& dlq,
                                  double threshold = 0.01,
                                  double frozen_tol = 1e-12);

struct SgdTrace {
  std::vector<std::int64_t> steps;
  std::vector<double> t;
  std::vector<double> train_loss;  // mean batch loss since the last record
  std::vector<double> test_risk;
  std::vector<double> test_risk_se;
  std::vector<double> test_mse;
  std::vector<double> test_mse_se;
  std::vector<Eigen::VectorXd> max_abs_u;  // |w| on the support, length P
};

struct SgdRunConfig {
  TrainConfig train;
  int m = 512;
  int batch = 1;
  std::int64_t steps = 1000;
  std::int64_t record_every = 100;
  int test_samples = 10'000;
  InitSpec init;
  Activation act = Activation::tanh();
  std::uint64_t seed = 0;
};

SgdTrace run_sgd(const PlantedInstance& instance, const SgdRunConfig& cfg,
                 ParticleEnsemble* final_net = nullptr);

/// Two-phase training on the support: k1 steps of the first layer only at
/// rates eta * kappa_i from u = 0, then the second layer only at rate
/// eta2 from the resulting features. b = s = 0 throughout and c = c_bar.
/// With eta2 <= 0 the second phase uses 0.75 / lambda_max(K diag(mu)),
/// i.e. 1.5 / L for the squared loss, since phase 2 is a linear model.
struct LayerwiseConfig {
  LossSpec loss{LossSpec::Kind::kSquared};
  int degree = 16;
  int k1 = -1;  // -1: P
  std::int64_t k2 = 500;
  double eta = 0.002;
  double eta2 = 0.0;
  Eigen::VectorXd kappa;  // empty: ones
  double c_bar = 0.0;
  int a_order = 64;
  double excess_target = 0.1;
};

struct LayerwiseResult {
  DFState state;
  KernelReport kernel;
  double max_u_l1 = 0.0;
  bool small_u = false;  // max_a ||u(a)||_1 <= 1/2 after phase 1
  // eta < 1 / (4 K^2 (1 + K) P k1) with K = max(1, |c_bar|): the a-priori
  // condition for small_u. Reported, not enforced.
  bool step_guard = false;
  double eta2 = 0.0;  // phase-2 step actually used
  std::vector<double> excess;  // after each phase-2 step, index 0 = start
  std::optional<std::int64_t> hit;  // first phase-2 step at or below target
  // Every step of both phases, index 0 = initialization.
  std::vector<double> risk;
  std::vector<double> mse;
  std::vector<Eigen::VectorXd> max_abs_u;
};

LayerwiseResult layerwise_train(const JuntaProblem& problem,
                                const LayerwiseConfig& cfg);

}  // namespace juntaq
