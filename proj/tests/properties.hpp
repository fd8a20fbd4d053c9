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

// Property suites shared by the unit tests and the acceptance binary. Each
// one compares the library against an independent oracle and reports how
// many cases agreed.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "juntaq/cli.hpp"
#include "juntaq/detect.hpp"
#include "juntaq/dynamics.hpp"
#include "juntaq/fourier.hpp"
#include "juntaq/junta.hpp"
#include "juntaq/loss.hpp"
#include "juntaq/set_system.hpp"

namespace juntaq::testing {

struct SuiteResult {
  int passed = 0;
  int total = 0;
  std::string first_failure;

  bool ok() const { return total > 0 && passed == total; }
  void record(bool good, const std::string& what) {
    ++total;
    if (good) {
      ++passed;
    } else if (first_failure.empty()) {
      first_failure = what;
    }
  }
};

// ------------------------------------------------------------ leap/cover

// Minimum over every ordered selection of sets covering [P] of the largest
// number of new coordinates added by one set; -1 for infinity.
inline int brute_leap(int p, const std::vector<Subset>& sets) {
  const Subset full = full_subset(p);
  std::vector<int> order(sets.size());
  std::iota(order.begin(), order.end(), 0);
  int best = -1;
  do {
    Subset seen = 0;
    int worst = 0;
    for (int idx : order) {
      const Subset fresh = sets[idx] & ~seen;
      worst = std::max(worst, std::popcount(fresh));
      seen |= sets[idx];
      if (seen == full) {
        if (best < 0 || worst < best) best = worst;
        break;
      }
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

// Largest over i of the smallest member containing i; -1 for infinity.
inline int brute_cover(int p, const std::vector<Subset>& sets) {
  int worst = 0;
  for (int i = 0; i < p; ++i) {
    int smallest = -1;
    for (Subset s : sets) {
      if (s >> i & 1u) {
        const int c = std::popcount(s);
        if (smallest < 0 || c < smallest) smallest = c;
      }
    }
    if (smallest < 0) return -1;
    worst = std::max(worst, smallest);
  }
  return worst;
}

inline SuiteResult leap_cover_agreement(int systems, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SuiteResult r;
  for (int n = 0; n < systems; ++n) {
    const int p = std::uniform_int_distribution<int>(1, 5)(rng);
    const int count = std::uniform_int_distribution<int>(0, 6)(rng);
    std::uniform_int_distribution<Subset> pick(1, full_subset(p));
    std::vector<Subset> sets;
    for (int k = 0; k < count; ++k) sets.push_back(pick(rng));
    const SetSystem sys(p, sets);
    const auto as_int = [](const Complexity& c) {
      return c.finite() ? c.value() : -1;
    };
    // Duplicates in the input do not change either exponent.
    const int bl = brute_leap(p, sets);
    const int bc = brute_cover(p, sets);
    const bool good = as_int(leap(sys)) == bl && as_int(cover(sys)) == bc;
    r.record(good, "system " + std::to_string(n) + ": leap " +
                       leap(sys).str() + " vs " + std::to_string(bl));
  }
  return r;
}

// -------------------------------------------------------------- gradients

inline double rel_error(const Eigen::VectorXd& num, const Eigen::VectorXd& ana) {
  const double scale = std::max({ana.norm(), num.norm(), 1e-12});
  return (num - ana).norm() / scale;
}

inline const std::vector<LossSpec>& smooth_losses() {
  static const std::vector<LossSpec> kLosses = {
      LossSpec(LossSpec::Kind::kSquared),
      LossSpec(LossSpec::Kind::kSquaredPlusCubic),
      LossSpec(LossSpec::Kind::kSquaredPlusQuarticHalf),
      LossSpec(LossSpec::Kind::kExponential),
      LossSpec(LossSpec::Kind::kLogistic),
      LossSpec(LossSpec::Kind::kAbs),
  };
  return kLosses;
}

// Whether a central difference of width h around u crosses a kink.
inline bool near_kink(const LossSpec& loss, double u, double y, double h) {
  for (double k : loss.kinks(y)) {
    if (std::abs(u - k) < 10 * h) return true;
  }
  return false;
}

// Particle network: analytic gradient / M against central differences of
// the batch loss computed from predict().
inline double sgd_gradient_error(std::mt19937_64& rng, double h = 1e-5) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int m = std::uniform_int_distribution<int>(1, 5)(rng);
  const int d = std::uniform_int_distribution<int>(1, 4)(rng);
  const int n = std::uniform_int_distribution<int>(1, 4)(rng);
  const auto& losses = smooth_losses();
  const LossSpec loss =
      losses[std::uniform_int_distribution<std::size_t>(0, losses.size() - 1)(
          rng)];
  const Activation act = std::bernoulli_distribution(0.5)(rng)
                             ? Activation::tanh()
                             : Activation::poly(3);
  ParticleEnsemble net;
  net.act = act;
  net.a = Eigen::VectorXd::NullaryExpr(m, [&] { return unif(rng); });
  net.b = Eigen::VectorXd::NullaryExpr(m, [&] { return 0.5 * unif(rng); });
  net.c = Eigen::VectorXd::NullaryExpr(m, [&] { return 0.5 * unif(rng); });
  net.w = Eigen::MatrixXd::NullaryExpr(m, d, [&] { return 0.5 * unif(rng); });
  SampleSet batch;
  batch.x = Eigen::MatrixXd::NullaryExpr(n, d, [&] { return unif(rng); });
  batch.y = Eigen::VectorXd::NullaryExpr(n, [&] { return 2 * unif(rng); });

  const auto batch_loss = [&](const ParticleEnsemble& e) {
    const Eigen::VectorXd f = e.predict(batch.x);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += loss.value(f[i], batch.y[i]);
    return s / n;
  };
  {
    const Eigen::VectorXd f = net.predict(batch.x);
    for (int i = 0; i < n; ++i) {
      // Every parameter moves f by at most ~h; stay clear of kinks.
      if (near_kink(loss, f[i], batch.y[i], h * (d + 3))) return -1.0;
    }
  }
  const EnsembleGradient g = ensemble_gradient(net, batch, loss);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (int j = 0; j < m; ++j) {
    params.push_back(&net.a[j]);
    analytic.push_back(g.a[j] / m);
    params.push_back(&net.b[j]);
    analytic.push_back(g.b[j] / m);
    params.push_back(&net.c[j]);
    analytic.push_back(g.c[j] / m);
    for (int i = 0; i < d; ++i) {
      params.push_back(&net.w(j, i));
      analytic.push_back(g.w(j, i) / m);
    }
  }
  Eigen::VectorXd num(params.size()), ana(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = *params[k];
    *params[k] = keep + h;
    const double up = batch_loss(net);
    *params[k] = keep - h;
    const double down = batch_loss(net);
    *params[k] = keep;
    num[k] = (up - down) / (2 * h);
    ana[k] = analytic[k];
  }
  return rel_error(num, ana);
}

// Mean-field recursion: one step at eta = 1 moves theta_k by -g_k, and
// dR/dtheta_k = weight_k g_k for the exact risk.
inline double df_gradient_error(std::mt19937_64& rng, double h = 1e-5) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int p = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<Subset> sets;
  for (Subset s = 1; s <= full_subset(p); ++s) sets.push_back(s);
  const JuntaProblem problem = expand_hypercube(
      random_fourier(p, sets, -1.0, 1.0, rng()));
  std::vector<LossSpec> losses = smooth_losses();
  losses.pop_back();  // abs: the recursion uses a subgradient
  const LossSpec loss =
      losses[std::uniform_int_distribution<std::size_t>(0, losses.size() - 1)(
          rng)];
  InitSpec init;
  init.b_law = InitSpec::Law::kUniform;
  init.b_scale = 1.0;
  init.w_law = InitSpec::Law::kGaussian;
  init.w_scale = 0.5;
  DFState st = init_df(p, init, Activation::tanh(), 3, 2, 12);
  for (int k = 0; k < st.size(); ++k) {
    st.c[k] = 0.3 * unif(rng);
    st.s[k] = 0.2 + 0.5 * std::abs(unif(rng));
    for (int i = 0; i < p; ++i) st.u(k, i) = 0.7 * unif(rng);
  }
  TrainConfig tc;
  tc.loss = loss;
  tc.eta = 1.0;
  DFState stepped = st;
  df_step(stepped, problem, tc, 1);

  std::vector<double*> params;
  std::vector<double> analytic;
  for (int k = 0; k < st.size(); ++k) {
    const double w = st.weight[k];
    params.push_back(&st.a[k]);
    analytic.push_back(w * (st.a[k] - stepped.a[k]));
    params.push_back(&st.b[k]);
    analytic.push_back(w * (st.b[k] - stepped.b[k]));
    params.push_back(&st.c[k]);
    analytic.push_back(w * (st.c[k] - stepped.c[k]));
    params.push_back(&st.s[k]);
    analytic.push_back(w * (st.s[k] - stepped.s[k]));
    for (int i = 0; i < p; ++i) {
      params.push_back(&st.u(k, i));
      analytic.push_back(w * (st.u(k, i) - stepped.u(k, i)));
    }
  }
  Eigen::VectorXd num(params.size()), ana(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = *params[k];
    *params[k] = keep + h;
    const double up = df_risk(st, problem, loss);
    *params[k] = keep - h;
    const double down = df_risk(st, problem, loss);
    *params[k] = keep;
    num[k] = (up - down) / (2 * h);
    ana[k] = analytic[k];
  }
  return rel_error(num, ana);
}

// 100 configurations split between the particle network and the
// mean-field recursion; configurations straddling a kink are redrawn.
inline SuiteResult gradient_checks(int configs, std::uint64_t seed,
                                   double tol = 1e-6) {
  std::mt19937_64 rng(seed);
  SuiteResult r;
  while (r.total < configs) {
    const bool particle = r.total % 2 == 0;
    const double err =
        particle ? sgd_gradient_error(rng) : df_gradient_error(rng);
    if (err < 0.0) continue;
    r.record(err <= tol, std::string(particle ? "particle" : "mean-field") +
                             " config " + std::to_string(r.total) +
                             ": rel err " + std::to_string(err));
  }
  return r;
}

// -------------------------------------------------------------------- WHT

inline SuiteResult wht_vs_naive(int tables_per_p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  SuiteResult r;
  for (int p = 1; p <= 6; ++p) {
    const int n = 1 << p;
    for (int t = 0; t < tables_per_p; ++t) {
      Eigen::VectorXd f = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
      const Eigen::VectorXd fast = wht(f);
      double worst = 0.0;
      for (int s = 0; s < n; ++s) {
        double acc = 0.0;
        for (int z = 0; z < n; ++z) {
          // Bit set means the coordinate is -1.
          acc += f[z] * ((std::popcount(static_cast<unsigned>(s & z)) & 1)
                             ? -1.0
                             : 1.0);
        }
        worst = std::max(worst, std::abs(acc / n - fast[s]));
      }
      const Eigen::VectorXd back = inverse_wht(fast);
      worst = std::max(worst, (back - f).cwiseAbs().maxCoeff());
      r.record(worst <= 1e-12,
               "P=" + std::to_string(p) + " err " + std::to_string(worst));
    }
  }
  return r;
}

// --------------------------------------------------------------- witnesses

// Every witness, re-read from its JSON form, reproduces its beta exactly,
// and its coordinate tables are zero-mean.
inline SuiteResult witness_round_trip(int problems, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SuiteResult r;
  for (int n = 0; n < problems; ++n) {
    const JuntaProblem problem = random_problem(rng, 3, 4, 3);
    const JuntaProblem again = problem_from_json(problem_to_json(problem));
    r.record(again.cond() == problem.cond() &&
                 again.labels() == problem.labels(),
             "problem JSON round trip " + std::to_string(n));
    std::vector<DetectReport> reports = {
        detect_sq(problem), detect_csq(problem),
        detect_dlq(problem, LossSpec(LossSpec::Kind::kAbs)),
        detect_dlq(problem, LossSpec(LossSpec::Kind::kSquared))};
    for (const auto& rep : reports) {
      const auto j = to_json(rep, true);
      for (const auto& jw : j.at("witnesses")) {
        const auto coords = jw.at("set").get<std::vector<int>>();
        const auto t = jw.at("T").get<std::vector<double>>();
        std::map<int, Eigen::VectorXd> tables;
        bool zero_mean = true;
        for (const auto& [key, col] : jw.at("T_i").items()) {
          const auto v = col.get<std::vector<double>>();
          Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(
              v.data(), static_cast<Eigen::Index>(v.size()));
          zero_mean = zero_mean &&
                      std::abs(e.dot(problem.marginal().prob_vector())) <= 1e-12;
          tables[std::stoi(key) - 1] = e;
        }
        const Eigen::VectorXd te = Eigen::Map<const Eigen::VectorXd>(
            t.data(), static_cast<Eigen::Index>(t.size()));
        const double value = joint_expectation(problem, te, tables,
                                               subset_from_coords(coords));
        const double beta = jw.at("beta").get<double>();
        // Label tables are stored at unit norm, so they must be a positive
        // multiple of the label values (CSQ) or the loss derivative (DLQ).
        bool label_ok = true;
        if (rep.model != QueryModel::kSQ) {
          Eigen::VectorXd want(problem.num_labels());
          for (int k = 0; k < problem.num_labels(); ++k) {
            const double y = problem.labels()[k];
            want[k] = rep.model == QueryModel::kCSQ
                          ? y
                          : rep.loss->derivative(jw.at("u").get<double>(), y);
          }
          const double scale = te.dot(want) / want.squaredNorm();
          label_ok = scale > 0.0 && (te - scale * want).norm() <= 1e-12;
        }
        r.record(std::abs(value - beta) <= 1e-12 && std::abs(beta) > kDetectTol &&
                     zero_mean && label_ok,
                 model_name(rep.model) + " witness on problem " +
                     std::to_string(n));
      }
    }
  }
  return r;
}

// ---------------------------------------------------------- CLI determinism

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Runs each command twice into fresh directories and compares every file.
inline SuiteResult cli_determinism(const std::filesystem::path& config_dir,
                                   const std::filesystem::path& scratch) {
  namespace fs = std::filesystem;
  struct Case {
    std::string command, file;
    nlohmann::json patch;
  };
  const std::vector<Case> cases = {
      {"exponents", "y1.json", {}},
      {"detect", "y2.json", {}},
      {"game", "y1.json", {}},
      {"game", "game_y2_adversary.json", {}},
      {"sgd", "fig1b.json", {{"steps", 200}, {"m", 64}, {"record_every", 20},
                             {"test_samples", 500}}},
      {"df", "y2.json", {{"steps", 40}, {"record_every", 5}}},
      {"layerwise", "layerwise.json", {{"k2", 40}}},
      {"hard-instance", "hard_instance.json", {}},
  };
  SuiteResult r;
  int idx = 0;
  for (const auto& c : cases) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      auto cfg = load_config(c.command, config_dir / c.file, std::nullopt);
      if (!c.patch.is_null()) cfg.block.update(c.patch);
      cfg.out = scratch / (std::to_string(idx) + "_" + std::to_string(rep));
      fs::remove_all(cfg.out);
      run_command(cfg);
      dirs.push_back(cfg.out);
    }
    bool same = true;
    int files = 0;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const auto other = dirs[1] / entry.path().filename();
      same = same && fs::exists(other) &&
             slurp(entry.path()) == slurp(other);
      ++files;
    }
    r.record(same && files > 0, c.command + " on " + c.file);
    ++idx;
  }
  return r;
}

}  // namespace juntaq::testing
