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

#include "juntaq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "juntaq/detect.hpp"
#include "juntaq/dynamics.hpp"
#include "juntaq/fourier.hpp"
#include "juntaq/oracle.hpp"

namespace juntaq {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Runs a parsing step, turning library argument errors into ConfigError.
template <typename F>
auto config_guard(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json coords_1based(const std::vector<int>& v) {
  auto out = json::array();
  for (int c : v) out.push_back(c + 1);
  return out;
}

json to_json_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_summary(const ExperimentConfig& cfg, const json& summary) {
  if (cfg.out.empty()) return;
  write_file(cfg.out / "summary.json", summary.dump(2) + "\n");
}

const JuntaProblem& need_problem(const ExperimentConfig& cfg) {
  if (!cfg.problem) throw ConfigError(cfg.command + " needs a 'problem'");
  return *cfg.problem;
}

std::vector<LossSpec> parse_losses(const json& j) {
  std::vector<LossSpec> out;
  if (!j.contains("losses")) return out;
  for (const auto& l : j.at("losses")) out.push_back(LossSpec::from_json(l));
  return out;
}

DetectReport detect_for(const JuntaProblem& problem, QueryModel model,
                        const std::optional<LossSpec>& loss,
                        const std::optional<std::vector<double>>& grid) {
  switch (model) {
    case QueryModel::kSQ:
      return detect_sq(problem);
    case QueryModel::kCSQ:
      return detect_csq(problem);
    case QueryModel::kDLQ:
      if (!loss) throw ConfigError("DLQ needs a loss");
      return grid ? detect_dlq(problem, *loss, *grid)
                  : detect_dlq(problem, *loss);
  }
  throw std::logic_error("unreachable");
}

QueryModel parse_model(const std::string& name) {
  if (name == "SQ" || name == "sq") return QueryModel::kSQ;
  if (name == "CSQ" || name == "csq") return QueryModel::kCSQ;
  if (name == "DLQ" || name == "dlq") return QueryModel::kDLQ;
  throw ConfigError("unknown query model '" + name + "'");
}

// A number, or {"uniform": [lo, hi]} drawn once from `rng`.
double scalar_or_draw(const json& j, std::mt19937_64& rng) {
  if (j.is_number()) return j.get<double>();
  check_keys(j, {"uniform"}, "random scalar");
  const auto r = j.at("uniform").get<std::vector<double>>();
  if (r.size() != 2 || !(r[0] <= r[1])) {
    throw ConfigError("'uniform' needs [lo, hi] with lo <= hi");
  }
  return std::uniform_real_distribution<double>(r[0], r[1])(rng);
}

InitSpec::Law parse_law(const std::string& s) {
  if (s == "zero") return InitSpec::Law::kZero;
  if (s == "uniform") return InitSpec::Law::kUniform;
  if (s == "gaussian") return InitSpec::Law::kGaussian;
  throw ConfigError("unknown law '" + s + "'");
}

std::string law_name(InitSpec::Law law) {
  switch (law) {
    case InitSpec::Law::kZero:
      return "zero";
    case InitSpec::Law::kUniform:
      return "uniform";
    case InitSpec::Law::kGaussian:
      return "gaussian";
  }
  return "?";
}

InitSpec parse_init(const json& j, std::mt19937_64& rng) {
  InitSpec init;
  init.b_law = InitSpec::Law::kUniform;
  init.b_scale = 1.0;
  if (j.is_null()) return init;
  check_keys(j, {"a_scale", "b_law", "b_scale", "w_law", "w_scale", "c_bar"},
             "init");
  init.a_scale = get_or(j, "a_scale", init.a_scale);
  if (j.contains("b_law")) init.b_law = parse_law(j.at("b_law"));
  init.b_scale = get_or(j, "b_scale", init.b_scale);
  if (j.contains("w_law")) init.w_law = parse_law(j.at("w_law"));
  init.w_scale = get_or(j, "w_scale", init.w_scale);
  if (j.contains("c_bar")) init.c_bar = scalar_or_draw(j.at("c_bar"), rng);
  return init;
}

json init_to_json(const InitSpec& init) {
  return {{"a_scale", init.a_scale},
          {"b_law", law_name(init.b_law)},
          {"b_scale", init.b_scale},
          {"w_law", law_name(init.w_law)},
          {"w_scale", init.w_scale},
          {"c_bar", init.c_bar}};
}

// Block rates and ridge terms shared by sgd and df.
void parse_rates(const json& j, TrainConfig& tc) {
  if (j.contains("rates")) {
    const auto& r = j.at("rates");
    check_keys(r, {"a", "w", "b", "c"}, "rates");
    tc.rate_a = get_or(r, "a", tc.rate_a);
    tc.rate_w = get_or(r, "w", tc.rate_w);
    tc.rate_b = get_or(r, "b", tc.rate_b);
    tc.rate_c = get_or(r, "c", tc.rate_c);
  }
  if (j.contains("lambda")) {
    const auto& r = j.at("lambda");
    check_keys(r, {"a", "w", "b", "c"}, "lambda");
    tc.lambda_a = get_or(r, "a", tc.lambda_a);
    tc.lambda_w = get_or(r, "w", tc.lambda_w);
    tc.lambda_b = get_or(r, "b", tc.lambda_b);
    tc.lambda_c = get_or(r, "c", tc.lambda_c);
  }
}

json rates_to_json(const TrainConfig& tc) {
  return {{"rates", {{"a", tc.rate_a}, {"w", tc.rate_w}, {"b", tc.rate_b},
                     {"c", tc.rate_c}}},
          {"lambda", {{"a", tc.lambda_a}, {"w", tc.lambda_w},
                      {"b", tc.lambda_b}, {"c", tc.lambda_c}}}};
}

// "random" draws kappa_i ~ Unif[1/2, 3/2]; an array is taken as is.
Eigen::VectorXd parse_kappa(const json& j, int n, std::mt19937_64& rng) {
  Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
  if (j.is_null()) return k;
  if (j.is_string()) {
    if (j.get<std::string>() != "random") {
      throw ConfigError("kappa must be \"random\" or an array");
    }
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (int i = 0; i < n; ++i) k[i] = u(rng);
    return k;
  }
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n) {
    throw ConfigError("kappa needs " + std::to_string(n) + " entries");
  }
  for (int i = 0; i < n; ++i) {
    if (v[i] < 0.5 || v[i] > 1.5) throw ConfigError("kappa outside [1/2, 3/2]");
    k[i] = v[i];
  }
  return k;
}

std::string csv_header(int p, bool with_lambda) {
  std::string h = "step,t,train_loss,test_mse";
  for (int i = 1; i <= p; ++i) h += ",max_u_" + std::to_string(i);
  if (with_lambda) h += ",lambda_min";
  return h + "\n";
}

std::optional<std::int64_t> first_above(
    const std::vector<std::int64_t>& steps,
    const std::vector<Eigen::VectorXd>& u, int i, double threshold) {
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k][i] > threshold) return steps[k];
  }
  return std::nullopt;
}

json optional_json(const std::optional<std::int64_t>& v) {
  return v ? json(*v) : json();
}

}  // namespace

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

ExperimentConfig parse_config(const std::string& command, const json& j,
                              const fs::path& base_dir,
                              std::optional<std::uint64_t> seed_override) {
  static const std::vector<std::string> kCommands = {
      "exponents", "detect", "game", "sgd", "df", "layerwise",
      "hard-instance"};
  if (std::find(kCommands.begin(), kCommands.end(), command) ==
      kCommands.end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  std::string block_key = command;
  std::replace(block_key.begin(), block_key.end(), '-', '_');
  if (!j.is_object()) throw ConfigError("config must be an object");
  // One file may carry blocks for several commands.
  for (const auto& [key, _] : j.items()) {
    if (key == "problem" || key == "seed" || key == "description") continue;
    std::string as_command = key;
    std::replace(as_command.begin(), as_command.end(), '_', '-');
    if (std::find(kCommands.begin(), kCommands.end(), as_command) ==
        kCommands.end()) {
      throw ConfigError("unknown top-level key '" + key + "'");
    }
  }
  ExperimentConfig cfg;
  cfg.command = command;
  config_guard("config", [&] {
    if (j.contains("problem")) {
      const auto& p = j.at("problem");
      if (p.is_string()) {
        const fs::path path = base_dir / p.get<std::string>();
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot read problem " + path.string());
        cfg.problem = problem_from_json(json::parse(f));
      } else {
        cfg.problem = problem_from_json(p);
      }
    }
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    cfg.block = j.contains(block_key) ? j.at(block_key) : json::object();
    if (!cfg.block.is_object()) throw ConfigError(block_key + " must be an object");
    return 0;
  });
  if (seed_override) cfg.seed = *seed_override;
  return cfg;
}

ExperimentConfig load_config(const std::string& command, const fs::path& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(command, j, path.parent_path(), seed_override);
}

// ------------------------------------------------------------ exponents

nlohmann::json cmd_exponents(const ExperimentConfig& cfg) {
  const auto& problem = need_problem(cfg);
  const auto losses = config_guard("exponents", [&] {
    check_keys(cfg.block, {"losses"}, "exponents");
    return parse_losses(cfg.block);
  });
  json models = json::array();
  const auto add = [&](const DetectReport& r) {
    json m = to_json(r, false);
    const auto e = m.at("exponents");
    m.erase("exponents");
    m.update(e);
    models.push_back(m);
  };
  add(detect_sq(problem));
  add(detect_csq(problem));
  for (const auto& loss : losses) add(detect_dlq(problem, loss));
  json summary = {{"command", "exponents"}, {"P", problem.p()},
                  {"models", models}};
  write_summary(cfg, summary);
  return summary;
}

// --------------------------------------------------------------- detect

nlohmann::json cmd_detect(const ExperimentConfig& cfg) {
  const auto& problem = need_problem(cfg);
  struct Parsed {
    std::vector<QueryModel> models;
    std::vector<LossSpec> losses;
    std::optional<std::vector<double>> grid;
    bool witnesses = true;
  };
  const auto in = config_guard("detect", [&] {
    check_keys(cfg.block, {"models", "losses", "u_grid", "witnesses"},
               "detect");
    Parsed p;
    for (const auto& m : get_or(cfg.block, "models",
                                std::vector<std::string>{"SQ", "CSQ"})) {
      p.models.push_back(parse_model(m));
    }
    p.losses = parse_losses(cfg.block);
    if (cfg.block.contains("u_grid")) {
      p.grid = cfg.block.at("u_grid").get<std::vector<double>>();
    }
    p.witnesses = get_or(cfg.block, "witnesses", true);
    return p;
  });
  json reports = json::array();
  for (QueryModel m : in.models) {
    if (m == QueryModel::kDLQ) continue;
    reports.push_back(to_json(detect_for(problem, m, {}, {}), in.witnesses));
  }
  for (const auto& loss : in.losses) {
    reports.push_back(to_json(
        detect_for(problem, QueryModel::kDLQ, loss, in.grid), in.witnesses));
  }
  json summary = {{"command", "detect"}, {"P", problem.p()},
                  {"reports", reports}};
  write_summary(cfg, summary);
  return summary;
}

// ----------------------------------------------------------------- game

nlohmann::json cmd_game(const ExperimentConfig& cfg) {
  const auto& problem = need_problem(cfg);
  struct Parsed {
    int d = 0;
    QueryModel model = QueryModel::kCSQ;
    std::optional<LossSpec> loss;
    std::optional<double> tau;
    double tau_over_beta = 0.25;
    std::string oracle = "honest";
    NoiseMode noise = NoiseMode::kAdversarialSign;
    std::string learner = "adaptive";
    LearnerOptions opt;
    std::optional<std::vector<int>> planting;
  };
  const auto in = config_guard("game", [&] {
    check_keys(cfg.block,
               {"d", "model", "loss", "tau", "tau_over_beta", "oracle",
                "noise", "learner", "budget", "max_tuple", "planting"},
               "game");
    Parsed p;
    p.d = cfg.block.at("d").get<int>();
    if (p.d < problem.p()) throw ConfigError("game: d must be >= P");
    p.model = parse_model(get_or<std::string>(cfg.block, "model", "CSQ"));
    if (cfg.block.contains("loss")) {
      p.loss = LossSpec::from_json(cfg.block.at("loss"));
    }
    if (cfg.block.contains("tau")) p.tau = cfg.block.at("tau").get<double>();
    p.tau_over_beta = get_or(cfg.block, "tau_over_beta", p.tau_over_beta);
    p.oracle = get_or(cfg.block, "oracle", p.oracle);
    if (p.oracle != "honest" && p.oracle != "adversarial") {
      throw ConfigError("game: oracle must be honest or adversarial");
    }
    if (cfg.block.contains("noise")) {
      p.noise = noise_mode_from_name(cfg.block.at("noise"));
    }
    p.learner = get_or(cfg.block, "learner", p.learner);
    if (p.learner != "adaptive" && p.learner != "nonadaptive" &&
        p.learner != "grouped" && p.learner != "probe") {
      throw ConfigError("game: unknown learner '" + p.learner + "'");
    }
    p.opt.budget = get_or(cfg.block, "budget", p.opt.budget);
    p.opt.max_tuple = get_or(cfg.block, "max_tuple", p.opt.max_tuple);
    if (cfg.block.contains("planting")) {
      auto v = cfg.block.at("planting").get<std::vector<int>>();
      if (static_cast<int>(v.size()) != problem.p()) {
        throw ConfigError("game: planting needs P coordinates");
      }
      for (int& c : v) {
        if (c < 1 || c > p.d) throw ConfigError("game: planting out of range");
        --c;
      }
      p.planting = v;
    }
    return p;
  });

  const DetectReport report = detect_for(problem, in.model, in.loss, {});
  const double tau = in.tau ? *in.tau : in.tau_over_beta * report.beta;
  std::mt19937_64 rng(cfg.seed);
  const std::vector<int> s_star =
      in.planting ? *in.planting : random_planting(problem.p(), in.d, rng);

  std::unique_ptr<Oracle> oracle;
  std::optional<PlantedInstance> instance;
  AdversarialOracle* adversary = nullptr;
  if (in.oracle == "honest") {
    instance.emplace(problem, in.d, s_star, cfg.seed);
    oracle = std::make_unique<HonestOracle>(*instance, tau, in.noise,
                                            cfg.seed + 1);
  } else {
    auto adv = std::make_unique<AdversarialOracle>(problem, in.d, tau);
    adversary = adv.get();
    oracle = std::move(adv);
  }

  LearnResult res;
  if (in.learner == "adaptive") {
    res = adaptive_learner(in.d, problem.p(), report, *oracle, in.opt);
  } else if (in.learner == "nonadaptive") {
    res = nonadaptive_learner(in.d, problem.p(), report, *oracle, in.opt);
  } else if (in.learner == "grouped") {
    res = grouped_learner(in.d, problem.p(), report, *oracle, in.opt);
  } else {
    res = probe_learner(in.d, problem.p(), report,
                        gram_schmidt(problem.marginal()), *oracle,
                        in.opt.max_tuple, in.opt);
  }

  json summary = {{"command", "game"},
                  {"seed", cfg.seed},
                  {"d", in.d},
                  {"model", model_name(in.model)},
                  {"beta", report.beta},
                  {"tau", tau},
                  {"oracle", in.oracle},
                  {"learner", in.learner},
                  {"queries", res.transcript.queries()},
                  {"status", status_name(res.status)},
                  {"max_tuple", res.max_tuple},
                  {"s_hat", coords_1based(res.s_hat)}};
  if (in.learner == "grouped") summary["grouped_queries"] = res.grouped_queries;
  bool success = false;
  if (adversary) {
    const auto other = adversary->refute(res.s_hat);
    success = !other && static_cast<int>(res.s_hat.size()) == problem.p();
    summary["survivors"] = adversary->survivors();
    summary["refuting_planting"] = other ? coords_1based(*other) : json();
  } else {
    summary["noise"] = noise_mode_name(in.noise);
    summary["s_star"] = coords_1based(s_star);
    summary["sound"] = transcript_sound(res.transcript);
    success = res.s_hat == instance->support_sorted();
  }
  summary["verdict"] =
      success ? "SUCCESS"
              : (res.status == LearnStatus::kBudget ? "FAIL(budget)" : "FAIL");
  if (!cfg.out.empty()) {
    write_file(cfg.out / "transcript.jsonl", res.transcript.jsonl());
  }
  write_summary(cfg, summary);
  return summary;
}

// ------------------------------------------------------------------ sgd

nlohmann::json cmd_sgd(const ExperimentConfig& cfg) {
  const auto& problem = need_problem(cfg);
  std::mt19937_64 rng(cfg.seed);
  struct Parsed {
    SgdRunConfig run;
    std::optional<std::vector<int>> planting;
    double stuck_fraction = 0.05;
    double learn_fraction = 0.5;
    double threshold = 0.01;
    int d = 0;
  };
  const auto in = config_guard("sgd", [&] {
    check_keys(cfg.block,
               {"d", "m", "batch", "steps", "t_max", "record_every", "eta",
                "eta_times_d", "loss", "activation", "rates", "lambda", "init",
                "test_samples", "planting", "stuck_fraction", "learn_fraction",
                "activation_threshold"},
               "sgd");
    Parsed p;
    const auto& b = cfg.block;
    p.d = b.at("d").get<int>();
    auto& r = p.run;
    r.m = get_or(b, "m", r.m);
    r.batch = get_or(b, "batch", r.batch);
    r.train.loss = LossSpec::from_json(b.at("loss"));
    if (b.contains("activation")) {
      r.act = Activation::from_json(b.at("activation"));
    }
    if (b.contains("eta") && b.contains("eta_times_d")) {
      throw ConfigError("sgd: give eta or eta_times_d, not both");
    }
    r.train.eta = b.contains("eta") ? b.at("eta").get<double>()
                                    : get_or(b, "eta_times_d", 0.5) / p.d;
    if (b.contains("steps") && b.contains("t_max")) {
      throw ConfigError("sgd: give steps or t_max, not both");
    }
    r.steps = b.contains("steps")
                  ? b.at("steps").get<std::int64_t>()
                  : std::llround(get_or(b, "t_max", 10.0) / r.train.eta);
    r.record_every =
        get_or<std::int64_t>(b, "record_every", std::max<std::int64_t>(
                                                    1, r.steps / 50));
    if (r.m < 1 || r.batch < 1 || r.steps < 0 || r.record_every < 1) {
      throw ConfigError("sgd: m, batch, record_every must be >= 1");
    }
    parse_rates(b, r.train);
    r.init = parse_init(get_or(b, "init", json()), rng);
    r.test_samples = get_or(b, "test_samples", r.test_samples);
    if (b.contains("planting")) {
      auto v = b.at("planting").get<std::vector<int>>();
      for (int& c : v) --c;
      p.planting = v;
    }
    p.stuck_fraction = get_or(b, "stuck_fraction", p.stuck_fraction);
    p.learn_fraction = get_or(b, "learn_fraction", p.learn_fraction);
    p.threshold = get_or(b, "activation_threshold", p.threshold);
    return p;
  });

  const std::vector<int> s_star =
      in.planting ? *in.planting : random_planting(problem.p(), in.d, rng);
  const PlantedInstance instance = config_guard(
      "sgd", [&] { return PlantedInstance(problem, in.d, s_star, cfg.seed); });
  SgdRunConfig run = in.run;
  run.seed = cfg.seed + 1;
  const SgdTrace tr = run_sgd(instance, run);

  const int p = problem.p();
  if (!cfg.out.empty()) {
    std::ostringstream csv;
    csv << csv_header(p, false);
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      csv << tr.steps[k] << ',' << fmt(tr.t[k]) << ',' << fmt(tr.train_loss[k])
          << ',' << fmt(tr.test_mse[k]);
      for (int i = 0; i < p; ++i) csv << ',' << fmt(tr.max_abs_u[k][i]);
      csv << '\n';
    }
    write_file(cfg.out / "curves.csv", csv.str());
  }
  const double mse0 = tr.test_mse.front();
  const double mse1 = tr.test_mse.back();
  json act = json::array();
  for (int i = 0; i < p; ++i) {
    act.push_back(optional_json(
        first_above(tr.steps, tr.max_abs_u, i, in.threshold)));
  }
  json summary = {
      {"command", "sgd"},
      {"seed", cfg.seed},
      {"d", in.d},
      {"m", run.m},
      {"batch", run.batch},
      {"eta", run.train.eta},
      {"steps", run.steps},
      {"loss", run.train.loss.to_json()},
      {"activation", run.act.to_json()},
      {"init", init_to_json(run.init)},
      {"s_star", coords_1based(s_star)},
      {"initial_test_mse", mse0},
      {"final_test_mse", mse1},
      {"final_test_mse_se", tr.test_mse_se.back()},
      {"initial_test_risk", tr.test_risk.front()},
      {"final_test_risk", tr.test_risk.back()},
      {"activation_steps", act},
      // Bayes MSE against E[y|z] is 0, so the initial MSE is the excess.
      {"stuck", mse0 - mse1 < in.stuck_fraction * mse0},
      {"learned", mse1 < in.learn_fraction * mse0}};
  summary.update(rates_to_json(run.train));
  write_summary(cfg, summary);
  return summary;
}

// ------------------------------------------------------------------- df

nlohmann::json cmd_df(const ExperimentConfig& cfg) {
  const auto& problem = need_problem(cfg);
  const int p = problem.p();
  std::mt19937_64 rng(cfg.seed);
  struct Parsed {
    DFRunConfig run;
    InitSpec init;
    Activation act = Activation::tanh();
    int a_order = 64, b_order = 16, gh_order = 20;
    double threshold = 0.01;
  };
  const auto in = config_guard("df", [&] {
    check_keys(cfg.block,
               {"loss", "eta", "steps", "record_every", "rates", "lambda",
                "kappa", "init", "activation", "a_order", "b_order",
                "gh_order", "activation_threshold"},
               "df");
    const auto& b = cfg.block;
    Parsed q;
    q.run.train.loss = LossSpec::from_json(b.at("loss"));
    q.run.train.eta = get_or(b, "eta", 0.05);
    q.run.steps = get_or<std::int64_t>(b, "steps", 1000);
    q.run.record_every = get_or<std::int64_t>(b, "record_every", 1);
    if (q.run.steps < 0 || q.run.record_every < 1) {
      throw ConfigError("df: steps >= 0 and record_every >= 1 required");
    }
    parse_rates(b, q.run.train);
    q.run.train.kappa = parse_kappa(get_or(b, "kappa", json()), p, rng);
    q.init = parse_init(get_or(b, "init", json()), rng);
    if (b.contains("activation")) q.act = Activation::from_json(b.at("activation"));
    q.a_order = get_or(b, "a_order", q.a_order);
    q.b_order = get_or(b, "b_order", q.b_order);
    q.gh_order = get_or(b, "gh_order", q.gh_order);
    q.threshold = get_or(b, "activation_threshold", q.threshold);
    return q;
  });
  DFState st = config_guard("df", [&] {
    return init_df(p, in.init, in.act, in.a_order, in.b_order, in.gh_order);
  });
  const DFTrace tr = run_df(st, problem, in.run);
  const DetectReport dlq = detect_dlq(problem, in.run.train.loss);
  const AlignmentReport al = support_alignment(tr, dlq, in.threshold);
  const double bayes = bayes_risk(problem, in.run.train.loss);

  if (!cfg.out.empty()) {
    std::ostringstream csv;
    csv << csv_header(p, false);
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      csv << tr.steps[k] << ',' << fmt(tr.steps[k] * in.run.train.eta) << ','
          << fmt(tr.risk[k]) << ',' << fmt(tr.mse[k]);
      for (int i = 0; i < p; ++i) csv << ',' << fmt(tr.max_abs_u[k][i]);
      csv << '\n';
    }
    write_file(cfg.out / "curves.csv", csv.str());
  }
  json act = json::array();
  for (const auto& f : al.first_active) act.push_back(optional_json(f));
  json summary = {{"command", "df"},
                  {"seed", cfg.seed},
                  {"eta", in.run.train.eta},
                  {"steps", in.run.steps},
                  {"loss", in.run.train.loss.to_json()},
                  {"activation", in.act.to_json()},
                  {"init", init_to_json(in.init)},
                  {"kappa", to_json_vec(in.run.train.kappa)},
                  {"initial_risk", tr.risk.front()},
                  {"final_risk", tr.risk.back()},
                  {"bayes_risk", bayes},
                  {"final_excess_risk", tr.risk.back() - bayes},
                  {"initial_test_mse", tr.mse.front()},
                  {"final_test_mse", tr.mse.back()},
                  {"activation_steps", act},
                  {"final_max_abs_u", al.final_max_abs},
                  {"predicted_active", subset_to_coords(al.predicted)},
                  {"freeze_contract_ok", al.contract_ok}};
  summary.update(rates_to_json(in.run.train));
  write_summary(cfg, summary);
  return summary;
}

// ------------------------------------------------------------ layerwise

nlohmann::json cmd_layerwise(const ExperimentConfig& cfg) {
  const auto& problem = need_problem(cfg);
  const int p = problem.p();
  std::mt19937_64 rng(cfg.seed);
  const LayerwiseConfig lc = config_guard("layerwise", [&] {
    check_keys(cfg.block,
               {"loss", "degree", "k1", "k2", "eta", "eta2", "kappa", "c_bar",
                "a_order", "excess_target"},
               "layerwise");
    const auto& b = cfg.block;
    LayerwiseConfig c;
    if (b.contains("loss")) c.loss = LossSpec::from_json(b.at("loss"));
    c.degree = get_or(b, "degree", c.degree);
    c.k1 = get_or(b, "k1", c.k1);
    c.k2 = get_or(b, "k2", c.k2);
    c.eta = get_or(b, "eta", c.eta);
    c.eta2 = get_or(b, "eta2", c.eta2);
    c.kappa = parse_kappa(get_or(b, "kappa", json("random")), p, rng);
    c.c_bar = scalar_or_draw(
        get_or(b, "c_bar", json{{"uniform", {-1.0, 1.0}}}), rng);
    c.a_order = get_or(b, "a_order", c.a_order);
    c.excess_target = get_or(b, "excess_target", c.excess_target);
    if (c.degree < 1 || c.k2 < 0 || c.a_order < 2) {
      throw ConfigError("layerwise: degree >= 1, k2 >= 0, a_order >= 2");
    }
    return c;
  });
  const LayerwiseResult res = layerwise_train(problem, lc);
  const int k1 = lc.k1 < 0 ? p : lc.k1;
  const double eta_phase2 = res.eta2;

  if (!cfg.out.empty()) {
    std::ostringstream csv;
    csv << csv_header(p, true);
    double t = 0.0;
    for (std::size_t k = 0; k < res.risk.size(); ++k) {
      if (k > 0) t += static_cast<int>(k) <= k1 ? lc.eta : eta_phase2;
      csv << k << ',' << fmt(t) << ',' << fmt(res.risk[k]) << ','
          << fmt(res.mse[k]);
      for (int i = 0; i < p; ++i) csv << ',' << fmt(res.max_abs_u[k][i]);
      csv << ',' << (static_cast<int>(k) >= k1 ? fmt(res.kernel.lambda_min) : "")
          << '\n';
    }
    write_file(cfg.out / "curves.csv", csv.str());
  }
  json summary = {{"command", "layerwise"},
                  {"seed", cfg.seed},
                  {"loss", lc.loss.to_json()},
                  {"degree", lc.degree},
                  {"k1", k1},
                  {"k2", lc.k2},
                  {"eta", lc.eta},
                  {"eta2", eta_phase2},
                  {"kappa", to_json_vec(lc.kappa)},
                  {"c_bar", lc.c_bar},
                  {"max_u_l1", res.max_u_l1},
                  {"small_u", res.small_u},
                  {"step_guard", res.step_guard},
                  {"lambda_min", res.kernel.lambda_min},
                  {"lambda_max", res.kernel.lambda_max},
                  {"initial_excess", res.excess.front()},
                  {"final_excess", res.excess.back()},
                  {"excess_target", lc.excess_target},
                  {"hit_step", optional_json(res.hit)}};
  write_summary(cfg, summary);
  return summary;
}

// -------------------------------------------------------- hard-instance

nlohmann::json cmd_hard_instance(const ExperimentConfig& cfg) {
  struct Parsed {
    std::vector<double> labels, label_probs, t;
    FiniteMarginal marginal = sign_marginal();
    std::vector<int> a;
    double lambda = 0.0;
    std::vector<LossSpec> losses;
  };
  const auto in = config_guard("hard_instance", [&] {
    check_keys(cfg.block,
               {"labels", "label_probs", "T", "marginal", "A", "lambda",
                "losses"},
               "hard_instance");
    const auto& b = cfg.block;
    Parsed q;
    q.labels = b.at("labels").get<std::vector<double>>();
    q.label_probs = b.at("label_probs").get<std::vector<double>>();
    q.t = b.at("T").get<std::vector<double>>();
    const auto& m = b.at("marginal");
    check_keys(m, {"values", "probs"}, "marginal");
    q.marginal = FiniteMarginal(m.at("values").get<std::vector<double>>(),
                                m.at("probs").get<std::vector<double>>());
    q.a = b.at("A").get<std::vector<int>>();
    q.lambda = b.at("lambda").get<double>();
    q.losses = parse_losses(b);
    return q;
  });
  const JuntaProblem problem = config_guard("hard_instance", [&] {
    return hard_instance(in.labels, in.label_probs, in.t, in.marginal, in.a,
                         in.lambda);
  });

  const Eigen::VectorXd mu_y = problem.label_marginal();
  double y_err = 0.0;
  for (int k = 0; k < problem.num_labels(); ++k) {
    y_err = std::max(y_err, std::abs(mu_y[k] - in.label_probs[k]));
  }
  // Marginal of z_1 from the joint table.
  const Eigen::VectorXd mu_x = problem.joint().rowwise().sum();
  double x_err = 0.0;
  for (int k = 0; k < in.marginal.size(); ++k) {
    x_err = std::max(x_err, std::abs(mu_x[k] - in.marginal.probs[k]));
  }
  const auto has_one = [](const DetectReport& r) {
    return r.system.contains(subset_from_coords({1}));
  };
  json dlq = json::array();
  for (const auto& loss : in.losses) {
    const auto grid = default_u_grid(problem, loss, cfg.seed);
    // How far T is from orthogonal to the span of the loss derivatives.
    double corr = 0.0;
    for (double u : grid) {
      double acc = 0.0;
      for (int k = 0; k < problem.num_labels(); ++k) {
        acc += mu_y[k] * in.t[k] * loss.derivative(u, problem.labels()[k]);
      }
      corr = std::max(corr, std::abs(acc));
    }
    dlq.push_back({{"loss", loss.to_json()},
                   {"detects_1", has_one(detect_dlq(problem, loss, grid))},
                   {"max_abs_t_derivative_correlation", corr}});
  }
  json summary = {{"command", "hard-instance"},
                  {"sq_detects_1", has_one(detect_sq(problem))},
                  {"csq_detects_1", has_one(detect_csq(problem))},
                  {"dlq", dlq},
                  {"label_marginal_error", y_err},
                  {"x_marginal_error", x_err}};
  if (!cfg.out.empty()) {
    write_file(cfg.out / "problem.json", problem_to_json(problem).dump(2) + "\n");
  }
  write_summary(cfg, summary);
  return summary;
}

nlohmann::json run_command(const ExperimentConfig& cfg) {
  if (!cfg.out.empty()) fs::create_directories(cfg.out);
  if (cfg.command == "exponents") return cmd_exponents(cfg);
  if (cfg.command == "detect") return cmd_detect(cfg);
  if (cfg.command == "game") return cmd_game(cfg);
  if (cfg.command == "sgd") return cmd_sgd(cfg);
  if (cfg.command == "df") return cmd_df(cfg);
  if (cfg.command == "layerwise") return cmd_layerwise(cfg);
  if (cfg.command == "hard-instance") return cmd_hard_instance(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace juntaq
