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

#include "juntaq/detect.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace juntaq {
namespace {

// Nonempty subsets of [P], by size and then by mask.
std::vector<Subset> candidate_sets(int p) {
  std::vector<Subset> out;
  for (Subset s = 1; s <= full_subset(p) && s != 0; ++s) out.push_back(s);
  std::stable_sort(out.begin(), out.end(), [](Subset a, Subset b) {
    return subset_size(a) < subset_size(b);
  });
  return out;
}

double weighted_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& w) {
  return std::sqrt((f.array().square() * w.array()).sum());
}

std::map<int, Eigen::VectorXd> basis_tables(const OrthonormalBasis& basis,
                                            const MomentTensor& g,
                                            Eigen::Index col) {
  std::map<int, Eigen::VectorXd> out;
  const auto js = g.multi_index(col);
  const auto members = subset_members(g.u);
  for (std::size_t k = 0; k < members.size(); ++k) {
    out[members[k]] = basis.row(js[k]);
  }
  return out;
}

// Scores every (test function, column) pair and keeps the best; `tests`
// holds unit-norm label functions as columns.
struct Best {
  double value = 0.0;
  Eigen::Index test = -1;
  Eigen::Index col = -1;
};

Best best_pair(const Eigen::MatrixXd& tests, const MomentTensor& g) {
  const Eigen::MatrixXd scores = tests.transpose() * g.g;
  Best best;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      if (std::abs(scores(r, c)) > std::abs(best.value)) {
        best = {scores(r, c), r, c};
      }
    }
  }
  return best;
}

void finish(DetectReport& report, int p, std::vector<Subset> detected) {
  report.system = SetSystem(p, detected);
  report.beta = 0.0;
  bool first = true;
  for (const auto& [_, w] : report.witnesses) {
    const double b = std::abs(w.beta);
    report.beta = first ? b : std::min(report.beta, b);
    first = false;
  }
}

void require_numeric(const JuntaProblem& problem, const char* what) {
  if (!problem.numeric_labels()) {
    throw std::invalid_argument(std::string(what) +
                                " needs numeric labels");
  }
}

}  // namespace

std::string model_name(QueryModel m) {
  switch (m) {
    case QueryModel::kSQ:
      return "SQ";
    case QueryModel::kCSQ:
      return "CSQ";
    case QueryModel::kDLQ:
      return "DLQ";
  }
  return "?";
}

DetectReport detect_sq(const JuntaProblem& problem) {
  return detect_sq(problem, gram_schmidt(problem.marginal()));
}

DetectReport detect_sq(const JuntaProblem& problem,
                       const OrthonormalBasis& basis) {
  DetectReport report;
  report.model = QueryModel::kSQ;
  const Eigen::VectorXd mu_y = problem.label_marginal();
  std::vector<Subset> detected;
  for (Subset u : candidate_sets(problem.p())) {
    const auto g = conditional_moment_tensor(problem, basis, u);
    if (g.g.cols() == 0 || g.g.cwiseAbs().maxCoeff() <= kDetectTol) continue;
    // xi_j(a) = E[prod psi_j | y = a]; pick the column with largest norm.
    Eigen::Index best_col = 0;
    double best_norm = -1.0;
    Eigen::VectorXd best_xi;
    for (Eigen::Index c = 0; c < g.g.cols(); ++c) {
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(mu_y.size());
      for (Eigen::Index a = 0; a < mu_y.size(); ++a) {
        if (mu_y[a] > 0.0) xi[a] = g.g(a, c) / mu_y[a];
      }
      const double n = weighted_norm(xi, mu_y);
      if (n > best_norm) {
        best_norm = n;
        best_col = c;
        best_xi = xi;
      }
    }
    Witness w;
    w.label_table = best_xi / best_norm;
    w.coord_tables = basis_tables(basis, g, best_col);
    w.beta = best_norm;
    report.witnesses[u] = std::move(w);
    detected.push_back(u);
  }
  finish(report, problem.p(), detected);
  return report;
}

DetectReport detect_csq(const JuntaProblem& problem) {
  require_numeric(problem, "CSQ detection");
  DetectReport report;
  report.model = QueryModel::kCSQ;
  const auto basis = gram_schmidt(problem.marginal());
  const Eigen::VectorXd mu_y = problem.label_marginal();
  const Eigen::VectorXd y = problem.label_vector();
  const double norm = weighted_norm(y, mu_y);
  std::vector<Subset> detected;
  if (norm > 0.0) {
    const Eigen::MatrixXd tests = y / norm;
    for (Subset u : candidate_sets(problem.p())) {
      const auto g = conditional_moment_tensor(problem, basis, u);
      const Best best = best_pair(tests, g);
      if (std::abs(best.value) <= kDetectTol) continue;
      Witness w;
      w.label_table = tests.col(0);
      w.coord_tables = basis_tables(basis, g, best.col);
      w.beta = best.value;
      report.witnesses[u] = std::move(w);
      detected.push_back(u);
    }
  }
  finish(report, problem.p(), detected);
  return report;
}

DetectReport detect_dlq(const JuntaProblem& problem, const LossSpec& loss) {
  return detect_dlq(problem, loss, default_u_grid(problem, loss));
}

DetectReport detect_dlq(const JuntaProblem& problem, const LossSpec& loss,
                        const std::vector<double>& u_grid) {
  require_numeric(problem, "DLQ detection");
  if (u_grid.empty()) throw std::invalid_argument("u grid is empty");
  DetectReport report;
  report.model = QueryModel::kDLQ;
  report.loss = loss;
  report.u_grid = u_grid;
  const auto basis = gram_schmidt(problem.marginal());
  const Eigen::VectorXd mu_y = problem.label_marginal();
  const auto& labels = problem.labels();

  // One unit-norm column per grid point whose derivative is not null.
  std::vector<double> us;
  std::vector<Eigen::VectorXd> cols;
  for (double u : u_grid) {
    Eigen::VectorXd t(labels.size());
    for (std::size_t a = 0; a < labels.size(); ++a) {
      t[a] = loss.derivative(u, labels[a]);
    }
    const double n = weighted_norm(t, mu_y);
    if (!(n > 0.0) || !std::isfinite(n)) continue;
    us.push_back(u);
    cols.push_back(t / n);
  }
  Eigen::MatrixXd tests(labels.size(), cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) tests.col(k) = cols[k];

  const auto sq = detect_sq(problem, basis);
  std::vector<Subset> detected;
  for (Subset u : candidate_sets(problem.p())) {
    const auto g = conditional_moment_tensor(problem, basis, u);
    const Best best =
        tests.cols() > 0 ? best_pair(tests, g) : Best{};
    if (std::abs(best.value) <= kDetectTol) {
      if (sq.system.contains(u)) report.grid_flagged.push_back(u);
      continue;
    }
    Witness w;
    w.label_table = tests.col(best.test);
    w.coord_tables = basis_tables(basis, g, best.col);
    w.beta = best.value;
    w.u = us[best.test];
    report.witnesses[u] = std::move(w);
    detected.push_back(u);
  }
  finish(report, problem.p(), detected);
  return report;
}

std::vector<double> default_u_grid(const JuntaProblem& problem,
                                   const LossSpec& loss, std::uint64_t seed) {
  double ymax = 0.0;
  for (double y : problem.labels()) ymax = std::max(ymax, std::abs(y));
  const double r = ymax > 0.0 ? 4.0 * ymax : 1.0;
  std::vector<double> grid;
  constexpr int kUniform = 64;
  for (int k = 0; k < kUniform; ++k) {
    grid.push_back(-r + 2.0 * r * k / (kUniform - 1));
  }
  grid.push_back(0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pick(-r, r);
  for (int k = 0; k < 16; ++k) grid.push_back(pick(rng));

  if (loss.piecewise()) {
    std::set<double> kinks;
    for (double y : problem.labels()) {
      for (double k : loss.kinks(y)) kinks.insert(k);
    }
    // The hinge derivative changes sign pattern at u = 0 as well.
    if (loss.kind() == LossSpec::Kind::kHinge) kinks.insert(0.0);
    if (!kinks.empty()) {
      const std::vector<double> sorted(kinks.begin(), kinks.end());
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        grid.push_back(0.5 * (sorted[k] + sorted[k + 1]));
      }
      const double span = std::max(1.0, sorted.back() - sorted.front());
      grid.push_back(sorted.front() - span);
      grid.push_back(sorted.back() + span);
    }
  }
  return grid;
}

Exponents exponents(const DetectReport& report) {
  Exponents e;
  e.leap = leap(report.system);
  e.cover = cover(report.system);
  if (report.system.support() != 0) {
    e.rel_leap = rel_leap(report.system);
    e.rel_cover = rel_cover(report.system);
  }
  return e;
}

nlohmann::json to_json(const Exponents& e) {
  nlohmann::json j;
  j["leap"] = to_json(e.leap);
  j["cover"] = to_json(e.cover);
  j["rel_leap"] = e.rel_leap ? nlohmann::json(*e.rel_leap) : nlohmann::json();
  j["rel_cover"] =
      e.rel_cover ? nlohmann::json(*e.rel_cover) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const DetectReport& report, bool with_witnesses) {
  nlohmann::json j;
  j["model"] = model_name(report.model);
  if (report.loss) j["loss"] = report.loss->to_json();
  j["sets"] = to_json(report.system);
  j["exponents"] = to_json(exponents(report));
  j["beta"] = report.beta;
  if (report.model == QueryModel::kDLQ) {
    auto flagged = nlohmann::json::array();
    for (Subset s : report.grid_flagged) flagged.push_back(subset_to_coords(s));
    j["grid_flagged"] = flagged;
  }
  if (with_witnesses) {
    auto ws = nlohmann::json::array();
    for (const auto& [u, w] : report.witnesses) {
      nlohmann::json jw;
      jw["set"] = subset_to_coords(u);
      jw["T"] = std::vector<double>(w.label_table.data(),
                                    w.label_table.data() + w.label_table.size());
      nlohmann::json ti;
      for (const auto& [i, t] : w.coord_tables) {
        ti[std::to_string(i + 1)] =
            std::vector<double>(t.data(), t.data() + t.size());
      }
      jw["T_i"] = ti;
      jw["beta"] = w.beta;
      if (w.u) jw["u"] = *w.u;
      ws.push_back(jw);
    }
    j["witnesses"] = ws;
  }
  return j;
}

}  // namespace juntaq
