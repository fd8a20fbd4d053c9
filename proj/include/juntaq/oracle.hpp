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
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "juntaq/detect.hpp"
#include "juntaq/junta.hpp"

namespace juntaq {

/// scale * prod_k t_coords[k](x_{coords[k]}), coords 0-based and distinct.
struct ProductTerm {
  std::vector<int> coords;
  std::vector<Eigen::VectorXd> t_coords;
  double scale = 1.0;
};

/// phi(y, x) = t_label(y) * sum_terms term(x). A single term is the
/// ordinary product query; several terms form a grouped query.
struct Query {
  Eigen::VectorXd t_label;
  std::vector<ProductTerm> terms;
};

Query product_query(const Eigen::VectorXd& t_label,
                    const std::vector<int>& coords,
                    const std::vector<Eigen::VectorXd>& t_coords,
                    double scale = 1.0);

// E[phi] under the planting `s_star` of `problem` in dimension d.
double planted_expectation(const JuntaProblem& problem,
                           const std::vector<int>& s_star, int d,
                           const Query& q);
// E[phi] under the null law mu_y x mu_x^d.
double null_expectation(const JuntaProblem& problem, const Query& q);
// ||phi|| in L^2 of the null law.
double null_norm(const JuntaProblem& problem, const Query& q);

enum class NoiseMode { kZero, kUniform, kAdversarialSign };
NoiseMode noise_mode_from_name(const std::string& name);
std::string noise_mode_name(NoiseMode m);

struct TranscriptEntry {
  Query query;
  double response = 0.0;
  double exact = 0.0;   // planted expectation (honest oracle)
  double norm = 0.0;    // null L^2 norm
};

struct Transcript {
  double tau = 0.0;
  std::int64_t budget = 0;
  std::vector<TranscriptEntry> entries;
  std::vector<int> outcome;  // recovered coordinates, 0-based, sorted

  std::int64_t queries() const {
    return static_cast<std::int64_t>(entries.size());
  }
  // One JSON object per line, coordinates 1-based.
  std::string jsonl() const;
};

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual double answer(const Query& q) = 0;
  virtual double tau() const = 0;
  // Expectation and norm logged for the last answer.
  double last_exact() const { return last_exact_; }
  double last_norm() const { return last_norm_; }

 protected:
  double last_exact_ = 0.0;
  double last_norm_ = 0.0;
};

/// Answers E[phi] + e with |e| <= tau ||phi||_{L^2(D_0)}.
class HonestOracle : public Oracle {
 public:
  HonestOracle(const PlantedInstance& instance, double tau, NoiseMode mode,
               std::uint64_t seed = 0);
  double answer(const Query& q) override;
  double tau() const override { return tau_; }

 private:
  const PlantedInstance& inst_;
  double tau_;
  NoiseMode mode_;
  std::mt19937_64 rng_;
};

// Every transcript response lies within tau * norm of the exact value.
bool transcript_sound(const Transcript& t, double slack = 1e-12);

/// Adversary over all ordered plantings of `problem` in [d]. It answers
/// with the null expectation while at least two surviving plantings are
/// consistent with it, otherwise with the value consistent with the most
/// survivors, and prunes the rest.
class AdversarialOracle : public Oracle {
 public:
  AdversarialOracle(const JuntaProblem& problem, int d, double tau);

  // nullopt once every survivor shares one support set (the learner can
  // no longer be fooled).
  std::optional<double> adversarial_answer(const Query& q);
  // After the game is decided, answers for the first survivor.
  double answer(const Query& q) override;
  double tau() const override { return tau_; }

  std::size_t survivors() const { return alive_.size(); }
  bool decided() const;
  // A surviving planting whose support differs from `guess` if any.
  std::optional<std::vector<int>> refute(const std::vector<int>& guess) const;

 private:
  const JuntaProblem& problem_;
  int d_;
  double tau_;
  std::vector<std::vector<int>> alive_;
};

enum class LearnStatus { kRecovered, kBudget, kStuck };
std::string status_name(LearnStatus s);

struct LearnResult {
  std::vector<int> s_hat;  // 0-based, sorted
  Transcript transcript;
  LearnStatus status = LearnStatus::kStuck;
  int max_tuple = 0;           // largest coordinate tuple queried
  int grouped_queries = 0;     // grouped learner only
  // Queries issued up to and including the first accepted response.
  std::int64_t first_hit = -1;
};

struct LearnerOptions {
  std::int64_t budget = 10'000'000;
  int max_tuple = 32;  // skip detectable sets larger than this
};

/// Frontier search: repeatedly looks for a detectable set with the fewest
/// new slots, fixing old slots to recovered coordinates in every way and
/// scanning fresh tuples in lexicographic order. Responses above beta/2
/// add all queried coordinates. Identical queries are issued once.
LearnResult adaptive_learner(int d, int p_support, const DetectReport& report,
                             Oracle& oracle, const LearnerOptions& opt = {});

/// All queries fixed up front: for every support index, every tuple for
/// the smallest detectable set containing it. The union of tuples whose
/// response exceeds beta/2 is returned.
LearnResult nonadaptive_learner(int d, int p_support,
                                const DetectReport& report, Oracle& oracle,
                                const LearnerOptions& opt = {});

/// Finds one new coordinate per round with ceil(log2 n) grouped queries
/// over the n fresh coordinates, grouped by the bits of their rank, then
/// confirms it with one direct query. Throws std::domain_error when no
/// detectable set has exactly one new slot.
LearnResult grouped_learner(int d, int p_support, const DetectReport& report,
                            Oracle& oracle, const LearnerOptions& opt = {});

/// Queries every product of non-constant basis functions on every tuple
/// of up to `max_tuple` coordinates with the witness label functions,
/// then outputs the most often flagged coordinates.
LearnResult probe_learner(int d, int p_support, const DetectReport& report,
                          const OrthonormalBasis& basis, Oracle& oracle,
                          int max_tuple,
                          const LearnerOptions& opt = {});

}  // namespace juntaq
