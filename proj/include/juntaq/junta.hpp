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
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "juntaq/set_system.hpp"

namespace juntaq {

// Largest |X|^P table the exact routines will enumerate.
inline constexpr std::int64_t kMaxAssignments = 10'000'000;

/// Law of one coordinate over a finite set of real symbols.
struct FiniteMarginal {
  FiniteMarginal(std::vector<double> values, std::vector<double> probs);

  std::vector<double> values;
  std::vector<double> probs;

  int size() const { return static_cast<int>(values.size()); }
  Eigen::VectorXd prob_vector() const;
  // Uniform over {+1, -1}, in that order.
  bool is_sign_uniform() const;
};

FiniteMarginal sign_marginal();

/// Finite junta problem: coordinates z_1..z_P iid from the marginal and
/// a label drawn from cond.row(z).
///
/// Assignments z are indexed in mixed radix, coordinate i being digit i
/// (least significant first). With the sign marginal this puts bit i of
/// the index at z_{i+1} = -1, so hypercube tables line up with the
/// Walsh-Hadamard ordering.
class JuntaProblem {
 public:
  JuntaProblem(int p, FiniteMarginal marginal, std::vector<double> labels,
               Eigen::MatrixXd cond, bool numeric_labels = true);

  int p() const { return p_; }
  const FiniteMarginal& marginal() const { return marginal_; }
  const std::vector<double>& labels() const { return labels_; }
  Eigen::VectorXd label_vector() const;
  bool numeric_labels() const { return numeric_; }
  const Eigen::MatrixXd& cond() const { return cond_; }

  int num_symbols() const { return marginal_.size(); }
  int num_labels() const { return static_cast<int>(labels_.size()); }
  std::int64_t num_assignments() const { return cond_.rows(); }

  // Probability of each assignment under the product marginal.
  const Eigen::VectorXd& assignment_probs() const { return mu_z_; }
  Eigen::VectorXd label_marginal() const;
  // Joint table mu(z) * mu(y | z).
  Eigen::MatrixXd joint() const;

  // Symbol index of coordinate i (0-based) in assignment z.
  int symbol(std::int64_t z, int i) const;
  std::vector<int> symbols(std::int64_t z) const;
  std::int64_t index_of(const std::vector<int>& symbols) const;

  bool is_hypercube() const { return marginal_.is_sign_uniform(); }

 private:
  int p_;
  FiniteMarginal marginal_;
  std::vector<double> labels_;
  Eigen::MatrixXd cond_;
  bool numeric_;
  Eigen::VectorXd mu_z_;
};

/// E[T(y) prod_{i in U} T_i(z_i)] by enumeration. `coord_tables` maps a
/// 0-based support coordinate to a table over X and must cover U.
double joint_expectation(const JuntaProblem& problem, const Eigen::VectorXd& t,
                         const std::map<int, Eigen::VectorXd>& coord_tables,
                         Subset u);

/// Label noise applied to h_*(z) on the hypercube.
struct LabelNoise {
  enum class Kind { kNone, kFlip, kAdditive };
  Kind kind = Kind::kNone;
  double rho = 0.0;               // flip: y -> -y with probability rho
  std::vector<double> values;     // additive: y -> y + e
  std::vector<double> probs;
};

struct HypercubeJunta {
  int p = 0;
  std::map<Subset, double> fourier;
  LabelNoise noise;

  // h_*(z) for an assignment index z.
  double value(std::int64_t z) const;
};

JuntaProblem expand_hypercube(const HypercubeJunta& h);

// Coefficients on every nonempty subset drawn from Unif([lo, hi]).
HypercubeJunta random_fourier(int p, const std::vector<Subset>& support,
                              double lo, double hi, std::uint64_t seed);

/// One-coordinate problem whose label law is `label_probs` and whose
/// z_1 law is `marginal`, with P(z_1 in A | y) = (1 - mu(A)) T(y) / lambda
/// + mu(A). `a` lists symbol indices of X.
JuntaProblem hard_instance(const std::vector<double>& labels,
                           const std::vector<double>& label_probs,
                           const std::vector<double>& t,
                           const FiniteMarginal& marginal,
                           const std::vector<int>& a, double lambda);

struct PlantedInstance {
  PlantedInstance(JuntaProblem problem, int d, std::vector<int> s_star,
                  std::uint64_t seed);

  JuntaProblem problem;
  int d;
  std::vector<int> s_star;  // 0-based ambient coordinates
  std::uint64_t seed;

  std::vector<int> support_sorted() const;
};

// Uniformly random injective s_* in [d].
std::vector<int> random_planting(int p, int d, std::mt19937_64& rng);

struct SampleSet {
  Eigen::MatrixXd x;            // n x d symbol values
  Eigen::VectorXd y;            // label values
  std::vector<int> label;       // label indices
};

/// Draws iid (y, x) from a planted instance. Owns its RNG.
class Sampler {
 public:
  explicit Sampler(const PlantedInstance& instance);
  Sampler(const PlantedInstance& instance, std::uint64_t seed);

  SampleSet draw(int n);

 private:
  const PlantedInstance& inst_;
  std::mt19937_64 rng_;
  std::vector<double> symbol_cdf_;
  bool sign_fast_;
};

/// Reads either the tabular or the "hypercube" form.
JuntaProblem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const JuntaProblem& problem);
HypercubeJunta hypercube_from_json(const nlohmann::json& j);

// "1,2" <-> {1,2}; the empty string is the empty set.
Subset subset_from_key(const std::string& key);
std::string subset_key(Subset s);

/// Random finite problem for property corpora: |X| in [2, max_x],
/// |Y| in [2, max_y], P in [1, max_p]. Probabilities are dyadic so exact
/// zeros of the moment tensor survive roundoff.
JuntaProblem random_problem(std::mt19937_64& rng, int max_x, int max_y,
                            int max_p);

}  // namespace juntaq
