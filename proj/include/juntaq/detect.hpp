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
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "juntaq/fourier.hpp"
#include "juntaq/junta.hpp"
#include "juntaq/loss.hpp"
#include "juntaq/set_system.hpp"

namespace juntaq {

// Threshold on exactly computed (normalized) expectations.
inline constexpr double kDetectTol = 1e-9;

enum class QueryModel { kSQ, kCSQ, kDLQ };
std::string model_name(QueryModel m);

/// Test functions certifying that U is detectable. Tables are normalized
/// so that ||T||_{mu_y} = ||T_i||_{mu_x} = 1, making beta the correlation
/// of a unit-norm query.
struct Witness {
  Eigen::VectorXd label_table;
  std::map<int, Eigen::VectorXd> coord_tables;  // 0-based support coordinate
  double beta = 0.0;                            // signed
  std::optional<double> u;                      // DLQ evaluation point
};

struct DetectReport {
  QueryModel model = QueryModel::kSQ;
  std::optional<LossSpec> loss;
  SetSystem system{1, {}};
  std::map<Subset, Witness> witnesses;
  // min_U |beta_U|; 0 when nothing is detectable.
  double beta = 0.0;
  // DLQ only: SQ-detectable sets that no grid point detected. A grid
  // search can miss a set only on a measure-zero coincidence, so these
  // are reported rather than silently dropped.
  std::vector<Subset> grid_flagged;
  std::vector<double> u_grid;
};

DetectReport detect_sq(const JuntaProblem& problem);
DetectReport detect_sq(const JuntaProblem& problem,
                       const OrthonormalBasis& basis);
// Throws std::invalid_argument for symbolic labels.
DetectReport detect_csq(const JuntaProblem& problem);
DetectReport detect_dlq(const JuntaProblem& problem, const LossSpec& loss,
                        const std::vector<double>& u_grid);
DetectReport detect_dlq(const JuntaProblem& problem, const LossSpec& loss);

// 64 points on [-R, R] with R = 4 max|label|, 0, 16 seeded random points,
// and for piecewise losses the gaps between and beyond the kinks.
std::vector<double> default_u_grid(const JuntaProblem& problem,
                                   const LossSpec& loss,
                                   std::uint64_t seed = 0);

struct Exponents {
  Complexity leap = Complexity::infinity();
  Complexity cover = Complexity::infinity();
  std::optional<int> rel_leap;   // absent for an empty support
  std::optional<int> rel_cover;
};

Exponents exponents(const DetectReport& report);

nlohmann::json to_json(const Exponents& e);
nlohmann::json to_json(const DetectReport& report, bool with_witnesses = true);

}  // namespace juntaq
