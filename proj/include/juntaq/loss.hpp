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

#include <string>
#include <vector>

#include <json.hpp>

namespace juntaq {

/// A loss l(u, y) together with a fixed selection of its Clarke
/// subderivative in u.
///
/// Conventions at the kinks: abs uses sign(0) = 0; hinge uses
/// d/du = -y on the whole region uy <= 1, boundary included.
class LossSpec {
 public:
  enum class Kind {
    kSquared,               // (u - y)^2
    kAbs,                   // |u - y|
    kHinge,                 // max(1 - u y, 0)
    kExponential,           // exp(-u y)
    kLogistic,              // log(1 + exp(-u y))
    kSquaredPlusCubic,      // (u - y)^2 + |u - y|^3
    kSquaredPlusQuarticHalf,  // (u - y)^2 / 2 + (u - y)^4 / 4
    kPolynomial,            // sum_k coef[k] r^k, r = u - y or r = u y
  };
  enum class PolyArgument { kResidual, kMargin };

  explicit LossSpec(Kind kind);
  static LossSpec polynomial(std::vector<double> coefficients,
                             PolyArgument argument);
  // Accepts the names printed by name(); throws std::invalid_argument.
  static LossSpec from_name(const std::string& name);
  static LossSpec from_json(const nlohmann::json& j);

  Kind kind() const { return kind_; }
  std::string name() const;
  nlohmann::json to_json() const;

  double value(double u, double y) const;
  double derivative(double u, double y) const;

  // Losses whose derivative in u jumps; the detection grid adds points
  // between the jump locations for these.
  bool piecewise() const;
  // u values at which derivative(., y) jumps, one per label (when any).
  std::vector<double> kinks(double y) const;

 private:
  LossSpec(Kind kind, std::vector<double> coefficients, PolyArgument arg);

  Kind kind_;
  std::vector<double> coef_;
  PolyArgument arg_ = PolyArgument::kResidual;
};

}  // namespace juntaq
