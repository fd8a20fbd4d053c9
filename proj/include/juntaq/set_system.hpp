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

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace juntaq {

// A subset of the support [P], bit i standing for coordinate i+1.
using Subset = std::uint32_t;

inline constexpr int kMaxSupport = 32;

int subset_size(Subset s);
Subset full_subset(int p);
bool is_subset_of(Subset a, Subset b);
// Zero-based coordinates in ascending order.
std::vector<int> subset_members(Subset s);
// 1-based coordinates, the serialized form.
Subset subset_from_coords(const std::vector<int>& one_based);
std::vector<int> subset_to_coords(Subset s);
std::string format_subset(Subset s);

struct Infinity {
  friend constexpr bool operator==(Infinity, Infinity) = default;
};

/// Leap/cover value: a positive integer or infinity.
class Complexity {
 public:
  constexpr Complexity(int k) : v_(k) {}  // NOLINT(google-explicit-constructor)
  constexpr Complexity(Infinity inf) : v_(inf) {}  // NOLINT

  static constexpr Complexity infinity() { return Complexity(Infinity{}); }

  bool finite() const { return std::holds_alternative<int>(v_); }
  // Throws std::logic_error when infinite.
  int value() const;
  std::string str() const;

  friend bool operator==(const Complexity&, const Complexity&) = default;
  friend std::strong_ordering operator<=>(const Complexity& a,
                                          const Complexity& b);

 private:
  std::variant<int, Infinity> v_;
};

nlohmann::json to_json(const Complexity& c);

class DegenerateSystemError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A finite family of subsets of [P], deduplicated, in first-seen order.
class SetSystem {
 public:
  SetSystem(int p, const std::vector<Subset>& sets);

  int p() const { return p_; }
  const std::vector<Subset>& sets() const { return sets_; }
  bool empty() const { return sets_.empty(); }
  bool contains(Subset s) const;
  // Union of all members.
  Subset support() const { return support_; }
  Subset full() const { return full_subset(p_); }

 private:
  int p_;
  std::vector<Subset> sets_;
  Subset support_ = 0;
};

/// Largest E containing `start` reachable by repeatedly absorbing any
/// U with |U \ E| <= k. Addability only grows with E, so the result does
/// not depend on the absorption order.
Subset greedy_closure(const SetSystem& system, int k, Subset start);

Complexity leap(const SetSystem& system);
Complexity cover(const SetSystem& system);

// Same as leap/cover with supp(C) as the target. Throws
// DegenerateSystemError on an empty support.
int rel_leap(const SetSystem& system);
int rel_cover(const SetSystem& system);

// [[1],[1,2]] style, 1-based.
nlohmann::json to_json(const SetSystem& system);
SetSystem set_system_from_json(const nlohmann::json& j, int p);

}  // namespace juntaq
