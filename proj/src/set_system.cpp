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

#include "juntaq/set_system.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <sstream>

namespace juntaq {

int subset_size(Subset s) { return std::popcount(s); }

Subset full_subset(int p) {
  if (p <= 0) return 0;
  if (p >= kMaxSupport) return std::numeric_limits<Subset>::max();
  return (Subset{1} << p) - 1;
}

bool is_subset_of(Subset a, Subset b) { return (a & ~b) == 0; }

std::vector<int> subset_members(Subset s) {
  std::vector<int> out;
  while (s != 0) {
    out.push_back(std::countr_zero(s));
    s &= s - 1;
  }
  return out;
}

Subset subset_from_coords(const std::vector<int>& one_based) {
  Subset s = 0;
  for (int c : one_based) {
    if (c < 1 || c > kMaxSupport) {
      throw std::invalid_argument("coordinate " + std::to_string(c) +
                                  " outside 1.." +
                                  std::to_string(kMaxSupport));
    }
    s |= Subset{1} << (c - 1);
  }
  return s;
}

std::vector<int> subset_to_coords(Subset s) {
  auto members = subset_members(s);
  for (int& m : members) ++m;
  return members;
}

std::string format_subset(Subset s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (int c : subset_to_coords(s)) {
    if (!first) os << ',';
    os << c;
    first = false;
  }
  os << '}';
  return os.str();
}

int Complexity::value() const {
  if (!finite()) throw std::logic_error("complexity is infinite");
  return std::get<int>(v_);
}

std::string Complexity::str() const {
  return finite() ? std::to_string(value()) : std::string("inf");
}

std::strong_ordering operator<=>(const Complexity& a, const Complexity& b) {
  if (a.finite() && b.finite()) return a.value() <=> b.value();
  if (a.finite()) return std::strong_ordering::less;
  if (b.finite()) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

nlohmann::json to_json(const Complexity& c) {
  if (c.finite()) return c.value();
  return "inf";
}

SetSystem::SetSystem(int p, const std::vector<Subset>& sets) : p_(p) {
  if (p < 1 || p > kMaxSupport) {
    throw std::invalid_argument("support size P must be in 1..32, got " +
                                std::to_string(p));
  }
  const Subset full = full_subset(p);
  for (Subset s : sets) {
    if (!is_subset_of(s, full)) {
      throw std::invalid_argument("subset " + format_subset(s) +
                                  " uses coordinates beyond P=" +
                                  std::to_string(p));
    }
    if (std::find(sets_.begin(), sets_.end(), s) == sets_.end()) {
      sets_.push_back(s);
      support_ |= s;
    }
  }
}

bool SetSystem::contains(Subset s) const {
  return std::find(sets_.begin(), sets_.end(), s) != sets_.end();
}

Subset greedy_closure(const SetSystem& system, int k, Subset start) {
  Subset explored = start;
  bool grew = true;
  while (grew) {
    grew = false;
    for (Subset u : system.sets()) {
      const Subset fresh = u & ~explored;
      if (fresh != 0 && subset_size(fresh) <= k) {
        explored |= u;
        grew = true;
      }
    }
  }
  return explored;
}

namespace {

// Smallest k whose closure from the empty set reaches `target`; assumes
// target is contained in the support.
int leap_to(const SetSystem& system, Subset target) {
  for (int k = 1; k <= system.p(); ++k) {
    if (is_subset_of(target, greedy_closure(system, k, 0))) return k;
  }
  return system.p();
}

int cover_over(const SetSystem& system, Subset target) {
  int worst = 0;
  for (int i : subset_members(target)) {
    int best = std::numeric_limits<int>::max();
    for (Subset u : system.sets()) {
      if (u & (Subset{1} << i)) best = std::min(best, subset_size(u));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

Complexity leap(const SetSystem& system) {
  if (system.support() != system.full()) return Complexity::infinity();
  return leap_to(system, system.full());
}

Complexity cover(const SetSystem& system) {
  if (system.support() != system.full()) return Complexity::infinity();
  return cover_over(system, system.full());
}

int rel_leap(const SetSystem& system) {
  if (system.support() == 0) {
    throw DegenerateSystemError("relative leap of a system with empty support");
  }
  return leap_to(system, system.support());
}

int rel_cover(const SetSystem& system) {
  if (system.support() == 0) {
    throw DegenerateSystemError(
        "relative cover of a system with empty support");
  }
  return cover_over(system, system.support());
}

nlohmann::json to_json(const SetSystem& system) {
  auto out = nlohmann::json::array();
  for (Subset s : system.sets()) out.push_back(subset_to_coords(s));
  return out;
}

SetSystem set_system_from_json(const nlohmann::json& j, int p) {
  if (!j.is_array()) throw std::invalid_argument("set system must be an array");
  std::vector<Subset> sets;
  for (const auto& item : j) {
    if (!item.is_array()) {
      throw std::invalid_argument("each set must be an array of coordinates");
    }
    sets.push_back(subset_from_coords(item.get<std::vector<int>>()));
  }
  return SetSystem(p, sets);
}

}  // namespace juntaq
