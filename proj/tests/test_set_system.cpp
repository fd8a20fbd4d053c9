#include <doctest.h>

#include "juntaq/set_system.hpp"
#include "properties.hpp"

using namespace juntaq;

namespace {
SetSystem sys(int p, const std::vector<std::vector<int>>& sets) {
  std::vector<Subset> v;
  for (const auto& s : sets) v.push_back(subset_from_coords(s));
  return SetSystem(p, v);
}
}  // namespace

TEST_CASE("subset helpers") {
  const Subset s = subset_from_coords({1, 3});
  CHECK(s == 0b101);
  CHECK(subset_size(s) == 2);
  CHECK(subset_to_coords(s) == std::vector<int>{1, 3});
  CHECK(is_subset_of(s, full_subset(3)));
  CHECK_FALSE(is_subset_of(full_subset(3), s));
}

TEST_CASE("staircase and its symmetric cousin") {
  const auto y1 = sys(4, {{1}, {1, 2}, {1, 2, 3}, {1, 2, 3, 4}});
  CHECK(leap(y1) == Complexity(1));
  CHECK(cover(y1) == Complexity(4));
  const auto y2 = sys(4, {{1, 2, 3}, {1, 2, 4}, {1, 3, 4}, {2, 3, 4}});
  CHECK(leap(y2) == Complexity(3));
  CHECK(cover(y2) == Complexity(3));
}

TEST_CASE("uncovered coordinates give infinity, relative versions do not") {
  const auto s = sys(3, {{1}, {1, 2}});
  CHECK_FALSE(leap(s).finite());
  CHECK_FALSE(cover(s).finite());
  CHECK(rel_leap(s) == 1);
  CHECK(rel_cover(s) == 2);
  CHECK(Complexity(7) < Complexity::infinity());
  CHECK_THROWS_AS(rel_leap(SetSystem(3, {})), DegenerateSystemError);
}

TEST_CASE("greedy closure absorbs in any order") {
  const auto s = sys(4, {{1, 2}, {2, 3}, {3, 4}});
  CHECK(greedy_closure(s, 1, 0) == 0);
  CHECK(greedy_closure(s, 2, 0) == full_subset(4));
  CHECK(greedy_closure(s, 1, subset_from_coords({2})) == full_subset(4));
}

TEST_CASE("json round trip") {
  const auto s = sys(3, {{2}, {1, 3}});
  const auto back = set_system_from_json(to_json(s), 3);
  CHECK(back.sets() == s.sets());
}

TEST_CASE("leap and cover agree with brute force") {
  const auto r = juntaq::testing::leap_cover_agreement(300, 77);
  INFO(r.first_failure);
  CHECK(r.ok());
}
