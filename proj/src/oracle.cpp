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

#include "juntaq/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace juntaq {
namespace {

constexpr std::int64_t kMaxPlantings = 2'000'000;

double mean_under(const FiniteMarginal& m, const Eigen::VectorXd& t) {
  return m.prob_vector().dot(t);
}

void check_query(const Query& q, int d, int nx, int ny) {
  if (q.t_label.size() != ny) {
    throw std::invalid_argument("query label table has wrong length");
  }
  for (const auto& term : q.terms) {
    if (term.coords.size() != term.t_coords.size()) {
      throw std::invalid_argument("query term: coords and tables differ");
    }
    for (std::size_t k = 0; k < term.coords.size(); ++k) {
      if (term.coords[k] < 0 || term.coords[k] >= d) {
        throw std::out_of_range("query references coordinate " +
                                std::to_string(term.coords[k] + 1) +
                                " outside [d], d=" + std::to_string(d));
      }
      if (term.t_coords[k].size() != nx) {
        throw std::invalid_argument("query coordinate table has wrong length");
      }
    }
  }
}

// E[prod of t factors times prod of t' factors] under mu_x^d.
double cross_moment(const FiniteMarginal& m, const ProductTerm& a,
                    const ProductTerm& b) {
  double out = 1.0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    auto it = std::find(b.coords.begin(), b.coords.end(), a.coords[i]);
    if (it == b.coords.end()) {
      out *= mean_under(m, a.t_coords[i]);
    } else {
      const auto j = it - b.coords.begin();
      out *= mean_under(m, a.t_coords[i].cwiseProduct(b.t_coords[j]));
    }
  }
  for (std::size_t j = 0; j < b.coords.size(); ++j) {
    if (std::find(a.coords.begin(), a.coords.end(), b.coords[j]) ==
        a.coords.end()) {
      out *= mean_under(m, b.t_coords[j]);
    }
  }
  return out;
}

struct BudgetExhausted {};

using Key = std::vector<double>;

Key query_key(const Query& q) {
  Key key(q.t_label.data(), q.t_label.data() + q.t_label.size());
  for (const auto& term : q.terms) {
    std::vector<std::size_t> order(term.coords.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return term.coords[a] < term.coords[b];
    });
    key.push_back(std::nan(""));  // term separator; NaN never equals data
    key.push_back(term.scale);
    for (std::size_t k : order) {
      key.push_back(term.coords[k]);
      const auto& t = term.t_coords[k];
      key.insert(key.end(), t.data(), t.data() + t.size());
    }
  }
  return key;
}

struct KeyLess {
  bool operator()(const Key& a, const Key& b) const {
    // NaN separators sit at identical positions for equal-shaped keys, so
    // compare them by bit pattern.
    return std::lexicographical_compare(
        a.begin(), a.end(), b.begin(), b.end(), [](double x, double y) {
          return std::bit_cast<std::uint64_t>(x) <
                 std::bit_cast<std::uint64_t>(y);
        });
  }
};

/// Issues queries, logging them and answering repeats from memory.
class Session {
 public:
  Session(Oracle& oracle, LearnResult& result, std::int64_t budget)
      : oracle_(oracle), result_(result), budget_(budget) {
    result_.transcript.tau = oracle.tau();
    result_.transcript.budget = budget;
  }

  double ask(const Query& q) {
    auto key = query_key(q);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (result_.transcript.queries() >= budget_) throw BudgetExhausted{};
    const double v = oracle_.answer(q);
    result_.transcript.entries.push_back(
        {q, v, oracle_.last_exact(), oracle_.last_norm()});
    for (const auto& term : q.terms) {
      result_.max_tuple =
          std::max(result_.max_tuple, static_cast<int>(term.coords.size()));
    }
    memo_.emplace(std::move(key), v);
    return v;
  }

  void mark_hit() {
    if (result_.first_hit < 0) result_.first_hit = result_.transcript.queries();
  }

 private:
  Oracle& oracle_;
  LearnResult& result_;
  std::int64_t budget_;
  std::map<Key, double, KeyLess> memo_;
};

// Ordered injective k-tuples from `pool` in lexicographic order; stops
// and returns true as soon as fn returns true.
template <typename F>
bool for_each_arrangement(const std::vector<int>& pool, int k, F&& fn) {
  std::vector<int> tuple;
  std::vector<bool> used(pool.size(), false);
  auto rec = [&](auto&& self) -> bool {
    if (static_cast<int>(tuple.size()) == k) return fn(tuple);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      tuple.push_back(pool[i]);
      const bool stop = self(self);
      tuple.pop_back();
      used[i] = false;
      if (stop) return true;
    }
    return false;
  };
  return rec(rec);
}

std::vector<int> complement(int d, const std::vector<int>& taken) {
  std::vector<int> out;
  for (int i = 0; i < d; ++i) {
    if (std::find(taken.begin(), taken.end(), i) == taken.end()) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> slot_tables(const Witness& w) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& [_, t] : w.coord_tables) out.push_back(t);
  return out;
}

// Placement of a witness on ambient coordinates: some slots reuse
// recovered coordinates, the rest take fresh ones.
struct Placement {
  Subset u;
  std::vector<int> old_slots;
  std::vector<int> new_slots;
  std::vector<int> old_coords;
};

// Calls fn for every way to place a set of C with exactly n_new fresh
// slots, given the recovered coordinates.
template <typename F>
bool for_each_placement(const SetSystem& system, int n_new, int max_tuple,
                        const std::vector<int>& recovered, F&& fn) {
  for (Subset u : system.sets()) {
    const int m = subset_size(u);
    const int n_old = m - n_new;
    if (m > max_tuple || n_old < 0 || n_old > static_cast<int>(recovered.size())) {
      continue;
    }
    for (Subset o = 0; o < (Subset{1} << m); ++o) {
      if (subset_size(o) != n_old) continue;
      Placement pl{u, {}, {}, {}};
      for (int k = 0; k < m; ++k) {
        ((o >> k) & 1 ? pl.old_slots : pl.new_slots).push_back(k);
      }
      const bool stop =
          for_each_arrangement(recovered, n_old, [&](const std::vector<int>& t) {
            pl.old_coords = t;
            return fn(pl);
          });
      if (stop) return true;
    }
  }
  return false;
}

Query place_query(const Witness& w, const Placement& pl,
                  const std::vector<int>& fresh, double scale = 1.0) {
  const auto tables = slot_tables(w);
  std::vector<int> coords(tables.size());
  for (std::size_t k = 0; k < pl.old_slots.size(); ++k) {
    coords[pl.old_slots[k]] = pl.old_coords[k];
  }
  for (std::size_t k = 0; k < pl.new_slots.size(); ++k) {
    coords[pl.new_slots[k]] = fresh[k];
  }
  return product_query(w.label_table, coords, tables, scale);
}

void add_coords(std::vector<int>& recovered, const std::vector<int>& coords) {
  for (int c : coords) {
    if (std::find(recovered.begin(), recovered.end(), c) == recovered.end()) {
      recovered.push_back(c);
    }
  }
  std::sort(recovered.begin(), recovered.end());
}

void finalize(LearnResult& res, std::vector<int> recovered) {
  std::sort(recovered.begin(), recovered.end());
  res.s_hat = recovered;
  res.transcript.outcome = recovered;
}

int max_set_size(const SetSystem& s) {
  int m = 0;
  for (Subset u : s.sets()) m = std::max(m, subset_size(u));
  return m;
}

}  // namespace

Query product_query(const Eigen::VectorXd& t_label,
                    const std::vector<int>& coords,
                    const std::vector<Eigen::VectorXd>& t_coords,
                    double scale) {
  return Query{t_label, {ProductTerm{coords, t_coords, scale}}};
}

double planted_expectation(const JuntaProblem& problem,
                           const std::vector<int>& s_star, int d,
                           const Query& q) {
  check_query(q, d, problem.num_symbols(), problem.num_labels());
  const auto& m = problem.marginal();
  double total = 0.0;
  for (const auto& term : q.terms) {
    std::map<int, Eigen::VectorXd> on;
    Subset u = 0;
    double off = 1.0;
    for (std::size_t k = 0; k < term.coords.size(); ++k) {
      auto it = std::find(s_star.begin(), s_star.end(), term.coords[k]);
      if (it == s_star.end()) {
        off *= mean_under(m, term.t_coords[k]);
      } else {
        const int i = static_cast<int>(it - s_star.begin());
        on[i] = term.t_coords[k];
        u |= Subset{1} << i;
      }
    }
    if (off == 0.0) continue;
    total += term.scale * off * joint_expectation(problem, q.t_label, on, u);
  }
  return total;
}

double null_expectation(const JuntaProblem& problem, const Query& q) {
  const double et = problem.label_marginal().dot(q.t_label);
  double total = 0.0;
  for (const auto& term : q.terms) {
    double prod = term.scale;
    for (const auto& t : term.t_coords) prod *= mean_under(problem.marginal(), t);
    total += prod;
  }
  return et * total;
}

double null_norm(const JuntaProblem& problem, const Query& q) {
  const double et2 =
      problem.label_marginal().dot(q.t_label.cwiseProduct(q.t_label));
  double total = 0.0;
  for (const auto& a : q.terms) {
    for (const auto& b : q.terms) {
      total += a.scale * b.scale * cross_moment(problem.marginal(), a, b);
    }
  }
  return std::sqrt(std::max(0.0, et2 * total));
}

NoiseMode noise_mode_from_name(const std::string& name) {
  if (name == "zero") return NoiseMode::kZero;
  if (name == "uniform") return NoiseMode::kUniform;
  if (name == "adversarial_sign") return NoiseMode::kAdversarialSign;
  throw std::invalid_argument("unknown noise mode '" + name + "'");
}

std::string noise_mode_name(NoiseMode m) {
  switch (m) {
    case NoiseMode::kZero:
      return "zero";
    case NoiseMode::kUniform:
      return "uniform";
    case NoiseMode::kAdversarialSign:
      return "adversarial_sign";
  }
  return "?";
}

std::string Transcript::jsonl() const {
  std::ostringstream os;
  for (std::size_t t = 0; t < entries.size(); ++t) {
    const auto& e = entries[t];
    nlohmann::json j;
    j["t"] = t;
    j["T"] = std::vector<double>(e.query.t_label.data(),
                                 e.query.t_label.data() + e.query.t_label.size());
    auto terms = nlohmann::json::array();
    for (const auto& term : e.query.terms) {
      nlohmann::json jt;
      std::vector<int> coords = term.coords;
      for (int& c : coords) ++c;
      jt["coords"] = coords;
      auto tables = nlohmann::json::array();
      for (const auto& tc : term.t_coords) {
        tables.push_back(std::vector<double>(tc.data(), tc.data() + tc.size()));
      }
      jt["T_i"] = tables;
      jt["scale"] = term.scale;
      terms.push_back(jt);
    }
    j["terms"] = terms;
    j["response"] = e.response;
    j["exact"] = e.exact;
    j["norm"] = e.norm;
    j["tau"] = tau;
    os << j.dump() << '\n';
  }
  return os.str();
}

HonestOracle::HonestOracle(const PlantedInstance& instance, double tau,
                           NoiseMode mode, std::uint64_t seed)
    : inst_(instance), tau_(tau), mode_(mode), rng_(seed) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0");
}

double HonestOracle::answer(const Query& q) {
  const double e = planted_expectation(inst_.problem, inst_.s_star, inst_.d, q);
  const double n = null_norm(inst_.problem, q);
  last_exact_ = e;
  last_norm_ = n;
  const double width = tau_ * n;
  switch (mode_) {
    case NoiseMode::kZero:
      return e;
    case NoiseMode::kUniform:
      return e + std::uniform_real_distribution<double>(-width, width)(rng_);
    case NoiseMode::kAdversarialSign:
      return e > 0.0 ? e - width : e + width;
  }
  return e;
}

bool transcript_sound(const Transcript& t, double slack) {
  for (const auto& e : t.entries) {
    if (std::abs(e.response - e.exact) >
        t.tau * e.norm + slack * (1.0 + std::abs(e.exact))) {
      return false;
    }
  }
  return true;
}

AdversarialOracle::AdversarialOracle(const JuntaProblem& problem, int d,
                                     double tau)
    : problem_(problem), d_(d), tau_(tau) {
  if (d < problem.p()) throw std::invalid_argument("d must be at least P");
  std::int64_t count = 1;
  for (int k = 0; k < problem.p(); ++k) {
    count *= d - k;
    if (count > kMaxPlantings) {
      throw std::invalid_argument("too many plantings to enumerate");
    }
  }
  std::vector<int> all(d);
  for (int i = 0; i < d; ++i) all[i] = i;
  for_each_arrangement(all, problem.p(), [&](const std::vector<int>& s) {
    alive_.push_back(s);
    return false;
  });
}

bool AdversarialOracle::decided() const {
  if (alive_.empty()) throw std::logic_error("no surviving planting");
  auto first = alive_.front();
  std::sort(first.begin(), first.end());
  for (const auto& s : alive_) {
    auto t = s;
    std::sort(t.begin(), t.end());
    if (t != first) return false;
  }
  return true;
}

std::optional<std::vector<int>> AdversarialOracle::refute(
    const std::vector<int>& guess) const {
  auto g = guess;
  std::sort(g.begin(), g.end());
  for (const auto& s : alive_) {
    auto t = s;
    std::sort(t.begin(), t.end());
    if (t != g) return s;
  }
  return std::nullopt;
}

std::optional<double> AdversarialOracle::adversarial_answer(const Query& q) {
  if (decided()) return std::nullopt;
  const double v0 = null_expectation(problem_, q);
  last_norm_ = null_norm(problem_, q);
  const double width = tau_ * last_norm_;
  std::vector<double> vals(alive_.size());
  std::size_t consistent = 0;
  for (std::size_t k = 0; k < alive_.size(); ++k) {
    vals[k] = planted_expectation(problem_, alive_[k], d_, q);
    if (std::abs(vals[k] - v0) <= width) ++consistent;
  }
  double v = v0;
  if (consistent < 2) {
    // Widest stabbing window of length 2 * width.
    std::vector<double> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    std::size_t best = 0, best_lo = 0, best_hi = 0, hi = 0;
    for (std::size_t lo = 0; lo < sorted.size(); ++lo) {
      hi = std::max(hi, lo);
      while (hi + 1 < sorted.size() && sorted[hi + 1] - sorted[lo] <= 2 * width) {
        ++hi;
      }
      if (hi - lo + 1 > best) {
        best = hi - lo + 1;
        best_lo = lo;
        best_hi = hi;
      }
    }
    if (best > consistent) v = 0.5 * (sorted[best_lo] + sorted[best_hi]);
  }
  std::vector<std::vector<int>> kept;
  for (std::size_t k = 0; k < alive_.size(); ++k) {
    if (std::abs(vals[k] - v) <= width * (1.0 + 1e-12) + 1e-15) {
      kept.push_back(alive_[k]);
    }
  }
  alive_ = std::move(kept);
  last_exact_ = planted_expectation(problem_, alive_.front(), d_, q);
  return v;
}

double AdversarialOracle::answer(const Query& q) {
  if (auto v = adversarial_answer(q)) return *v;
  last_exact_ = planted_expectation(problem_, alive_.front(), d_, q);
  last_norm_ = null_norm(problem_, q);
  return last_exact_;
}

std::string status_name(LearnStatus s) {
  switch (s) {
    case LearnStatus::kRecovered:
      return "recovered";
    case LearnStatus::kBudget:
      return "budget";
    case LearnStatus::kStuck:
      return "stuck";
  }
  return "?";
}

LearnResult adaptive_learner(int d, int p_support, const DetectReport& report,
                             Oracle& oracle, const LearnerOptions& opt) {
  LearnResult res;
  Session session(oracle, res, opt.budget);
  const double threshold = report.beta / 2.0;
  std::vector<int> recovered;
  try {
    while (static_cast<int>(recovered.size()) < p_support) {
      const auto fresh = complement(d, recovered);
      bool hit = false;
      for (int n_new = 1; n_new <= max_set_size(report.system) && !hit;
           ++n_new) {
        hit = for_each_placement(
            report.system, n_new, opt.max_tuple, recovered,
            [&](const Placement& pl) {
              const Witness& w = report.witnesses.at(pl.u);
              return for_each_arrangement(
                  fresh, n_new, [&](const std::vector<int>& tuple) {
                    const Query q = place_query(w, pl, tuple);
                    if (std::abs(session.ask(q)) <= threshold) return false;
                    session.mark_hit();
                    add_coords(recovered, q.terms[0].coords);
                    return true;
                  });
            });
      }
      if (!hit) break;
    }
    res.status = static_cast<int>(recovered.size()) == p_support
                     ? LearnStatus::kRecovered
                     : LearnStatus::kStuck;
  } catch (const BudgetExhausted&) {
    res.status = LearnStatus::kBudget;
  }
  finalize(res, recovered);
  return res;
}

LearnResult nonadaptive_learner(int d, int p_support,
                                const DetectReport& report, Oracle& oracle,
                                const LearnerOptions& opt) {
  LearnResult res;
  // Smallest detectable set covering each support index.
  std::vector<Subset> blocks;
  for (int i : subset_members(report.system.support())) {
    Subset best = 0;
    for (Subset u : report.system.sets()) {
      if ((u >> i & 1) && (best == 0 || subset_size(u) < subset_size(best))) {
        best = u;
      }
    }
    if (std::find(blocks.begin(), blocks.end(), best) == blocks.end()) {
      blocks.push_back(best);
    }
  }
  std::vector<int> all(d);
  for (int i = 0; i < d; ++i) all[i] = i;
  std::vector<Query> plan;
  std::set<Key, KeyLess> planned;
  for (Subset u : blocks) {
    const Witness& w = report.witnesses.at(u);
    if (subset_size(u) > opt.max_tuple) continue;
    for_each_arrangement(all, subset_size(u), [&](const std::vector<int>& t) {
      Query q = product_query(w.label_table, t, slot_tables(w));
      if (planned.insert(query_key(q)).second) plan.push_back(std::move(q));
      return false;
    });
  }
  Session session(oracle, res, opt.budget);
  std::vector<double> responses;
  try {
    for (const auto& q : plan) responses.push_back(session.ask(q));
  } catch (const BudgetExhausted&) {
    res.status = LearnStatus::kBudget;
  }
  std::vector<int> recovered;
  const double threshold = report.beta / 2.0;
  for (std::size_t k = 0; k < responses.size(); ++k) {
    if (std::abs(responses[k]) > threshold) {
      if (res.first_hit < 0) res.first_hit = static_cast<std::int64_t>(k) + 1;
      add_coords(recovered, plan[k].terms[0].coords);
    }
  }
  if (res.status != LearnStatus::kBudget) {
    res.status = static_cast<int>(recovered.size()) == p_support
                     ? LearnStatus::kRecovered
                     : LearnStatus::kStuck;
  }
  finalize(res, recovered);
  return res;
}

LearnResult grouped_learner(int d, int p_support, const DetectReport& report,
                            Oracle& oracle, const LearnerOptions& opt) {
  LearnResult res;
  Session session(oracle, res, opt.budget);
  const double beta = report.beta;
  std::vector<int> recovered;
  try {
    while (static_cast<int>(recovered.size()) < p_support) {
      const auto fresh = complement(d, recovered);
      const int n = static_cast<int>(fresh.size());
      int bits = 0;
      while ((1 << bits) < n) ++bits;
      const double scale = 1.0 / std::sqrt(static_cast<double>(n));
      bool any_candidate = false;
      const bool hit = for_each_placement(
          report.system, 1, opt.max_tuple, recovered, [&](const Placement& pl) {
            any_candidate = true;
            const Witness& w = report.witnesses.at(pl.u);
            int rank = 0;
            for (int k = 0; k < bits; ++k) {
              Query q{w.label_table, {}};
              for (int r = 0; r < n; ++r) {
                if (r >> k & 1) {
                  q.terms.push_back(place_query(w, pl, {fresh[r]}, scale).terms[0]);
                }
              }
              if (q.terms.empty()) continue;
              const auto before = res.transcript.queries();
              const double v = session.ask(q);
              res.grouped_queries +=
                  static_cast<int>(res.transcript.queries() - before);
              if (std::abs(v) > beta * scale / 2.0) rank |= 1 << k;
            }
            if (rank >= n) return false;
            const Query check = place_query(w, pl, {fresh[rank]});
            if (std::abs(session.ask(check)) <= beta / 2.0) return false;
            session.mark_hit();
            add_coords(recovered, check.terms[0].coords);
            return true;
          });
      if (!any_candidate) {
        throw std::domain_error(
            "grouped search needs a detectable set with exactly one new "
            "coordinate");
      }
      if (!hit) break;
    }
    res.status = static_cast<int>(recovered.size()) == p_support
                     ? LearnStatus::kRecovered
                     : LearnStatus::kStuck;
  } catch (const BudgetExhausted&) {
    res.status = LearnStatus::kBudget;
  }
  finalize(res, recovered);
  return res;
}

LearnResult probe_learner(int d, int p_support, const DetectReport& report,
                          const OrthonormalBasis& basis, Oracle& oracle,
                          int max_tuple, const LearnerOptions& opt) {
  LearnResult res;
  Session session(oracle, res, opt.budget);
  std::vector<Eigen::VectorXd> labels;
  for (const auto& [_, w] : report.witnesses) {
    bool dup = false;
    for (const auto& l : labels) dup = dup || l.isApprox(w.label_table, 0.0);
    if (!dup) labels.push_back(w.label_table);
  }
  const int order = basis.size() - 1;
  const double threshold = report.beta / 2.0;
  std::vector<int> hits(d, 0);
  try {
    for (int m = 1; m <= std::min(max_tuple, d); ++m) {
      // Increasing m-subsets of [d].
      std::vector<int> comb(m);
      for (int k = 0; k < m; ++k) comb[k] = k;
      while (true) {
        std::int64_t assignments = 1;
        for (int k = 0; k < m; ++k) assignments *= order;
        for (const auto& label : labels) {
          for (std::int64_t a = 0; a < assignments; ++a) {
            std::vector<Eigen::VectorXd> tables;
            std::int64_t rest = a;
            for (int k = 0; k < m; ++k) {
              tables.push_back(basis.row(static_cast<int>(rest % order) + 1));
              rest /= order;
            }
            if (std::abs(session.ask(product_query(label, comb, tables))) >
                threshold) {
              session.mark_hit();
              for (int c : comb) ++hits[c];
            }
          }
        }
        int k = m - 1;
        while (k >= 0 && comb[k] == d - m + k) --k;
        if (k < 0) break;
        ++comb[k];
        for (int j = k + 1; j < m; ++j) comb[j] = comb[j - 1] + 1;
      }
    }
    res.status = LearnStatus::kStuck;
  } catch (const BudgetExhausted&) {
    res.status = LearnStatus::kBudget;
  }
  std::vector<int> order_idx(d);
  for (int i = 0; i < d; ++i) order_idx[i] = i;
  std::stable_sort(order_idx.begin(), order_idx.end(),
                   [&](int a, int b) { return hits[a] > hits[b]; });
  std::vector<int> guess(order_idx.begin(),
                         order_idx.begin() + std::min(p_support, d));
  int flagged = 0;
  for (int h : hits) flagged += h > 0;
  if (res.status != LearnStatus::kBudget && flagged == p_support) {
    res.status = LearnStatus::kRecovered;
  }
  finalize(res, guess);
  return res;
}

}  // namespace juntaq
