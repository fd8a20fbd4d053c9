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

#include "juntaq/junta.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace juntaq {
namespace {

constexpr double kProbTol = 1e-12;

void check_distribution(const std::vector<double>& probs, const char* what) {
  double total = 0.0;
  for (double q : probs) {
    if (!(q >= 0.0) || !std::isfinite(q)) {
      throw std::invalid_argument(std::string(what) +
                                  ": probabilities must be finite and >= 0");
    }
    total += q;
  }
  if (std::abs(total - 1.0) > kProbTol) {
    std::ostringstream os;
    os << what << ": probabilities sum to " << total;
    throw std::invalid_argument(os.str());
  }
}

std::int64_t checked_power(int base, int exp) {
  std::int64_t n = 1;
  for (int i = 0; i < exp; ++i) {
    n *= base;
    if (n > kMaxAssignments) {
      throw std::invalid_argument("|X|^P exceeds the enumeration cap of 1e7");
    }
  }
  return n;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int draw_index(const double* cdf, int n, double u) {
  for (int k = 0; k < n - 1; ++k) {
    if (u < cdf[k]) return k;
  }
  return n - 1;
}

// Sorted distinct values, merging those within 1e-9 relative.
std::vector<double> merge_values(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || std::abs(x - out.back()) > 1e-9 * (1.0 + std::abs(x))) {
      out.push_back(x);
    }
  }
  return out;
}

int find_value(const std::vector<double>& sorted, double x) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(),
                             x - 1e-9 * (1.0 + std::abs(x)));
  if (it == sorted.end()) --it;
  return static_cast<int>(it - sorted.begin());
}

}  // namespace

FiniteMarginal::FiniteMarginal(std::vector<double> v, std::vector<double> q)
    : values(std::move(v)), probs(std::move(q)) {
  if (values.size() != probs.size()) {
    throw std::invalid_argument("marginal: values and probs differ in length");
  }
  check_distribution(probs, "marginal");
  const auto positive = std::count_if(probs.begin(), probs.end(),
                                      [](double x) { return x > 0.0; });
  if (positive < 2) {
    throw std::invalid_argument("marginal needs two atoms of positive mass");
  }
}

Eigen::VectorXd FiniteMarginal::prob_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(probs.data(), size());
}

bool FiniteMarginal::is_sign_uniform() const {
  return size() == 2 && values[0] == 1.0 && values[1] == -1.0 &&
         probs[0] == 0.5 && probs[1] == 0.5;
}

FiniteMarginal sign_marginal() { return FiniteMarginal({1.0, -1.0}, {0.5, 0.5}); }

JuntaProblem::JuntaProblem(int p, FiniteMarginal marginal,
                           std::vector<double> labels, Eigen::MatrixXd cond,
                           bool numeric_labels)
    : p_(p),
      marginal_(std::move(marginal)),
      labels_(std::move(labels)),
      cond_(std::move(cond)),
      numeric_(numeric_labels) {
  if (p < 1 || p > kMaxSupport) {
    throw std::invalid_argument("P must be in 1..32");
  }
  const std::int64_t rows = checked_power(marginal_.size(), p);
  if (cond_.rows() != rows || cond_.cols() != num_labels()) {
    std::ostringstream os;
    os << "cond table is " << cond_.rows() << "x" << cond_.cols()
       << ", expected " << rows << "x" << num_labels();
    throw std::invalid_argument(os.str());
  }
  if (num_labels() < 1) throw std::invalid_argument("no labels");
  auto sorted = labels_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("labels must be distinct");
  }
  for (Eigen::Index z = 0; z < cond_.rows(); ++z) {
    if ((cond_.row(z).array() < 0.0).any() || !cond_.row(z).allFinite()) {
      throw std::invalid_argument("cond row " + std::to_string(z) +
                                  " has a negative or non-finite entry");
    }
    if (std::abs(cond_.row(z).sum() - 1.0) > kProbTol) {
      throw std::invalid_argument("cond row " + std::to_string(z) +
                                  " does not sum to 1");
    }
  }
  mu_z_.resize(rows);
  const int n = marginal_.size();
  for (std::int64_t z = 0; z < rows; ++z) {
    double w = 1.0;
    std::int64_t rest = z;
    for (int i = 0; i < p; ++i) {
      w *= marginal_.probs[rest % n];
      rest /= n;
    }
    mu_z_[z] = w;
  }
}

Eigen::VectorXd JuntaProblem::label_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(labels_.data(), num_labels());
}

Eigen::VectorXd JuntaProblem::label_marginal() const {
  return cond_.transpose() * mu_z_;
}

Eigen::MatrixXd JuntaProblem::joint() const {
  return mu_z_.asDiagonal() * cond_;
}

int JuntaProblem::symbol(std::int64_t z, int i) const {
  const int n = num_symbols();
  for (int k = 0; k < i; ++k) z /= n;
  return static_cast<int>(z % n);
}

std::vector<int> JuntaProblem::symbols(std::int64_t z) const {
  std::vector<int> out(p_);
  const int n = num_symbols();
  for (int i = 0; i < p_; ++i) {
    out[i] = static_cast<int>(z % n);
    z /= n;
  }
  return out;
}

std::int64_t JuntaProblem::index_of(const std::vector<int>& s) const {
  std::int64_t z = 0;
  for (int i = p_ - 1; i >= 0; --i) z = z * num_symbols() + s[i];
  return z;
}

double joint_expectation(const JuntaProblem& problem, const Eigen::VectorXd& t,
                         const std::map<int, Eigen::VectorXd>& coord_tables,
                         Subset u) {
  if (t.size() != problem.num_labels()) {
    throw std::invalid_argument("label table has wrong length");
  }
  if (!is_subset_of(u, full_subset(problem.p()))) {
    throw std::invalid_argument("U is not a subset of [P]");
  }
  const auto members = subset_members(u);
  for (int i : members) {
    auto it = coord_tables.find(i);
    if (it == coord_tables.end()) {
      throw std::invalid_argument("no table for coordinate " +
                                  std::to_string(i + 1));
    }
    if (it->second.size() != problem.num_symbols()) {
      throw std::invalid_argument("coordinate table has wrong length");
    }
  }
  const Eigen::VectorXd row_t = problem.cond() * t;
  const auto& mu = problem.assignment_probs();
  const int n = problem.num_symbols();
  double acc = 0.0;
  for (std::int64_t z = 0; z < problem.num_assignments(); ++z) {
    double prod = mu[z] * row_t[z];
    std::int64_t rest = z;
    int pos = 0;
    for (int i : members) {
      for (; pos < i; ++pos) rest /= n;
      prod *= coord_tables.at(i)[rest % n];
    }
    acc += prod;
  }
  return acc;
}

double HypercubeJunta::value(std::int64_t z) const {
  double h = 0.0;
  for (const auto& [s, coef] : fourier) {
    h += (std::popcount(s & static_cast<Subset>(z)) & 1) ? -coef : coef;
  }
  return h;
}

JuntaProblem expand_hypercube(const HypercubeJunta& h) {
  if (h.p < 1 || h.p > 16) {
    throw std::invalid_argument("hypercube expansion needs 1 <= P <= 16");
  }
  for (const auto& [s, _] : h.fourier) {
    if (!is_subset_of(s, full_subset(h.p))) {
      throw std::invalid_argument("Fourier coefficient outside [P]");
    }
  }
  const std::int64_t rows = std::int64_t{1} << h.p;
  // Outcomes per row before merging: (value, probability).
  std::vector<std::vector<std::pair<double, double>>> outcomes(rows);
  std::vector<double> attained;
  for (std::int64_t z = 0; z < rows; ++z) {
    const double v = h.value(z);
    auto& out = outcomes[z];
    switch (h.noise.kind) {
      case LabelNoise::Kind::kNone:
        out.emplace_back(v, 1.0);
        break;
      case LabelNoise::Kind::kFlip:
        if (h.noise.rho < 0.0 || h.noise.rho > 1.0) {
          throw std::invalid_argument("flip rate must be in [0,1]");
        }
        out.emplace_back(v, 1.0 - h.noise.rho);
        if (h.noise.rho > 0.0) out.emplace_back(-v, h.noise.rho);
        break;
      case LabelNoise::Kind::kAdditive:
        if (h.noise.values.size() != h.noise.probs.size()) {
          throw std::invalid_argument("additive noise: length mismatch");
        }
        check_distribution(h.noise.probs, "additive noise");
        for (std::size_t k = 0; k < h.noise.values.size(); ++k) {
          if (h.noise.probs[k] > 0.0) {
            out.emplace_back(v + h.noise.values[k], h.noise.probs[k]);
          }
        }
        break;
    }
    for (const auto& [y, _] : out) attained.push_back(y);
  }
  auto labels = merge_values(attained);
  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(rows, labels.size());
  for (std::int64_t z = 0; z < rows; ++z) {
    for (const auto& [y, q] : outcomes[z]) cond(z, find_value(labels, y)) += q;
  }
  return JuntaProblem(h.p, sign_marginal(), std::move(labels), std::move(cond));
}

HypercubeJunta random_fourier(int p, const std::vector<Subset>& support,
                              double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(lo, hi);
  HypercubeJunta h;
  h.p = p;
  for (Subset s : support) h.fourier[s] = coef(rng);
  return h;
}

JuntaProblem hard_instance(const std::vector<double>& labels,
                           const std::vector<double>& label_probs,
                           const std::vector<double>& t,
                           const FiniteMarginal& marginal,
                           const std::vector<int>& a, double lambda) {
  const int ny = static_cast<int>(labels.size());
  if (static_cast<int>(label_probs.size()) != ny ||
      static_cast<int>(t.size()) != ny) {
    throw std::invalid_argument("hard instance: label tables differ in length");
  }
  check_distribution(label_probs, "label marginal");
  double mean_t = 0.0;
  for (int k = 0; k < ny; ++k) {
    if (std::abs(t[k]) > 1.0) {
      throw std::invalid_argument("hard instance: |T| must be at most 1");
    }
    mean_t += label_probs[k] * t[k];
  }
  if (std::abs(mean_t) > 1e-12) {
    throw std::invalid_argument("hard instance: T is not zero-mean");
  }
  const int nx = marginal.size();
  std::vector<bool> in_a(nx, false);
  double mu_a = 0.0;
  for (int idx : a) {
    if (idx < 0 || idx >= nx) throw std::invalid_argument("A outside X");
    if (!in_a[idx]) mu_a += marginal.probs[idx];
    in_a[idx] = true;
  }
  if (!(mu_a > 0.0 && mu_a < 1.0)) {
    throw std::invalid_argument("hard instance: mu_x(A) must be in (0,1)");
  }
  if (!(lambda > (1.0 - mu_a) / mu_a)) {
    throw std::invalid_argument(
        "hard instance: lambda must exceed (1 - mu(A)) / mu(A)");
  }
  // P(z in A | y); bounded in (0,1) by the lambda condition.
  std::vector<double> pa(ny);
  for (int k = 0; k < ny; ++k) {
    pa[k] = (1.0 - mu_a) * t[k] / lambda + mu_a;
    if (!(pa[k] > 0.0 && pa[k] < 1.0)) {
      throw std::invalid_argument("hard instance: P(A|y) leaves (0,1)");
    }
  }
  Eigen::MatrixXd cond(nx, ny);
  for (int x = 0; x < nx; ++x) {
    const double px = marginal.probs[x];
    for (int k = 0; k < ny; ++k) {
      double joint = 0.0;
      if (px > 0.0) {
        joint = in_a[x] ? label_probs[k] * (px / mu_a) * pa[k]
                        : label_probs[k] * (px / (1.0 - mu_a)) * (1.0 - pa[k]);
      }
      cond(x, k) = px > 0.0 ? joint / px : label_probs[k];
    }
    // The row sums to 1 analytically; remove roundoff so validation holds.
    cond.row(x) /= cond.row(x).sum();
  }
  return JuntaProblem(1, marginal, labels, std::move(cond));
}

PlantedInstance::PlantedInstance(JuntaProblem prob, int dim,
                                 std::vector<int> s, std::uint64_t sd)
    : problem(std::move(prob)), d(dim), s_star(std::move(s)), seed(sd) {
  if (static_cast<int>(s_star.size()) != problem.p()) {
    throw std::invalid_argument("s_star must list exactly P coordinates");
  }
  if (d < problem.p()) throw std::invalid_argument("d must be at least P");
  auto sorted = s_star;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("s_star entries must be distinct");
  }
  if (sorted.front() < 0 || sorted.back() >= d) {
    throw std::invalid_argument("s_star entries must lie in [d]");
  }
}

std::vector<int> PlantedInstance::support_sorted() const {
  auto out = s_star;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> random_planting(int p, int d, std::mt19937_64& rng) {
  std::vector<int> all(d);
  std::iota(all.begin(), all.end(), 0);
  // Partial Fisher-Yates.
  for (int i = 0; i < p; ++i) {
    std::uniform_int_distribution<int> pick(i, d - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(p);
  return all;
}

Sampler::Sampler(const PlantedInstance& instance)
    : Sampler(instance, instance.seed) {}

Sampler::Sampler(const PlantedInstance& instance, std::uint64_t seed)
    : inst_(instance), rng_(seed) {
  const auto& m = instance.problem.marginal();
  double acc = 0.0;
  for (double q : m.probs) symbol_cdf_.push_back(acc += q);
  sign_fast_ = m.size() == 2 && m.probs[0] == 0.5;
}

SampleSet Sampler::draw(int n) {
  const auto& prob = inst_.problem;
  const auto& m = prob.marginal();
  const int d = inst_.d;
  const int nx = m.size();
  const int ny = prob.num_labels();
  SampleSet out;
  out.x.resize(n, d);
  out.y.resize(n);
  out.label.resize(n);
  std::vector<int> sym(d);
  std::vector<double> row_cdf(ny);
  for (int r = 0; r < n; ++r) {
    if (sign_fast_) {
      std::uint64_t bits = 0;
      for (int i = 0; i < d; ++i) {
        if (i % 64 == 0) bits = rng_();
        sym[i] = static_cast<int>(bits & 1);
        bits >>= 1;
      }
    } else {
      for (int i = 0; i < d; ++i) {
        sym[i] = draw_index(symbol_cdf_.data(), nx, uniform01(rng_));
      }
    }
    for (int i = 0; i < d; ++i) out.x(r, i) = m.values[sym[i]];
    std::int64_t z = 0;
    for (int i = prob.p() - 1; i >= 0; --i) z = z * nx + sym[inst_.s_star[i]];
    double acc = 0.0;
    for (int k = 0; k < ny; ++k) row_cdf[k] = acc += prob.cond()(z, k);
    const int k = draw_index(row_cdf.data(), ny, uniform01(rng_));
    out.label[r] = k;
    out.y[r] = prob.labels()[k];
  }
  return out;
}

Subset subset_from_key(const std::string& key) {
  std::vector<int> coords;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part.erase(std::remove_if(part.begin(), part.end(), ::isspace), part.end());
    if (part.empty()) continue;
    std::size_t used = 0;
    int c = 0;
    try {
      c = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size()) {
      throw std::invalid_argument("bad coordinate '" + part + "' in key '" +
                                  key + "'");
    }
    coords.push_back(c);
  }
  return subset_from_coords(coords);
}

std::string subset_key(Subset s) {
  std::string out;
  for (int c : subset_to_coords(s)) {
    if (!out.empty()) out += ',';
    out += std::to_string(c);
  }
  return out;
}

HypercubeJunta hypercube_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items()) {
    if (key != "P" && key != "fourier" && key != "noise") {
      throw std::invalid_argument("unknown hypercube key '" + key + "'");
    }
  }
  HypercubeJunta h;
  h.p = j.at("P").get<int>();
  for (const auto& [key, coef] : j.at("fourier").items()) {
    h.fourier[subset_from_key(key)] = coef.get<double>();
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    const auto kind = n.at("kind").get<std::string>();
    if (kind == "none") {
      h.noise.kind = LabelNoise::Kind::kNone;
    } else if (kind == "flip") {
      h.noise.kind = LabelNoise::Kind::kFlip;
      h.noise.rho = n.at("rho").get<double>();
    } else if (kind == "additive") {
      h.noise.kind = LabelNoise::Kind::kAdditive;
      h.noise.values = n.at("values").get<std::vector<double>>();
      h.noise.probs = n.at("probs").get<std::vector<double>>();
    } else {
      throw std::invalid_argument("unknown noise kind '" + kind + "'");
    }
    for (const auto& [key, _] : n.items()) {
      if (key != "kind" && key != "rho" && key != "values" && key != "probs") {
        throw std::invalid_argument("unknown noise key '" + key + "'");
      }
    }
  }
  return h;
}

JuntaProblem problem_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("problem must be an object");
  if (j.contains("hypercube")) {
    if (j.size() != 1) {
      throw std::invalid_argument("hypercube problem takes no sibling keys");
    }
    return expand_hypercube(hypercube_from_json(j.at("hypercube")));
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "P" && key != "marginal" && key != "labels" && key != "cond") {
      throw std::invalid_argument("unknown problem key '" + key + "'");
    }
  }
  const int p = j.at("P").get<int>();
  const auto& m = j.at("marginal");
  FiniteMarginal marginal(m.at("values").get<std::vector<double>>(),
                          m.at("probs").get<std::vector<double>>());
  std::vector<double> labels;
  bool numeric = true;
  const auto& jl = j.at("labels");
  for (std::size_t k = 0; k < jl.size(); ++k) {
    if (jl[k].is_number()) {
      labels.push_back(jl[k].get<double>());
    } else {
      numeric = false;
    }
  }
  if (!numeric) {
    // Symbolic labels: SQ analysis only, keyed by position.
    labels.resize(jl.size());
    std::iota(labels.begin(), labels.end(), 0.0);
  }
  const auto& jc = j.at("cond");
  Eigen::MatrixXd cond(jc.size(), labels.size());
  for (std::size_t z = 0; z < jc.size(); ++z) {
    if (jc[z].size() != labels.size()) {
      throw std::invalid_argument("cond row " + std::to_string(z) +
                                  " has wrong length");
    }
    for (std::size_t k = 0; k < labels.size(); ++k) {
      cond(z, k) = jc[z][k].get<double>();
    }
  }
  return JuntaProblem(p, std::move(marginal), std::move(labels),
                      std::move(cond), numeric);
}

nlohmann::json problem_to_json(const JuntaProblem& problem) {
  nlohmann::json cond = nlohmann::json::array();
  for (Eigen::Index z = 0; z < problem.cond().rows(); ++z) {
    std::vector<double> row(problem.cond().cols());
    for (Eigen::Index k = 0; k < problem.cond().cols(); ++k) {
      row[k] = problem.cond()(z, k);
    }
    cond.push_back(row);
  }
  return {{"P", problem.p()},
          {"marginal",
           {{"values", problem.marginal().values},
            {"probs", problem.marginal().probs}}},
          {"labels", problem.labels()},
          {"cond", cond}};
}

JuntaProblem random_problem(std::mt19937_64& rng, int max_x, int max_y,
                            int max_p) {
  auto uniform_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const int nx = uniform_int(2, max_x);
  const int ny = uniform_int(2, max_y);
  const int p = uniform_int(1, max_p);

  static const std::vector<std::vector<double>> kLaws2 = {
      {0.5, 0.5}, {0.25, 0.75}, {0.75, 0.25}};
  static const std::vector<std::vector<double>> kLaws3 = {
      {0.25, 0.25, 0.5}, {0.5, 0.25, 0.25}, {0.25, 0.5, 0.25},
      {0.125, 0.375, 0.5}};
  std::vector<double> probs;
  if (nx == 2) {
    probs = kLaws2[uniform_int(0, 2)];
  } else if (nx == 3) {
    probs = kLaws3[uniform_int(0, 3)];
  } else {
    probs.assign(nx, 1.0 / nx);
  }
  std::vector<double> pool = {-2.0, -1.0, 0.0, 1.0, 2.0, 3.0};
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<double> xs(pool.begin(), pool.begin() + nx);

  std::vector<double> ypool = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0};
  std::shuffle(ypool.begin(), ypool.end(), rng);
  std::vector<double> ys(ypool.begin(), ypool.begin() + ny);

  JuntaProblem shape(p, FiniteMarginal(xs, probs), ys,
                     Eigen::MatrixXd::Constant(checked_power(nx, p), ny,
                                               1.0 / ny));
  const std::int64_t rows = shape.num_assignments();
  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(rows, ny);

  // Deterministic core: a random table, or a symmetric function of the
  // relevant coordinates, which produces many exact zeros.
  const int kind = uniform_int(0, 2);
  std::vector<int> table(uniform_int(2, 7));
  for (int& v : table) v = uniform_int(0, ny - 1);
  const Subset relevant = static_cast<Subset>(uniform_int(1, (1 << p) - 1));
  for (std::int64_t z = 0; z < rows; ++z) {
    const auto s = shape.symbols(z);
    int k = 0;
    if (kind == 0) {
      k = uniform_int(0, ny - 1);
    } else {
      int acc = 0;
      for (int i : subset_members(relevant)) {
        acc += kind == 1 ? s[i] : (s[i] == 0 ? 1 : 0);
      }
      k = table[acc % table.size()];
    }
    cond(z, k) = 1.0;
  }
  // Optional independent label noise keeps the zero pattern intact.
  if (uniform_int(0, 2) == 0) {
    Eigen::RowVectorXd noise = Eigen::RowVectorXd::Zero(ny);
    noise[uniform_int(0, ny - 1)] += 0.5;
    noise[uniform_int(0, ny - 1)] += 0.5;
    cond = 0.75 * cond + 0.25 * Eigen::VectorXd::Ones(rows) * noise;
  }
  return JuntaProblem(p, FiniteMarginal(xs, probs), ys, std::move(cond));
}

}  // namespace juntaq
