#include <sstream>

#include <doctest.h>

#include "juntaq/oracle.hpp"

using namespace juntaq;

namespace {
JuntaProblem cube(int p, const std::vector<std::vector<int>>& sets) {
  HypercubeJunta h;
  h.p = p;
  for (const auto& s : sets) h.fourier[subset_from_coords(s)] = 1.0;
  return expand_hypercube(h);
}

JuntaProblem staircase() { return cube(4, {{1}, {1, 2}, {1, 2, 3}, {1, 2, 3, 4}}); }
}  // namespace

TEST_CASE("planted and null expectations of a product query") {
  const JuntaProblem p = cube(2, {{1}, {1, 2}});
  Eigen::VectorXd chi(2);
  chi << 1, -1;
  const Eigen::VectorXd y = p.label_vector();
  const Query on = product_query(y, {3}, {chi});
  const Query off = product_query(y, {0}, {chi});
  // E[y z_1] = 1 when coordinate 3 carries z_1.
  CHECK(planted_expectation(p, {3, 5}, 8, on) == doctest::Approx(1.0));
  CHECK(planted_expectation(p, {3, 5}, 8, off) == doctest::Approx(0.0).scale(1));
  CHECK(null_expectation(p, on) == doctest::Approx(0.0).scale(1));
  const double ey2 = y.cwiseProduct(y).dot(p.label_marginal());
  CHECK(null_norm(p, on) == doctest::Approx(std::sqrt(ey2)));
}

TEST_CASE("honest answers stay within tolerance in every noise mode") {
  const JuntaProblem p = staircase();
  const DetectReport rep = detect_csq(p);
  for (auto mode : {NoiseMode::kZero, NoiseMode::kUniform,
                    NoiseMode::kAdversarialSign}) {
    PlantedInstance inst(p, 12, {7, 2, 9, 0}, 1);
    HonestOracle oracle(inst, rep.beta / 4, mode, 2);
    const auto res = adaptive_learner(12, 4, rep, oracle);
    CHECK(res.status == LearnStatus::kRecovered);
    CHECK(res.s_hat == inst.support_sorted());
    CHECK(transcript_sound(res.transcript));
    CHECK(noise_mode_from_name(noise_mode_name(mode)) == mode);
  }
}

TEST_CASE("transcripts serialize one query per line") {
  const JuntaProblem p = staircase();
  const DetectReport rep = detect_csq(p);
  PlantedInstance inst(p, 6, {1, 0, 5, 3}, 1);
  HonestOracle oracle(inst, rep.beta / 4, NoiseMode::kZero);
  const auto res = adaptive_learner(6, 4, rep, oracle);
  std::istringstream in(res.transcript.jsonl());
  std::string line;
  std::int64_t lines = 0;
  while (std::getline(in, line)) {
    CHECK(nlohmann::json::parse(line).is_object());
    ++lines;
  }
  CHECK(lines == res.transcript.queries());
}

TEST_CASE("a tampered transcript is unsound") {
  Transcript t;
  t.tau = 0.1;
  TranscriptEntry e;
  e.exact = 0.5;
  e.norm = 1.0;
  e.response = 0.55;
  t.entries.push_back(e);
  CHECK(transcript_sound(t));
  t.entries[0].response = 0.7;
  CHECK_FALSE(transcript_sound(t));
}

TEST_CASE("non-adaptive and grouped learners") {
  const JuntaProblem p = staircase();
  const DetectReport rep = detect_csq(p);
  PlantedInstance inst(p, 8, {6, 1, 3, 4}, 1);
  HonestOracle o1(inst, rep.beta / 4, NoiseMode::kAdversarialSign);
  const auto na = nonadaptive_learner(8, 4, rep, o1);
  CHECK(na.s_hat == inst.support_sorted());
  CHECK(na.max_tuple == 4);

  HonestOracle o2(inst, rep.beta / (4 * std::sqrt(8.0)),
                  NoiseMode::kAdversarialSign);
  const auto gr = grouped_learner(8, 4, rep, o2);
  CHECK(gr.first_hit > 0);
  CHECK(gr.grouped_queries > 0);

  const auto y2 = cube(4, {{1, 2, 3}, {1, 2, 4}, {1, 3, 4}, {2, 3, 4}});
  PlantedInstance inst2(y2, 8, {0, 1, 2, 3}, 1);
  HonestOracle o3(inst2, 0.01, NoiseMode::kZero);
  CHECK_THROWS_AS(grouped_learner(8, 4, detect_csq(y2), o3), std::domain_error);
}

TEST_CASE("the adversary defeats a learner limited to pairs") {
  const auto y2 = cube(4, {{1, 2, 3}, {1, 2, 4}, {1, 3, 4}, {2, 3, 4}});
  const DetectReport rep = detect_csq(y2);
  AdversarialOracle adv(y2, 6, rep.beta / 4);
  const auto basis = gram_schmidt(y2.marginal());
  const auto res = probe_learner(6, 4, rep, basis, adv, 2);
  CHECK(adv.survivors() > 1);
  CHECK(adv.refute(res.s_hat).has_value());
}
