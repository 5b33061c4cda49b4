#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "recall/errors.hpp"
#include "recall/metrics.hpp"
#include "recall/rng.hpp"

using namespace recall;

namespace {

std::vector<LabeledScore> scores_of(const std::vector<double>& members,
                                    const std::vector<double>& nonmembers) {
  std::vector<LabeledScore> out;
  for (const double s : members) out.push_back({s, Label::member});
  for (const double s : nonmembers) out.push_back({s, Label::nonmember});
  return out;
}

// Seeded score set with deliberate ties (values quantized to tenths).
std::vector<LabeledScore> random_tied_scores(std::uint64_t seed,
                                             std::size_t n_members,
                                             std::size_t n_nonmembers,
                                             double shift) {
  SplitMix64 rng(seed);
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < n_members; ++i)
    out.push_back({static_cast<double>(rng.below(20)) / 10.0 + shift,
                   Label::member});
  for (std::size_t i = 0; i < n_nonmembers; ++i)
    out.push_back(
        {static_cast<double>(rng.below(20)) / 10.0, Label::nonmember});
  return out;
}

}  // namespace

TEST_CASE("auc counts correctly ordered pairs") {
  CHECK(auc(scores_of({0.9, 0.7}, {0.8, 0.1})) == 0.75);
  CHECK(auc(scores_of({1.0, 1.0}, {0.0, 0.0})) == 1.0);
  CHECK(auc(scores_of({0.0}, {1.0})) == 0.0);
  // Ties count half.
  CHECK(auc(scores_of({1.0}, {1.0})) == 0.5);
  CHECK(auc(scores_of({1.0, 2.0}, {1.0, 2.0})) == 0.5);
}

TEST_CASE("auc matches the independent reference on a tied random case") {
  // Same construction as the reference oracle: 37 members, 43 nonmembers,
  // values below(20)/10 from one seed-321 stream, no shift.
  SplitMix64 rng(321);
  std::vector<LabeledScore> scores;
  for (int i = 0; i < 37; ++i)
    scores.push_back(
        {static_cast<double>(rng.below(20)) / 10.0, Label::member});
  for (int i = 0; i < 43; ++i)
    scores.push_back(
        {static_cast<double>(rng.below(20)) / 10.0, Label::nonmember});
  CHECK(auc(scores) == doctest::Approx(0.5194846008799497).epsilon(1e-15));
}

TEST_CASE("auc needs both classes") {
  CHECK_THROWS_AS(auc(scores_of({1.0}, {})), DataError);
  CHECK_THROWS_AS(auc(scores_of({}, {1.0})), DataError);
  CHECK_THROWS_AS(auc({}), DataError);
}

TEST_CASE("label flip mirrors auc around one half") {
  const auto scores = random_tied_scores(55, 31, 29, 0.4);
  std::vector<LabeledScore> flipped = scores;
  for (LabeledScore& s : flipped)
    s.label = s.label == Label::member ? Label::nonmember : Label::member;
  CHECK(auc(scores) + auc(flipped) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("trapezoid auc equals pair-count auc within 1e-9, with ties") {
  SplitMix64 seed_stream(9001);
  for (int trial = 0; trial < 50; ++trial) {
    const auto scores =
        random_tied_scores(seed_stream.next(), 20 + trial, 25, 0.3);
    CHECK(std::abs(auc(scores) - auc_trapezoid(scores)) <= 1e-9);
  }
}

TEST_CASE("roc_curve endpoints, monotonicity, and tie grouping") {
  const auto scores = scores_of({0.9, 0.7, 0.7}, {0.7, 0.2});
  const RocCurve curve = roc_curve(scores);
  REQUIRE(!curve.points.empty());
  CHECK(curve.points.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(curve.points.back() == std::pair<double, double>{1.0, 1.0});
  CHECK(curve.thresholds.front() ==
        std::numeric_limits<double>::infinity());
  REQUIRE(curve.thresholds.size() == curve.points.size());
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].first >= curve.points[i - 1].first);
    CHECK(curve.points[i].second >= curve.points[i - 1].second);
    CHECK(curve.thresholds[i] <= curve.thresholds[i - 1]);
  }
  // The three scores at 0.7 (two member, one nonmember) form one tie group
  // and therefore one ROC point: (0,0), 0.9, 0.7-group, 0.2 -> 4 points.
  CHECK(curve.points.size() == 4);
}

TEST_CASE("tpr_at_fpr takes the best point at or below the cap") {
  // 100 nonmembers: one false positive is exactly 1% FPR.
  std::vector<LabeledScore> scores;
  for (int i = 0; i < 50; ++i)
    scores.push_back({10.0 + i, Label::member});  // top scores
  scores.push_back({9.5, Label::nonmember});      // first nonmember below all members
  for (int i = 0; i < 99; ++i)
    scores.push_back({static_cast<double>(i) / 100.0, Label::nonmember});
  // All members above all nonmembers: TPR 1.0 reachable at FPR 0.
  CHECK(tpr_at_fpr(scores, 0.01) == 1.0);

  // Now put one nonmember above every member: reaching any member costs
  // one false positive = 1% -> at cap 0.01 full TPR, at cap 0.005 nothing.
  scores.push_back({1000.0, Label::nonmember});
  // 101 nonmembers now; 1 FP = 1/101 < 0.01: still allowed.
  CHECK(tpr_at_fpr(scores, 0.01) == 1.0);
  CHECK(tpr_at_fpr(scores, 0.005) == 0.0);

  CHECK_THROWS_AS(tpr_at_fpr(scores, 0.0), DataError);
  CHECK_THROWS_AS(tpr_at_fpr(scores, 1.0), DataError);
}

TEST_CASE("permutation_pvalue matches the independent reference") {
  // Frozen from the reference implementation (same generator, carried
  // index permutation, p = (count + 1) / (iterations + 1)).
  CHECK(permutation_pvalue({1.0, 2.0, 3.0}, {0.5, 1.5}, 999, 4242) == 0.215);
  CHECK(permutation_pvalue({5.0, 6.0, 7.0, 8.0}, {1.0, 2.0, 3.0, 4.0}, 999,
                           1) == 0.015);
  CHECK(permutation_pvalue({5.0, 6.0, 7.0, 8.0}, {1.0, 2.0, 3.0, 4.0}, 199,
                           7) == 0.01);
}

TEST_CASE("permutation_pvalue properties") {
  // Deterministic for one seed.
  const double p1 = permutation_pvalue({3.0, 4.0}, {1.0, 2.0}, 500, 9);
  const double p2 = permutation_pvalue({3.0, 4.0}, {1.0, 2.0}, 500, 9);
  CHECK(p1 == p2);
  // Bounded by construction.
  CHECK(p1 >= 1.0 / 501.0);
  CHECK(p1 <= 1.0);
  // A strong real effect on larger groups gets a small p.
  std::vector<double> hi, lo;
  for (int i = 0; i < 40; ++i) {
    hi.push_back(10.0 + i * 0.01);
    lo.push_back(1.0 + i * 0.01);
  }
  CHECK(permutation_pvalue(hi, lo, 1999, 4242) == 1.0 / 2000.0);
  // No effect: p stays large.
  CHECK(permutation_pvalue(lo, lo, 999, 4242) > 0.3);
  CHECK_THROWS_AS(permutation_pvalue({}, {1.0}, 10, 1), DataError);
}

TEST_CASE("shot_sweep_report marks the best row and keeps overflow rows") {
  std::vector<std::pair<std::size_t, std::optional<std::vector<LabeledScore>>>>
      rows;
  // n=1: weak separation; n=2: perfect; n=3: perfect (tie, larger n);
  // n=4: overflow.
  rows.emplace_back(1, scores_of({0.6, 0.4}, {0.5, 0.3}));
  rows.emplace_back(2, scores_of({0.9, 0.8}, {0.2, 0.1}));
  rows.emplace_back(3, scores_of({0.9, 0.8}, {0.2, 0.1}));
  rows.emplace_back(4, std::nullopt);

  const std::vector<SweepRow> report = shot_sweep_report(rows);
  REQUIRE(report.size() == 4);
  CHECK(report[0].n_shots == 1);
  CHECK(!report[0].overflow);
  CHECK(report[0].auc == 0.75);
  CHECK(!report[0].best);
  CHECK(report[1].auc == 1.0);
  CHECK(report[1].best);  // tie broken toward the smaller shot count
  CHECK(report[2].auc == 1.0);
  CHECK(!report[2].best);
  CHECK(report[3].overflow);
  CHECK(!report[3].best);
}
