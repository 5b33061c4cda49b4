#include "recall/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recall/errors.hpp"
#include "recall/rng.hpp"

namespace recall {

namespace {

void split_by_label(const std::vector<LabeledScore>& scores,
                    std::vector<double>& members,
                    std::vector<double>& nonmembers) {
  for (const LabeledScore& s : scores)
    (s.label == Label::member ? members : nonmembers).push_back(s.score);
  if (members.empty() || nonmembers.empty())
    throw DataError("metrics need at least one member and one nonmember");
}

}  // namespace

double auc(const std::vector<LabeledScore>& scores) {
  std::vector<double> members, nonmembers;
  split_by_label(scores, members, nonmembers);
  std::sort(nonmembers.begin(), nonmembers.end());
  double wins = 0.0;
  for (const double m : members) {
    const auto lo =
        std::lower_bound(nonmembers.begin(), nonmembers.end(), m);
    const auto hi = std::upper_bound(lo, nonmembers.end(), m);
    wins += static_cast<double>(lo - nonmembers.begin()) +
            0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(members.size()) *
                 static_cast<double>(nonmembers.size()));
}

RocCurve roc_curve(const std::vector<LabeledScore>& scores) {
  std::vector<double> members, nonmembers;
  split_by_label(scores, members, nonmembers);

  std::vector<LabeledScore> sorted = scores;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LabeledScore& a, const LabeledScore& b) {
                     return a.score > b.score;
                   });
  const double p = static_cast<double>(members.size());
  const double n = static_cast<double>(nonmembers.size());

  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < sorted.size()) {
    const double threshold = sorted[i].score;
    // Consume the whole tie group so ties share one ROC point.
    while (i < sorted.size() && sorted[i].score == threshold) {
      if (sorted[i].label == Label::member)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.emplace_back(static_cast<double>(fp) / n,
                              static_cast<double>(tp) / p);
    curve.thresholds.push_back(threshold);
  }
  return curve;
}

double auc_trapezoid(const std::vector<LabeledScore>& scores) {
  const RocCurve curve = roc_curve(scores);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& [fpr0, tpr0] = curve.points[i - 1];
    const auto& [fpr1, tpr1] = curve.points[i];
    area += (fpr1 - fpr0) * (tpr0 + tpr1) * 0.5;
  }
  return area;
}

double tpr_at_fpr(const std::vector<LabeledScore>& scores, double fpr_cap) {
  if (!(fpr_cap > 0.0 && fpr_cap < 1.0))
    throw DataError("fpr_cap must be in (0,1)");
  const RocCurve curve = roc_curve(scores);
  double best = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i)
    if (curve.points[i].first <= fpr_cap)
      best = std::max(best, curve.points[i].second);
  return best;
}

double permutation_pvalue(const std::vector<double>& member_scores,
                          const std::vector<double>& nonmember_scores,
                          std::size_t iterations, std::uint64_t seed) {
  if (member_scores.empty() || nonmember_scores.empty())
    throw DataError("permutation test needs both classes");
  double sum_m = 0.0, sum_all = 0.0;
  for (const double s : member_scores) sum_m += s;
  std::vector<double> all = member_scores;
  all.insert(all.end(), nonmember_scores.begin(), nonmember_scores.end());
  for (const double s : all) sum_all += s;
  const std::size_t n_m = member_scores.size();
  const std::size_t n_total = all.size();
  const double observed =
      sum_m / static_cast<double>(n_m) -
      (sum_all - sum_m) / static_cast<double>(n_total - n_m);

  SplitMix64 rng(seed);
  std::vector<std::size_t> idx(n_total);
  for (std::size_t i = 0; i < n_total; ++i) idx[i] = i;
  std::size_t at_least_as_extreme = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    // Partial Fisher-Yates; carrying the permuted state across iterations
    // keeps every draw exchangeable and the whole test deterministic.
    for (std::size_t i = 0; i < n_m; ++i) {
      const std::size_t j = i + rng.below(n_total - i);
      std::swap(idx[i], idx[j]);
    }
    double sum_perm = 0.0;
    for (std::size_t i = 0; i < n_m; ++i) sum_perm += all[idx[i]];
    const double diff =
        sum_perm / static_cast<double>(n_m) -
        (sum_all - sum_perm) / static_cast<double>(n_total - n_m);
    if (diff >= observed) ++at_least_as_extreme;
  }
  return static_cast<double>(at_least_as_extreme + 1) /
         static_cast<double>(iterations + 1);
}

std::vector<SweepRow> shot_sweep_report(
    const std::vector<std::pair<std::size_t,
                                std::optional<std::vector<LabeledScore>>>>&
        per_shot_scores) {
  if (per_shot_scores.empty())
    throw DataError("shot sweep needs at least one shot count");
  std::vector<SweepRow> rows;
  rows.reserve(per_shot_scores.size());
  for (const auto& [n_shots, maybe_scores] : per_shot_scores) {
    SweepRow row;
    row.n_shots = n_shots;
    if (maybe_scores.has_value()) {
      row.auc = auc(*maybe_scores);
      row.tpr_at_1pct = tpr_at_fpr(*maybe_scores, 0.01);
    } else {
      row.overflow = true;
    }
    rows.push_back(row);
  }
  const SweepRow* best = nullptr;
  for (const SweepRow& row : rows) {
    if (row.overflow) continue;
    if (best == nullptr || row.auc > best->auc ||
        (row.auc == best->auc && row.n_shots < best->n_shots))
      best = &row;
  }
  if (best != nullptr)
    for (SweepRow& row : rows)
      if (&row == best) row.best = true;
  return rows;
}

}  // namespace recall
