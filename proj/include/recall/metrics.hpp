#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "recall/corpus.hpp"

namespace recall {

// One canonical attack score with its ground-truth label. Members are the
// positive class everywhere.
struct LabeledScore {
  double score = 0.0;
  Label label = Label::nonmember;
};

// Empirical ROC; fpr/tpr non-decreasing along the curve, first point (0,0),
// last point (1,1). thresholds[i] is the score cut producing points[i]
// (+infinity for the initial point).
struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  std::vector<double> thresholds;
};

// AUC via the Mann-Whitney statistic: fraction of (member, nonmember)
// pairs ordered correctly, ties counted 0.5. Needs both classes present.
double auc(const std::vector<LabeledScore>& scores);

// AUC as the trapezoidal area under the empirical ROC. Equal to auc()
// within accumulation error; kept as an independent implementation.
double auc_trapezoid(const std::vector<LabeledScore>& scores);

RocCurve roc_curve(const std::vector<LabeledScore>& scores);

// Maximum TPR over empirical ROC points with fpr <= fpr_cap (no
// interpolation). fpr_cap in (0,1).
double tpr_at_fpr(const std::vector<LabeledScore>& scores, double fpr_cap);

// One-sided permutation test for mean(member scores) > mean(nonmember
// scores); returns (count_of_permutations_at_least_as_extreme + 1) /
// (iterations + 1). Deterministic for a given seed.
double permutation_pvalue(const std::vector<double>& member_scores,
                          const std::vector<double>& nonmember_scores,
                          std::size_t iterations, std::uint64_t seed);

// One row of a shot-count sweep. Rows whose prefix overflowed the backend
// context carry no metrics.
struct SweepRow {
  std::size_t n_shots = 0;
  bool overflow = false;
  double auc = 0.0;
  double tpr_at_1pct = 0.0;
  bool best = false;
};

// Fills in the best-AUC marker: highest AUC among non-overflow rows, ties
// broken toward the smallest shot count. Input rows must be distinct shot
// counts; output preserves order.
std::vector<SweepRow> shot_sweep_report(
    const std::vector<std::pair<std::size_t,
                                std::optional<std::vector<LabeledScore>>>>&
        per_shot_scores);

}  // namespace recall
