#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "recall/corpus.hpp"
#include "recall/prefixes.hpp"
#include "recall/scoring.hpp"

namespace recall {

// Mean conditional-minus-unconditional log-probability change at one
// target-token position, over the sequences long enough to reach it.
struct PositionDelta {
  std::size_t position = 0;
  double mean_delta_ll = 0.0;
  std::size_t n_sequences = 0;
};

// Per-position LL-change profile for one (target group | prefix group)
// condition, e.g. "M|NM" = member targets under a nonmember prefix.
// n_sequences is non-increasing with position (shorter sequences drop
// out); the end-of-sequence symbol is excluded.
struct TokenDeltaProfile {
  std::string condition;
  std::vector<PositionDelta> positions;
  std::size_t skipped_records = 0;  // conditional/unconditional length mismatch
};

// Membership of a prefix: "M" if every shot is a member, "NM" if every
// shot is a nonmember, "MIXED" otherwise.
std::string prefix_membership(const Prefix& prefix);

TokenDeltaProfile token_delta_profile(const ScoringBackend& backend,
                                      const Dataset& dataset,
                                      const Prefix& prefix, Label group);

struct LLShiftRow {
  std::string id;
  Label label = Label::nonmember;
  double mean_ll_uncond = 0.0;
  double mean_ll_cond = 0.0;
  double delta = 0.0;  // cond - uncond
};

struct LLShiftGroup {
  std::size_t n = 0;
  double mean_ll_uncond = 0.0;
  double mean_ll_cond = 0.0;
  double mean_delta = 0.0;
};

// Per-group means of mean_ll(x), mean_ll(x|P) and their difference, plus
// per-record rows for plotting. Requires both classes in the dataset.
struct LLShiftSummary {
  std::map<std::string, LLShiftGroup> groups;  // keyed "member"/"nonmember"
  std::vector<LLShiftRow> rows;
};

LLShiftSummary ll_shift_summary(const ScoringBackend& backend,
                                const Dataset& dataset, const Prefix& prefix);

// CSV: position,condition,mean_delta_ll,n
void write_profiles_csv(const std::vector<TokenDeltaProfile>& profiles,
                        const std::string& path);

// JSON plot data: profiles plus the LL shift summary.
void write_analysis_json(const std::vector<TokenDeltaProfile>& profiles,
                         const LLShiftSummary& summary,
                         const std::string& path);

}  // namespace recall
