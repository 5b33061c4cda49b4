#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recall/corpus.hpp"
#include "recall/prefixes.hpp"
#include "recall/scoring.hpp"

namespace recall {

enum class Attack {
  loss,
  reference,
  zlib,
  neighbor,
  mink,
  minkpp,
  recall,
  recall_ensemble,
};

std::string to_string(Attack attack);
Attack parse_attack(const std::string& name);

struct AttackParams {
  std::optional<double> k_percent;     // min-k variants
  std::optional<std::size_t> n_shots;  // recall
  std::optional<std::size_t> n_groups; // recall_ensemble
};

// A named membership score. `raw` keeps the attack's native formula;
// `canonical` is oriented so that higher always means "more likely
// member": canonical = raw for recall, recall_ensemble, and minkpp,
// canonical = -raw for loss, reference, zlib, neighbor, and mink.
struct AttackScore {
  Attack attack = Attack::loss;
  double raw = 0.0;
  double canonical = 0.0;
  AttackParams params;
};

double canonical_of(Attack attack, double raw);
AttackScore make_attack_score(Attack attack, double raw,
                              AttackParams params = {});

// The conditional likelihood ratio: LL(x|P) / LL(x). Requires ll_uncond strictly
// negative; values within 1e-12 of zero are degenerate.
double recall_score(double ll_cond, double ll_uncond);

// Cross-entropy per token: -mean_ll.
double loss_score(const TokenScores& ts);

// Target loss calibrated by a reference model's loss on the same text.
double reference_score(const TokenScores& ts_target,
                       const TokenScores& ts_reference);

// Bytes in the RFC-1950 (zlib container) DEFLATE stream of `data` at
// compression level 6, default strategy.
std::size_t compressed_size_bytes(const std::string& data);

// Loss divided by the zlib-compressed size of the raw text.
double zlib_score(const TokenScores& ts, const std::string& raw_text);

// Loss relative to the mean loss of user-supplied neighbor texts.
double neighbor_score(const TokenScores& ts,
                      const std::vector<TokenScores>& neighbor_ts);

// Mean of -logprob over the m = max(1, floor(k_percent/100 * n)) tokens
// with the lowest logprobs; ties broken toward earlier positions. At
// k_percent = 100 this is bit-for-bit equal to loss_score.
double mink_score(const TokenScores& ts, double k_percent);

// Min-K%++: per-token s_t = (logprob_t - mu_t) / max(sigma_t, 1e-8) using
// full-vocabulary moments; mean of the m lowest s_t (m as in mink_score).
// Canonical orientation is +raw. Requires ts.moments.
double minkpp_score(const TokenScores& ts, double k_percent);

// Mean over groups of recall_score(mean_ll(x | group), mean_ll(x)); the
// unconditional LL is computed once. One group reduces to the plain ratio,
// which is also how the single-prefix attack is evaluated (`kind` names
// the attack in the returned score).
AttackScore ensemble_recall(const ScoringBackend& backend, const Record& x,
                            const std::vector<Prefix>& groups,
                            Attack kind = Attack::recall_ensemble);

}  // namespace recall
