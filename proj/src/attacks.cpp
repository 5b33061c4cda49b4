#include "recall/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <zlib.h>

#include "recall/errors.hpp"

namespace recall {

std::string to_string(Attack attack) {
  switch (attack) {
    case Attack::loss: return "loss";
    case Attack::reference: return "reference";
    case Attack::zlib: return "zlib";
    case Attack::neighbor: return "neighbor";
    case Attack::mink: return "mink";
    case Attack::minkpp: return "minkpp";
    case Attack::recall: return "recall";
    case Attack::recall_ensemble: return "recall_ensemble";
  }
  return "?";
}

Attack parse_attack(const std::string& name) {
  if (name == "loss") return Attack::loss;
  if (name == "reference") return Attack::reference;
  if (name == "zlib") return Attack::zlib;
  if (name == "neighbor") return Attack::neighbor;
  if (name == "mink") return Attack::mink;
  if (name == "minkpp") return Attack::minkpp;
  if (name == "recall") return Attack::recall;
  if (name == "recall_ensemble") return Attack::recall_ensemble;
  throw UsageError("unknown attack: " + name);
}

double canonical_of(Attack attack, double raw) {
  switch (attack) {
    case Attack::recall:
    case Attack::recall_ensemble:
    case Attack::minkpp:
      return raw;
    case Attack::loss:
    case Attack::reference:
    case Attack::zlib:
    case Attack::neighbor:
    case Attack::mink:
      return -raw;
  }
  return raw;
}

AttackScore make_attack_score(Attack attack, double raw, AttackParams params) {
  AttackScore score;
  score.attack = attack;
  score.raw = raw;
  score.canonical = canonical_of(attack, raw);
  score.params = params;
  return score;
}

double recall_score(double ll_cond, double ll_uncond) {
  if (ll_uncond >= -1e-12)
    throw DegenerateLL(
        "unconditional log-likelihood too close to zero for a ratio: " +
        std::to_string(ll_uncond));
  return ll_cond / ll_uncond;
}

double loss_score(const TokenScores& ts) {
  return -sequence_ll(ts).mean_ll;
}

double reference_score(const TokenScores& ts_target,
                       const TokenScores& ts_reference) {
  return loss_score(ts_target) - loss_score(ts_reference);
}

std::size_t compressed_size_bytes(const std::string& data) {
  if (data.empty()) throw DataError("zlib score: empty text");
  uLongf bound = compressBound(static_cast<uLong>(data.size()));
  std::vector<Bytef> buffer(bound);
  const int rc = compress2(buffer.data(), &bound,
                           reinterpret_cast<const Bytef*>(data.data()),
                           static_cast<uLong>(data.size()),
                           /*level=*/6);
  if (rc != Z_OK) throw Error("zlib compress2 failed: " + std::to_string(rc));
  return static_cast<std::size_t>(bound);
}

double zlib_score(const TokenScores& ts, const std::string& raw_text) {
  return loss_score(ts) /
         static_cast<double>(compressed_size_bytes(raw_text));
}

double neighbor_score(const TokenScores& ts,
                      const std::vector<TokenScores>& neighbor_ts) {
  if (neighbor_ts.empty()) throw DataError("neighbor score: no neighbors");
  double sum = 0.0;
  for (const TokenScores& n : neighbor_ts) sum += loss_score(n);
  return loss_score(ts) - sum / static_cast<double>(neighbor_ts.size());
}

namespace {

// Indices of the m lowest values, ties toward earlier positions, returned
// in ascending position order so downstream sums are order-stable.
std::vector<std::size_t> lowest_m_positions(const std::vector<double>& values,
                                            double k_percent) {
  const std::size_t n = values.size();
  const std::size_t m = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::floor(k_percent / 100.0 * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void check_k_percent(double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0))
    throw DataError("k_percent must be in (0, 100]");
}

}  // namespace

double mink_score(const TokenScores& ts, double k_percent) {
  check_k_percent(k_percent);
  if (ts.logprobs.empty()) throw DataError("mink score: empty token scores");
  const std::vector<std::size_t> chosen =
      lowest_m_positions(ts.logprobs, k_percent);
  double sum = 0.0;
  for (const std::size_t i : chosen) sum += -ts.logprobs[i];
  return sum / static_cast<double>(chosen.size());
}

double minkpp_score(const TokenScores& ts, double k_percent) {
  check_k_percent(k_percent);
  if (ts.logprobs.empty()) throw DataError("minkpp score: empty token scores");
  if (!ts.moments.has_value())
    throw UnsupportedCapability(
        "minkpp requires full-vocabulary moments, absent from these token "
        "scores");
  constexpr double kSigmaFloor = 1e-8;
  std::vector<double> normalized(ts.logprobs.size());
  for (std::size_t i = 0; i < ts.logprobs.size(); ++i) {
    const Moment& m = (*ts.moments)[i];
    normalized[i] =
        (ts.logprobs[i] - m.mu) / std::max(m.sigma, kSigmaFloor);
  }
  const std::vector<std::size_t> chosen =
      lowest_m_positions(normalized, k_percent);
  double sum = 0.0;
  for (const std::size_t i : chosen) sum += normalized[i];
  return sum / static_cast<double>(chosen.size());
}

AttackScore ensemble_recall(const ScoringBackend& backend, const Record& x,
                            const std::vector<Prefix>& groups, Attack kind) {
  if (groups.empty()) throw DataError("ensemble recall: no prefix groups");
  const SequenceLL uncond = sequence_ll(backend.score_sequence("", x.text));
  double sum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    SequenceLL cond;
    try {
      cond = sequence_ll(backend.score_sequence(groups[g].text, x.text));
    } catch (const ContextOverflow& overflow) {
      throw ContextOverflow(overflow.context_tokens, overflow.target_tokens,
                            overflow.max_tokens, static_cast<long>(g));
    }
    sum += recall_score(cond.mean_ll, uncond.mean_ll);
  }
  AttackParams params;
  params.n_groups = groups.size();
  params.n_shots = groups.front().shots.size();
  return make_attack_score(kind, sum / static_cast<double>(groups.size()),
                           params);
}

}  // namespace recall
