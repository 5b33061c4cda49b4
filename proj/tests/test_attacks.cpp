#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "recall/attacks.hpp"
#include "recall/errors.hpp"
#include "recall/ngram_lm.hpp"
#include "recall/rng.hpp"

using namespace recall;

namespace {

TokenScores make_scores(const std::vector<double>& logprobs) {
  TokenScores ts;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    ts.tokens.push_back("t" + std::to_string(i));
    ts.logprobs.push_back(logprobs[i]);
  }
  return ts;
}

std::shared_ptr<NgramModel> small_model() {
  auto model = std::make_shared<NgramModel>(
      3, 0.1, std::vector<double>{0.2, 0.3, 0.5});
  model->train({"the cat sat on the mat", "the dog sat on the log",
                "a cat and a dog met"});
  return model;
}

}  // namespace

TEST_CASE("recall_score worked examples") {
  CHECK(std::abs(recall_score(-4.0, -3.0) - 4.0 / 3.0) < 1e-12);
  CHECK(std::abs(recall_score(-3.3, -3.0) - 1.1) < 1e-12);
  CHECK(recall_score(-2.0, -2.0) == 1.0);
}

TEST_CASE("recall_score rejects degenerate unconditional likelihoods") {
  CHECK_THROWS_AS(recall_score(-1.0, 0.0), DegenerateLL);
  CHECK_THROWS_AS(recall_score(-1.0, -1e-13), DegenerateLL);
  CHECK_THROWS_AS(recall_score(-1.0, 5e-13), DegenerateLL);
  CHECK_NOTHROW(recall_score(-1.0, -1e-11));
}

TEST_CASE("loss_score is the negative mean logprob") {
  const TokenScores ts = make_scores({-1.0, -3.0, -2.0, -4.0});
  CHECK(loss_score(ts) == 2.5);
  CHECK_THROWS_AS(loss_score(make_scores({})), DataError);
}

TEST_CASE("reference_score subtracts the reference loss") {
  const TokenScores target = make_scores({-2.0, -4.0});   // loss 3.0
  const TokenScores reference = make_scores({-1.0, -2.0, -3.0});  // loss 2.0
  CHECK(reference_score(target, reference) == 1.0);
}

TEST_CASE("compressed_size_bytes matches frozen level-6 zlib sizes") {
  CHECK(compressed_size_bytes("the quick brown fox jumps over the lazy dog") ==
        50);
  CHECK(compressed_size_bytes(std::string(200, 'a')) == 12);
}

TEST_CASE("zlib_score divides loss by the compressed byte count") {
  const TokenScores ts = make_scores({-2.0, -4.0});  // loss 3.0
  const std::string text(200, 'a');                  // compresses to 12 bytes
  CHECK(zlib_score(ts, text) == 3.0 / 12.0);
}

TEST_CASE("neighbor_score subtracts the mean neighbor loss") {
  const TokenScores ts = make_scores({-2.0, -4.0});  // loss 3.0
  const std::vector<TokenScores> neighbors{
      make_scores({-1.0, -1.0}),  // loss 1.0
      make_scores({-3.0, -5.0}),  // loss 4.0
  };
  CHECK(neighbor_score(ts, neighbors) == 3.0 - 2.5);
  CHECK_THROWS_AS(neighbor_score(ts, {}), DataError);
}

TEST_CASE("mink_score hand example at several k") {
  const TokenScores ts = make_scores({-1.0, -3.0, -2.0, -4.0});
  CHECK(mink_score(ts, 50.0) == 3.5);   // two lowest: -4, -3
  CHECK(mink_score(ts, 75.0) == 3.0);   // three lowest: -4, -3, -2
  CHECK(mink_score(ts, 1.0) == 4.0);    // m = max(1, floor(0.04)) = 1
  CHECK(mink_score(ts, 100.0) == 2.5);  // all tokens = loss
  CHECK_THROWS_AS(mink_score(ts, 0.0), DataError);
  CHECK_THROWS_AS(mink_score(ts, 101.0), DataError);
}

TEST_CASE("mink_score at k=100 is bit-for-bit the loss") {
  SplitMix64 rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> lps;
    for (std::size_t i = 0; i < n; ++i) lps.push_back(-15.0 * rng.unit());
    const TokenScores ts = make_scores(lps);
    CHECK(mink_score(ts, 100.0) == loss_score(ts));
  }
}

TEST_CASE("minkpp_score matches a brute-force recomputation") {
  const NgramBackend backend(small_model());
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::string text;
    const std::size_t len = 5 + rng.below(30);
    const std::string alphabet = "the cadogsmln ";
    for (std::size_t i = 0; i < len; ++i)
      text.push_back(alphabet[rng.below(alphabet.size())]);
    const TokenScores ts = backend.score_sequence_with_moments("", text);
    const double k = 20.0;
    // Independent recomputation, straight from the definition.
    std::vector<double> s;
    for (std::size_t i = 0; i < ts.logprobs.size(); ++i) {
      const Moment& m = (*ts.moments)[i];
      s.push_back((ts.logprobs[i] - m.mu) / std::max(m.sigma, 1e-8));
    }
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(k / 100.0 * s.size())));
    double expect = 0.0;
    for (std::size_t i = 0; i < m_count; ++i) expect += sorted[i];
    expect /= static_cast<double>(m_count);
    CHECK(minkpp_score(ts, k) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("minkpp_score without moments reports the missing capability") {
  const TokenScores ts = make_scores({-1.0, -2.0});
  CHECK_THROWS_AS(minkpp_score(ts, 20.0), UnsupportedCapability);
}

TEST_CASE("canonical orientation by attack") {
  // Higher canonical score always means "more likely member".
  CHECK(canonical_of(Attack::loss, 2.0) == -2.0);
  CHECK(canonical_of(Attack::reference, 2.0) == -2.0);
  CHECK(canonical_of(Attack::zlib, 2.0) == -2.0);
  CHECK(canonical_of(Attack::neighbor, 2.0) == -2.0);
  CHECK(canonical_of(Attack::mink, 2.0) == -2.0);
  CHECK(canonical_of(Attack::minkpp, -1.5) == -1.5);
  CHECK(canonical_of(Attack::recall, 1.25) == 1.25);
  CHECK(canonical_of(Attack::recall_ensemble, 1.25) == 1.25);
}

TEST_CASE("attack names round-trip through parse/to_string") {
  for (const Attack attack :
       {Attack::loss, Attack::reference, Attack::zlib, Attack::neighbor,
        Attack::mink, Attack::minkpp, Attack::recall,
        Attack::recall_ensemble}) {
    CHECK(parse_attack(to_string(attack)) == attack);
  }
  CHECK_THROWS_AS(parse_attack("unknown-attack"), UsageError);
}

TEST_CASE("ensemble_recall with one group is plain recall") {
  const NgramBackend backend(small_model());
  const Record x{"x", "the cat sat on the log", Label::member};
  const Record shot{"s", "a dog and a cat met", Label::nonmember};
  const Prefix prefix = build_prefix({shot}, "\n\n");

  const AttackScore score =
      ensemble_recall(backend, x, {prefix}, Attack::recall);
  CHECK(score.attack == Attack::recall);

  const SequenceLL uncond = sequence_ll(backend.score_sequence("", x.text));
  const SequenceLL cond =
      sequence_ll(backend.score_sequence(prefix.text, x.text));
  CHECK(score.raw == recall_score(cond.mean_ll, uncond.mean_ll));
  CHECK(score.canonical == score.raw);
  CHECK(score.params.n_groups == 1);
  CHECK(score.params.n_shots == 1);
}

TEST_CASE("ensemble_recall averages per-group ratios") {
  const NgramBackend backend(small_model());
  const Record x{"x", "the dog sat on the mat", Label::member};
  const Record s1{"s1", "a cat met a dog", Label::nonmember};
  const Record s2{"s2", "the log and the mat", Label::nonmember};
  const Prefix p1 = build_prefix({s1}, "\n\n");
  const Prefix p2 = build_prefix({s2}, "\n\n");

  const AttackScore ensemble = ensemble_recall(backend, x, {p1, p2});
  CHECK(ensemble.attack == Attack::recall_ensemble);

  const SequenceLL uncond = sequence_ll(backend.score_sequence("", x.text));
  const double r1 = recall_score(
      sequence_ll(backend.score_sequence(p1.text, x.text)).mean_ll,
      uncond.mean_ll);
  const double r2 = recall_score(
      sequence_ll(backend.score_sequence(p2.text, x.text)).mean_ll,
      uncond.mean_ll);
  CHECK(ensemble.raw == doctest::Approx((r1 + r2) / 2.0).epsilon(1e-15));
  CHECK(ensemble.params.n_groups == 2);
  CHECK_THROWS_AS(ensemble_recall(backend, x, {}), DataError);
}

TEST_CASE("ensemble_recall tags context overflows with the group index") {
  const NgramBackend backend(small_model(), 24);
  const Record x{"x", "the cat sat on the mat", Label::member};  // 22 bytes
  const Record shot{"s", "a long enough prefix shot", Label::nonmember};
  const Prefix prefix = build_prefix({shot}, "\n\n");
  try {
    ensemble_recall(backend, x, {prefix});
    FAIL("expected ContextOverflow");
  } catch (const ContextOverflow& overflow) {
    CHECK(overflow.group_index == 0);
  }
}

TEST_CASE("make_attack_score fills canonical and params") {
  AttackParams params;
  params.k_percent = 20.0;
  const AttackScore s = make_attack_score(Attack::mink, 3.25, params);
  CHECK(s.attack == Attack::mink);
  CHECK(s.raw == 3.25);
  CHECK(s.canonical == -3.25);
  CHECK(s.params.k_percent == 20.0);
}
