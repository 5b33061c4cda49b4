#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recall {

// Full-vocabulary moments of the log-probability distribution at one
// position: mu = mean, sigma = population standard deviation.
struct Moment {
  double mu = 0.0;
  double sigma = 0.0;
};

// Per-token natural-log probabilities of a target span scored under an
// optional conditioning context.
struct TokenScores {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;                 // each <= 0
  std::optional<std::vector<Moment>> moments;   // per position, if supported
  std::size_t context_len_tokens = 0;
  // Remote-backend diagnostics, surfaced into run reports: a first prompt
  // token whose logprob the API reports as null was dropped; a token
  // straddled the context/target boundary (counted as target).
  bool dropped_null_first = false;
  bool straddled_boundary = false;
};

struct SequenceLL {
  double sum_ll = 0.0;
  double mean_ll = 0.0;
  std::size_t token_count = 0;
};

struct CapabilitySet {
  bool per_token_logprobs = false;
  bool full_vocab_moments = false;
  // Empty optional = unlimited context.
  std::optional<std::size_t> max_context_tokens;
};

// Backend-independent scoring contract. Implementations must be safe for
// concurrent score calls (all state immutable after construction).
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;

  virtual std::string name() const = 0;
  virtual CapabilitySet capabilities() const = 0;

  // Scores exactly the tokens of `target` as tokenized within the
  // concatenation context + target; context tokens are excluded, and each
  // logprob is conditioned on all preceding tokens. Empty context yields
  // the unconditional scores. Never includes an end-of-sequence symbol, so
  // the chain rule sum_ll("", a+b) = sum_ll("", a) + sum_ll(a, b) holds
  // whenever tokenization splits at the a/b boundary.
  virtual TokenScores score_target(std::string_view context,
                                   std::string_view target) const = 0;

  // Scores `target` as the *final* span of a complete sequence. Backends
  // with an explicit end-of-sequence symbol (the embedded n-gram model)
  // append its score as one last token so that per-sequence likelihoods
  // are proper probabilities; backends without one return score_target
  // unchanged. Sequence-level likelihoods (LL(x), LL(x|P)) use this.
  virtual TokenScores score_sequence(std::string_view context,
                                     std::string_view target) const {
    return score_target(context, target);
  }
};

// sum_ll = sum of logprobs; mean_ll = sum_ll / token_count.
SequenceLL sequence_ll(const TokenScores& scores);

}  // namespace recall
