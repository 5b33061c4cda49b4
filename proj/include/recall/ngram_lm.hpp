#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recall/scoring.hpp"

namespace recall {

// Embedded deterministic byte-level interpolated n-gram language model.
// Vocabulary: 256 byte values plus one end-of-sequence symbol. Probability
// of symbol b after byte history h is the interpolation over component
// orders k = 1..order of add-k estimates
//   (count(h_k, b) + smoothing_k) / (count(h_k, .) + smoothing_k * 257)
// where h_k is the last k-1 bytes of h (shorter near the start of a text).
class NgramModel {
 public:
  static constexpr int kVocabSize = 257;
  static constexpr int kEosSymbol = 256;

  NgramModel(int order, double smoothing_k, std::vector<double> weights);

  // Accumulates every k-gram (k = 1..order) of every corpus item, with the
  // end-of-sequence symbol counted once per item as its final symbol.
  // Pure counting: item order never matters.
  void train(const std::vector<std::string>& corpus);

  // ln of the interpolated add-k probability. Uses at most order-1
  // trailing bytes of `history`; always finite and < 0.
  double token_logprob(std::string_view history, int symbol) const;

  // Mean and population standard deviation of token_logprob over the full
  // 257-symbol vocabulary at `history`.
  Moment vocab_moments(std::string_view history) const;

  int order() const { return order_; }
  double smoothing_k() const { return smoothing_k_; }
  const std::vector<double>& weights() const { return weights_; }
  bool trained() const { return !rows_.empty(); }

  // Versioned JSON container; save -> load -> token_logprob round-trips
  // exactly (counts are integers, reals serialized losslessly).
  void save(const std::string& path) const;
  static NgramModel load(const std::string& path);

 private:
  struct Row {
    std::uint64_t total = 0;
    // (symbol, count), sorted by symbol.
    std::vector<std::pair<std::uint16_t, std::uint32_t>> entries;
    std::uint32_t count(int symbol) const;
    void increment(int symbol);
  };

  struct SvHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  struct SvEq {
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const {
      return a == b;
    }
  };

  const Row* find_row(std::string_view history) const;

  int order_;
  double smoothing_k_;
  std::vector<double> weights_;
  std::unordered_map<std::string, Row, SvHash, SvEq> rows_;
};

// ScoringBackend over an NgramModel. Tokens are single bytes; the optional
// terminal end-of-sequence symbol is exposed through score_sequence. The
// context window is unlimited unless a limit is configured.
class NgramBackend : public ScoringBackend {
 public:
  explicit NgramBackend(std::shared_ptr<const NgramModel> model,
                        std::optional<std::size_t> max_context_tokens = {});

  std::string name() const override;
  CapabilitySet capabilities() const override;
  TokenScores score_target(std::string_view context,
                           std::string_view target) const override;
  TokenScores score_sequence(std::string_view context,
                             std::string_view target) const override;

  // As score_sequence, with per-position full-vocabulary moments attached.
  TokenScores score_sequence_with_moments(std::string_view context,
                                          std::string_view target) const;

  const NgramModel& model() const { return *model_; }

 private:
  TokenScores score_impl(std::string_view context, std::string_view target,
                         bool terminal_eos, bool with_moments) const;

  std::shared_ptr<const NgramModel> model_;
  std::optional<std::size_t> max_context_tokens_;
};

}  // namespace recall
