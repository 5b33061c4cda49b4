#include "recall/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "recall/errors.hpp"

namespace recall {

namespace {

constexpr double kWeightSumTolerance = 1e-12;

std::string to_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xF]);
  }
  return out;
}

std::string from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0)
    throw DataError("model file: odd-length history key");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw DataError("model file: bad hex digit in history key");
  };
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<char>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  return out;
}

}  // namespace

std::uint32_t NgramModel::Row::count(int symbol) const {
  const auto it = std::lower_bound(
      entries.begin(), entries.end(), symbol,
      [](const auto& e, int s) { return e.first < s; });
  if (it != entries.end() && it->first == symbol) return it->second;
  return 0;
}

void NgramModel::Row::increment(int symbol) {
  const auto it = std::lower_bound(
      entries.begin(), entries.end(), symbol,
      [](const auto& e, int s) { return e.first < s; });
  if (it != entries.end() && it->first == symbol) {
    ++it->second;
  } else {
    entries.insert(it, {static_cast<std::uint16_t>(symbol), 1u});
  }
  ++total;
}

NgramModel::NgramModel(int order, double smoothing_k,
                       std::vector<double> weights)
    : order_(order), smoothing_k_(smoothing_k), weights_(std::move(weights)) {
  if (order_ < 1) throw DataError("ngram order must be >= 1");
  if (smoothing_k_ <= 0.0) throw DataError("smoothing_k must be > 0");
  if (weights_.size() != static_cast<std::size_t>(order_))
    throw DataError("invalid weights: need exactly " + std::to_string(order_) +
                    " interpolation weights");
  double sum = 0.0;
  for (const double w : weights_) {
    if (w < 0.0) throw DataError("invalid weights: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance)
    throw DataError("invalid weights: must sum to 1");
}

void NgramModel::train(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  for (const std::string& text : corpus) {
    const std::size_t len = text.size();
    // Position len scores the end-of-sequence symbol.
    for (std::size_t i = 0; i <= len; ++i) {
      const int symbol =
          i < len ? static_cast<unsigned char>(text[i]) : kEosSymbol;
      const std::size_t hist_len =
          std::min<std::size_t>(i, static_cast<std::size_t>(order_ - 1));
      const std::string_view hist =
          std::string_view(text).substr(i - hist_len, hist_len);
      for (std::size_t hl = 0; hl <= hist_len; ++hl) {
        const std::string_view h = hist.substr(hist.size() - hl, hl);
        const auto it = rows_.find(h);
        if (it != rows_.end()) {
          it->second.increment(symbol);
        } else {
          rows_[std::string(h)].increment(symbol);
        }
      }
    }
  }
}

const NgramModel::Row* NgramModel::find_row(std::string_view history) const {
  const auto it = rows_.find(history);
  return it == rows_.end() ? nullptr : &it->second;
}

double NgramModel::token_logprob(std::string_view history, int symbol) const {
  const std::size_t max_hist = static_cast<std::size_t>(order_ - 1);
  if (history.size() > max_hist)
    history = history.substr(history.size() - max_hist);
  double p = 0.0;
  for (int ki = 1; ki <= order_; ++ki) {
    const std::size_t hl = static_cast<std::size_t>(ki - 1);
    const std::size_t use = std::min(hl, history.size());
    const std::string_view h = history.substr(history.size() - use, use);
    const Row* row = find_row(h);
    double component;
    if (row == nullptr) {
      component = 1.0 / kVocabSize;  // all-zero counts: exactly uniform
    } else {
      component = (row->count(symbol) + smoothing_k_) /
                  (static_cast<double>(row->total) + smoothing_k_ * kVocabSize);
    }
    p += weights_[static_cast<std::size_t>(ki - 1)] * component;
  }
  return std::log(p);
}

Moment NgramModel::vocab_moments(std::string_view history) const {
  const std::size_t max_hist = static_cast<std::size_t>(order_ - 1);
  if (history.size() > max_hist)
    history = history.substr(history.size() - max_hist);

  // Accumulate the interpolated probability of every symbol at once:
  // each component contributes a constant "unseen" mass plus, for the
  // symbols present in its count row, count/(total + k*257). Matches the
  // per-symbol token_logprob to within rounding.
  double probs[kVocabSize];
  double base = 0.0;
  struct Pending {
    const Row* row;
    double scale;  // weight / (total + k*257)
  };
  std::vector<Pending> pending;
  pending.reserve(static_cast<std::size_t>(order_));
  for (int ki = 1; ki <= order_; ++ki) {
    const std::size_t hl = static_cast<std::size_t>(ki - 1);
    const std::size_t use = std::min(hl, history.size());
    const std::string_view h = history.substr(history.size() - use, use);
    const Row* row = find_row(h);
    const double w = weights_[static_cast<std::size_t>(ki - 1)];
    if (row == nullptr) {
      base += w * (1.0 / kVocabSize);
    } else {
      const double denom =
          static_cast<double>(row->total) + smoothing_k_ * kVocabSize;
      base += w * (smoothing_k_ / denom);
      pending.push_back({row, w / denom});
    }
  }
  std::fill(std::begin(probs), std::end(probs), base);
  for (const Pending& p : pending)
    for (const auto& [symbol, count] : p.row->entries)
      probs[symbol] += p.scale * static_cast<double>(count);

  double logs[kVocabSize];
  double sum = 0.0;
  for (int s = 0; s < kVocabSize; ++s) {
    logs[s] = std::log(probs[s]);
    sum += logs[s];
  }
  Moment m;
  m.mu = sum / kVocabSize;
  double var = 0.0;
  for (int s = 0; s < kVocabSize; ++s) {
    const double d = logs[s] - m.mu;
    var += d * d;
  }
  var /= kVocabSize;
  m.sigma = var > 0.0 ? std::sqrt(var) : 0.0;
  return m;
}

void NgramModel::save(const std::string& path) const {
  nlohmann::json doc;
  doc["format"] = "recall-ngram";
  doc["version"] = 1;
  doc["order"] = order_;
  doc["smoothing_k"] = smoothing_k_;
  doc["interpolation_weights"] = weights_;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [hist, row] : rows_) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [symbol, count] : row.entries)
      entries.push_back({symbol, count});
    counts[to_hex(hist)] = std::move(entries);
  }
  doc["counts"] = std::move(counts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write model file: " + path);
  out << doc.dump() << '\n';
  if (!out) throw Error("write failure: " + path);
}

NgramModel NgramModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open model file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("model file parse failure: " + std::string(e.what()));
  }
  if (!doc.is_object() || doc.value("format", "") != "recall-ngram")
    throw DataError("not a recall-ngram model file: " + path);
  if (doc.value("version", 0) != 1)
    throw DataError("unsupported model file version in " + path);
  NgramModel model(doc.at("order").get<int>(),
                   doc.at("smoothing_k").get<double>(),
                   doc.at("interpolation_weights").get<std::vector<double>>());
  for (const auto& [hex, entries] : doc.at("counts").items()) {
    Row row;
    for (const auto& entry : entries) {
      const int symbol = entry.at(0).get<int>();
      const std::uint32_t count = entry.at(1).get<std::uint32_t>();
      if (symbol < 0 || symbol >= kVocabSize)
        throw DataError("model file: symbol out of range");
      row.entries.push_back({static_cast<std::uint16_t>(symbol), count});
      row.total += count;
    }
    std::sort(row.entries.begin(), row.entries.end());
    model.rows_[from_hex(hex)] = std::move(row);
  }
  return model;
}

NgramBackend::NgramBackend(std::shared_ptr<const NgramModel> model,
                           std::optional<std::size_t> max_context_tokens)
    : model_(std::move(model)), max_context_tokens_(max_context_tokens) {
  if (!model_) throw DataError("NgramBackend: null model");
}

std::string NgramBackend::name() const {
  return "embedded-ngram(order=" + std::to_string(model_->order()) + ")";
}

CapabilitySet NgramBackend::capabilities() const {
  CapabilitySet caps;
  caps.per_token_logprobs = true;
  caps.full_vocab_moments = true;
  caps.max_context_tokens = max_context_tokens_;
  return caps;
}

TokenScores NgramBackend::score_impl(std::string_view context,
                                     std::string_view target,
                                     bool terminal_eos,
                                     bool with_moments) const {
  if (target.empty()) throw DataError("score: empty target");
  if (max_context_tokens_ &&
      context.size() + target.size() > *max_context_tokens_)
    throw ContextOverflow(context.size(), target.size(), *max_context_tokens_);

  const std::size_t max_hist = static_cast<std::size_t>(model_->order() - 1);
  // Only the last order-1 context bytes can influence any target position.
  const std::size_t tail_len = std::min(max_hist, context.size());
  std::string buffer;
  buffer.reserve(tail_len + target.size());
  buffer.append(context.substr(context.size() - tail_len));
  buffer.append(target);

  TokenScores out;
  const std::size_t n = target.size() + (terminal_eos ? 1 : 0);
  out.tokens.reserve(n);
  out.logprobs.reserve(n);
  if (with_moments) out.moments.emplace();
  out.context_len_tokens = context.size();

  for (std::size_t i = 0; i <= target.size(); ++i) {
    const bool is_eos = i == target.size();
    if (is_eos && !terminal_eos) break;
    const std::size_t pos = tail_len + i;  // position in buffer
    const std::size_t hl = std::min(max_hist, pos);
    const std::string_view hist =
        std::string_view(buffer).substr(pos - hl, hl);
    const int symbol =
        is_eos ? NgramModel::kEosSymbol : static_cast<unsigned char>(target[i]);
    out.tokens.push_back(is_eos ? std::string("<eos>")
                                : std::string(1, target[i]));
    out.logprobs.push_back(model_->token_logprob(hist, symbol));
    if (with_moments) out.moments->push_back(model_->vocab_moments(hist));
  }
  return out;
}

TokenScores NgramBackend::score_target(std::string_view context,
                                       std::string_view target) const {
  return score_impl(context, target, /*terminal_eos=*/false,
                    /*with_moments=*/false);
}

TokenScores NgramBackend::score_sequence(std::string_view context,
                                         std::string_view target) const {
  return score_impl(context, target, /*terminal_eos=*/true,
                    /*with_moments=*/false);
}

TokenScores NgramBackend::score_sequence_with_moments(
    std::string_view context, std::string_view target) const {
  return score_impl(context, target, /*terminal_eos=*/true,
                    /*with_moments=*/true);
}

}  // namespace recall
