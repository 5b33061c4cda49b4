#include "recall/prefixes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "recall/errors.hpp"
#include "recall/rng.hpp"

namespace recall {

Prefix build_prefix(const std::vector<Record>& shots,
                    const std::string& separator, bool allow_member_shots) {
  if (shots.empty()) throw DataError("prefix needs at least one shot");
  if (!allow_member_shots)
    for (const Record& shot : shots)
      if (shot.label != Label::nonmember)
        throw DataError("prefix shot \"" + shot.id +
                        "\" is a member record; member prefixes require the "
                        "explicit override");
  Prefix prefix;
  prefix.shots = shots;
  prefix.separator = separator;
  for (const Record& shot : shots) {
    prefix.text += shot.text;
    prefix.text += separator;
  }
  return prefix;
}

std::vector<Prefix> sweep_shot_counts(const PrefixPool& pool,
                                      std::size_t n_max,
                                      const std::string& separator) {
  if (n_max == 0) throw DataError("sweep needs n_max >= 1");
  if (n_max > pool.shots.size())
    throw DataError("sweep n_max " + std::to_string(n_max) +
                    " exceeds pool size " + std::to_string(pool.shots.size()));
  std::vector<Prefix> prefixes;
  prefixes.reserve(n_max);
  for (std::size_t n = 1; n <= n_max; ++n)
    prefixes.push_back(build_prefix(
        std::vector<Record>(pool.shots.begin(), pool.shots.begin() + n),
        separator));
  return prefixes;
}

std::vector<std::vector<Record>> group_shots(const std::vector<Record>& shots,
                                             std::size_t g) {
  if (g < 1 || g > shots.size())
    throw DataError("group count must be between 1 and the shot count");
  std::vector<std::vector<Record>> groups;
  groups.reserve(g);
  const std::size_t base = shots.size() / g;
  const std::size_t extra = shots.size() % g;
  std::size_t at = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    groups.emplace_back(shots.begin() + at, shots.begin() + at + size);
    at += size;
  }
  return groups;
}

namespace {

std::vector<std::string> tokenize_terms(const std::string& text) {
  std::vector<std::string> terms;
  std::string current;
  for (const char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

}  // namespace

TfidfIndex::TfidfIndex(const std::vector<Record>& corpus) {
  if (corpus.empty()) throw DataError("TF-IDF index needs a nonempty corpus");
  std::vector<std::unordered_map<std::string, std::size_t>> tf(corpus.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (std::string& term : tokenize_terms(corpus[d].text)) ++tf[d][term];
    for (const auto& [term, _] : tf[d]) ++df[term];
  }
  std::size_t column = 0;
  idf_.reserve(df.size());
  const double n_docs = static_cast<double>(corpus.size());
  for (const auto& [term, doc_freq] : df) {
    vocabulary_[term] = column++;
    idf_.push_back(std::log((1.0 + n_docs) /
                            (1.0 + static_cast<double>(doc_freq))) +
                   1.0);
  }
  doc_vectors_.reserve(corpus.size());
  for (const Record& record : corpus) doc_vectors_.push_back(vectorize(record.text));
}

std::vector<std::pair<std::size_t, double>> TfidfIndex::vectorize(
    const std::string& text) const {
  std::map<std::size_t, double> weights;
  for (const std::string& term : tokenize_terms(text)) {
    const auto it = vocabulary_.find(term);
    if (it != vocabulary_.end()) weights[it->second] += 1.0;
  }
  double norm_sq = 0.0;
  for (auto& [column, weight] : weights) {
    weight *= idf_[column];
    norm_sq += weight * weight;
  }
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(weights.size());
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (const auto& [column, weight] : weights)
      out.emplace_back(column, weight * inv);
  }
  return out;
}

double TfidfIndex::cosine(
    const std::vector<std::pair<std::size_t, double>>& a,
    const std::vector<std::pair<std::size_t, double>>& b) {
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (a[i].first > b[j].first) {
      ++j;
    } else {
      dot += a[i].second * b[j].second;
      ++i;
      ++j;
    }
  }
  return dot;
}

SelectMode parse_select_mode(const std::string& name) {
  if (name == "most") return SelectMode::most;
  if (name == "moderate") return SelectMode::moderate;
  if (name == "least") return SelectMode::least;
  if (name == "random") return SelectMode::random;
  throw UsageError("unknown similarity mode: " + name);
}

std::string to_string(SelectMode mode) {
  switch (mode) {
    case SelectMode::most: return "most";
    case SelectMode::moderate: return "moderate";
    case SelectMode::least: return "least";
    case SelectMode::random: return "random";
  }
  return "?";
}

std::vector<Record> select_dynamic(const TfidfIndex& index,
                                   const Record& target,
                                   const std::vector<Record>& candidates,
                                   std::size_t n, SelectMode mode,
                                   std::uint64_t seed) {
  if (n > candidates.size())
    throw DataError("dynamic selection: need " + std::to_string(n) +
                    " candidates, have " + std::to_string(candidates.size()));
  if (n == 0) throw DataError("dynamic selection: n must be >= 1");
  for (const Record& candidate : candidates)
    if (candidate.id == target.id)
      throw DataError("dynamic selection: candidates must exclude the target");

  if (mode == SelectMode::random) {
    SplitMix64 rng(seed);
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    std::vector<Record> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(candidates[idx[i]]);
    return out;
  }

  const auto target_vec = index.vectorize(target.text);
  std::vector<std::pair<double, std::size_t>> ranked;  // (similarity, index)
  ranked.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    ranked.emplace_back(
        TfidfIndex::cosine(target_vec, index.vectorize(candidates[i].text)),
        i);
  std::sort(ranked.begin(), ranked.end(),
            [&](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;  // descending
              return candidates[a.second].id < candidates[b.second].id;
            });

  std::size_t start = 0;
  switch (mode) {
    case SelectMode::most:
      start = 0;
      break;
    case SelectMode::least:
      start = candidates.size() - n;
      break;
    case SelectMode::moderate:
      start = (candidates.size() - n) / 2;
      break;
    case SelectMode::random:
      break;  // handled above
  }
  std::vector<Record> out;
  out.reserve(n);
  for (std::size_t i = start; i < start + n; ++i)
    out.push_back(candidates[ranked[i].second]);
  return out;
}

}  // namespace recall
