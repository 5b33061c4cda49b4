#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recall/corpus.hpp"

namespace recall {

// An ordered list of shots plus the conditioning string they concatenate
// to: p1 + sep + p2 + sep + ... + pn + sep. The trailing separator keeps
// the target from fusing with the last shot.
struct Prefix {
  std::vector<Record> shots;
  std::string separator;
  std::string text;
};

// Builds the concatenation. Every shot must be a nonmember unless
// allow_member_shots is set (the member-prefix comparison experiment).
Prefix build_prefix(const std::vector<Record>& shots,
                    const std::string& separator,
                    bool allow_member_shots = false);

// Nested prefixes over the first n pool shots for n = 1..n_max: prefix n
// extends prefix n-1.
std::vector<Prefix> sweep_shot_counts(const PrefixPool& pool,
                                      std::size_t n_max,
                                      const std::string& separator);

// Splits shots into g contiguous groups whose sizes differ by at most one
// (earlier groups take the extra); concatenated back, they reproduce the
// input exactly.
std::vector<std::vector<Record>> group_shots(const std::vector<Record>& shots,
                                             std::size_t g);

// TF-IDF index over a corpus: terms are lowercased maximal ASCII
// alphanumeric runs, tf is the raw in-document count, idf is
// ln((1+N)/(1+df)) + 1, and document vectors are L2-normalized.
class TfidfIndex {
 public:
  explicit TfidfIndex(const std::vector<Record>& corpus);

  // Sparse L2-normalized vector of a text under this index's vocabulary
  // and idf weights; terms outside the vocabulary are dropped. Entries are
  // sorted by term column. Empty texts give the zero vector.
  std::vector<std::pair<std::size_t, double>> vectorize(
      const std::string& text) const;

  static double cosine(const std::vector<std::pair<std::size_t, double>>& a,
                       const std::vector<std::pair<std::size_t, double>>& b);

  const std::map<std::string, std::size_t>& vocabulary() const {
    return vocabulary_;
  }
  const std::vector<double>& idf() const { return idf_; }
  // Per-corpus-document vectors, in corpus order.
  const std::vector<std::vector<std::pair<std::size_t, double>>>& doc_vectors()
      const {
    return doc_vectors_;
  }

 private:
  std::map<std::string, std::size_t> vocabulary_;
  std::vector<double> idf_;
  std::vector<std::vector<std::pair<std::size_t, double>>> doc_vectors_;
};

enum class SelectMode { most, moderate, least, random };

SelectMode parse_select_mode(const std::string& name);
std::string to_string(SelectMode mode);

// Ranks candidates by TF-IDF cosine similarity to the target (descending,
// ties by id) and returns n of them: the top (most), the bottom (least),
// the n centered on the median rank (moderate), or a seeded uniform draw
// (random). Candidates must exclude the target's id.
std::vector<Record> select_dynamic(const TfidfIndex& index,
                                   const Record& target,
                                   const std::vector<Record>& candidates,
                                   std::size_t n, SelectMode mode,
                                   std::uint64_t seed);

}  // namespace recall
