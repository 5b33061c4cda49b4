#include "synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace recall::synth {

namespace {

constexpr const char* kConsonants = "bcdfghjklmnprstvz";  // 17
constexpr const char* kVowels = "aeiou";
constexpr const char* kOpenerConsonants = "ktgz";

// Consonant-vowel pairs banned from every lexicon word: the opener
// consonants with every opener vowel, plus the two closer pairs "da"
// (book A) and "bo" (book B).
bool reserved_pair(char c, char v) {
  for (const char* oc = kOpenerConsonants; *oc; ++oc)
    if (c == *oc && (v == 'a' || v == 'o' || v == 'i' || v == 'u')) return true;
  return (c == 'd' && v == 'a') || (c == 'b' && v == 'o');
}

std::vector<std::string> make_openers(const std::string& vowels) {
  std::vector<std::string> out;
  for (const char* c = kOpenerConsonants; *c; ++c)
    for (const char v : vowels)
      out.push_back({*c, v, *c, v});
  return out;
}

char pick_vowel(SplitMix64& rng, char c) {
  std::string allowed;
  for (const char* v = kVowels; *v; ++v)
    if (!reserved_pair(c, *v)) allowed.push_back(*v);
  return allowed[rng.below(allowed.size())];
}

std::string make_word(SplitMix64& rng, int n_syllables) {
  std::string w;
  for (int s = 0; s < n_syllables; ++s) {
    const char c = kConsonants[rng.below(17)];
    w.push_back(c);
    w.push_back(pick_vowel(rng, c));
  }
  return w;
}

std::vector<std::string> make_lexicon(SplitMix64& rng, std::size_t n, int lo,
                                      int hi,
                                      std::unordered_set<std::string>& seen) {
  std::vector<std::string> words;
  words.reserve(n);
  std::size_t attempts = 0;
  while (words.size() < n) {
    if (++attempts > 4000000)
      throw std::runtime_error("synthetic lexicon exhausted");
    std::string w = make_word(
        rng, lo + static_cast<int>(rng.below(
                      static_cast<std::uint64_t>(hi - lo + 1))));
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

// Cumulative zipf(s) distribution over ranks 0..n-1; last entry forced to
// 1.0 so a unit draw always lands.
std::vector<double> zipf_cum(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  double t = 0.0;
  for (const double x : w) t += x;
  std::vector<double> c;
  c.reserve(n);
  double acc = 0.0;
  for (const double x : w) {
    acc += x / t;
    c.push_back(acc);
  }
  c.back() = 1.0;
  return c;
}

std::size_t pick(SplitMix64& rng, const std::vector<double>& cum) {
  const double u = rng.unit();
  std::size_t lo = 0;
  std::size_t hi = cum.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cum[mid] < u)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

// Word lengths for a final sentence that must occupy exactly
// 9 + sum(1 + len_i) bytes: find m words with lengths in {4, 6, 8} such
// that m + sum(len_i) == Q. Each length-4 word costs 5 bytes, length-8
// costs 9, and the parity of the cost sum is the parity of m.
std::optional<std::vector<int>> solve_final(int q) {
  for (int m = 1; 5 * m <= q; ++m) {
    if (m % 2 == q % 2 && q <= 9 * m) {
      std::vector<int> lens(static_cast<std::size_t>(m), 4);
      int steps = (q - 5 * m) / 2;
      int i = 0;
      while (steps) {
        if (lens[static_cast<std::size_t>(i % m)] < 8) {
          lens[static_cast<std::size_t>(i % m)] += 2;
          --steps;
        }
        ++i;
      }
      return lens;
    }
  }
  return std::nullopt;
}

std::map<int, std::vector<std::string>> by_length(
    const std::vector<std::string>& lexicon) {
  std::map<int, std::vector<std::string>> out{{4, {}}, {6, {}}, {8, {}}};
  for (const std::string& w : lexicon) {
    const auto it = out.find(static_cast<int>(w.size()));
    if (it != out.end()) it->second.push_back(w);
  }
  for (const auto& [len, pool] : out)
    if (pool.empty())
      throw std::runtime_error("synthetic corpus: no words of length " +
                               std::to_string(len));
  return out;
}

struct BookSpec {
  const std::vector<std::string>* openers = nullptr;
  std::string closer;
  std::string punct;
  const std::vector<std::string>* commons = nullptr;
  const std::vector<double>* cum = nullptr;
  const std::map<int, std::vector<std::string>>* by_len = nullptr;
  const std::vector<std::string>* rares = nullptr;
  double rho = 0.0;
  int nw_lo = 0;
  int nw_hi = 0;
};

std::string join_sentence(const std::vector<std::string>& words,
                          const std::string& punct) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s.push_back(' ');
    s += words[i];
  }
  return s + punct;
}

std::string gen_sentence(SplitMix64& rng, const BookSpec& bs) {
  std::vector<std::string> words;
  words.push_back((*bs.openers)[rng.below(bs.openers->size())]);
  const int nw =
      bs.nw_lo + static_cast<int>(rng.below(
                     static_cast<std::uint64_t>(bs.nw_hi - bs.nw_lo + 1)));
  for (int i = 0; i < nw; ++i) {
    if (bs.rho > 0.0 && rng.unit() < bs.rho)
      words.push_back((*bs.rares)[rng.below(bs.rares->size())]);
    else
      words.push_back((*bs.commons)[pick(rng, *bs.cum)]);
  }
  words.push_back(bs.closer);
  return join_sentence(words, bs.punct);
}

std::string gen_paragraph(SplitMix64& rng, const BookSpec& bs) {
  // Any sentence of at most cap bytes leaves room to keep going; below
  // cap the remainder is closed out with a solved-to-length sentence.
  const int cap = 9 + bs.nw_hi * 9 + 12;
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<std::string> sents;
    int rem = 256;
    bool ok = true;
    while (rem > cap) {
      bool found = false;
      std::string s;
      for (int t = 0; t < 200; ++t) {
        s = gen_sentence(rng, bs);
        if (static_cast<int>(s.size()) <= rem - 12) {
          found = true;
          break;
        }
      }
      if (!found) {
        ok = false;
        break;
      }
      rem -= static_cast<int>(s.size());
      sents.push_back(std::move(s));
    }
    if (!ok) continue;
    const auto lens = solve_final(rem - 9);
    if (!lens) continue;
    std::vector<std::string> words;
    words.push_back((*bs.openers)[rng.below(bs.openers->size())]);
    for (const int len : *lens) {
      const std::vector<std::string>& pool = bs.by_len->at(len);
      words.push_back(pool[rng.below(pool.size())]);
    }
    words.push_back(bs.closer);
    std::string para;
    for (const std::string& s : sents) para += s;
    para += join_sentence(words, bs.punct);
    if (para.size() != 256)
      throw std::runtime_error("synthetic paragraph size " +
                               std::to_string(para.size()));
    return para;
  }
  throw std::runtime_error("synthetic paragraph solver stuck");
}

}  // namespace

SyntheticCorpus build_corpus(const CorpusConfig& config) {
  std::unordered_set<std::string> seen;
  SplitMix64 rng_lex(config.lex_seed);
  const std::vector<std::string> commons = make_lexicon(
      rng_lex, config.n_common, config.syl_lo, config.syl_hi, seen);
  SplitMix64 rng_rare(config.rare_seed);
  const std::vector<std::string> rares = make_lexicon(
      rng_rare, config.n_rare, config.rare_lo, config.rare_hi, seen);
  const std::vector<double> cum = zipf_cum(commons.size(), config.zipf_s);
  const std::map<int, std::vector<std::string>> buckets = by_length(commons);

  const std::vector<std::string> openers_a = make_openers("ao");
  const std::vector<std::string> openers_b = make_openers("iu");

  BookSpec book_a;
  book_a.openers = &openers_a;
  book_a.closer = "da";
  book_a.punct = ".\n";
  book_a.commons = &commons;
  book_a.cum = &cum;
  book_a.by_len = &buckets;
  book_a.rares = &rares;
  book_a.rho = config.rho;
  book_a.nw_lo = config.nw_lo;
  book_a.nw_hi = config.nw_hi;

  BookSpec book_b = book_a;
  book_b.openers = &openers_b;
  book_b.closer = "bo";
  book_b.punct = ". ";
  book_b.rho = 0.0;

  SyntheticCorpus corpus;
  corpus.members.reserve(config.n_paragraphs);
  corpus.nonmembers.reserve(config.n_paragraphs);
  SplitMix64 rng_a(config.book_seed_members);
  for (std::size_t i = 0; i < config.n_paragraphs; ++i)
    corpus.members.push_back(gen_paragraph(rng_a, book_a));
  SplitMix64 rng_b(config.book_seed_nonmembers);
  for (std::size_t i = 0; i < config.n_paragraphs; ++i)
    corpus.nonmembers.push_back(gen_paragraph(rng_b, book_b));
  return corpus;
}

std::vector<double> model_weights() { return {0.1, 0.15, 0.25, 0.25, 0.25}; }

NgramModel train_model(const SyntheticCorpus& corpus) {
  NgramModel model(kOrder, kSmoothingK, model_weights());
  model.train(corpus.members);
  return model;
}

Dataset make_dataset(const SyntheticCorpus& corpus) {
  Dataset dataset;
  dataset.source = "synthetic two-book corpus";
  char id[32];
  for (std::size_t i = 0; i < corpus.members.size(); ++i) {
    std::snprintf(id, sizeof id, "member-%03zu", i);
    dataset.records.push_back({id, corpus.members[i], Label::member});
  }
  for (std::size_t i = 0; i < corpus.nonmembers.size(); ++i) {
    std::snprintf(id, sizeof id, "nonmember-%03zu", i);
    dataset.records.push_back({id, corpus.nonmembers[i], Label::nonmember});
  }
  return dataset;
}

std::vector<std::size_t> draw_without_replacement(SplitMix64& rng,
                                                  std::size_t n,
                                                  std::size_t m) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

std::uint64_t fnv1a(const std::vector<std::string>& texts) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const std::string& t : texts)
    for (const char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  return h;
}

}  // namespace recall::synth
