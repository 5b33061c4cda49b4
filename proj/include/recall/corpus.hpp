#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace recall {

enum class Label { member, nonmember };

std::string to_string(Label label);

// One labeled text sample.
struct Record {
  std::string id;    // stable identifier, unique within a Dataset
  std::string text;  // non-empty UTF-8
  Label label = Label::nonmember;
};

// An ordered collection of records plus a provenance note describing where
// it came from and what protocol steps (pool split, balancing) produced it.
struct Dataset {
  std::vector<Record> records;
  std::string source;

  std::size_t member_count() const;
  std::size_t nonmember_count() const;
};

// Nonmember records reserved for prefix construction, disjoint (by id)
// from the evaluation set they were carved out of.
struct PrefixPool {
  std::vector<Record> shots;  // all nonmember, in draw order
  std::uint64_t seed = 0;
};

struct LoadOptions {
  // Maps source field names to canonical ones, e.g. {"input" -> "text"}.
  std::map<std::string, std::string> field_aliases;
};

// Reads a JSONL file: one object per line with "text" (string) and "label"
// (strings "member"/"nonmember", or integers 1/0 with 1 = member). Records
// keep file order; missing ids become "<basename>:<line>". Errors carry the
// offending line number.
Dataset load_dataset(const std::string& path, const LoadOptions& options = {});

// Writes one {"id","text","label"} object per line; load_dataset of the
// result yields a byte-identical record list.
void save_dataset(const Dataset& dataset, const std::string& path);

// Draws pool_size nonmembers by a seeded pseudo-random draw without
// replacement and removes them from the evaluation set. The remaining
// dataset keeps its original record order.
std::pair<PrefixPool, Dataset> split_prefix_pool(const Dataset& dataset,
                                                 std::size_t pool_size,
                                                 std::uint64_t seed);

// Seeded removal of remove_members member records (class balancing).
// Resulting counts are recorded in the provenance string.
Dataset balance_eval(const Dataset& dataset, std::size_t remove_members,
                     std::uint64_t seed);

}  // namespace recall
