#include "recall/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "recall/errors.hpp"
#include "recall/rng.hpp"

namespace recall {

namespace {

std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

Label parse_label(const nlohmann::json& value, std::size_t line_no) {
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (s == "member") return Label::member;
    if (s == "nonmember") return Label::nonmember;
    throw DataError("unknown label \"" + s + "\" at line " +
                    std::to_string(line_no));
  }
  if (value.is_number_integer()) {
    const auto v = value.get<std::int64_t>();
    if (v == 1) return Label::member;
    if (v == 0) return Label::nonmember;
    throw DataError("unknown label " + std::to_string(v) + " at line " +
                    std::to_string(line_no));
  }
  throw DataError("unknown label type at line " + std::to_string(line_no));
}

// Selects `take` indices from `candidates` by a partial Fisher-Yates
// shuffle; returns them in draw order. `candidates` is consumed.
std::vector<std::size_t> draw_without_replacement(
    std::vector<std::size_t> candidates, std::size_t take,
    std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(take);
  return candidates;
}

}  // namespace

std::string to_string(Label label) {
  return label == Label::member ? "member" : "nonmember";
}

std::size_t Dataset::member_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(),
                    [](const Record& r) { return r.label == Label::member; }));
}

std::size_t Dataset::nonmember_count() const {
  return records.size() - member_count();
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open dataset file: " + path);

  Dataset dataset;
  dataset.source = path;
  const std::string base = basename_of(path);
  std::unordered_set<std::string> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;  // tolerate blank lines / trailing newline
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("JSON parse failure at line " + std::to_string(line_no) +
                      ": " + e.what());
    }
    if (!obj.is_object())
      throw DataError("expected a JSON object at line " +
                      std::to_string(line_no));
    for (const auto& [from, to] : options.field_aliases)
      if (obj.contains(from) && !obj.contains(to)) obj[to] = obj[from];

    if (!obj.contains("text") || !obj["text"].is_string())
      throw DataError("missing \"text\" string at line " +
                      std::to_string(line_no));
    if (!obj.contains("label"))
      throw DataError("missing \"label\" at line " + std::to_string(line_no));

    Record record;
    record.text = obj["text"].get<std::string>();
    if (record.text.empty())
      throw DataError("empty text at line " + std::to_string(line_no));
    record.label = parse_label(obj["label"], line_no);
    record.id = obj.contains("id") && obj["id"].is_string()
                    ? obj["id"].get<std::string>()
                    : base + ":" + std::to_string(line_no);
    if (!seen_ids.insert(record.id).second)
      throw DataError("duplicate id \"" + record.id + "\" at line " +
                      std::to_string(line_no));
    dataset.records.push_back(std::move(record));
  }
  if (dataset.records.empty())
    throw DataError("empty dataset file: " + path);
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write dataset file: " + path);
  for (const Record& record : dataset.records) {
    nlohmann::ordered_json obj;
    obj["id"] = record.id;
    obj["text"] = record.text;
    obj["label"] = to_string(record.label);
    out << obj.dump() << '\n';
  }
  if (!out) throw Error("write failure: " + path);
}

std::pair<PrefixPool, Dataset> split_prefix_pool(const Dataset& dataset,
                                                 std::size_t pool_size,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> nonmember_idx;
  for (std::size_t i = 0; i < dataset.records.size(); ++i)
    if (dataset.records[i].label == Label::nonmember)
      nonmember_idx.push_back(i);
  if (nonmember_idx.size() < pool_size)
    throw DataError("insufficient nonmembers for prefix pool: have " +
                    std::to_string(nonmember_idx.size()) + ", need " +
                    std::to_string(pool_size));

  const std::vector<std::size_t> chosen =
      draw_without_replacement(std::move(nonmember_idx), pool_size, seed);

  PrefixPool pool;
  pool.seed = seed;
  for (const std::size_t i : chosen) pool.shots.push_back(dataset.records[i]);
  for (const Record& shot : pool.shots)
    if (shot.label != Label::nonmember)
      throw Error("internal: prefix pool contains a member record");

  std::unordered_set<std::size_t> excluded(chosen.begin(), chosen.end());
  Dataset eval;
  eval.source = dataset.source + " | pool(size=" + std::to_string(pool_size) +
                ", seed=" + std::to_string(seed) + ") removed";
  for (std::size_t i = 0; i < dataset.records.size(); ++i)
    if (!excluded.count(i)) eval.records.push_back(dataset.records[i]);
  return {std::move(pool), std::move(eval)};
}

Dataset balance_eval(const Dataset& dataset, std::size_t remove_members,
                     std::uint64_t seed) {
  std::vector<std::size_t> member_idx;
  for (std::size_t i = 0; i < dataset.records.size(); ++i)
    if (dataset.records[i].label == Label::member) member_idx.push_back(i);
  if (member_idx.size() < remove_members)
    throw DataError("insufficient members to remove: have " +
                    std::to_string(member_idx.size()) + ", need " +
                    std::to_string(remove_members));

  const std::vector<std::size_t> chosen = draw_without_replacement(
      std::move(member_idx), remove_members, seed);
  std::unordered_set<std::size_t> excluded(chosen.begin(), chosen.end());

  Dataset out;
  for (std::size_t i = 0; i < dataset.records.size(); ++i)
    if (!excluded.count(i)) out.records.push_back(dataset.records[i]);
  out.source = dataset.source + " | balance(removed " +
               std::to_string(remove_members) + " members, seed=" +
               std::to_string(seed) + "; " +
               std::to_string(out.member_count()) + " members / " +
               std::to_string(out.nonmember_count()) + " nonmembers remain)";
  return out;
}

}  // namespace recall
