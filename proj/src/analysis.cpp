#include "recall/analysis.hpp"

#include <fstream>

#include <json.hpp>

#include "recall/errors.hpp"

namespace recall {

std::string prefix_membership(const Prefix& prefix) {
  bool any_member = false, any_nonmember = false;
  for (const Record& shot : prefix.shots)
    (shot.label == Label::member ? any_member : any_nonmember) = true;
  if (any_member && any_nonmember) return "MIXED";
  return any_member ? "M" : "NM";
}

TokenDeltaProfile token_delta_profile(const ScoringBackend& backend,
                                      const Dataset& dataset,
                                      const Prefix& prefix, Label group) {
  TokenDeltaProfile profile;
  profile.condition = (group == Label::member ? std::string("M") : "NM") +
                      "|" + prefix_membership(prefix);

  std::vector<double> delta_sums;
  std::vector<std::size_t> counts;
  bool any = false;
  for (const Record& record : dataset.records) {
    if (record.label != group) continue;
    any = true;
    // score_target excludes the end-of-sequence symbol: position profiles
    // concern visible text only.
    const TokenScores uncond = backend.score_target("", record.text);
    const TokenScores cond = backend.score_target(prefix.text, record.text);
    if (uncond.logprobs.size() != cond.logprobs.size()) {
      ++profile.skipped_records;
      continue;
    }
    if (uncond.logprobs.size() > delta_sums.size()) {
      delta_sums.resize(uncond.logprobs.size(), 0.0);
      counts.resize(uncond.logprobs.size(), 0);
    }
    for (std::size_t i = 0; i < uncond.logprobs.size(); ++i) {
      delta_sums[i] += cond.logprobs[i] - uncond.logprobs[i];
      ++counts[i];
    }
  }
  if (!any)
    throw DataError("token profile: dataset has no " +
                    to_string(group) + " records");

  profile.positions.reserve(delta_sums.size());
  for (std::size_t i = 0; i < delta_sums.size(); ++i) {
    PositionDelta pd;
    pd.position = i;
    pd.n_sequences = counts[i];
    pd.mean_delta_ll = delta_sums[i] / static_cast<double>(counts[i]);
    profile.positions.push_back(pd);
  }
  return profile;
}

LLShiftSummary ll_shift_summary(const ScoringBackend& backend,
                                const Dataset& dataset,
                                const Prefix& prefix) {
  if (dataset.member_count() == 0 || dataset.nonmember_count() == 0)
    throw DataError("LL shift summary needs both classes");
  LLShiftSummary summary;
  for (const Record& record : dataset.records) {
    const SequenceLL uncond =
        sequence_ll(backend.score_sequence("", record.text));
    const SequenceLL cond =
        sequence_ll(backend.score_sequence(prefix.text, record.text));
    LLShiftRow row;
    row.id = record.id;
    row.label = record.label;
    row.mean_ll_uncond = uncond.mean_ll;
    row.mean_ll_cond = cond.mean_ll;
    row.delta = cond.mean_ll - uncond.mean_ll;
    summary.rows.push_back(row);

    LLShiftGroup& g = summary.groups[to_string(record.label)];
    ++g.n;
    g.mean_ll_uncond += row.mean_ll_uncond;
    g.mean_ll_cond += row.mean_ll_cond;
    g.mean_delta += row.delta;
  }
  for (auto& [_, g] : summary.groups) {
    g.mean_ll_uncond /= static_cast<double>(g.n);
    g.mean_ll_cond /= static_cast<double>(g.n);
    g.mean_delta /= static_cast<double>(g.n);
  }
  return summary;
}

void write_profiles_csv(const std::vector<TokenDeltaProfile>& profiles,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write profile CSV: " + path);
  out << "position,condition,mean_delta_ll,n\n";
  for (const TokenDeltaProfile& profile : profiles)
    for (const PositionDelta& pd : profile.positions) {
      nlohmann::json delta = pd.mean_delta_ll;  // shortest exact form
      out << pd.position << ',' << profile.condition << ',' << delta.dump()
          << ',' << pd.n_sequences << '\n';
    }
  if (!out) throw Error("write failure: " + path);
}

void write_analysis_json(const std::vector<TokenDeltaProfile>& profiles,
                         const LLShiftSummary& summary,
                         const std::string& path) {
  nlohmann::ordered_json doc;
  doc["profiles"] = nlohmann::ordered_json::array();
  for (const TokenDeltaProfile& profile : profiles) {
    nlohmann::ordered_json p;
    p["condition"] = profile.condition;
    p["skipped_records"] = profile.skipped_records;
    p["positions"] = nlohmann::ordered_json::array();
    for (const PositionDelta& pd : profile.positions)
      p["positions"].push_back({{"position", pd.position},
                                {"mean_delta_ll", pd.mean_delta_ll},
                                {"n", pd.n_sequences}});
    doc["profiles"].push_back(std::move(p));
  }
  doc["ll_shift"] = nlohmann::ordered_json::object();
  for (const auto& [group, g] : summary.groups)
    doc["ll_shift"][group] = {{"n", g.n},
                              {"mean_ll_uncond", g.mean_ll_uncond},
                              {"mean_ll_cond", g.mean_ll_cond},
                              {"mean_delta", g.mean_delta}};
  doc["rows"] = nlohmann::ordered_json::array();
  for (const LLShiftRow& row : summary.rows)
    doc["rows"].push_back({{"id", row.id},
                           {"label", to_string(row.label)},
                           {"mean_ll_uncond", row.mean_ll_uncond},
                           {"mean_ll_cond", row.mean_ll_cond},
                           {"delta", row.delta}});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write analysis JSON: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failure: " + path);
}

}  // namespace recall
