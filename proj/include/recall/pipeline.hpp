#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recall/analysis.hpp"
#include "recall/attacks.hpp"
#include "recall/corpus.hpp"
#include "recall/prefixes.hpp"
#include "recall/remote_lm.hpp"
#include "recall/scoring.hpp"

namespace recall {

// Which scoring backend a run uses and how to construct it.
struct BackendSpec {
  std::string kind = "embedded";  // "embedded" | "remote"
  std::string model_path;         // embedded: versioned model file
  // Embedded only: optional context-window cap in tokens (bytes); scoring
  // a longer context + target raises ContextOverflow.
  std::optional<std::size_t> max_context_tokens;
  RemoteConfig remote;  // remote only
};

// How the conditioning prefix is built.
struct PrefixSpec {
  std::string strategy = "pool";  // "pool" | "file" | "dynamic"
  std::size_t pool_size = 12;     // nonmembers reserved for prefixes
  std::uint64_t pool_seed = 7;
  std::size_t shots = 5;
  std::string separator = "\n\n";
  std::string file_path;  // strategy "file": prefix text used verbatim
  SelectMode dynamic_mode = SelectMode::most;  // strategy "dynamic"
  std::uint64_t dynamic_seed = 13;             // dynamic random draw
  // Override: build the prefix from member records instead (drawn with
  // seed pool_seed ^ 0x5555; the member shots stay in the evaluation set,
  // only the nonmember pool is excluded, so both prefix choices score the
  // identical evaluation set).
  bool member_prefix = false;
};

struct RunConfig {
  BackendSpec backend;
  std::string dataset_path;
  PrefixSpec prefix;
  std::vector<Attack> attacks{Attack::loss, Attack::recall};
  // Expanded into one attack entry per value for mink / minkpp.
  std::vector<double> k_percents{20.0};
  std::string reference_model_path;  // reference attack (embedded model)
  std::string neighbors_path;        // neighbor attack: JSONL of {id, text}
  std::size_t balance_remove = 0;    // members removed after the pool split
  std::uint64_t balance_seed = 1;
  std::size_t groups = 1;     // ensemble command
  std::size_t sweep_max = 12; // sweep command
  std::string out_dir = ".";
  std::size_t jobs = 1;  // scoring parallelism bound; never affects scores
};

// In-memory results of one command. report is the full report.json value;
// scores_csv is empty when the command writes no per-record scores.
struct RunOutputs {
  nlohmann::ordered_json report;
  std::string scores_csv;
  std::vector<TokenDeltaProfile> profiles;   // analyze-tokens
  std::optional<LLShiftSummary> ll_shift;    // analyze-tokens
};

// Backend construction from a spec (loads the embedded model file or wires
// the HTTP transport). Throws UsageError for unusable specs.
std::unique_ptr<ScoringBackend> make_backend(const BackendSpec& spec);

// The evaluation protocol: split the prefix pool out of the dataset,
// balance, score every record under every requested attack, and reduce to
// ROC metrics. Deterministic for a fixed config regardless of jobs.
RunOutputs run_evaluate(const RunConfig& config);

// Shot-count sweep n = 1..sweep_max over nested pool prefixes; a context
// overflow marks that row "overflow" and the sweep continues. The attacks
// array carries the best non-overflow row.
RunOutputs run_sweep(const RunConfig& config);

// Prefix-ensemble evaluation: the first `shots` pool shots divided into
// `groups` contiguous groups, one likelihood ratio per group, mean across
// groups. groups = 1 reduces to the plain single-prefix attack and
// reports it under the same entry shape as run_evaluate.
RunOutputs run_ensemble(const RunConfig& config);

// Token-position delta profiles for the four target/prefix membership
// conditions plus the per-record LL shift table.
RunOutputs run_analyze_tokens(const RunConfig& config);

// Writes report.json, and when present scores.csv, token_profiles.csv and
// analysis.json, into out_dir. Single-threaded; creates out_dir.
void write_outputs(const RunOutputs& outputs, const std::string& out_dir);

// Canonical serialization of a report (what write_outputs writes).
std::string report_to_bytes(const nlohmann::ordered_json& report);

// Embedded-model training entry point.
struct TrainConfig {
  std::string corpus_path;
  std::string format = "auto";  // "auto" | "text" | "jsonl"
  std::size_t chunk_bytes = 256;
  int order = 5;
  double smoothing_k = 0.1;
  std::vector<double> weights{0.1, 0.15, 0.25, 0.25, 0.25};
  std::string out_path;
};

// Trains on member records of a JSONL dataset, or on fixed-size chunks of
// a plain-text file (a shorter trailing chunk is kept), and writes the
// versioned model file. Byte-identical output for identical inputs.
void run_train_lm(const TrainConfig& config);

}  // namespace recall
