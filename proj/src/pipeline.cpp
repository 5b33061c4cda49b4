#include "recall/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "recall/errors.hpp"
#include "recall/metrics.hpp"
#include "recall/ngram_lm.hpp"
#include "recall/rng.hpp"

namespace recall {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "20" for integral percentages, "12.5" otherwise.
std::string k_suffix(double k) {
  if (k == std::floor(k) && std::abs(k) < 1e9) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(k));
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", k);
  return buf;
}

// One attack entry of the report: an attack plus its expanded parameters.
struct EntrySpec {
  Attack attack = Attack::loss;
  std::optional<double> k_percent;
  std::string label;  // CSV column stem, e.g. "mink_20"
};

std::vector<EntrySpec> expand_entries(const RunConfig& config) {
  std::vector<EntrySpec> entries;
  for (const Attack attack : config.attacks) {
    if (attack == Attack::mink || attack == Attack::minkpp) {
      if (config.k_percents.empty())
        throw UsageError("min-k attacks require at least one k percentage");
      for (const double k : config.k_percents)
        entries.push_back(
            {attack, k, to_string(attack) + "_" + k_suffix(k)});
    } else {
      entries.push_back({attack, std::nullopt, to_string(attack)});
    }
  }
  if (entries.empty()) throw UsageError("no attacks requested");
  return entries;
}

// Runs fn(0..n-1) with at most `jobs` worker threads. Each index is
// processed exactly once into caller-preallocated slots, so results are
// independent of scheduling; on failure the exception of the lowest
// failing index is rethrown (deterministic error too).
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(n);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (std::size_t i = 0; i < n; ++i)
    if (failures[i]) std::rethrow_exception(failures[i]);
}

struct Session {
  Dataset full;
  PrefixPool pool;
  Dataset eval;
  std::unique_ptr<ScoringBackend> backend;
  const NgramBackend* embedded = nullptr;  // non-null for embedded backends
  std::unique_ptr<ScoringBackend> reference;
  std::unordered_map<std::string, std::vector<std::string>> neighbors;
};

bool wants_attack(const RunConfig& config, Attack attack) {
  return std::find(config.attacks.begin(), config.attacks.end(), attack) !=
         config.attacks.end();
}

std::unordered_map<std::string, std::vector<std::string>> load_neighbors(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open neighbors file: " + path);
  std::unordered_map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("neighbors file: JSON parse failure at line " +
                      std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("text") || !obj["text"].is_string())
      throw DataError("neighbors file: expected {\"id\",\"text\"} at line " +
                      std::to_string(line_no));
    out[obj["id"].get<std::string>()].push_back(
        obj["text"].get<std::string>());
  }
  if (out.empty()) throw DataError("neighbors file is empty: " + path);
  return out;
}

Session open_session(const RunConfig& config) {
  Session session;
  session.full = load_dataset(config.dataset_path);
  auto [pool, after_split] = split_prefix_pool(
      session.full, config.prefix.pool_size, config.prefix.pool_seed);
  session.pool = std::move(pool);
  session.eval =
      balance_eval(after_split, config.balance_remove, config.balance_seed);
  session.backend = make_backend(config.backend);
  session.embedded = dynamic_cast<const NgramBackend*>(session.backend.get());

  if (wants_attack(config, Attack::reference)) {
    if (config.reference_model_path.empty())
      throw UsageError("reference attack requires a reference model path");
    auto model = std::make_shared<const NgramModel>(
        NgramModel::load(config.reference_model_path));
    session.reference = std::make_unique<NgramBackend>(std::move(model));
  }
  if (wants_attack(config, Attack::neighbor)) {
    if (config.neighbors_path.empty())
      throw UsageError("neighbor attack requires a neighbors file");
    session.neighbors = load_neighbors(config.neighbors_path);
  }
  return session;
}

// Fixed prefix for the pool and file strategies (dynamic selection is
// per-record and handled at scoring time).
Prefix build_fixed_prefix(const Session& session, const RunConfig& config) {
  const PrefixSpec& spec = config.prefix;
  if (spec.strategy == "file") {
    if (spec.file_path.empty())
      throw UsageError("prefix strategy \"file\" requires a prefix file");
    std::ifstream in(spec.file_path, std::ios::binary);
    if (!in) throw UsageError("cannot open prefix file: " + spec.file_path);
    std::ostringstream content;
    content << in.rdbuf();
    if (content.str().empty())
      throw DataError("prefix file is empty: " + spec.file_path);
    Prefix prefix;
    prefix.shots.push_back(
        {"prefix-file:" + spec.file_path, content.str(), Label::nonmember});
    prefix.separator = "";
    prefix.text = content.str();  // verbatim, no trailing separator
    return prefix;
  }
  if (spec.strategy != "pool")
    throw UsageError("prefix strategy \"" + spec.strategy +
                     "\" has no fixed prefix");
  if (spec.shots == 0) throw UsageError("shots must be at least 1");
  if (spec.member_prefix) {
    // Override draw over the member records, in dataset order.
    std::vector<Record> members;
    for (const Record& r : session.full.records)
      if (r.label == Label::member) members.push_back(r);
    if (members.size() < spec.pool_size)
      throw DataError("insufficient members for a member-built prefix");
    SplitMix64 rng(spec.pool_seed ^ 0x5555ULL);
    std::vector<std::size_t> idx(members.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < spec.pool_size; ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    std::vector<Record> shots;
    for (std::size_t i = 0; i < spec.shots; ++i)
      shots.push_back(members[idx[i]]);
    return build_prefix(shots, spec.separator, /*allow_member_shots=*/true);
  }
  if (spec.shots > session.pool.shots.size())
    throw UsageError("shots (" + std::to_string(spec.shots) +
                     ") exceed the prefix pool size (" +
                     std::to_string(session.pool.shots.size()) + ")");
  const std::vector<Record> shots(session.pool.shots.begin(),
                                  session.pool.shots.begin() +
                                      static_cast<long>(spec.shots));
  return build_prefix(shots, spec.separator);
}

nlohmann::ordered_json backend_json(const BackendSpec& spec,
                                    const Session& session) {
  nlohmann::ordered_json j;
  j["kind"] = spec.kind;
  if (spec.kind == "embedded") {
    j["model_path"] = spec.model_path;
    if (session.embedded) {
      const NgramModel& model = session.embedded->model();
      j["order"] = model.order();
      j["smoothing_k"] = model.smoothing_k();
      j["weights"] = model.weights();
    }
    j["max_context_tokens"] =
        spec.max_context_tokens ? nlohmann::ordered_json(*spec.max_context_tokens)
                                : nlohmann::ordered_json(nullptr);
  } else {
    j["base_url"] = spec.remote.base_url;
    j["model_name"] = spec.remote.model_name;
    j["api_key_env"] = spec.remote.api_key_env;
    j["timeout_ms"] = spec.remote.timeout.count();
    j["max_retries"] = spec.remote.max_retries;
    j["max_in_flight"] = spec.remote.max_in_flight;
    j["request_pause_ms"] = spec.remote.request_pause.count();
  }
  return j;
}

nlohmann::ordered_json config_json(const RunConfig& config,
                                   const Session& session,
                                   const std::string& command) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["backend"] = backend_json(config.backend, session);
  j["dataset"] = config.dataset_path;
  nlohmann::ordered_json prefix;
  prefix["strategy"] = config.prefix.strategy;
  prefix["pool_size"] = config.prefix.pool_size;
  prefix["pool_seed"] = config.prefix.pool_seed;
  prefix["shots"] = config.prefix.shots;
  prefix["separator"] = config.prefix.separator;
  prefix["file_path"] = config.prefix.file_path;
  prefix["dynamic_mode"] = to_string(config.prefix.dynamic_mode);
  prefix["dynamic_seed"] = config.prefix.dynamic_seed;
  prefix["member_prefix"] = config.prefix.member_prefix;
  j["prefix"] = std::move(prefix);
  nlohmann::ordered_json attacks = nlohmann::ordered_json::array();
  for (const Attack a : config.attacks) attacks.push_back(to_string(a));
  j["attacks"] = std::move(attacks);
  j["k_percents"] = config.k_percents;
  j["reference_model"] = config.reference_model_path.empty()
                             ? nlohmann::ordered_json(nullptr)
                             : nlohmann::ordered_json(
                                   config.reference_model_path);
  j["neighbors_file"] = config.neighbors_path.empty()
                            ? nlohmann::ordered_json(nullptr)
                            : nlohmann::ordered_json(config.neighbors_path);
  nlohmann::ordered_json balance;
  balance["remove"] = config.balance_remove;
  balance["seed"] = config.balance_seed;
  j["balance"] = std::move(balance);
  j["groups"] = config.groups;
  j["sweep_max"] = config.sweep_max;
  nlohmann::ordered_json scoring;
  scoring["ll_mode"] = "mean";
  scoring["sequence_end"] =
      "embedded backend appends the end-of-sequence symbol to sequence "
      "scores; remote backends score prompt tokens only";
  scoring["boundary_rule"] =
      "a token straddling the context/target boundary scores as target";
  nlohmann::ordered_json deflate;
  deflate["level"] = 6;
  deflate["container"] = "zlib";
  scoring["zlib"] = std::move(deflate);
  j["scoring"] = std::move(scoring);
  return j;
}

nlohmann::ordered_json dataset_stats_json(const RunConfig& config,
                                          const Session& session) {
  nlohmann::ordered_json j;
  j["path"] = config.dataset_path;
  j["records_loaded"] = session.full.records.size();
  j["members_loaded"] = session.full.member_count();
  j["nonmembers_loaded"] = session.full.nonmember_count();
  j["pool_size"] = session.pool.shots.size();
  j["balance_removed"] = config.balance_remove;
  j["eval_records"] = session.eval.records.size();
  j["eval_members"] = session.eval.member_count();
  j["eval_nonmembers"] = session.eval.nonmember_count();
  return j;
}

nlohmann::ordered_json params_json(const EntrySpec& entry,
                                   const RunConfig& config) {
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  switch (entry.attack) {
    case Attack::mink:
    case Attack::minkpp:
      p["k_percent"] = *entry.k_percent;
      break;
    case Attack::recall:
      p["n_shots"] = config.prefix.shots;
      break;
    case Attack::recall_ensemble:
      p["n_shots"] = config.prefix.shots;
      p["n_groups"] = config.groups;
      break;
    default:
      break;
  }
  return p;
}

nlohmann::ordered_json ok_entry_json(const std::string& attack_name,
                                     nlohmann::ordered_json params,
                                     const std::vector<LabeledScore>& scores) {
  nlohmann::ordered_json j;
  j["attack"] = attack_name;
  j["params"] = std::move(params);
  j["status"] = "ok";
  j["auc"] = auc(scores);
  j["tpr_at_1pct"] = tpr_at_fpr(scores, 0.01);
  j["n_scored"] = scores.size();
  return j;
}

std::string scores_csv(const Dataset& eval,
                       const std::vector<EntrySpec>& entries,
                       const std::vector<bool>& entry_ok,
                       const std::vector<std::vector<AttackScore>>& scores) {
  std::string csv = "id,label";
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (!entry_ok[e]) continue;
    csv += "," + entries[e].label + "_raw," + entries[e].label + "_canonical";
  }
  csv += "\n";
  for (std::size_t i = 0; i < eval.records.size(); ++i) {
    csv += eval.records[i].id + "," + to_string(eval.records[i].label);
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (!entry_ok[e]) continue;
      csv += "," + format_double(scores[i][e].raw) + "," +
             format_double(scores[i][e].canonical);
    }
    csv += "\n";
  }
  return csv;
}

void append_remote_notes(std::vector<std::string>& notes,
                         std::size_t dropped_first,
                         std::size_t straddled) {
  if (dropped_first)
    notes.push_back("remote backend dropped a null-logprob first token on " +
                    std::to_string(dropped_first) + " record(s)");
  if (straddled)
    notes.push_back("a token straddled the context/target boundary on " +
                    std::to_string(straddled) +
                    " record(s); it was scored as target");
}

nlohmann::ordered_json finish_report(const RunConfig& config,
                                     const Session& session,
                                     const std::string& command,
                                     nlohmann::ordered_json attacks,
                                     std::vector<std::string> notes,
                                     nlohmann::ordered_json sweep = {}) {
  nlohmann::ordered_json report;
  report["version"] = "1.0";
  report["config"] = config_json(config, session, command);
  report["dataset_stats"] = dataset_stats_json(config, session);
  report["attacks"] = std::move(attacks);
  if (!sweep.is_null()) report["sweep"] = std::move(sweep);
  notes.insert(notes.begin(), session.eval.source);
  report["notes"] = notes;
  return report;
}

}  // namespace

std::unique_ptr<ScoringBackend> make_backend(const BackendSpec& spec) {
  if (spec.kind == "embedded") {
    if (spec.model_path.empty())
      throw UsageError("embedded backend requires a model path");
    auto model =
        std::make_shared<const NgramModel>(NgramModel::load(spec.model_path));
    return std::make_unique<NgramBackend>(std::move(model),
                                          spec.max_context_tokens);
  }
  if (spec.kind == "remote") {
    if (spec.remote.base_url.empty())
      throw UsageError("remote backend requires a base URL");
    if (spec.remote.model_name.empty())
      throw UsageError("remote backend requires a model name");
    return std::make_unique<RemoteBackend>(
        spec.remote,
        make_httplib_transport(spec.remote.base_url, spec.remote.timeout));
  }
  throw UsageError("unknown backend kind: " + spec.kind);
}

RunOutputs run_evaluate(const RunConfig& config) {
  Session session = open_session(config);
  const std::vector<EntrySpec> entries = expand_entries(config);

  const bool needs_prefix = wants_attack(config, Attack::recall) ||
                            wants_attack(config, Attack::recall_ensemble);
  const bool dynamic = config.prefix.strategy == "dynamic";
  if (config.prefix.member_prefix && config.prefix.strategy != "pool")
    throw UsageError("a member-built prefix requires the pool strategy");

  std::vector<Prefix> single_prefix;
  std::vector<Prefix> ensemble_prefixes;
  std::unique_ptr<TfidfIndex> index;
  if (needs_prefix) {
    if (dynamic) {
      if (wants_attack(config, Attack::recall_ensemble))
        throw UsageError(
            "the ensemble attack requires the pool prefix strategy");
      if (config.prefix.shots > session.pool.shots.size())
        throw UsageError("shots exceed the prefix pool size");
      index = std::make_unique<TfidfIndex>(session.pool.shots);
    } else {
      single_prefix.push_back(build_fixed_prefix(session, config));
      if (wants_attack(config, Attack::recall_ensemble)) {
        if (config.prefix.strategy != "pool")
          throw UsageError(
              "the ensemble attack requires the pool prefix strategy");
        if (config.groups == 0 || config.groups > config.prefix.shots)
          throw UsageError("groups must be in [1, shots]");
        const std::vector<Record> shots(
            session.pool.shots.begin(),
            session.pool.shots.begin() +
                static_cast<long>(config.prefix.shots));
        for (const auto& group : group_shots(shots, config.groups))
          ensemble_prefixes.push_back(
              build_prefix(group, config.prefix.separator));
      }
    }
  }

  // Per-entry capability gate (reported, never thrown).
  const CapabilitySet caps = session.backend->capabilities();
  std::vector<bool> entry_ok(entries.size(), true);
  for (std::size_t e = 0; e < entries.size(); ++e)
    if (entries[e].attack == Attack::minkpp && !caps.full_vocab_moments)
      entry_ok[e] = false;

  const std::size_t n = session.eval.records.size();
  std::vector<std::vector<AttackScore>> scores(n);
  std::vector<std::uint8_t> dropped_first(n, 0), straddled(n, 0);

  // When every requested attack is capability-gated there is nothing to
  // score; skip the backend entirely (a remote endpoint is never contacted
  // just to report "unsupported").
  bool any_usable = false;
  for (const bool ok : entry_ok) any_usable = any_usable || ok;
  if (!any_usable) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<AttackScore> row;
      row.reserve(entries.size());
      for (const EntrySpec& entry : entries)
        row.push_back(make_attack_score(entry.attack, 0.0));
      scores[i] = std::move(row);
    }
  }

  parallel_for(any_usable ? n : 0, config.jobs, [&](std::size_t i) {
    const Record& r = session.eval.records[i];
    const TokenScores ts = session.backend->score_sequence("", r.text);
    dropped_first[i] = ts.dropped_null_first ? 1 : 0;
    straddled[i] = ts.straddled_boundary ? 1 : 0;

    std::vector<Prefix> record_prefix;
    if (needs_prefix && dynamic) {
      const std::vector<Record> selected = select_dynamic(
          *index, r, session.pool.shots, config.prefix.shots,
          config.prefix.dynamic_mode, config.prefix.dynamic_seed);
      record_prefix.push_back(build_prefix(selected, config.prefix.separator));
    }

    std::vector<AttackScore> row;
    row.reserve(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const EntrySpec& entry = entries[e];
      if (!entry_ok[e]) {
        row.push_back(make_attack_score(entry.attack, 0.0));
        continue;
      }
      switch (entry.attack) {
        case Attack::loss:
          row.push_back(make_attack_score(Attack::loss, loss_score(ts)));
          break;
        case Attack::reference: {
          const TokenScores ref =
              session.reference->score_sequence("", r.text);
          row.push_back(make_attack_score(Attack::reference,
                                          reference_score(ts, ref)));
          break;
        }
        case Attack::zlib:
          row.push_back(
              make_attack_score(Attack::zlib, zlib_score(ts, r.text)));
          break;
        case Attack::neighbor: {
          const auto it = session.neighbors.find(r.id);
          if (it == session.neighbors.end())
            throw DataError("no neighbors supplied for record " + r.id);
          std::vector<TokenScores> neighbor_ts;
          neighbor_ts.reserve(it->second.size());
          for (const std::string& text : it->second)
            neighbor_ts.push_back(session.backend->score_sequence("", text));
          row.push_back(make_attack_score(Attack::neighbor,
                                          neighbor_score(ts, neighbor_ts)));
          break;
        }
        case Attack::mink: {
          AttackParams params;
          params.k_percent = *entry.k_percent;
          row.push_back(make_attack_score(
              Attack::mink, mink_score(ts, *entry.k_percent), params));
          break;
        }
        case Attack::minkpp: {
          const TokenScores with_moments =
              session.embedded->score_sequence_with_moments("", r.text);
          AttackParams params;
          params.k_percent = *entry.k_percent;
          row.push_back(make_attack_score(
              Attack::minkpp, minkpp_score(with_moments, *entry.k_percent),
              params));
          break;
        }
        case Attack::recall:
          row.push_back(ensemble_recall(
              *session.backend, r, dynamic ? record_prefix : single_prefix,
              Attack::recall));
          break;
        case Attack::recall_ensemble:
          row.push_back(ensemble_recall(*session.backend, r,
                                        ensemble_prefixes,
                                        Attack::recall_ensemble));
          break;
      }
    }
    scores[i] = std::move(row);
  });

  nlohmann::ordered_json attacks = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (!entry_ok[e]) {
      nlohmann::ordered_json j;
      j["attack"] = to_string(entries[e].attack);
      j["params"] = params_json(entries[e], config);
      j["status"] = "unsupported";
      j["auc"] = nullptr;
      j["tpr_at_1pct"] = nullptr;
      j["n_scored"] = 0;
      attacks.push_back(std::move(j));
      continue;
    }
    std::vector<LabeledScore> labeled;
    labeled.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      labeled.push_back(
          {scores[i][e].canonical, session.eval.records[i].label});
    attacks.push_back(ok_entry_json(to_string(entries[e].attack),
                                    params_json(entries[e], config), labeled));
  }

  std::vector<std::string> notes;
  if (config.prefix.member_prefix)
    notes.push_back(
        "prefix built from member records (override); member shots remain "
        "in the evaluation set");
  std::size_t n_dropped = 0, n_straddled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    n_dropped += dropped_first[i];
    n_straddled += straddled[i];
  }
  append_remote_notes(notes, n_dropped, n_straddled);
  for (std::size_t e = 0; e < entries.size(); ++e)
    if (!entry_ok[e])
      notes.push_back(to_string(entries[e].attack) + " unsupported: backend " +
                      session.backend->name() +
                      " provides no full-vocabulary moments");

  RunOutputs out;
  out.report =
      finish_report(config, session, "evaluate", std::move(attacks), notes);
  out.scores_csv = scores_csv(session.eval, entries, entry_ok, scores);
  return out;
}

RunOutputs run_sweep(const RunConfig& config) {
  Session session = open_session(config);
  if (config.prefix.strategy != "pool")
    throw UsageError("sweep requires the pool prefix strategy");
  if (config.sweep_max == 0 ||
      config.sweep_max > session.pool.shots.size())
    throw UsageError("sweep_max must be in [1, pool_size]");

  const std::vector<Prefix> prefixes = sweep_shot_counts(
      session.pool, config.sweep_max, config.prefix.separator);

  const std::size_t n = session.eval.records.size();
  std::vector<std::pair<std::size_t, std::optional<std::vector<LabeledScore>>>>
      per_shot;
  for (std::size_t s = 0; s < prefixes.size(); ++s) {
    std::vector<double> canonical(n);
    bool overflow = false;
    try {
      parallel_for(n, config.jobs, [&](std::size_t i) {
        const std::vector<Prefix> groups{prefixes[s]};
        canonical[i] = ensemble_recall(*session.backend,
                                       session.eval.records[i], groups,
                                       Attack::recall)
                           .canonical;
      });
    } catch (const ContextOverflow&) {
      overflow = true;
    }
    if (overflow) {
      per_shot.emplace_back(s + 1, std::nullopt);
      continue;
    }
    std::vector<LabeledScore> labeled;
    labeled.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      labeled.push_back({canonical[i], session.eval.records[i].label});
    per_shot.emplace_back(s + 1, std::move(labeled));
  }

  const std::vector<SweepRow> rows = shot_sweep_report(per_shot);

  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  for (const SweepRow& row : rows) {
    nlohmann::ordered_json j;
    j["n_shots"] = row.n_shots;
    j["status"] = row.overflow ? "overflow" : "ok";
    j["auc"] = row.overflow ? nlohmann::ordered_json(nullptr)
                            : nlohmann::ordered_json(row.auc);
    j["tpr_at_1pct"] = row.overflow ? nlohmann::ordered_json(nullptr)
                                    : nlohmann::ordered_json(row.tpr_at_1pct);
    j["best"] = row.best;
    sweep.push_back(std::move(j));
  }

  nlohmann::ordered_json attacks = nlohmann::ordered_json::array();
  std::vector<std::string> notes;
  const auto best = std::find_if(rows.begin(), rows.end(),
                                 [](const SweepRow& r) { return r.best; });
  if (best != rows.end()) {
    const auto& scores = *per_shot[static_cast<std::size_t>(
                                       best - rows.begin())]
                              .second;
    nlohmann::ordered_json params;
    params["n_shots"] = best->n_shots;
    attacks.push_back(ok_entry_json("recall", std::move(params), scores));
    notes.push_back("sweep best shot count: " +
                    std::to_string(best->n_shots));
  } else {
    nlohmann::ordered_json j;
    j["attack"] = "recall";
    j["params"] = nlohmann::ordered_json::object();
    j["status"] = "error";
    j["auc"] = nullptr;
    j["tpr_at_1pct"] = nullptr;
    j["n_scored"] = 0;
    attacks.push_back(std::move(j));
    notes.push_back("every shot count overflowed the context window");
  }
  for (const SweepRow& row : rows)
    if (row.overflow)
      notes.push_back("shot count " + std::to_string(row.n_shots) +
                      " overflowed the context window");

  RunOutputs out;
  out.report = finish_report(config, session, "sweep", std::move(attacks),
                             notes, std::move(sweep));
  return out;
}

RunOutputs run_ensemble(const RunConfig& config) {
  Session session = open_session(config);
  if (config.prefix.strategy != "pool")
    throw UsageError("ensemble requires the pool prefix strategy");
  if (config.prefix.shots == 0 ||
      config.prefix.shots > session.pool.shots.size())
    throw UsageError("shots must be in [1, pool_size]");
  if (config.groups == 0 || config.groups > config.prefix.shots)
    throw UsageError("groups must be in [1, shots]");

  const std::vector<Record> shots(
      session.pool.shots.begin(),
      session.pool.shots.begin() + static_cast<long>(config.prefix.shots));
  std::vector<Prefix> prefixes;
  for (const auto& group : group_shots(shots, config.groups))
    prefixes.push_back(build_prefix(group, config.prefix.separator));

  const Attack kind =
      config.groups == 1 ? Attack::recall : Attack::recall_ensemble;

  const std::size_t n = session.eval.records.size();
  std::vector<AttackScore> scores(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    scores[i] =
        ensemble_recall(*session.backend, session.eval.records[i], prefixes,
                        kind);
  });

  std::vector<LabeledScore> labeled;
  labeled.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    labeled.push_back({scores[i].canonical, session.eval.records[i].label});

  nlohmann::ordered_json params;
  params["n_shots"] = config.prefix.shots;
  if (kind == Attack::recall_ensemble) params["n_groups"] = config.groups;

  nlohmann::ordered_json attacks = nlohmann::ordered_json::array();
  attacks.push_back(
      ok_entry_json(to_string(kind), std::move(params), labeled));

  // Per-record CSV with the single ensemble column.
  const std::string label = to_string(kind);
  std::string csv = "id,label," + label + "_raw," + label + "_canonical\n";
  for (std::size_t i = 0; i < n; ++i)
    csv += session.eval.records[i].id + "," +
           to_string(session.eval.records[i].label) + "," +
           format_double(scores[i].raw) + "," +
           format_double(scores[i].canonical) + "\n";

  RunOutputs out;
  out.report =
      finish_report(config, session, "ensemble", std::move(attacks), {});
  out.scores_csv = std::move(csv);
  return out;
}

RunOutputs run_analyze_tokens(const RunConfig& config) {
  Session session = open_session(config);
  if (config.prefix.strategy != "pool")
    throw UsageError("analyze-tokens requires the pool prefix strategy");

  RunConfig nm_config = config;
  nm_config.prefix.member_prefix = false;
  const Prefix prefix_nm = build_fixed_prefix(session, nm_config);
  RunConfig m_config = config;
  m_config.prefix.member_prefix = true;
  const Prefix prefix_m = build_fixed_prefix(session, m_config);

  RunOutputs out;
  out.profiles.push_back(token_delta_profile(*session.backend, session.eval,
                                             prefix_m, Label::member));
  out.profiles.push_back(token_delta_profile(*session.backend, session.eval,
                                             prefix_nm, Label::member));
  out.profiles.push_back(token_delta_profile(*session.backend, session.eval,
                                             prefix_m, Label::nonmember));
  out.profiles.push_back(token_delta_profile(*session.backend, session.eval,
                                             prefix_nm, Label::nonmember));
  out.ll_shift = ll_shift_summary(*session.backend, session.eval, prefix_nm);

  std::vector<std::string> notes;
  notes.push_back(
      "token-position delta profiles written to token_profiles.csv");
  notes.push_back("per-record LL shift table written to analysis.json");
  for (const TokenDeltaProfile& profile : out.profiles)
    if (profile.skipped_records)
      notes.push_back("condition " + profile.condition + ": " +
                      std::to_string(profile.skipped_records) +
                      " record(s) skipped (token count mismatch)");

  out.report = finish_report(config, session, "analyze-tokens",
                             nlohmann::ordered_json::array(), notes);
  return out;
}

std::string report_to_bytes(const nlohmann::ordered_json& report) {
  return report.dump(2) + "\n";
}

void write_outputs(const RunOutputs& outputs, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto write_file = [&](const std::string& name,
                              const std::string& bytes) {
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write output file: " + path);
    out << bytes;
    if (!out) throw Error("write failure: " + path);
  };
  write_file("report.json", report_to_bytes(outputs.report));
  if (!outputs.scores_csv.empty()) write_file("scores.csv", outputs.scores_csv);
  if (!outputs.profiles.empty())
    write_profiles_csv(outputs.profiles, out_dir + "/token_profiles.csv");
  if (outputs.ll_shift)
    write_analysis_json(outputs.profiles, *outputs.ll_shift,
                        out_dir + "/analysis.json");
}

void run_train_lm(const TrainConfig& config) {
  std::string format = config.format;
  if (format == "auto") {
    format = config.corpus_path.size() >= 6 &&
                     config.corpus_path.substr(config.corpus_path.size() -
                                               6) == ".jsonl"
                 ? "jsonl"
                 : "text";
  }
  std::vector<std::string> items;
  if (format == "jsonl") {
    const Dataset dataset = load_dataset(config.corpus_path);
    for (const Record& r : dataset.records)
      if (r.label == Label::member) items.push_back(r.text);
    if (items.empty())
      throw DataError("no member records to train on in " +
                      config.corpus_path);
  } else if (format == "text") {
    std::ifstream in(config.corpus_path, std::ios::binary);
    if (!in) throw UsageError("cannot open corpus file: " + config.corpus_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.empty())
      throw DataError("corpus file is empty: " + config.corpus_path);
    if (config.chunk_bytes == 0)
      throw UsageError("chunk bytes must be positive");
    for (std::size_t pos = 0; pos < text.size(); pos += config.chunk_bytes)
      items.push_back(text.substr(pos, config.chunk_bytes));
  } else {
    throw UsageError("unknown corpus format: " + config.format);
  }
  NgramModel model(config.order, config.smoothing_k, config.weights);
  model.train(items);
  model.save(config.out_path);
}

}  // namespace recall
