#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recall/errors.hpp"
#include "recall/pipeline.hpp"

namespace {

using recall::RunConfig;

// Translates the C-style escapes \n, \t, \r and \\ so separators like
// "\n\n" can be passed on a shell command line.
std::string unescape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      switch (s[i + 1]) {
        case 'n': out.push_back('\n'); ++i; continue;
        case 't': out.push_back('\t'); ++i; continue;
        case 'r': out.push_back('\r'); ++i; continue;
        case '\\': out.push_back('\\'); ++i; continue;
        default: break;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

// Option staging shared by the run subcommands; exactly one subcommand
// parses per invocation.
struct Staging {
  std::vector<std::string> attacks{"loss", "recall"};
  std::string separator = "\\n\\n";
  std::string dynamic_mode = "most";
  long long timeout_ms = 30000;
  long long request_pause_ms = 0;
};

void add_backend_options(CLI::App* sub, RunConfig& config, Staging& staging) {
  sub->add_option("--backend", config.backend.kind,
                  "scoring backend: embedded | remote")
      ->check(CLI::IsMember({"embedded", "remote"}))
      ->capture_default_str();
  sub->add_option("--model", config.backend.model_path,
                  "embedded model file (from train-lm)");
  sub->add_option("--max-context-tokens", config.backend.max_context_tokens,
                  "embedded backend: context window cap in tokens");
  sub->add_option("--base-url", config.backend.remote.base_url,
                  "remote backend: endpoint base URL");
  sub->add_option("--model-name", config.backend.remote.model_name,
                  "remote backend: model name");
  sub->add_option("--api-key-env", config.backend.remote.api_key_env,
                  "environment variable holding the API key")
      ->capture_default_str();
  sub->add_option("--timeout-ms", staging.timeout_ms, "HTTP timeout")
      ->capture_default_str();
  sub->add_option("--max-retries", config.backend.remote.max_retries,
                  "retries on transport failures and 5xx")
      ->capture_default_str();
  sub->add_option("--max-in-flight", config.backend.remote.max_in_flight,
                  "bound on concurrent requests")
      ->capture_default_str();
  sub->add_option("--request-pause-ms", staging.request_pause_ms,
                  "minimum pause between request starts")
      ->capture_default_str();
}

void add_pool_options(CLI::App* sub, RunConfig& config, Staging& staging) {
  sub->add_option("--pool-size", config.prefix.pool_size,
                  "nonmembers reserved for prefix construction")
      ->capture_default_str();
  sub->add_option("--pool-seed", config.prefix.pool_seed,
                  "seed of the pool draw")
      ->capture_default_str();
  sub->add_option("--shots", config.prefix.shots,
                  "shots concatenated into the prefix")
      ->capture_default_str();
  sub->add_option("--separator", staging.separator,
                  "shot separator; \\n, \\t, \\r, \\\\ are translated")
      ->capture_default_str();
  sub->add_option("--jobs", config.jobs, "scoring parallelism bound")
      ->capture_default_str();
}

void add_evaluate_options(CLI::App* sub, RunConfig& config, Staging& staging) {
  sub->add_option("--attacks", staging.attacks,
                  "comma-separated: loss, reference, zlib, neighbor, mink, "
                  "minkpp, recall, recall_ensemble")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--k-percents", config.k_percents,
                  "k percentages for mink / minkpp entries")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--reference-model", config.reference_model_path,
                  "embedded model file for the reference attack");
  sub->add_option("--neighbors-file", config.neighbors_path,
                  "JSONL of {id, text} neighbor texts");
  sub->add_option("--prefix-strategy", config.prefix.strategy,
                  "pool | file | dynamic")
      ->check(CLI::IsMember({"pool", "file", "dynamic"}))
      ->capture_default_str();
  sub->add_option("--prefix-file", config.prefix.file_path,
                  "plain-text file used verbatim as the prefix");
  sub->add_option("--dynamic-mode", staging.dynamic_mode,
                  "dynamic selection: most | moderate | least | random")
      ->capture_default_str();
  sub->add_option("--dynamic-seed", config.prefix.dynamic_seed,
                  "seed for the dynamic random mode")
      ->capture_default_str();
  sub->add_flag("--allow-member-prefix", config.prefix.member_prefix,
                "override: build the prefix from member records");
  sub->add_option("--groups", config.groups,
                  "prefix groups for the recall_ensemble attack")
      ->capture_default_str();
  sub->add_option("--balance-remove", config.balance_remove,
                  "members removed after the pool split")
      ->capture_default_str();
  sub->add_option("--balance-seed", config.balance_seed,
                  "seed of the balancing draw")
      ->capture_default_str();
}

void finalize_config(RunConfig& config, Staging& staging) {
  config.prefix.separator = unescape(staging.separator);
  config.prefix.dynamic_mode = recall::parse_select_mode(staging.dynamic_mode);
  config.backend.remote.timeout =
      std::chrono::milliseconds(staging.timeout_ms);
  config.backend.remote.request_pause =
      std::chrono::milliseconds(staging.request_pause_ms);
  config.attacks.clear();
  for (const std::string& name : staging.attacks)
    config.attacks.push_back(recall::parse_attack(name));
}

void print_attack_lines(const nlohmann::ordered_json& report) {
  for (const auto& entry : report.at("attacks")) {
    const std::string name = entry.at("attack").get<std::string>();
    const std::string status = entry.at("status").get<std::string>();
    if (status != "ok") {
      std::printf("%-16s %s\n", name.c_str(), status.c_str());
      continue;
    }
    std::printf("%-16s auc=%.4f tpr@1%%fpr=%.4f n=%zu\n", name.c_str(),
                entry.at("auc").get<double>(),
                entry.at("tpr_at_1pct").get<double>(),
                entry.at("n_scored").get<std::size_t>());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Membership-inference evaluation over log-likelihood scoring "
      "backends: prefix-conditioned likelihood-ratio attack plus loss, "
      "reference, zlib, neighbor and min-k baselines"};
  app.require_subcommand(1);

  RunConfig config;
  Staging staging;
  std::string out_dir;

  recall::TrainConfig train;
  CLI::App* cmd_train = app.add_subcommand(
      "train-lm", "Train the embedded byte n-gram model");
  cmd_train->add_option("--corpus", train.corpus_path,
                        "training corpus (JSONL dataset or plain text)")
      ->required();
  cmd_train->add_option("--out", train.out_path, "model file to write")
      ->required();
  cmd_train->add_option("--format", train.format, "auto | text | jsonl")
      ->check(CLI::IsMember({"auto", "text", "jsonl"}))
      ->capture_default_str();
  cmd_train
      ->add_option("--chunk-bytes", train.chunk_bytes,
                   "chunk size for plain-text corpora")
      ->capture_default_str();
  cmd_train->add_option("--order", train.order, "model order")
      ->capture_default_str();
  cmd_train->add_option("--smoothing-k", train.smoothing_k, "add-k constant")
      ->capture_default_str();
  cmd_train
      ->add_option("--weights", train.weights,
                   "interpolation weights, lowest order first")
      ->delimiter(',')
      ->capture_default_str();

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--dataset", config.dataset_path, "JSONL dataset")
        ->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    add_backend_options(sub, config, staging);
    add_pool_options(sub, config, staging);
  };

  CLI::App* cmd_evaluate = app.add_subcommand(
      "evaluate", "Score the dataset under the requested attacks");
  add_common(cmd_evaluate);
  add_evaluate_options(cmd_evaluate, config, staging);

  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "Sweep the prefix shot count");
  add_common(cmd_sweep);
  cmd_sweep->add_option("--n-max", config.sweep_max, "largest shot count")
      ->capture_default_str();

  CLI::App* cmd_ensemble = app.add_subcommand(
      "ensemble", "Mean ratio over grouped prefixes");
  add_common(cmd_ensemble);
  cmd_ensemble->add_option("--groups", config.groups, "prefix groups")
      ->capture_default_str();

  CLI::App* cmd_analyze = app.add_subcommand(
      "analyze-tokens", "Token-position delta profiles per condition");
  add_common(cmd_analyze);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(cmd_train)) {
      recall::run_train_lm(train);
      std::printf("model written: %s\n", train.out_path.c_str());
      return 0;
    }
    finalize_config(config, staging);
    config.out_dir = out_dir;
    recall::RunOutputs outputs;
    if (app.got_subcommand(cmd_evaluate)) {
      outputs = recall::run_evaluate(config);
    } else if (app.got_subcommand(cmd_sweep)) {
      outputs = recall::run_sweep(config);
    } else if (app.got_subcommand(cmd_ensemble)) {
      outputs = recall::run_ensemble(config);
    } else {
      outputs = recall::run_analyze_tokens(config);
    }
    recall::write_outputs(outputs, out_dir);
    print_attack_lines(outputs.report);
    if (outputs.report.contains("sweep")) {
      for (const auto& row : outputs.report.at("sweep")) {
        if (row.at("status").get<std::string>() == "overflow")
          std::printf("shots=%-2zu overflow\n",
                      row.at("n_shots").get<std::size_t>());
        else
          std::printf("shots=%-2zu auc=%.4f%s\n",
                      row.at("n_shots").get<std::size_t>(),
                      row.at("auc").get<double>(),
                      row.at("best").get<bool>() ? "  <- best" : "");
      }
    }
    std::printf("report: %s/report.json\n", out_dir.c_str());
    return 0;
  } catch (const recall::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const recall::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
