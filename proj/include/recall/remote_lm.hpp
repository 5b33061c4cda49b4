#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "recall/scoring.hpp"

namespace recall {

struct RemoteConfig {
  std::string base_url;            // e.g. "http://localhost:8080"
  std::string model_name;
  std::string api_key_env = "RECALL_API_KEY";
  std::chrono::milliseconds timeout{30000};
  std::size_t max_retries = 3;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds request_pause{0};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Transport seam: the remote backend talks HTTP only through this
// interface, so tests can replay recorded exchanges without a network.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // POST `body` as application/json to `path` on the configured host.
  // Throws TransportError on connection-level failures.
  virtual HttpResponse post(
      const std::string& path, const std::string& body,
      const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

// Production transport over cpp-httplib.
std::unique_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url, std::chrono::milliseconds timeout);

// The exact completions request body for a prompt under this config:
// {"model", "prompt", "max_tokens": 0, "echo": true, "logprobs": 0,
//  "temperature": 0} with that field order. Golden-fixture stable.
std::string build_completions_request(const RemoteConfig& config,
                                      const std::string& prompt);

// Scoring backend over any OpenAI-compatible /v1/completions endpoint that
// echoes prompt log-probabilities. Retries transport failures and 5xx
// responses with exponential backoff; bounds in-flight requests and paces
// them client-side. The API key, read from the environment variable named
// by the config, travels only in the Authorization header.
class RemoteBackend : public ScoringBackend {
 public:
  RemoteBackend(RemoteConfig config, std::unique_ptr<HttpTransport> transport);

  std::string name() const override;
  CapabilitySet capabilities() const override;
  TokenScores score_target(std::string_view context,
                           std::string_view target) const override;

  // Retries performed by the most recent score_target call (diagnostics).
  std::size_t last_retry_count() const { return last_retries_; }

 private:
  HttpResponse post_with_retries(const std::string& body) const;

  RemoteConfig config_;
  std::string api_key_;
  std::unique_ptr<HttpTransport> transport_;
  mutable std::mutex pacing_mutex_;
  mutable std::size_t in_flight_ = 0;
  mutable std::chrono::steady_clock::time_point last_request_{};
  mutable std::size_t last_retries_ = 0;
};

// Parses a completions response body: reads choices[0].logprobs.tokens,
// .token_logprobs, .text_offset and selects the target span by character
// offset (a token starting at an offset >= the context length is a target
// token; one straddling the boundary counts as target). Exposed for
// fixture-replay tests.
TokenScores parse_completions_response(const std::string& body,
                                       std::size_t context_len_chars);

}  // namespace recall
