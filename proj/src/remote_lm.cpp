#include "recall/remote_lm.hpp"

#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "recall/errors.hpp"

// cpp-httplib: header-only client; keep it out of our public header.
#define CPPHTTPLIB_NO_EXCEPTIONS 1
#include <httplib.h>

namespace recall {

namespace {

using ordered_json = nlohmann::ordered_json;

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {}

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>&
                        headers) override {
    httplib::Client client(base_url_);
    const auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto rem = timeout_ - secs;
    client.set_connection_timeout(
        static_cast<time_t>(secs.count()),
        static_cast<time_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(rem)
                .count()));
    client.set_read_timeout(
        static_cast<time_t>(secs.count()),
        static_cast<time_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(rem)
                .count()));
    httplib::Headers hl;
    for (const auto& [k, v] : headers) hl.emplace(k, v);
    auto result = client.Post(path, hl, body, "application/json");
    if (!result) {
      throw TransportError("POST " + path + " failed: " +
                           httplib::to_string(result.error()));
    }
    return HttpResponse{result->status, result->body};
  }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url, std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

std::string build_completions_request(const RemoteConfig& config,
                                      const std::string& prompt) {
  ordered_json body;
  body["model"] = config.model_name;
  body["prompt"] = prompt;
  body["max_tokens"] = 0;
  body["echo"] = true;
  body["logprobs"] = 0;
  body["temperature"] = 0;
  return body.dump();
}

TokenScores parse_completions_response(const std::string& body,
                                       std::size_t context_len_chars) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) {
    throw ProtocolError("completions response is not valid JSON");
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    throw ProtocolError("completions response has no choices");
  }
  const auto& choice = doc["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null()) {
    throw UnsupportedCapability(
        "endpoint returned no logprobs; echo logprob support is required");
  }
  const auto& lp = choice["logprobs"];
  for (const char* field : {"tokens", "token_logprobs", "text_offset"}) {
    if (!lp.contains(field) || !lp[field].is_array()) {
      throw ProtocolError(std::string("logprobs missing field: ") + field);
    }
  }
  const auto& tokens = lp["tokens"];
  const auto& logprobs = lp["token_logprobs"];
  const auto& offsets = lp["text_offset"];
  if (tokens.size() != logprobs.size() || tokens.size() != offsets.size()) {
    throw ProtocolError("logprobs arrays disagree in length");
  }

  TokenScores out;
  std::size_t context_tokens = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!offsets[i].is_number()) {
      throw ProtocolError("text_offset entry is not a number");
    }
    const auto start = offsets[i].get<long long>();
    const std::size_t tok_len = tokens[i].is_string()
                                    ? tokens[i].get<std::string>().size()
                                    : 0;
    const long long end = start + static_cast<long long>(tok_len);
    const auto boundary = static_cast<long long>(context_len_chars);
    if (end <= boundary) {
      ++context_tokens;  // wholly inside the context
      continue;
    }
    if (start < boundary) out.straddled_boundary = true;
    if (!tokens[i].is_string()) {
      throw ProtocolError("tokens entry is not a string");
    }
    if (logprobs[i].is_null()) {
      // APIs report no logprob for the very first prompt token. With an
      // empty context that token belongs to the target: drop it and flag
      // the drop so reports can record it. Anywhere else it is an error.
      if (i == 0 && context_len_chars == 0) {
        out.dropped_null_first = true;
        continue;
      }
      throw ProtocolError("null token_logprob inside the target span");
    }
    out.tokens.push_back(tokens[i].get<std::string>());
    out.logprobs.push_back(logprobs[i].get<double>());
  }
  out.context_len_tokens = context_tokens;
  if (out.tokens.empty()) {
    throw ProtocolError("no target tokens found in completions response");
  }
  return out;
}

RemoteBackend::RemoteBackend(RemoteConfig config,
                             std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (config_.base_url.empty() && !transport_) {
    throw UsageError("remote backend requires a base URL");
  }
  if (!transport_) {
    transport_ = make_httplib_transport(config_.base_url, config_.timeout);
  }
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      api_key_ = key;
    }
  }
}

std::string RemoteBackend::name() const {
  return "remote:" + config_.model_name;
}

CapabilitySet RemoteBackend::capabilities() const {
  CapabilitySet caps;
  caps.per_token_logprobs = true;
  caps.full_vocab_moments = false;  // echo logprobs carry no distribution
  caps.max_context_tokens = std::nullopt;
  return caps;
}

HttpResponse RemoteBackend::post_with_retries(const std::string& body) const {
  std::vector<std::pair<std::string, std::string>> headers;
  headers.emplace_back("Content-Type", "application/json");
  if (!api_key_.empty()) {
    headers.emplace_back("Authorization", "Bearer " + api_key_);
  }

  // Client-side pacing: bound concurrent requests and honor the minimum
  // spacing between request starts.
  {
    std::unique_lock<std::mutex> lock(pacing_mutex_);
    while (in_flight_ >= config_.max_in_flight) {
      lock.unlock();
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
      lock.lock();
    }
    if (config_.request_pause.count() > 0 &&
        last_request_.time_since_epoch().count() != 0) {
      const auto now = std::chrono::steady_clock::now();
      const auto due = last_request_ + config_.request_pause;
      if (now < due) {
        lock.unlock();
        std::this_thread::sleep_until(due);
        lock.lock();
      }
    }
    last_request_ = std::chrono::steady_clock::now();
    ++in_flight_;
  }
  struct InFlightGuard {
    const RemoteBackend* self;
    ~InFlightGuard() {
      std::lock_guard<std::mutex> lock(self->pacing_mutex_);
      --self->in_flight_;
    }
  } guard{this};

  std::size_t retries = 0;
  std::chrono::milliseconds backoff{100};
  for (;;) {
    std::string why;
    bool got_response = false;
    HttpResponse resp;
    try {
      resp = transport_->post("/v1/completions", body, headers);
      got_response = true;
    } catch (const TransportError& err) {
      why = err.what();
    }
    if (got_response) {
      if (resp.status >= 200 && resp.status < 300) {
        last_retries_ = retries;
        return resp;
      }
      if (resp.status >= 500 || resp.status == 429) {
        why = "server returned status " + std::to_string(resp.status);
      } else {
        // Client errors are not transient: retrying cannot help.
        throw TransportError("server returned status " +
                             std::to_string(resp.status));
      }
    }
    if (retries >= config_.max_retries) {
      throw TransportError(why + " (gave up after " +
                           std::to_string(retries) + " retries)");
    }
    ++retries;
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

TokenScores RemoteBackend::score_target(std::string_view context,
                                        std::string_view target) const {
  if (target.empty()) {
    throw DataError("cannot score an empty target");
  }
  std::string prompt;
  prompt.reserve(context.size() + target.size());
  prompt.append(context);
  prompt.append(target);
  const std::string body = build_completions_request(config_, prompt);
  HttpResponse resp = post_with_retries(body);
  return parse_completions_response(resp.body, context.size());
}

}  // namespace recall
