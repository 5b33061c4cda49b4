#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recall {

// Base class for all toolkit errors. Catching recall::Error at the CLI
// boundary maps to exit code 1 (evaluation error); UsageError maps to 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad invocation: unknown flag values, missing files named on the command
// line, malformed configuration.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

// Input data violates a documented precondition (bad JSONL line, empty
// text, unknown label, insufficient records for a split).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

// context + target would exceed the backend's context window. Carries the
// token counts so sweeps can mark the offending shot count and continue.
class ContextOverflow : public Error {
 public:
  ContextOverflow(std::size_t context_tokens, std::size_t target_tokens,
                  std::size_t max_tokens, long group_index = -1)
      : Error("context overflow" +
              (group_index >= 0
                   ? " in prefix group " + std::to_string(group_index)
                   : std::string()) +
              ": " + std::to_string(context_tokens) + " context + " +
              std::to_string(target_tokens) + " target tokens exceed limit " +
              std::to_string(max_tokens)),
        context_tokens(context_tokens),
        target_tokens(target_tokens),
        max_tokens(max_tokens),
        group_index(group_index) {}
  std::size_t context_tokens;
  std::size_t target_tokens;
  std::size_t max_tokens;
  long group_index;  // -1 when not raised from a prefix group
};

// An attack asked the backend for something it cannot provide (e.g.
// full-vocabulary moments on a remote backend).
class UnsupportedCapability : public Error {
 public:
  explicit UnsupportedCapability(const std::string& what) : Error(what) {}
};

// Remote endpoint replied, but the payload does not match the documented
// wire contract (missing echoed logprobs, missing offsets, bad JSON).
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(what) {}
};

// HTTP/network failure after retries were exhausted.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(what) {}
};

// Unconditional log-likelihood too close to zero for a ratio score.
class DegenerateLL : public Error {
 public:
  explicit DegenerateLL(const std::string& what) : Error(what) {}
};

}  // namespace recall
