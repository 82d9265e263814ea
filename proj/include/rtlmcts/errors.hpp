#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rtlmcts {

/// Raised when the engine itself is driven into an impossible state
/// (transition from a terminal state, selection on an unexpanded node...).
class SearchLogicError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid user configuration: bad constants, unknown token names, missing files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A token model could not produce a distribution (transport failure after
/// retries, malformed response, exhausted vocabulary).
class ModelError : public std::runtime_error {
 public:
  ModelError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A search run had to be aborted.
class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rtlmcts
