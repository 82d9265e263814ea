#pragma once

// Verdicts on finished code and the reward computed from them.

#include <atomic>
#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rtlmcts/token_space.hpp"

namespace rtlmcts {

struct EvaluationOutcome {
  bool compilable = false;
  bool functional = false;  // only meaningful when compilable
  std::optional<double> area;
  std::optional<double> delay;
  std::vector<std::string> artifacts;
  std::string diagnostic;
  bool tool_failure = false;  // timeout, crash or unreadable metrics

  std::optional<double> adp() const {
    if (!area || !delay) return std::nullopt;
    return *area * *delay;
  }

  /// Verdict equality: artifacts and diagnostics are ignored.
  bool same_verdict(const EvaluationOutcome& other) const {
    return compilable == other.compilable && functional == other.functional && area == other.area &&
           delay == other.delay;
  }

  static EvaluationOutcome not_compilable(std::string why);
  static EvaluationOutcome not_functional(std::string why);
  static EvaluationOutcome functional_with(double area, double delay);
};

nlohmann::json to_json(const EvaluationOutcome& outcome);
EvaluationOutcome outcome_from_json(const nlohmann::json& j);

struct Baseline {
  double area = 0.0;
  double delay = 0.0;

  friend bool operator==(const Baseline&, const Baseline&) = default;
};

struct RewardParams {
  double alpha_nc = -1.0;
  double alpha_nf = -0.1;
  double alpha_b = 0.5;
  std::optional<Baseline> baseline;

  /// Throws ConfigError unless alpha_nc < 0, alpha_nf < 0, alpha_b > 0 and
  /// any baseline is strictly positive.
  void validate() const;
};

/// Marker for "state is not terminal yet"; scores 0.
struct NonTerminal {};

double compute_reward(NonTerminal, const RewardParams& params);

/// alpha_nc / alpha_nf for failures, alpha_b + (1 - a*d / (a'*d')) for
/// functional code. Throws SearchLogicError on a functional outcome without
/// a baseline.
double compute_reward(const EvaluationOutcome& outcome, const RewardParams& params);

/// Fixes the baseline from the first functional result. Throws
/// SearchLogicError if the outcome is not functional or a baseline is set.
RewardParams set_baseline(RewardParams params, const EvaluationOutcome& outcome);

class Evaluator {
 public:
  virtual ~Evaluator() = default;

  /// Compile, then check function, then synthesize; stops at the first failure.
  virtual EvaluationOutcome evaluate(std::string_view code) const = 0;
  virtual std::string id() const = 0;
};

/// Thread-safe outcome cache keyed by the SHA-256 of the rendered code.
class EvaluationCache {
 public:
  std::optional<EvaluationOutcome> lookup(std::string_view code) const;
  void store(std::string_view code, const EvaluationOutcome& outcome);

  std::size_t size() const;
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t invocations() const noexcept { return invocations_.load(); }
  std::size_t warnings() const noexcept { return warnings_.load(); }

 private:
  friend EvaluationOutcome evaluate_code(std::string_view, const Evaluator&, EvaluationCache&);

  mutable std::mutex mutex_;
  std::unordered_map<std::string, EvaluationOutcome> entries_;
  mutable std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> invocations_{0};
  std::atomic<std::size_t> warnings_{0};
};

/// Renders a terminal state and evaluates it through the cache. Evaluator
/// exceptions become a non-compilable outcome with a diagnostic and bump
/// the cache's warning counter.
EvaluationOutcome evaluate_terminal(const SequenceState& state, const Evaluator& evaluator, EvaluationCache& cache);

/// Same, for code that does not come from a SequenceState.
EvaluationOutcome evaluate_code(std::string_view code, const Evaluator& evaluator, EvaluationCache& cache);

}  // namespace rtlmcts
