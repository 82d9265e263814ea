#include "rtlmcts/evaluation.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/hashing.hpp"

namespace rtlmcts {

EvaluationOutcome EvaluationOutcome::not_compilable(std::string why) {
  EvaluationOutcome o;
  o.diagnostic = std::move(why);
  return o;
}

EvaluationOutcome EvaluationOutcome::not_functional(std::string why) {
  EvaluationOutcome o;
  o.compilable = true;
  o.diagnostic = std::move(why);
  return o;
}

EvaluationOutcome EvaluationOutcome::functional_with(double area, double delay) {
  EvaluationOutcome o;
  o.compilable = true;
  o.functional = true;
  o.area = area;
  o.delay = delay;
  return o;
}

nlohmann::json to_json(const EvaluationOutcome& o) {
  nlohmann::json j{{"compilable", o.compilable}, {"functional", o.functional}};
  j["area"] = o.area ? nlohmann::json(*o.area) : nlohmann::json(nullptr);
  j["delay"] = o.delay ? nlohmann::json(*o.delay) : nlohmann::json(nullptr);
  j["artifacts"] = o.artifacts;
  j["diagnostic"] = o.diagnostic;
  j["tool_failure"] = o.tool_failure;
  return j;
}

EvaluationOutcome outcome_from_json(const nlohmann::json& j) {
  EvaluationOutcome o;
  o.compilable = j.at("compilable").get<bool>();
  o.functional = j.at("functional").get<bool>();
  if (j.contains("area") && !j["area"].is_null()) o.area = j["area"].get<double>();
  if (j.contains("delay") && !j["delay"].is_null()) o.delay = j["delay"].get<double>();
  o.artifacts = j.value("artifacts", std::vector<std::string>{});
  o.diagnostic = j.value("diagnostic", std::string{});
  o.tool_failure = j.value("tool_failure", false);
  return o;
}

void RewardParams::validate() const {
  if (!(alpha_nc < 0.0)) throw ConfigError("alpha_nc must be negative");
  if (!(alpha_nf < 0.0)) throw ConfigError("alpha_nf must be negative");
  if (!(alpha_b > 0.0)) throw ConfigError("alpha_b must be positive");
  if (baseline && !(baseline->area > 0.0 && baseline->delay > 0.0)) {
    throw ConfigError("baseline area and delay must be positive");
  }
}

double compute_reward(NonTerminal, const RewardParams&) { return 0.0; }

double compute_reward(const EvaluationOutcome& outcome, const RewardParams& params) {
  if (!outcome.compilable) return params.alpha_nc;
  if (!outcome.functional) return params.alpha_nf;
  if (!params.baseline) throw SearchLogicError("functional outcome scored before a baseline was set");
  const auto adp = outcome.adp();
  if (!adp) throw SearchLogicError("functional outcome without area/delay");
  const double base = params.baseline->area * params.baseline->delay;
  return params.alpha_b + (1.0 - *adp / base);
}

RewardParams set_baseline(RewardParams params, const EvaluationOutcome& outcome) {
  if (!outcome.functional || !outcome.area || !outcome.delay) {
    throw SearchLogicError("baseline requires a functional outcome with area and delay");
  }
  if (params.baseline) throw SearchLogicError("baseline is already set for this run");
  if (!(*outcome.area > 0.0 && *outcome.delay > 0.0)) {
    throw SearchLogicError("baseline area and delay must be positive");
  }
  params.baseline = Baseline{*outcome.area, *outcome.delay};
  return params;
}

std::optional<EvaluationOutcome> EvaluationCache::lookup(std::string_view code) const {
  const auto key = sha256_hex(code);
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  ++hits_;
  return it->second;
}

void EvaluationCache::store(std::string_view code, const EvaluationOutcome& outcome) {
  const auto key = sha256_hex(code);
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(key, outcome);
}

std::size_t EvaluationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

EvaluationOutcome evaluate_code(std::string_view code, const Evaluator& evaluator, EvaluationCache& cache) {
  if (auto hit = cache.lookup(code)) return *hit;
  ++cache.invocations_;
  EvaluationOutcome outcome;
  try {
    outcome = evaluator.evaluate(code);
  } catch (const std::exception& e) {
    outcome = EvaluationOutcome::not_compilable(std::string("evaluator error: ") + e.what());
    outcome.tool_failure = true;
  }
  if (outcome.tool_failure) {
    ++cache.warnings_;
    spdlog::warn("evaluator {}: {}", evaluator.id(), outcome.diagnostic);
  }
  cache.store(code, outcome);
  return outcome;
}

EvaluationOutcome evaluate_terminal(const SequenceState& state, const Evaluator& evaluator, EvaluationCache& cache) {
  if (!state.terminal()) throw SearchLogicError("evaluate_terminal on a non-terminal state");
  return evaluate_code(render(state), evaluator, cache);
}

}  // namespace rtlmcts
