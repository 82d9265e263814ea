#include "rtlmcts/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rtlmcts/errors.hpp"

namespace rtlmcts {

namespace {

bool beam_before(const BeamEntry& a, const BeamEntry& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  const auto ga = a.state.generated();
  const auto gb = b.state.generated();
  return std::lexicographical_compare(ga.begin(), ga.end(), gb.begin(), gb.end());
}

BaselineRun score_terminals(std::string method, std::vector<BeamEntry> terminals, const Evaluator& evaluator,
                            EvaluationCache& cache, RewardParams params) {
  BaselineRun run;
  run.method = std::move(method);
  run.terminals = std::move(terminals);
  std::optional<std::size_t> best_functional;
  std::vector<EvaluationOutcome> outcomes;
  for (std::size_t i = 0; i < run.terminals.size(); ++i) {
    const auto started = std::chrono::steady_clock::now();
    auto outcome = evaluate_terminal(run.terminals[i].state, evaluator, cache);
    if (outcome.functional && !params.baseline) params = set_baseline(params, outcome);
    IterationRecord r;
    r.iter = i + 1;
    r.outcome = outcome;
    r.reward = compute_reward(outcome, params);
    r.length = run.terminals[i].state.step();
    r.sequence.assign(run.terminals[i].state.generated().begin(), run.terminals[i].state.generated().end());
    r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                    .count();
    run.log.push_back(std::move(r));
    if (outcome.functional && (!best_functional || *outcome.adp() < *outcomes[*best_functional].adp())) {
      best_functional = i;
    }
    outcomes.push_back(std::move(outcome));
  }
  run.reported = best_functional.value_or(0);
  run.outcome = outcomes.at(run.reported);
  run.reward = compute_reward(run.outcome, params);
  run.final_params = params;
  return run;
}

}  // namespace

SequenceState greedy_decode(std::shared_ptr<const Prompt> prompt, const TokenModel& model, std::size_t t_max) {
  SequenceState state(std::move(prompt), t_max);
  while (!state.terminal()) {
    const auto dist = model.next_distribution(state, 1);
    if (dist.empty()) throw ModelError("model returned no candidates", state.step());
    state = transition(state, dist.candidates.front().token, model.vocabulary());
  }
  return state;
}

std::vector<BeamEntry> beam_decode(std::shared_ptr<const Prompt> prompt, const TokenModel& model, std::size_t k,
                                   std::size_t t_max) {
  if (k == 0) throw ConfigError("beam width must be at least 1");
  std::vector<BeamEntry> beam{BeamEntry{SequenceState(std::move(prompt), t_max), 0.0}};
  while (true) {
    std::vector<BeamEntry> pool;
    bool any_active = false;
    for (const auto& entry : beam) {
      if (entry.state.terminal()) {
        pool.push_back(entry);
        continue;
      }
      any_active = true;
      // Only a beam's own top-k children can survive the global cut.
      const auto dist = model.next_distribution(entry.state, k);
      if (dist.empty()) throw ModelError("model returned no candidates", entry.state.step());
      for (const auto& c : dist.candidates) {
        pool.push_back(BeamEntry{transition(entry.state, c.token, model.vocabulary()), entry.log_prob + std::log(c.prob)});
      }
    }
    if (!any_active) break;
    std::sort(pool.begin(), pool.end(), beam_before);
    if (pool.size() > k) pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end());
    beam = std::move(pool);
  }
  std::sort(beam.begin(), beam.end(), beam_before);
  return beam;
}

BaselineRun run_greedy_baseline(std::shared_ptr<const Prompt> prompt, const TokenModel& model,
                                const Evaluator& evaluator, EvaluationCache& cache, const RewardParams& params,
                                std::size_t t_max) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<BeamEntry> terminals{BeamEntry{greedy_decode(std::move(prompt), model, t_max), 0.0}};
  auto run = score_terminals("greedy", std::move(terminals), evaluator, cache, params);
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

BaselineRun run_beam_baseline(std::shared_ptr<const Prompt> prompt, const TokenModel& model,
                              const Evaluator& evaluator, EvaluationCache& cache, const RewardParams& params,
                              std::size_t k, std::size_t t_max) {
  const auto started = std::chrono::steady_clock::now();
  auto run = score_terminals("beam", beam_decode(std::move(prompt), model, k, t_max), evaluator, cache, params);
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

}  // namespace rtlmcts
