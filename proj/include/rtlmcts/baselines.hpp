#pragma once

// Plain decoders that ignore rewards and comments: greedy and beam search.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rtlmcts/evaluation.hpp"
#include "rtlmcts/policy_model.hpp"
#include "rtlmcts/search.hpp"

namespace rtlmcts {

struct BeamEntry {
  SequenceState state;
  double log_prob = 0.0;
};

/// Appends the model's single most likely token until terminal.
SequenceState greedy_decode(std::shared_ptr<const Prompt> prompt, const TokenModel& model, std::size_t t_max);

/// Width-k beam search on cumulative log probability. Finished beams are
/// frozen and keep competing for slots. Returns up to k terminal entries,
/// best first; equal log probabilities order by token-id sequence.
std::vector<BeamEntry> beam_decode(std::shared_ptr<const Prompt> prompt, const TokenModel& model, std::size_t k,
                                   std::size_t t_max);

struct BaselineRun {
  std::string method;
  std::vector<BeamEntry> terminals;
  std::vector<IterationRecord> log;  // one record per terminal, in beam order
  std::size_t reported = 0;          // index into terminals of the reported result
  EvaluationOutcome outcome;
  double reward = 0.0;
  RewardParams final_params;
  double wall_seconds = 0.0;

  const SequenceState& best_state() const { return terminals.at(reported).state; }
};

BaselineRun run_greedy_baseline(std::shared_ptr<const Prompt> prompt, const TokenModel& model,
                                const Evaluator& evaluator, EvaluationCache& cache, const RewardParams& params,
                                std::size_t t_max);

/// Evaluates every returned beam and reports the functional one with the
/// lowest ADP, or the most probable beam when none is functional.
BaselineRun run_beam_baseline(std::shared_ptr<const Prompt> prompt, const TokenModel& model,
                              const Evaluator& evaluator, EvaluationCache& cache, const RewardParams& params,
                              std::size_t k, std::size_t t_max);

}  // namespace rtlmcts
