#pragma once

// Monte Carlo tree search over next-token choices.
//
// One iteration: descend by PUCT while the chosen edge already has a node,
// create the node for the first new edge, complete it with comment-free
// greedy rollout, score the terminal code and add the reward to every node
// and edge on the path.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtlmcts/evaluation.hpp"
#include "rtlmcts/policy_model.hpp"
#include "rtlmcts/token_space.hpp"

namespace rtlmcts {

struct EdgeStats {
  std::uint64_t visit_count = 0;
  double total_reward = 0.0;
  double prior = 0.0;
};

struct SearchNode {
  struct Child {
    Token token;
    EdgeStats stats;
    std::unique_ptr<SearchNode> node;
  };

  explicit SearchNode(SequenceState s) : state(std::move(s)) {}

  SequenceState state;
  std::uint64_t visits = 0;
  double total_reward = 0.0;
  /// Iterations that ended at this node (expansion frontier or terminal stop).
  std::uint64_t stops = 0;
  std::vector<Child> children;  // ascending token id
  bool expanded = false;
  std::optional<EvaluationOutcome> terminal_outcome;
};

struct SearchConfig {
  double c_puct = 1.0;
  std::size_t k = 5;          // expansion branching factor
  std::size_t rollout_k = 3;  // first request size for greedy rollout steps
  std::size_t iterations = 200;
  std::size_t t_max = kDefaultMaxTokens;
  std::uint64_t seed = 0;
  bool random_tie_break = false;  // ablation only; default is ascending token id
  bool renormalize_priors = false;
  std::optional<double> early_stop_reward;
  std::size_t max_consecutive_failures = 5;
  RewardParams reward;

  void validate() const;
};

nlohmann::json to_json(const SearchConfig& config);
SearchConfig search_config_from_json(const nlohmann::json& j, SearchConfig defaults = {});

struct IterationRecord {
  std::size_t iter = 0;  // 1-based
  double reward = 0.0;
  std::size_t length = 0;
  EvaluationOutcome outcome;
  std::int64_t wall_ms = 0;
  std::vector<TokenId> sequence;
  bool tree_terminal = false;  // selection reached an already-known terminal
};

/// {"iter","reward","len","compilable","functional","area","delay","wall_ms"}
nlohmann::json to_jsonl_record(const IterationRecord& record);

struct IterationFailure {
  std::size_t iter = 0;
  std::string message;
};

struct SearchResult {
  std::optional<SequenceState> best_state;
  double best_reward = 0.0;
  EvaluationOutcome best_outcome;
  std::size_t best_iteration = 0;
  std::size_t iterations_run = 0;
  std::vector<IterationRecord> per_iteration_log;
  double iteration_rate_per_min = 0.0;
  double wall_seconds = 0.0;
  RewardParams final_params;
  std::optional<std::size_t> first_functional_iteration;
  std::vector<IterationFailure> failures;
  bool early_stopped = false;
};

/// PUCT score of one edge given its parent's visit count.
double puct_score(const EdgeStats& edge, std::uint64_t parent_visits, double c_puct);

/// Index into node.children of the argmax PUCT edge; ties go to the lower
/// token id. Throws SearchLogicError on an unexpanded or childless node.
std::size_t select_child(const SearchNode& node, double c_puct);
Token select_action(const SearchNode& node, double c_puct);

class MctsSearch {
 public:
  MctsSearch(std::shared_ptr<const Prompt> prompt, const TokenModel& model, const Evaluator& evaluator,
             EvaluationCache& cache, SearchConfig config);

  /// One full iteration. On error the tree is left as it was.
  IterationRecord run_iteration();

  /// Runs the configured budget and returns the best terminal seen.
  SearchResult run();

  const SearchNode& root() const noexcept { return *root_; }
  const RewardParams& reward_params() const noexcept { return params_; }
  std::size_t completed_iterations() const noexcept { return completed_; }

 private:
  void expand(SearchNode& node) const;
  std::size_t pick(const SearchNode& node);
  double score(const EvaluationOutcome& outcome);

  const TokenModel& model_;
  const Evaluator& evaluator_;
  EvaluationCache& cache_;
  SearchConfig config_;
  RewardParams params_;
  std::unique_ptr<SearchNode> root_;
  std::size_t completed_ = 0;
  std::mt19937_64 rng_;
};

SearchResult search(std::shared_ptr<const Prompt> prompt, const TokenModel& model, const Evaluator& evaluator,
                    EvaluationCache& cache, const SearchConfig& config);

/// Longest run of consecutive functional iterations with identical ADP.
std::size_t max_identical_adp_streak(const std::vector<IterationRecord>& log);

/// Number of distinct terminal token sequences in the log.
std::size_t distinct_terminals(const std::vector<IterationRecord>& log);

}  // namespace rtlmcts
