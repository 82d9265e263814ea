#include "rtlmcts/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "rtlmcts/errors.hpp"

namespace rtlmcts {

void SearchConfig::validate() const {
  if (!(c_puct > 0.0)) throw ConfigError("c_puct must be positive");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (rollout_k == 0) throw ConfigError("rollout_k must be at least 1");
  if (iterations == 0) throw ConfigError("iterations must be at least 1");
  if (t_max == 0) throw ConfigError("t_max must be at least 1");
  if (max_consecutive_failures == 0) throw ConfigError("max_consecutive_failures must be at least 1");
  reward.validate();
}

nlohmann::json to_json(const SearchConfig& c) {
  nlohmann::json j{{"c_puct", c.c_puct},
                   {"k", c.k},
                   {"rollout_k", c.rollout_k},
                   {"iterations", c.iterations},
                   {"t_max", c.t_max},
                   {"seed", c.seed},
                   {"random_tie_break", c.random_tie_break},
                   {"renormalize_priors", c.renormalize_priors},
                   {"max_consecutive_failures", c.max_consecutive_failures}};
  j["early_stop_reward"] = c.early_stop_reward ? nlohmann::json(*c.early_stop_reward) : nlohmann::json(nullptr);
  j["reward"] = {{"alpha_nc", c.reward.alpha_nc}, {"alpha_nf", c.reward.alpha_nf}, {"alpha_b", c.reward.alpha_b}};
  if (c.reward.baseline) {
    j["reward"]["baseline"] = {{"area", c.reward.baseline->area}, {"delay", c.reward.baseline->delay}};
  } else {
    j["reward"]["baseline"] = nullptr;
  }
  return j;
}

SearchConfig search_config_from_json(const nlohmann::json& j, SearchConfig c) {
  c.c_puct = j.value("c_puct", c.c_puct);
  c.k = j.value("k", c.k);
  c.rollout_k = j.value("rollout_k", c.rollout_k);
  c.iterations = j.value("iterations", c.iterations);
  c.t_max = j.value("t_max", c.t_max);
  c.seed = j.value("seed", c.seed);
  c.random_tie_break = j.value("random_tie_break", c.random_tie_break);
  c.renormalize_priors = j.value("renormalize_priors", c.renormalize_priors);
  c.max_consecutive_failures = j.value("max_consecutive_failures", c.max_consecutive_failures);
  if (j.contains("early_stop_reward")) {
    const auto& v = j.at("early_stop_reward");
    c.early_stop_reward = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    c.reward.alpha_nc = r.value("alpha_nc", c.reward.alpha_nc);
    c.reward.alpha_nf = r.value("alpha_nf", c.reward.alpha_nf);
    c.reward.alpha_b = r.value("alpha_b", c.reward.alpha_b);
    if (r.contains("baseline")) {
      const auto& b = r.at("baseline");
      if (b.is_null()) {
        c.reward.baseline.reset();
      } else {
        c.reward.baseline = Baseline{b.at("area").get<double>(), b.at("delay").get<double>()};
      }
    }
  }
  c.validate();
  return c;
}

nlohmann::json to_jsonl_record(const IterationRecord& r) {
  nlohmann::json j{{"iter", r.iter},
                   {"reward", r.reward},
                   {"len", r.length},
                   {"compilable", r.outcome.compilable},
                   {"functional", r.outcome.functional}};
  j["area"] = r.outcome.area ? nlohmann::json(*r.outcome.area) : nlohmann::json(nullptr);
  j["delay"] = r.outcome.delay ? nlohmann::json(*r.outcome.delay) : nlohmann::json(nullptr);
  j["wall_ms"] = r.wall_ms;
  return j;
}

double puct_score(const EdgeStats& edge, std::uint64_t parent_visits, double c_puct) {
  // Unvisited edges have no average yet; they compete on the prior term alone.
  const double exploit =
      edge.visit_count > 0 ? edge.total_reward / static_cast<double>(edge.visit_count) : 0.0;
  const double explore = c_puct * edge.prior * std::sqrt(1.0 + static_cast<double>(parent_visits)) /
                         (1.0 + static_cast<double>(edge.visit_count));
  return exploit + explore;
}

std::size_t select_child(const SearchNode& node, double c_puct) {
  if (!node.expanded) throw SearchLogicError("select_action on an unexpanded node");
  if (node.children.empty()) throw SearchLogicError("select_action on a node without children");
  std::size_t best = 0;
  double best_score = puct_score(node.children[0].stats, node.visits, c_puct);
  for (std::size_t i = 1; i < node.children.size(); ++i) {
    const double s = puct_score(node.children[i].stats, node.visits, c_puct);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

Token select_action(const SearchNode& node, double c_puct) { return node.children[select_child(node, c_puct)].token; }

MctsSearch::MctsSearch(std::shared_ptr<const Prompt> prompt, const TokenModel& model, const Evaluator& evaluator,
                       EvaluationCache& cache, SearchConfig config)
    : model_(model),
      evaluator_(evaluator),
      cache_(cache),
      config_(std::move(config)),
      params_(config_.reward),
      rng_(config_.seed) {
  config_.validate();
  root_ = std::make_unique<SearchNode>(SequenceState(std::move(prompt), config_.t_max));
}

void MctsSearch::expand(SearchNode& node) const {
  auto dist = widened_filtered_distribution(model_, node.state, config_.k, config_.renormalize_priors);
  node.children.clear();
  for (auto& c : dist.candidates) {
    node.children.push_back(SearchNode::Child{std::move(c.token), EdgeStats{0, 0.0, c.prob}, nullptr});
  }
  std::sort(node.children.begin(), node.children.end(),
            [](const SearchNode::Child& a, const SearchNode::Child& b) { return a.token.id < b.token.id; });
  node.expanded = true;
}

std::size_t MctsSearch::pick(const SearchNode& node) {
  if (!config_.random_tie_break) return select_child(node, config_.c_puct);
  if (!node.expanded || node.children.empty()) throw SearchLogicError("select_action on an unexpanded node");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    const double s = puct_score(node.children[i].stats, node.visits, config_.c_puct);
    if (s > best) {
      best = s;
      ties.assign(1, i);
    } else if (s == best) {
      ties.push_back(i);
    }
  }
  std::uniform_int_distribution<std::size_t> choose(0, ties.size() - 1);
  return ties[choose(rng_)];
}

double MctsSearch::score(const EvaluationOutcome& outcome) {
  if (outcome.functional && !params_.baseline) {
    params_ = set_baseline(params_, outcome);
    spdlog::debug("baseline set: area {} delay {}", *outcome.area, *outcome.delay);
  }
  return compute_reward(outcome, params_);
}

IterationRecord MctsSearch::run_iteration() {
  const auto started = std::chrono::steady_clock::now();
  const auto& vocab = model_.vocabulary();
  if (!root_->expanded) expand(*root_);

  std::vector<SearchNode*> path{root_.get()};
  std::vector<std::size_t> edges;
  SearchNode* node = root_.get();
  std::unique_ptr<SearchNode> fresh;
  IterationRecord record;
  SequenceState final_state = node->state;

  // Selection, then expansion and rollout on a detached node so that a
  // failure leaves the tree untouched.
  while (true) {
    if (node->state.terminal()) {
      record.outcome = evaluate_terminal(node->state, evaluator_, cache_);
      record.tree_terminal = true;
      final_state = node->state;
      break;
    }
    const std::size_t ci = pick(*node);
    edges.push_back(ci);
    auto& child = node->children[ci];
    if (child.node) {
      node = child.node.get();
      path.push_back(node);
      continue;
    }
    fresh = std::make_unique<SearchNode>(transition(node->state, child.token, vocab));
    SequenceState rollout = fresh->state;
    if (!fresh->state.terminal()) expand(*fresh);
    while (!rollout.terminal()) rollout = transition(rollout, greedy_next(model_, rollout, config_.rollout_k), vocab);
    record.outcome = evaluate_terminal(rollout, evaluator_, cache_);
    if (fresh->state.terminal()) fresh->terminal_outcome = record.outcome;
    final_state = std::move(rollout);
    break;
  }

  record.reward = score(record.outcome);

  if (fresh) {
    auto& slot = path.back()->children[edges.back()].node;
    slot = std::move(fresh);
    path.push_back(slot.get());
  }
  for (auto* n : path) {
    ++n->visits;
    n->total_reward += record.reward;
  }
  ++path.back()->stops;
  for (std::size_t depth = 0; depth < edges.size(); ++depth) {
    auto& stats = path[depth]->children[edges[depth]].stats;
    ++stats.visit_count;
    stats.total_reward += record.reward;
  }

  ++completed_;
  record.iter = completed_;
  record.length = final_state.step();
  record.sequence.assign(final_state.generated().begin(), final_state.generated().end());
  record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                       .count();
  return record;
}

SearchResult MctsSearch::run() {
  SearchResult result;
  const auto started = std::chrono::steady_clock::now();
  std::size_t consecutive_failures = 0;
  std::size_t consecutive_tool_failures = 0;

  for (std::size_t attempt = 1; attempt <= config_.iterations; ++attempt) {
    IterationRecord record;
    try {
      record = run_iteration();
    } catch (const ModelError& e) {
      throw SearchError("iteration " + std::to_string(attempt) + ": " + e.what());
    } catch (const SearchLogicError&) {
      throw;
    } catch (const std::exception& e) {
      result.failures.push_back({attempt, e.what()});
      spdlog::warn("iteration {} failed: {}", attempt, e.what());
      if (++consecutive_failures >= config_.max_consecutive_failures) {
        throw SearchError("aborting after " + std::to_string(consecutive_failures) +
                          " consecutive failed iterations; last: " + e.what());
      }
      continue;
    }
    consecutive_failures = 0;
    consecutive_tool_failures = record.outcome.tool_failure ? consecutive_tool_failures + 1 : 0;
    if (consecutive_tool_failures >= config_.max_consecutive_failures) {
      throw SearchError("evaluator failed on " + std::to_string(consecutive_tool_failures) +
                        " consecutive iterations: " + record.outcome.diagnostic);
    }

    if (!result.best_state || record.reward > result.best_reward) {
      SequenceState s(root_->state.shared_prompt(), config_.t_max);
      for (TokenId id : record.sequence) s = transition(s, model_.vocabulary().at(id), model_.vocabulary());
      result.best_state = std::move(s);
      result.best_reward = record.reward;
      result.best_outcome = record.outcome;
      result.best_iteration = record.iter;
    }
    if (record.outcome.functional && !result.first_functional_iteration) {
      result.first_functional_iteration = record.iter;
    }
    result.per_iteration_log.push_back(std::move(record));
    if (config_.early_stop_reward && result.best_reward >= *config_.early_stop_reward) {
      result.early_stopped = true;
      break;
    }
  }

  if (!result.best_state) throw SearchError("no iteration completed");
  result.iterations_run = result.per_iteration_log.size();
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.iteration_rate_per_min =
      result.wall_seconds > 0.0 ? static_cast<double>(result.iterations_run) * 60.0 / result.wall_seconds : 0.0;
  result.final_params = params_;
  return result;
}

SearchResult search(std::shared_ptr<const Prompt> prompt, const TokenModel& model, const Evaluator& evaluator,
                    EvaluationCache& cache, const SearchConfig& config) {
  MctsSearch engine(std::move(prompt), model, evaluator, cache, config);
  return engine.run();
}

std::size_t max_identical_adp_streak(const std::vector<IterationRecord>& log) {
  std::size_t best = 0;
  std::size_t run = 0;
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : log) {
    const auto adp = r.outcome.functional ? r.outcome.adp() : std::nullopt;
    if (!adp) {
      run = 0;
      previous = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    run = previous == *adp ? run + 1 : 1;
    previous = *adp;
    best = std::max(best, run);
  }
  return best;
}

std::size_t distinct_terminals(const std::vector<IterationRecord>& log) {
  std::set<std::vector<TokenId>> seen;
  for (const auto& r : log) seen.insert(r.sequence);
  return seen.size();
}

}  // namespace rtlmcts
