#pragma once

// The "LLM" seen by the search: a top-k next-token distribution per state.

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rtlmcts/token_space.hpp"

namespace rtlmcts {

struct Candidate {
  Token token;
  double prob = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Candidates sorted by probability descending, ties by ascending token id.
struct ModelDistribution {
  std::vector<Candidate> candidates;
  std::size_t k = 0;

  bool empty() const noexcept { return candidates.empty(); }
  std::size_t size() const noexcept { return candidates.size(); }

  friend bool operator==(const ModelDistribution&, const ModelDistribution&) = default;
};

/// Orders candidates by the canonical (prob desc, id asc) rule.
void sort_candidates(std::vector<Candidate>& candidates);

class TokenModel {
 public:
  virtual ~TokenModel() = default;

  /// Top-k candidates for the next token. Precondition: state not terminal, k >= 1.
  virtual ModelDistribution next_distribution(const SequenceState& state, std::size_t k) const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual std::string id() const = 0;
};

/// Drops comment-opening candidates. Probabilities stay as the model gave
/// them unless `renormalize` is set.
ModelDistribution filtered_distribution(const ModelDistribution& dist, const Vocabulary& vocab,
                                        bool renormalize = false);

/// Comment-filtered distribution, widening k (doubling) until at least one
/// candidate survives. Throws ModelError if the model's whole support is comments.
ModelDistribution widened_filtered_distribution(const TokenModel& model, const SequenceState& state,
                                                std::size_t k, bool renormalize = false);

/// Most likely non-comment next token, starting from `rollout_k` candidates.
Token greedy_next(const TokenModel& model, const SequenceState& state, std::size_t rollout_k);

/// Memoizing decorator. Entries are keyed by (prompt ids, generated ids);
/// a cached top-k' answer serves any k <= k', and an answer shorter than
/// its k serves every k.
class CachingModel : public TokenModel {
 public:
  explicit CachingModel(std::shared_ptr<const TokenModel> inner);

  ModelDistribution next_distribution(const SequenceState& state, std::size_t k) const override;
  const Vocabulary& vocabulary() const override { return inner_->vocabulary(); }
  std::string id() const override { return inner_->id(); }

  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

 private:
  using Key = std::pair<std::vector<TokenId>, std::vector<TokenId>>;

  std::shared_ptr<const TokenModel> inner_;
  mutable std::mutex mutex_;
  mutable std::map<Key, ModelDistribution> entries_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

}  // namespace rtlmcts
