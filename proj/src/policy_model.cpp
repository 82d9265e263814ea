#include "rtlmcts/policy_model.hpp"

#include <algorithm>
#include <numeric>

#include "rtlmcts/errors.hpp"

namespace rtlmcts {

void sort_candidates(std::vector<Candidate>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.token.id < b.token.id;
  });
}

ModelDistribution filtered_distribution(const ModelDistribution& dist, const Vocabulary& vocab, bool renormalize) {
  ModelDistribution out;
  out.k = dist.k;
  for (const auto& c : dist.candidates) {
    if (!vocab.is_comment_opener(c.token.id)) out.candidates.push_back(c);
  }
  if (renormalize && !out.candidates.empty()) {
    const double mass = std::accumulate(out.candidates.begin(), out.candidates.end(), 0.0,
                                        [](double acc, const Candidate& c) { return acc + c.prob; });
    if (mass > 0.0) {
      for (auto& c : out.candidates) c.prob /= mass;
    }
  }
  return out;
}

ModelDistribution widened_filtered_distribution(const TokenModel& model, const SequenceState& state, std::size_t k,
                                                bool renormalize) {
  const auto& vocab = model.vocabulary();
  const std::size_t cap = std::max<std::size_t>(vocab.size(), 1);
  k = std::clamp<std::size_t>(k, 1, cap);
  while (true) {
    auto raw = model.next_distribution(state, k);
    auto filtered = filtered_distribution(raw, vocab, renormalize);
    if (!filtered.empty()) return filtered;
    // A short answer means the model's whole support was returned.
    if (raw.size() < k || k >= cap) {
      throw ModelError("every candidate token opens a comment", state.step());
    }
    k = std::min(k * 2, cap);
  }
}

Token greedy_next(const TokenModel& model, const SequenceState& state, std::size_t rollout_k) {
  return widened_filtered_distribution(model, state, rollout_k).candidates.front().token;
}

CachingModel::CachingModel(std::shared_ptr<const TokenModel> inner) : inner_(std::move(inner)) {}

ModelDistribution CachingModel::next_distribution(const SequenceState& state, std::size_t k) const {
  Key key{state.prompt().tokens, std::vector<TokenId>(state.generated().begin(), state.generated().end())};
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      const auto& cached = it->second;
      const bool complete = cached.candidates.size() < cached.k;
      if (cached.k >= k || complete) {
        ++hits_;
        ModelDistribution out;
        out.k = k;
        const auto n = std::min(k, cached.candidates.size());
        out.candidates.assign(cached.candidates.begin(), cached.candidates.begin() + static_cast<std::ptrdiff_t>(n));
        return out;
      }
    }
  }
  ++misses_;
  auto fresh = inner_->next_distribution(state, k);
  {
    std::lock_guard lock(mutex_);
    auto& slot = entries_[key];
    if (slot.k < fresh.k) slot = fresh;
  }
  return fresh;
}

}  // namespace rtlmcts
