#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/policy_model.hpp"
#include "rtlmcts/toy_model.hpp"
#include "rtlmcts/toy_suite.hpp"

using namespace rtlmcts;

namespace {

// A fixed table of candidates per call, ignoring the state.
class FixedModel : public TokenModel {
 public:
  FixedModel(Vocabulary v, std::vector<std::pair<std::string, double>> dist) : vocab_(std::move(v)) {
    for (const auto& [text, p] : dist) cands_.push_back({vocab_.at(*vocab_.find(text)), p});
  }
  ModelDistribution next_distribution(const SequenceState&, std::size_t k) const override {
    ++calls;
    ModelDistribution d;
    d.k = k;
    d.candidates.assign(cands_.begin(), cands_.begin() + static_cast<std::ptrdiff_t>(std::min(k, cands_.size())));
    requested.push_back(k);
    return d;
  }
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string id() const override { return "fixed"; }

  mutable int calls = 0;
  mutable std::vector<std::size_t> requested;

 private:
  Vocabulary vocab_;
  std::vector<Candidate> cands_;
};

ModelDistribution dist_of(const Vocabulary& v, std::vector<std::pair<std::string, double>> items) {
  ModelDistribution d;
  d.k = items.size();
  for (const auto& [t, p] : items) d.candidates.push_back({v.at(*v.find(t)), p});
  return d;
}

SequenceState start(const TokenModel& m) { return SequenceState(make_prompt("", m.vocabulary()), 16); }

}  // namespace

TEST_CASE("filtered_distribution drops comment tokens without renormalizing") {
  const Vocabulary v({"//", "assign", "wire", "/*"});
  const auto out = filtered_distribution(dist_of(v, {{"//", 0.5}, {"assign", 0.3}, {"wire", 0.2}}), v);
  REQUIRE(out.size() == 2);
  CHECK(out.candidates[0].token.text == "assign");
  CHECK(out.candidates[0].prob == 0.3);
  CHECK(out.candidates[1].token.text == "wire");
  CHECK(out.candidates[1].prob == 0.2);

  const auto clean = dist_of(v, {{"assign", 0.6}, {"wire", 0.4}});
  CHECK(filtered_distribution(clean, v) == clean);
  CHECK(filtered_distribution(dist_of(v, {{"//", 0.7}, {"/*", 0.3}}), v).empty());
}

TEST_CASE("renormalization is opt-in") {
  const Vocabulary v({"//", "assign", "wire"});
  const auto out = filtered_distribution(dist_of(v, {{"//", 0.5}, {"assign", 0.3}, {"wire", 0.2}}), v, true);
  REQUIRE(out.size() == 2);
  CHECK(out.candidates[0].prob == doctest::Approx(0.6));
  CHECK(out.candidates[1].prob == doctest::Approx(0.4));
}

TEST_CASE("greedy_next skips comment openers") {
  const Vocabulary v({"//", "assign", "/*", "wire", "x"});
  CHECK(greedy_next(FixedModel(v, {{"//", 0.6}, {"assign", 0.4}}), start(FixedModel(v, {})), 3).text == "assign");
  CHECK(greedy_next(FixedModel(v, {{"wire", 0.9}, {"x", 0.1}}), start(FixedModel(v, {})), 3).text == "wire");
  CHECK(greedy_next(FixedModel(v, {{"//", 0.5}, {"/*", 0.3}, {"x", 0.2}}), start(FixedModel(v, {})), 3).text == "x");
}

TEST_CASE("widening doubles k only while nothing survives") {
  const Vocabulary v({"//", "/*", "*/", "// a", "x", "y", "z", "w"});
  const FixedModel m(v, {{"//", 0.3}, {"/*", 0.2}, {"*/", 0.15}, {"// a", 0.12}, {"x", 0.1}, {"y", 0.08}, {"z", 0.05}});
  const auto d = widened_filtered_distribution(m, start(m), 2);
  CHECK(m.requested == std::vector<std::size_t>{2, 4, 8});
  REQUIRE(d.size() == 3);
  CHECK(d.candidates[0].token.text == "x");

  const FixedModel enough(v, {{"x", 0.5}, {"//", 0.5}});
  widened_filtered_distribution(enough, start(enough), 2);
  CHECK(enough.requested == std::vector<std::size_t>{2});

  const FixedModel all_comments(v, {{"//", 0.5}, {"/*", 0.5}});
  CHECK_THROWS_AS(widened_filtered_distribution(all_comments, start(all_comments), 1), ModelError);
  CHECK_THROWS_AS(greedy_next(all_comments, start(all_comments), 3), ModelError);
}

TEST_CASE("greedy_next is the argmax of the non-comment vocabulary") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto task = random_toy_task(seed);
    const auto& model = *task.model;
    const auto& v = model.vocabulary();
    REQUIRE(v.size() <= 32);
    auto s = SequenceState(make_prompt(task.prompt, v), task.t_max);
    while (!s.terminal()) {
      const auto full = model.next_distribution(s, v.size());
      const Candidate* best = nullptr;
      for (const auto& c : full.candidates) {
        if (v.is_comment_opener(c.token.id)) continue;
        if (!best || c.prob > best->prob || (c.prob == best->prob && c.token.id < best->token.id)) best = &c;
      }
      REQUIRE(best != nullptr);
      const auto g = greedy_next(model, s, 3);
      CHECK(g.id == best->token.id);
      for (std::size_t k = 1; k <= v.size(); ++k) {
        for (const auto& c : filtered_distribution(model.next_distribution(s, k), v).candidates) {
          CHECK_FALSE(v.is_comment_opener(c.token.id));
        }
      }
      s = transition(s, g, v);
    }
  }
}

TEST_CASE("distributions are deterministic and cache-transparent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto task = random_toy_task(seed);
    const auto twin = ToyGrammarModel::from_json(task.model->to_json());
    const CachingModel cached(task.model);
    std::mt19937 rng(static_cast<unsigned>(seed));
    auto s = SequenceState(make_prompt(task.prompt, task.model->vocabulary()), task.t_max);
    while (!s.terminal()) {
      for (std::size_t k : {1u, 3u, 2u, 5u, 1u, 8u}) {
        const auto a = task.model->next_distribution(s, k);
        CHECK(a == twin->next_distribution(s, k));
        CHECK(a == cached.next_distribution(s, k));
        CHECK(a == cached.next_distribution(s, k));
      }
      const auto d = task.model->next_distribution(s, task.model->vocabulary().size());
      s = transition(s, d.candidates[rng() % d.size()].token, task.model->vocabulary());
    }
    CHECK(cached.hits() > 0);
  }
}

TEST_CASE("cache answers smaller k from a larger entry") {
  const Vocabulary v({"a", "b", "c", "d"});
  auto inner = std::make_shared<FixedModel>(v, std::vector<std::pair<std::string, double>>{
                                                   {"a", 0.4}, {"b", 0.3}, {"c", 0.2}, {"d", 0.1}});
  const CachingModel cached(inner);
  const auto s = start(*inner);
  CHECK(cached.next_distribution(s, 3).size() == 3);
  CHECK(cached.next_distribution(s, 2).size() == 2);
  CHECK(cached.next_distribution(s, 1).candidates[0].token.text == "a");
  CHECK(inner->calls == 1);
  CHECK(cached.next_distribution(s, 4).size() == 4);
  CHECK(inner->calls == 2);
  // The full support is now known, so any k is served.
  CHECK(cached.next_distribution(s, 9).size() == 4);
  CHECK(inner->calls == 3);
  CHECK(cached.next_distribution(s, 12).size() == 4);
  CHECK(inner->calls == 3);
  CHECK(cached.misses() == 3);
}

TEST_CASE("sort_candidates orders by probability then id") {
  const Vocabulary v({"a", "b", "c"});
  std::vector<Candidate> c{{v.at(2), 0.25}, {v.at(1), 0.5}, {v.at(0), 0.25}};
  sort_candidates(c);
  CHECK(c[0].token.id == 1);
  CHECK(c[1].token.id == 0);
  CHECK(c[2].token.id == 2);
}
