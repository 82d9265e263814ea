#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/evaluation.hpp"
#include "rtlmcts/toy_circuit.hpp"

using namespace rtlmcts;

namespace {

RewardParams with_baseline(double area, double delay) {
  RewardParams p;
  p.baseline = Baseline{area, delay};
  return p;
}

class CountingEvaluator : public Evaluator {
 public:
  EvaluationOutcome evaluate(std::string_view code) const override {
    ++calls;
    if (code == "boom") throw std::runtime_error("tool crashed");
    return code.size() % 2 ? EvaluationOutcome::functional_with(static_cast<double>(code.size()), 2)
                           : EvaluationOutcome::not_functional("odd");
  }
  std::string id() const override { return "counting"; }
  mutable std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("reward constants") {
  const RewardParams base = with_baseline(6, 2);
  CHECK(compute_reward(EvaluationOutcome::not_compilable("x"), base) == -1.0);
  CHECK(compute_reward(EvaluationOutcome::not_functional("x"), base) == -0.1);
  CHECK(compute_reward(EvaluationOutcome::functional_with(6, 2), base) == 0.5);
  CHECK(compute_reward(EvaluationOutcome::functional_with(3, 2), base) == 1.0);
  CHECK(compute_reward(EvaluationOutcome::functional_with(12, 2), base) == -0.5);
  CHECK(compute_reward(NonTerminal{}, base) == 0.0);
  // Failures need no baseline.
  CHECK(compute_reward(EvaluationOutcome::not_compilable("x"), RewardParams{}) == -1.0);
}

TEST_CASE("functional outcome without a baseline is a logic error") {
  CHECK_THROWS_AS(compute_reward(EvaluationOutcome::functional_with(1, 1), RewardParams{}), SearchLogicError);
}

TEST_CASE("set_baseline takes the first functional result only") {
  const auto p = set_baseline(RewardParams{}, EvaluationOutcome::functional_with(12, 3));
  REQUIRE(p.baseline);
  CHECK(*p.baseline == Baseline{12, 3});
  CHECK_THROWS_AS(set_baseline(p, EvaluationOutcome::functional_with(4, 1)), SearchLogicError);
  CHECK_THROWS_AS(set_baseline(RewardParams{}, EvaluationOutcome::not_functional("x")), SearchLogicError);
  CHECK(compute_reward(EvaluationOutcome::functional_with(12, 3), p) == p.alpha_b);
}

TEST_CASE("reward is finite, bounded and strictly ordered by area-delay product") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 100.0);
  for (double alpha_b : {0.1, 0.5, 1.0, 3.0}) {
    RewardParams p = with_baseline(u(rng), u(rng));
    p.alpha_b = alpha_b;
    CHECK(compute_reward(EvaluationOutcome::not_functional(""), p) < 0.0);
    CHECK(compute_reward(EvaluationOutcome::not_compilable(""), p) < compute_reward(EvaluationOutcome::not_functional(""), p));
    CHECK(compute_reward(EvaluationOutcome::functional_with(p.baseline->area, p.baseline->delay), p) == alpha_b);
    for (int i = 0; i < 500; ++i) {
      const auto a = EvaluationOutcome::functional_with(u(rng), u(rng));
      const auto b = EvaluationOutcome::functional_with(u(rng), u(rng));
      const double ra = compute_reward(a, p);
      const double rb = compute_reward(b, p);
      CHECK(std::isfinite(ra));
      CHECK(ra < alpha_b + 1.0);
      if (*a.adp() < *b.adp()) CHECK(ra > rb);
      if (*a.adp() > *b.adp()) CHECK(ra < rb);
    }
  }
}

TEST_CASE("invalid reward constants") {
  RewardParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha_b = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.alpha_nc = 0.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.alpha_nf = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = with_baseline(0, 1);
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("cached repeat runs no tool") {
  CountingEvaluator ev;
  EvaluationCache cache;
  const auto first = evaluate_code("abc", ev, cache);
  const int calls = ev.calls;
  const auto second = evaluate_code("abc", ev, cache);
  CHECK(ev.calls == calls);
  CHECK(first.same_verdict(second));
  CHECK(cache.invocations() == 1);
  CHECK(cache.hits() == 1);
  CHECK(cache.size() == 1);
  evaluate_code("abcd", ev, cache);
  CHECK(cache.size() == 2);
}

TEST_CASE("evaluator exceptions become non-compilable outcomes with a warning") {
  CountingEvaluator ev;
  EvaluationCache cache;
  const auto o = evaluate_code("boom", ev, cache);
  CHECK_FALSE(o.compilable);
  CHECK(o.tool_failure);
  CHECK(o.diagnostic.find("tool crashed") != std::string::npos);
  CHECK(cache.warnings() == 1);
}

TEST_CASE("evaluate_terminal renders prompt and generation") {
  const Vocabulary v({"inputs a b;\n", "y = AND(a, b);\n", "out y;\n", "endmodule\n"});
  auto s = SequenceState(make_prompt("inputs a b;\n", v), 8);
  s = transition(s, v.at(1), v);
  s = transition(s, v.at(2), v);
  s = transition(s, v.at(3), v);
  REQUIRE(s.terminal());
  const ToyEvaluator ev(ToyCircuitTask::from_table(2, "0001"));
  EvaluationCache cache;
  const auto o = evaluate_terminal(s, ev, cache);
  CHECK(o.functional);
  CHECK(*o.area == 2.0);
  CHECK(*o.delay == 1.0);

  // Truncated by t_max before the netlist is complete.
  auto cut = SequenceState(make_prompt("inputs a b;\n", v), 1);
  cut = transition(cut, v.at(1), v);
  REQUIRE(cut.terminal());
  CHECK_FALSE(evaluate_terminal(cut, ev, cache).compilable);
}

TEST_CASE("cache is coherent under concurrent use") {
  CountingEvaluator ev;
  EvaluationCache cache;
  std::vector<std::thread> threads;
  std::vector<std::vector<EvaluationOutcome>> seen(4);
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 200; ++i) seen[t].push_back(evaluate_code(std::string(static_cast<std::size_t>(i % 17 + 1), 'x'), ev, cache));
    });
  }
  for (auto& th : threads) th.join();
  CHECK(cache.size() == 17);
  for (int t = 1; t < 4; ++t) {
    for (std::size_t i = 0; i < seen[0].size(); ++i) CHECK(seen[0][i].same_verdict(seen[t][i]));
  }
}

TEST_CASE("outcome json round trip") {
  auto o = EvaluationOutcome::functional_with(4, 3);
  o.artifacts = {"a.log"};
  o.diagnostic = "ok";
  const auto back = outcome_from_json(to_json(o));
  CHECK(back.same_verdict(o));
  CHECK(back.artifacts == o.artifacts);
  const auto nc = outcome_from_json(to_json(EvaluationOutcome::not_compilable("bad")));
  CHECK_FALSE(nc.compilable);
  CHECK_FALSE(nc.area.has_value());
}
