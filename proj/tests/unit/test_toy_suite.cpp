#include <unistd.h>
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "rtlmcts/baselines.hpp"
#include "rtlmcts/errors.hpp"
#include "rtlmcts/toy_suite.hpp"
#include "support/enumerate.hpp"

using namespace rtlmcts;

namespace {

EvaluationOutcome greedy_outcome(const ToyTask& t) {
  const auto s = greedy_decode(make_prompt(t.prompt, t.model->vocabulary()), *t.model, t.t_max);
  return toy_evaluate(render(s), t.circuit);
}

}  // namespace

TEST_CASE("every builtin task resolves and its prompt tokenizes") {
  for (const auto& name : builtin_task_names()) {
    CAPTURE(name);
    const auto t = builtin_task(name);
    CHECK_FALSE(t.name.empty());
    CHECK_NOTHROW(make_prompt(t.prompt, t.model->vocabulary()));
    CHECK_NOTHROW(t.circuit.validate());
  }
  CHECK(builtin_task("redundant-logic:3").name == "redundant-logic:3");
  CHECK_THROWS_AS(builtin_task("no-such-task"), ConfigError);
  CHECK_THROWS_AS(builtin_task("greedy-trap:9"), ConfigError);
}

TEST_CASE("oracle tasks are small enough to enumerate") {
  const auto tasks = oracle_tasks();
  REQUIRE(tasks.size() >= 5);
  for (const auto& t : tasks) {
    CAPTURE(t.name);
    CHECK(t.model->vocabulary().size() <= 8);
    CHECK(t.t_max <= 6);
    const auto terms = rtlmcts::testing::enumerate_terminals(*t.model, make_prompt(t.prompt, t.model->vocabulary()),
                                                            t.t_max, 5, t.circuit);
    CHECK(terms.size() >= 2);
    CHECK(rtlmcts::testing::exhaustive_min_adp(terms));
  }
}

TEST_CASE("greedy decoding fails on every trap") {
  for (std::size_t i = 0; i < 5; ++i) {
    CAPTURE(i);
    CHECK_FALSE(greedy_outcome(greedy_trap_task(i)).functional);
  }
  CHECK_THROWS_AS(greedy_trap_task(5), ConfigError);
}

TEST_CASE("greedy is functional but not optimal on redundant logic") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto t = redundant_logic_task(s);
    const auto g = greedy_outcome(t);
    REQUIRE(g.functional);
    const auto terms = rtlmcts::testing::enumerate_terminals(*t.model, make_prompt(t.prompt, t.model->vocabulary()),
                                                            t.t_max, 5, t.circuit);
    const auto best = rtlmcts::testing::exhaustive_min_adp(terms);
    REQUIRE(best);
    CHECK(*best <= 0.8 * *g.adp());
  }
}

TEST_CASE("parity pair shares a vocabulary and composes") {
  const auto small = parity_small_task(0);
  const auto large = parity_large_task(0);
  CHECK(small.key() == ModuleKey{"parity", 3});
  CHECK(large.key() == ModuleKey{"parity", 6});
  CHECK(small.model->vocabulary().tokens() == large.model->vocabulary().tokens());
  const auto policy = parity_composition_policy();
  CHECK(policy.is_large(6));
  CHECK_FALSE(policy.is_large(3));
  CHECK(policy.dependencies.at(large.key()) == std::vector<ModuleKey>{small.key()});
}

TEST_CASE("random toy tasks are varied and well formed") {
  std::set<std::size_t> sizes;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto t = random_toy_task(s);
    sizes.insert(t.model->vocabulary().size());
    CHECK(t.model->vocabulary().size() <= 32);
    bool has_comment = false;
    for (const auto& tok : t.model->vocabulary().tokens()) has_comment |= t.model->vocabulary().is_comment_opener(tok.id);
    CHECK(has_comment);
  }
  CHECK(sizes.size() > 2);
}

TEST_CASE("toy task json round trip") {
  const auto dir = std::filesystem::temp_directory_path() / ("rtlmcts-suite-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  for (const auto& t : {redundant_logic_task(1), parity_large_task(2), oracle_tasks()[4]}) {
    const auto j = to_json(t);
    const auto back = toy_task_from_json(j);
    CHECK(back.name == t.name);
    CHECK(back.key() == t.key());
    CHECK(back.prompt == t.prompt);
    CHECK(back.t_max == t.t_max);
    CHECK(back.model->id() == t.model->id());
    CHECK(back.circuit.table_string() == t.circuit.table_string());
    std::ofstream(dir / "task.json") << j.dump(2);
    CHECK(load_toy_task(dir / "task.json").model->id() == t.model->id());
  }
  // Model in a separate file, relative to the task file.
  auto j = to_json(easy_task());
  std::ofstream(dir / "model.json") << j["model"].dump();
  j.erase("model");
  j["model_file"] = "model.json";
  std::ofstream(dir / "task2.json") << j.dump();
  CHECK(load_toy_task(dir / "task2.json").model->id() == easy_task().model->id());

  auto bad = to_json(easy_task());
  bad["prompt"] = "\x01";
  CHECK_THROWS_AS(toy_task_from_json(bad), ConfigError);
  std::filesystem::remove_all(dir);
}
