#include <unistd.h>
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "rtlmcts/composition.hpp"
#include "rtlmcts/errors.hpp"
#include "rtlmcts/search.hpp"
#include "rtlmcts/toy_suite.hpp"

using namespace rtlmcts;
namespace fs = std::filesystem;

namespace {

struct TempLibrary {
  TempLibrary() : root(fs::temp_directory_path() / ("rtlmcts-lib-" + std::to_string(::getpid()))), lib(root) {
    fs::remove_all(root);
  }
  ~TempLibrary() { fs::remove_all(root); }
  fs::path root;
  ModuleLibrary lib;
};

ModuleRecord adder(int width, double reward, std::string code = "") {
  ModuleRecord r;
  r.name = "adder" + std::to_string(width);
  r.kind = "adder";
  r.bit_width = width;
  r.code_text = code.empty() ? "module adder" + std::to_string(width) + "(input a, output y);\nendmodule\n" : code;
  r.outcome = EvaluationOutcome::functional_with(10.0 * width, 2.0);
  r.reward = reward;
  r.run_id = "run";
  r.iteration = 7;
  return r;
}

CompositionPolicy adder_policy() {
  CompositionPolicy p;
  p.dependencies[{"adder", 64}] = {{"adder", 16}, {"adder", 8}};
  return p;
}

}  // namespace

TEST_CASE("only strictly better records replace stored ones") {
  TempLibrary t;
  CHECK(t.lib.store(adder(8, 0.62, "first\n")));
  CHECK_FALSE(t.lib.store(adder(8, 0.55, "second\n")));
  CHECK_FALSE(t.lib.store(adder(8, 0.62, "tie\n")));
  CHECK(t.lib.fetch({"adder", 8})->code_text == "first\n");
  CHECK(t.lib.store(adder(8, 0.9, "third\n")));
  CHECK(t.lib.fetch({"adder", 8})->code_text == "third\n");
}

TEST_CASE("fetch returns the stored record byte for byte") {
  TempLibrary t;
  const auto r = adder(8, 0.5, "module a; // \xc3\xa9\r\n\ttab\n  endmodule");
  t.lib.store(r);
  const auto back = t.lib.fetch(r.key());
  REQUIRE(back);
  CHECK(back->code_text == r.code_text);
  CHECK(back->outcome.same_verdict(r.outcome));
  CHECK(back->run_id == "run");
  CHECK(back->iteration == 7);
  CHECK(fs::exists(t.root / "adder" / "8.json"));
  CHECK_FALSE(t.lib.fetch({"adder", 16}));
  // A fresh handle on the same directory sees it too.
  CHECK(ModuleLibrary(t.root).fetch(r.key())->code_text == r.code_text);
}

TEST_CASE("concurrent stores") {
  TempLibrary t;
  ModuleLibrary other(t.root);
  std::vector<std::thread> threads;
  for (int w = 1; w <= 8; ++w) {
    threads.emplace_back([&, w] {
      for (int i = 0; i < 10; ++i) (w % 2 ? t.lib : other).store(adder(w, 0.1 * i + 0.01 * w));
    });
  }
  // Same key from both handles: the best reward wins.
  threads.emplace_back([&] {
    for (int i = 0; i < 30; ++i) t.lib.store(adder(32, 0.01 * i));
  });
  threads.emplace_back([&] {
    for (int i = 30; i > 0; --i) other.store(adder(32, 0.011 * i));
  });
  for (auto& th : threads) th.join();
  CHECK(t.lib.keys().size() == 9);
  for (int w = 1; w <= 8; ++w) CHECK(t.lib.fetch({"adder", w})->reward == doctest::Approx(0.9 + 0.01 * w));
  CHECK(t.lib.fetch({"adder", 32})->reward == doctest::Approx(0.33));
  for (const auto& e : fs::recursive_directory_iterator(t.root)) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
}

TEST_CASE("store rejects unusable records") {
  TempLibrary t;
  auto bad = adder(8, 0.5);
  bad.outcome = EvaluationOutcome::not_functional("x");
  CHECK_THROWS_AS(t.lib.store(bad), ConfigError);
  bad = adder(8, 0.5);
  bad.kind = "../up";
  CHECK_THROWS_AS(t.lib.store(bad), ConfigError);
  bad = adder(0, 0.5);
  CHECK_THROWS_AS(t.lib.store(bad), ConfigError);
  bad = adder(8, 0.5);
  bad.code_text.clear();
  CHECK_THROWS_AS(t.lib.store(bad), ConfigError);
}

TEST_CASE("tampered records are ignored") {
  TempLibrary t;
  t.lib.store(adder(8, 0.5));
  auto j = nlohmann::json::parse(std::ifstream(t.root / "adder" / "8.json"));
  j["code_text"] = "changed";
  std::ofstream(t.root / "adder" / "8.json") << j.dump();
  CHECK_FALSE(t.lib.fetch({"adder", 8}));
  // And a good record may replace it.
  CHECK(t.lib.store(adder(8, 0.1)));
  CHECK(t.lib.fetch({"adder", 8}));
}

TEST_CASE("small targets keep the base prompt") {
  TempLibrary t;
  t.lib.store(adder(8, 0.6));
  auto p = adder_policy();
  p.dependencies[{"adder", 16}] = {{"adder", 8}};
  const auto c = compose_prompt("spec", {"adder", 16}, t.lib, p);
  CHECK(c.text == "spec");
  CHECK(c.injected.empty());
  CHECK(p.is_large(32));
  CHECK_FALSE(p.is_large(31));
}

TEST_CASE("large targets get stored submodules before the base prompt") {
  TempLibrary t;
  t.lib.store(adder(8, 0.6));
  const auto c = compose_prompt("// 64-bit adder spec\n", {"adder", 64}, t.lib, adder_policy());
  const auto code = adder(8, 0.6).code_text;
  REQUIRE(c.text.find(code) != std::string::npos);
  CHECK(c.text.find(code) < c.text.find("// 64-bit adder spec"));
  CHECK(c.text.ends_with("// 64-bit adder spec\n"));
  CHECK(c.injected == std::vector<ModuleKey>{{"adder", 8}});
  CHECK(c.missing == std::vector<ModuleKey>{{"adder", 16}});

  t.lib.store(adder(16, 0.6, "sixteen"));
  const auto both = compose_prompt("spec", {"adder", 64}, t.lib, adder_policy());
  CHECK(both.text == code + "sixteen\nspec");
  CHECK(compose_prompt("spec", {"adder", 64}, t.lib, adder_policy()).text == both.text);
}

TEST_CASE("empty library degrades to the base prompt") {
  TempLibrary t;
  const auto c = compose_prompt("spec", {"adder", 64}, t.lib, adder_policy());
  CHECK(c.text == "spec");
  CHECK(c.missing.size() == 2);
  CHECK(compose_prompt("spec", {"mult", 64}, t.lib, adder_policy()).text == "spec");
}

TEST_CASE("composed toy prompt tokenizes and prefixes every search state") {
  TempLibrary t;
  const auto small = parity_small_task(0);
  const ToyEvaluator small_ev(small.circuit);
  EvaluationCache cache;
  SearchConfig cfg;
  cfg.iterations = 60;
  cfg.t_max = small.t_max;
  const auto r = search(make_prompt(small.prompt, small.model->vocabulary()), *small.model, small_ev, cache, cfg);
  REQUIRE(r.best_outcome.functional);
  ModuleRecord rec;
  rec.name = small.name;
  rec.kind = small.kind;
  rec.bit_width = small.bit_width;
  rec.code_text = render(*r.best_state);
  rec.outcome = r.best_outcome;
  rec.reward = r.best_reward;
  REQUIRE(t.lib.store(rec));

  const auto large = parity_large_task(0);
  const auto composed = compose_prompt(large.prompt, large.key(), t.lib, parity_composition_policy());
  REQUIRE(composed.injected.size() == 1);
  const auto prompt = make_prompt(composed.text, large.model->vocabulary());
  const ToyEvaluator ev(large.circuit);
  cfg.t_max = large.t_max;
  cfg.iterations = 20;
  const auto lr = search(prompt, *large.model, ev, cache, cfg);
  CHECK(render(*lr.best_state).rfind(composed.text, 0) == 0);
  CHECK(lr.first_functional_iteration);
}

TEST_CASE("policy json") {
  const auto p = composition_policy_from_json(
      {{"large_threshold_bits", 16}, {"dependencies", {{{"target", {{"kind", "adder"}, {"width", 64}}}, {"modules", {{{"kind", "adder"}, {"width", 8}}}}}}}});
  CHECK(p.large_threshold_bits == 16);
  CHECK(p.dependencies.at({"adder", 64}) == std::vector<ModuleKey>{{"adder", 8}});
  const auto back = composition_policy_from_json(to_json(p));
  CHECK(back.dependencies == p.dependencies);
  CHECK(CompositionPolicy{}.large_threshold_bits == 32);
  CHECK(to_string(ModuleKey{"adder", 8}) == "adder/8");
}
