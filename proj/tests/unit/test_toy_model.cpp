#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/toy_model.hpp"

using namespace rtlmcts;

namespace {

std::shared_ptr<const ToyGrammarModel> ab_model() {
  return ToyModelBuilder()
      .token("s", "s")
      .token("a", "a")
      .token("b", "b")
      .token("c", "c")
      .token("d", "d")
      .context_len(1)
      .rule({"s"}, {{"a", 0.7}, {"b", 0.3}})
      .rule({"a"}, {{"d", 1}, {"c", 1}, {"b", 1}, {"a", 1}})
      .fallback({"c", "d"})
      .build();
}

SequenceState after(const ToyGrammarModel& m, std::string prompt, std::vector<std::string> names) {
  SequenceState s(make_prompt(std::move(prompt), m.vocabulary()), 16);
  for (const auto& n : names) s = transition(s, m.vocabulary().at(m.id_of(n)), m.vocabulary());
  return s;
}

}  // namespace

TEST_CASE("rule lookup and truncation") {
  const auto m = ab_model();
  const auto s = after(*m, "s", {});
  const auto d2 = m->next_distribution(s, 2);
  REQUIRE(d2.size() == 2);
  CHECK(d2.candidates[0].token.text == "a");
  CHECK(d2.candidates[0].prob == doctest::Approx(0.7));
  CHECK(d2.candidates[1].token.text == "b");
  CHECK(d2.candidates[1].prob == doctest::Approx(0.3));

  const auto d1 = m->next_distribution(s, 1);
  REQUIRE(d1.size() == 1);
  CHECK(d1.candidates[0].token.text == "a");
}

TEST_CASE("uniform rule ties order by token id") {
  const auto m = ab_model();
  const auto d = m->next_distribution(after(*m, "s", {"a"}), 4);
  REQUIRE(d.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(d.candidates[i].prob == 0.25);
    CHECK(d.candidates[i].token.id == i + 1);
  }
}

TEST_CASE("unknown context falls back to the configured set") {
  const auto m = ab_model();
  const auto before = m->fallback_hits();
  const auto d = m->next_distribution(after(*m, "s", {"b"}), 5);
  REQUIRE(d.size() == 2);
  CHECK(d.candidates[0].token.text == "c");
  CHECK(d.candidates[1].token.text == "d");
  CHECK(d.candidates[0].prob == 0.5);
  CHECK(m->fallback_hits() == before + 1);
}

TEST_CASE("context spans start padding, prompt and generated tokens") {
  const auto m = ToyModelBuilder()
                     .token("x", "x")
                     .token("y", "y")
                     .token("z", "z")
                     .context_len(2)
                     .start_context({"^", "^"})
                     .rule({"^", "^"}, {{"x", 1}})
                     .rule({"^", "x"}, {{"y", 1}})
                     .rule({"x", "y"}, {{"z", 1}})
                     .fallback({"x"})
                     .build();
  CHECK(m->next_distribution(after(*m, "", {}), 3).candidates[0].token.text == "x");
  CHECK(m->next_distribution(after(*m, "x", {}), 3).candidates[0].token.text == "y");
  CHECK(m->next_distribution(after(*m, "", {"x"}), 3).candidates[0].token.text == "y");
  CHECK(m->next_distribution(after(*m, "x", {"y"}), 3).candidates[0].token.text == "z");
}

TEST_CASE("weights are normalized and duplicates merge") {
  const auto m = ToyModelBuilder().token("a", "a").token("b", "b").context_len(1).rule({"a"}, {{"a", 2}, {"b", 1}, {"b", 1}}).build();
  const auto d = m->next_distribution(after(*m, "a", {}), 2);
  CHECK(d.candidates[0].prob == 0.5);
  CHECK(d.candidates[1].prob == 0.5);
  CHECK(d.candidates[0].token.text == "a");
}

TEST_CASE("json round trip preserves behaviour and id") {
  const auto m = ab_model();
  const auto back = ToyGrammarModel::from_json(m->to_json());
  CHECK(back->id() == m->id());
  CHECK(back->to_json() == m->to_json());
  for (const auto& names : std::vector<std::vector<std::string>>{{}, {"a"}, {"b"}, {"a", "c"}}) {
    CHECK(back->next_distribution(after(*back, "s", names), 4) == m->next_distribution(after(*m, "s", names), 4));
  }

  const auto dir = std::filesystem::temp_directory_path() / "rtlmcts-toy-model-test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "m.json") << R"({"vocab": ["p", {"name": "q", "text": " q;"}], "context_len": 1,
    "rules": {"p": {"q": 3, "p": 1}}, "fallback": ["p"]})";
  const auto loaded = ToyGrammarModel::load(dir / "m.json");
  CHECK(loaded->vocabulary().at(1).text == " q;");
  const auto d = loaded->next_distribution(after(*loaded, "p", {}), 2);
  CHECK(d.candidates[0].token.text == " q;");
  CHECK(d.candidates[0].prob == 0.75);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid definitions are rejected") {
  CHECK_THROWS_AS(ToyModelBuilder().token("a b", "x").build(), ConfigError);
  CHECK_THROWS_AS(ToyModelBuilder().token("a", "x").token("a", "y").build(), ConfigError);
  CHECK_THROWS_AS(ToyModelBuilder().token("a", "x").rule({"a"}, {{"zz", 1}}).build(), ConfigError);
  CHECK_THROWS_AS(ToyModelBuilder().token("a", "x").rule({"a"}, {{"a", 0}}).build(), ConfigError);
  CHECK_THROWS_AS(ToyModelBuilder().token("a", "x").context_len(1).rule({"a", "a"}, {{"a", 1}}).build(), ConfigError);
  CHECK_THROWS_AS(ToyModelBuilder().token("a", "x").context_len(0).build(), ConfigError);
  CHECK_THROWS_AS(ToyGrammarModel::load("/nonexistent/model.json"), ConfigError);
}

TEST_CASE("preconditions") {
  const auto m = ab_model();
  CHECK_THROWS_AS(m->next_distribution(after(*m, "s", {}), 0), SearchLogicError);
  SequenceState t(make_prompt("", m->vocabulary()), 1);
  t = transition(t, m->vocabulary().at(0), m->vocabulary());
  CHECK_THROWS_AS(m->next_distribution(t, 1), SearchLogicError);
}
