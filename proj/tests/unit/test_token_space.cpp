#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/token_space.hpp"

using namespace rtlmcts;

namespace {

Vocabulary verilog_vocab() {
  return Vocabulary({"module", " adder", "(", ")", ";", "\n", "endmodule", "//", "assign", "/*comment", "*/", "x",
                     " ", "wire", "end", "module_"});
}

SequenceState empty_state(const Vocabulary& v, std::size_t t_max = 8) { return SequenceState(make_prompt("", v), t_max); }

Token tok(const Vocabulary& v, const std::string& text) { return v.at(*v.find(text)); }

}  // namespace

TEST_CASE("transition appends one token and leaves the input alone") {
  const auto v = verilog_vocab();
  const auto s0 = SequenceState(make_prompt("x", v), 8);
  const auto s1 = transition(s0, tok(v, "module"), v);
  CHECK(s0.step() == 0);
  CHECK(s0.generated_text().empty());
  CHECK(s1.step() == 1);
  REQUIRE(s1.generated().size() == 1);
  CHECK(s1.generated()[0] == *v.find("module"));
  CHECK(s1.prompt().text == "x");
  CHECK(transition(s0, tok(v, "module"), v) == s1);
}

TEST_CASE("the t_max-th token makes the state terminal") {
  const auto v = verilog_vocab();
  auto s = empty_state(v, 3);
  s = transition(s, tok(v, "x"), v);
  s = transition(s, tok(v, "x"), v);
  CHECK_FALSE(is_terminal(s));
  s = transition(s, tok(v, "x"), v);
  CHECK(s.step() == 3);
  CHECK(is_terminal(s));
}

TEST_CASE("terminal marker ends the sequence") {
  const auto v = verilog_vocab();
  CHECK_FALSE(is_terminal(empty_state(v)));
  CHECK(is_terminal(transition(empty_state(v), tok(v, "endmodule"), v)));

  // Split across tokens, and followed by whitespace.
  auto s = transition(empty_state(v), tok(v, "end"), v);
  CHECK_FALSE(is_terminal(s));
  s = transition(s, tok(v, "module"), v);
  CHECK(is_terminal(s));
  auto w = transition(empty_state(v), tok(v, "end"), v);
  w = transition(w, tok(v, "module_"), v);
  CHECK_FALSE(is_terminal(w));

  CHECK(v.ends_with_terminal_marker("y;\nendmodule \n\t"));
  CHECK_FALSE(v.ends_with_terminal_marker("endmodule x"));
}

TEST_CASE("no successor from a terminal state") {
  const auto v = verilog_vocab();
  const auto t = transition(empty_state(v), tok(v, "endmodule"), v);
  CHECK_THROWS_AS(transition(t, tok(v, "x"), v), SearchLogicError);
  auto m = empty_state(v, 1);
  m = transition(m, tok(v, "x"), v);
  CHECK_THROWS_AS(transition(m, tok(v, "x"), v), SearchLogicError);
}

TEST_CASE("comment openers by substring") {
  const auto v = verilog_vocab();
  CHECK(is_comment_opener(tok(v, "//"), v));
  CHECK_FALSE(is_comment_opener(tok(v, "assign"), v));
  CHECK(is_comment_opener(tok(v, "/*comment"), v));
  CHECK(is_comment_opener(tok(v, "*/"), v));

  // Exhaustive over the vocabulary.
  for (const auto& t : v.tokens()) {
    const bool expected = t.text.find("//") != std::string::npos || t.text.find("/*") != std::string::npos ||
                          t.text.find("*/") != std::string::npos;
    CHECK(is_comment_opener(t, v) == expected);
  }
}

TEST_CASE("custom comment openers and terminal markers") {
  const Vocabulary v({"--", "a", "END"}, VocabularyOptions{{"END"}, {"--"}});
  CHECK(v.is_comment_opener(0));
  CHECK_FALSE(v.is_comment_opener(1));
  CHECK(v.ends_with_terminal_marker("a END"));
  CHECK_FALSE(v.ends_with_terminal_marker("endmodule"));
}

TEST_CASE("render concatenates prompt and generated text") {
  const auto v = verilog_vocab();
  auto s = empty_state(v);
  CHECK(render(s).empty());
  for (const char* t : {"module", " adder", "(", ")"}) s = transition(s, tok(v, t), v);
  CHECK(render(s) == "module adder()");

  const auto p = SequenceState(make_prompt("wire x;\n", v), 8);
  CHECK(render(p) == "wire x;\n");
  const auto q = transition(p, tok(v, "assign"), v);
  CHECK(render(q) == render(p) + "assign");
}

TEST_CASE("random toy sequences render and re-tokenize exactly") {
  const Vocabulary v({"a", "b", "c", " ", ";", "\n", "ab", "XOR(", ")", ","});
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = SequenceState(make_prompt("", v), 64);
    std::string expected;
    const int len = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < len; ++i) {
      const auto& t = v.at(static_cast<TokenId>(rng() % v.size()));
      const auto before = render(s);
      s = transition(s, t, v);
      CHECK(render(s) == before + t.text);
      expected += t.text;
    }
    REQUIRE(render(s) == expected);
    // Longest-match segmentation may merge "a","b" into "ab" but the text is the same.
    std::string back;
    for (TokenId id : v.tokenize(render(s))) back += v.at(id).text;
    CHECK(back == expected);
  }
}

TEST_CASE("tokenize prefers the longest match and rejects unknown text") {
  const Vocabulary v({"a", "ab", "b"});
  CHECK(v.tokenize("abab") == std::vector<TokenId>{1, 1});
  CHECK(v.tokenize("ba") == std::vector<TokenId>{2, 0});
  CHECK_THROWS_AS(v.tokenize("abc"), ConfigError);
  CHECK_THROWS_AS(make_prompt("zz", v), ConfigError);
}

TEST_CASE("vocabulary jsonl loading") {
  const auto dir = std::filesystem::temp_directory_path() / "rtlmcts-vocab-test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.jsonl") << "{\"id\":1,\"text\":\"//\"}\n{\"id\":0,\"text\":\"wire\"}\n\n";
    std::ofstream(dir / "gap.jsonl") << "{\"id\":0,\"text\":\"a\"}\n{\"id\":2,\"text\":\"b\"}\n";
    std::ofstream(dir / "dup.jsonl") << "{\"id\":0,\"text\":\"a\"}\n{\"id\":0,\"text\":\"b\"}\n";
    std::ofstream(dir / "bad.jsonl") << "{\"id\":0,\n";
  }
  const auto v = Vocabulary::load_jsonl(dir / "ok.jsonl");
  REQUIRE(v.size() == 2);
  CHECK(v.at(0).text == "wire");
  CHECK(v.is_comment_opener(1));
  CHECK_THROWS_AS(Vocabulary::load_jsonl(dir / "gap.jsonl"), ConfigError);
  CHECK_THROWS_AS(Vocabulary::load_jsonl(dir / "dup.jsonl"), ConfigError);
  CHECK_THROWS_AS(Vocabulary::load_jsonl(dir / "bad.jsonl"), ConfigError);
  CHECK_THROWS_AS(Vocabulary::load_jsonl(dir / "missing.jsonl"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid construction") {
  CHECK_THROWS_AS(Vocabulary({"a", ""}), ConfigError);
  const Vocabulary v({"a"});
  CHECK_THROWS_AS(SequenceState(make_prompt("", v), 0), ConfigError);
  CHECK_THROWS_AS(SequenceState(nullptr, 4), ConfigError);
  CHECK_THROWS_AS(v.at(5), std::out_of_range);
}
