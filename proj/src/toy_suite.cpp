#include "rtlmcts/toy_suite.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "rtlmcts/errors.hpp"

namespace rtlmcts {

namespace {

using Weights = ToyGrammarModel::Weights;

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Multiplies each weight by a factor in [1 - spread, 1 + spread].
class Jitter {
 public:
  Jitter(std::uint64_t seed, double spread) : rng_(seed), spread_(spread) {}

  Weights operator()(Weights w) {
    for (auto& [name, weight] : w) weight *= 1.0 - spread_ + 2.0 * spread_ * unit();
    return w;
  }

 private:
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1p-53; }

  std::mt19937_64 rng_;
  double spread_;
};

struct Grammar {
  ToyModelBuilder builder;

  Grammar& tok(const std::string& name, const std::string& text) {
    builder.token(name, text);
    return *this;
  }
  Grammar& rule(const std::string& context, Weights w) {
    builder.rule(words(context), std::move(w));
    return *this;
  }
  std::shared_ptr<const ToyGrammarModel> build(std::vector<std::string> fallback) {
    builder.fallback(std::move(fallback));
    return builder.build();
  }
};

ToyTask make_task(std::string name, std::shared_ptr<const ToyGrammarModel> model, ToyCircuitTask circuit,
                  std::string prompt, std::size_t t_max, int width = 0) {
  ToyTask t;
  t.kind = name;
  t.name = std::move(name);
  t.bit_width = width > 0 ? width : static_cast<int>(circuit.input_count);
  t.model = std::move(model);
  t.circuit = std::move(circuit);
  t.prompt = std::move(prompt);
  t.t_max = t_max;
  return t;
}

const char* kHdr2 = "inputs a b;\n";
const char* kHdr3 = "inputs a b c;\n";

// Two-input truth tables, rows ab = 00, 10, 01, 11.
const char* kAnd = "0001";
const char* kOr = "0111";
const char* kXor = "0110";
const char* kNand = "1110";
const char* kNor = "1000";
const char* kXnor = "1001";

std::string gate2(const std::string& out, const std::string& op, const std::string& x, const std::string& y) {
  return out + " = " + op + "(" + x + ", " + y + ");\n";
}

}  // namespace

nlohmann::json to_json(const ToyTask& t) {
  return {{"name", t.name},        {"kind", t.kind},
          {"width", t.bit_width},  {"prompt", t.prompt},
          {"t_max", t.t_max},      {"model", t.model->to_json()},
          {"circuit", t.circuit.to_json()}};
}

ToyTask toy_task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    ToyTask t;
    t.name = j.at("name").get<std::string>();
    t.kind = j.value("kind", t.name);
    t.circuit = ToyCircuitTask::from_json(j.at("circuit"));
    t.bit_width = j.value("width", static_cast<int>(t.circuit.input_count));
    t.prompt = j.at("prompt").get<std::string>();
    t.t_max = j.value("t_max", t.t_max);
    if (j.contains("model_file")) {
      auto path = std::filesystem::path(j.at("model_file").get<std::string>());
      if (path.is_relative()) path = base_dir / path;
      t.model = ToyGrammarModel::load(path);
    } else {
      t.model = ToyGrammarModel::from_json(j.at("model"));
    }
    t.model->vocabulary().tokenize(t.prompt);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("toy task: ") + e.what());
  }
}

ToyTask load_toy_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open toy task " + path.string());
  try {
    return toy_task_from_json(nlohmann::json::parse(in), path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<ToyTask> oracle_tasks() {
  std::vector<ToyTask> out;
  const auto end = std::vector<std::string>{"end"};

  {  // NAND directly or as NOT(AND)
    Grammar g;
    g.tok("hdr", kHdr2)
        .tok("and", gate2("t", "AND", "a", "b"))
        .tok("or", gate2("t", "OR", "a", "b"))
        .tok("nand", gate2("t", "NAND", "a", "b"))
        .tok("inv", "u = NOT(t);\n")
        .tok("ot", "out t;\n")
        .tok("ou", "out u;\n")
        .tok("end", "endmodule\n");
    g.rule("hdr", {{"and", 5}, {"or", 3}, {"nand", 2}});
    for (const char* x : {"and", "or", "nand"}) {
      g.rule(std::string("hdr ") + x, {{"inv", 5}, {"ot", 3}, {"end", 2}});
      g.rule(std::string(x) + " inv", {{"ou", 6}, {"ot", 3}, {"end", 1}});
      g.rule(std::string(x) + " ot", {{"end", 7}, {"inv", 3}});
    }
    out.push_back(make_task("oracle-1", g.build(end), ToyCircuitTask::from_table(2, kNand), kHdr2, 6));
  }
  {  // XOR directly or as AND(OR, NAND)
    Grammar g;
    g.tok("hdr", kHdr2)
        .tok("or", gate2("t", "OR", "a", "b"))
        .tok("xor", gate2("t", "XOR", "a", "b"))
        .tok("nand", gate2("u", "NAND", "a", "b"))
        .tok("and", gate2("v", "AND", "t", "u"))
        .tok("ot", "out t;\n")
        .tok("ov", "out v;\n")
        .tok("end", "endmodule\n");
    g.rule("hdr", {{"or", 6}, {"nand", 2}, {"xor", 1}});
    g.rule("hdr or", {{"nand", 6}, {"ot", 4}});
    g.rule("hdr nand", {{"or", 5}, {"ov", 5}});
    g.rule("hdr xor", {{"ot", 6}, {"nand", 4}});
    g.rule("or nand", {{"and", 7}, {"ot", 3}});
    g.rule("nand or", {{"and", 5}, {"ot", 5}});
    g.rule("xor nand", {{"and", 6}, {"ot", 4}});
    g.rule("nand and", {{"ov", 8}, {"ot", 2}});
    g.rule("or and", {{"ov", 8}, {"ot", 2}});
    g.rule("and ov", {{"end", 1}});
    g.rule("xor ot", {{"end", 1}});
    out.push_back(make_task("oracle-2", g.build(end), ToyCircuitTask::from_table(2, kXor), kHdr2, 6));
  }
  {  // three-input AND, two structures
    Grammar g;
    g.tok("hdr", kHdr3)
        .tok("a1", gate2("t", "AND", "a", "b"))
        .tok("n1", gate2("t", "NAND", "a", "b"))
        .tok("a2", gate2("u", "AND", "t", "c"))
        .tok("nc", "v = NOT(c);\n")
        .tok("nr", gate2("u", "NOR", "t", "v"))
        .tok("ou", "out u;\n")
        .tok("end", "endmodule\n");
    g.rule("hdr", {{"n1", 6}, {"a1", 4}});
    g.rule("hdr n1", {{"nc", 6}, {"a2", 4}});
    g.rule("hdr a1", {{"a2", 5}, {"nc", 5}});
    g.rule("n1 nc", {{"nr", 7}, {"ou", 3}});
    g.rule("a1 nc", {{"a2", 5}, {"nr", 5}});
    g.rule("n1 a2", {{"ou", 1}});
    g.rule("a1 a2", {{"ou", 1}});
    g.rule("nc nr", {{"ou", 1}});
    g.rule("nc a2", {{"ou", 1}});
    out.push_back(make_task("oracle-3", g.build(end),
                            ToyCircuitTask::from_table(3, "00000001"), kHdr3, 6));
  }
  {  // OR, with a comment token on the way
    Grammar g;
    g.tok("hdr", kHdr2)
        .tok("nor", gate2("t", "NOR", "a", "b"))
        .tok("or", gate2("t", "OR", "a", "b"))
        .tok("cm", "// invert\n")
        .tok("inv", "u = NOT(t);\n")
        .tok("ot", "out t;\n")
        .tok("ou", "out u;\n")
        .tok("end", "endmodule\n");
    g.rule("hdr", {{"nor", 6}, {"cm", 3}, {"or", 1}});
    g.rule("hdr cm", {{"or", 7}, {"nor", 3}});
    g.rule("hdr nor", {{"cm", 5}, {"inv", 3}, {"ot", 2}});
    g.rule("nor cm", {{"inv", 8}, {"ou", 2}});
    g.rule("cm inv", {{"ou", 7}, {"ot", 3}});
    g.rule("nor inv", {{"ou", 7}, {"ot", 3}});
    g.rule("hdr or", {{"ot", 6}, {"inv", 4}});
    g.rule("cm or", {{"ot", 6}, {"inv", 4}});
    g.rule("or inv", {{"ou", 1}});
    out.push_back(make_task("oracle-4", g.build(end), ToyCircuitTask::from_table(2, kOr), kHdr2, 6));
  }
  {  // XNOR through a comment-heavy model
    Grammar g;
    g.tok("hdr", kHdr2)
        .tok("xor", gate2("t", "XOR", "a", "b"))
        .tok("or", gate2("t", "OR", "a", "b"))
        .tok("cm", "/* flip */\n")
        .tok("inv", "u = NOT(t);\n")
        .tok("ot", "out t;\n")
        .tok("ou", "out u;\n")
        .tok("end", "endmodule\n");
    g.rule("hdr", {{"cm", 5}, {"or", 3}, {"xor", 2}});
    g.rule("hdr cm", {{"xor", 5}, {"or", 5}});
    g.rule("cm xor", {{"ot", 6}, {"inv", 4}});
    g.rule("cm or", {{"ot", 6}, {"inv", 4}});
    g.rule("hdr xor", {{"ot", 5}, {"cm", 3}, {"inv", 2}});
    g.rule("hdr or", {{"inv", 6}, {"ot", 4}});
    g.rule("xor cm", {{"inv", 1}});
    g.rule("cm inv", {{"ou", 8}, {"ot", 2}});
    g.rule("xor inv", {{"ou", 8}, {"end", 2}});
    g.rule("or inv", {{"ou", 1}});
    out.push_back(make_task("oracle-5", g.build(end), ToyCircuitTask::from_table(2, kXnor), kHdr2, 6));
  }
  return out;
}

ToyTask redundant_logic_task(std::uint64_t seed) {
  // (target, direct gate, complement gate, distractor)
  struct Variant {
    const char* table;
    const char* direct;
    const char* complement;
    const char* distractor;
  };
  static const Variant kVariants[] = {
      {kNand, "NAND", "AND", "OR"},
      {kNor, "NOR", "OR", "AND"},
      {kAnd, "AND", "NAND", "OR"},
      {kOr, "OR", "NOR", "AND"},
  };
  const auto& v = kVariants[seed % 4];
  Jitter j(0x5eed0000 + seed, 0.1);

  Grammar g;
  g.tok("hdr", kHdr2)
      .tok("g1", gate2("t", v.complement, "a", "b"))
      .tok("d1", gate2("t", "XOR", "a", "b"))
      .tok("d2", gate2("t", v.distractor, "a", "b"))
      .tok("cm", "// invert the result\n")
      .tok("g2", gate2("t", v.direct, "a", "b"))
      .tok("inv", "u = NOT(t);\n")
      .tok("ot", "out t;\n")
      .tok("ou", "out u;\n")
      .tok("end", "endmodule\n");
  g.rule("hdr", j({{"g1", 42}, {"d1", 20}, {"d2", 14}, {"cm", 12}, {"g2", 8}, {"ou", 4}}));
  g.rule("hdr g1", j({{"inv", 60}, {"ot", 25}, {"ou", 15}}));
  g.rule("g1 inv", j({{"ou", 70}, {"ot", 20}, {"end", 10}}));
  g.rule("hdr d1", j({{"ot", 70}, {"inv", 30}}));
  g.rule("d1 inv", j({{"ou", 80}, {"ot", 20}}));
  g.rule("hdr d2", j({{"ot", 60}, {"inv", 40}}));
  g.rule("d2 inv", j({{"ou", 90}, {"ot", 10}}));
  g.rule("hdr g2", j({{"ot", 55}, {"inv", 45}}));
  g.rule("g2 inv", j({{"ou", 80}, {"ot", 20}}));
  g.rule("hdr cm", j({{"g1", 80}, {"d1", 20}}));
  g.rule("cm g1", j({{"inv", 60}, {"ot", 40}}));
  g.rule("cm d1", {{"ot", 1}});
  return make_task("redundant-logic:" + std::to_string(seed), g.build({"end"}),
                   ToyCircuitTask::from_table(2, v.table), kHdr2, 8);
}

ToyTask greedy_trap_task(std::size_t index) {
  const auto name = "greedy-trap:" + std::to_string(index);
  const auto end = std::vector<std::string>{"end"};
  Grammar g;
  switch (index) {
    case 0: {  // the likeliest gate is the wrong one
      g.tok("hdr", kHdr2)
          .tok("or", gate2("t", "OR", "a", "b"))
          .tok("xor", gate2("t", "XOR", "a", "b"))
          .tok("and", gate2("t", "AND", "a", "b"))
          .tok("ot", "out t;\n")
          .tok("end", "endmodule\n");
      g.rule("hdr", {{"or", 5}, {"xor", 3}, {"and", 2}});
      for (const char* x : {"or", "xor", "and"}) g.rule(std::string("hdr ") + x, {{"ot", 1}});
      return make_task(name, g.build(end), ToyCircuitTask::from_table(2, kXor), kHdr2, 8);
    }
    case 1: {  // a comment pulls the model towards a gateless netlist
      g.tok("hdr", kHdr2)
          .tok("cm", "// pass through\n")
          .tok("and", gate2("t", "AND", "a", "b"))
          .tok("or", gate2("t", "OR", "a", "b"))
          .tok("oa", "out a;\n")
          .tok("ot", "out t;\n")
          .tok("end", "endmodule\n");
      g.rule("hdr", {{"cm", 55}, {"and", 30}, {"or", 15}});
      g.rule("hdr cm", {{"oa", 7}, {"and", 3}});
      g.rule("cm and", {{"ot", 1}});
      g.rule("hdr and", {{"ot", 8}, {"oa", 2}});
      g.rule("hdr or", {{"ot", 1}});
      return make_task(name, g.build(end), ToyCircuitTask::from_table(2, kAnd), kHdr2, 8);
    }
    case 2: {  // right structure, wrong output net
      g.tok("hdr", kHdr2)
          .tok("or", gate2("t", "OR", "a", "b"))
          .tok("nor", gate2("t", "NOR", "a", "b"))
          .tok("inv", "u = NOT(t);\n")
          .tok("ot", "out t;\n")
          .tok("ou", "out u;\n")
          .tok("end", "endmodule\n");
      g.rule("hdr", {{"or", 6}, {"nor", 4}});
      g.rule("hdr or", {{"inv", 7}, {"ot", 3}});
      g.rule("or inv", {{"ot", 6}, {"ou", 4}});
      g.rule("hdr nor", {{"ot", 5}, {"inv", 5}});
      g.rule("nor inv", {{"ou", 1}});
      return make_task(name, g.build(end), ToyCircuitTask::from_table(2, kNor), kHdr2, 8);
    }
    case 3: {  // comments repeat until the length limit
      g.tok("hdr", kHdr2)
          .tok("and", gate2("t", "AND", "a", "b"))
          .tok("cm", "// check again\n")
          .tok("inv", "u = NOT(t);\n")
          .tok("ot", "out t;\n")
          .tok("end", "endmodule\n");
      g.rule("hdr", {{"and", 1}});
      g.rule("hdr and", {{"cm", 6}, {"ot", 3}, {"inv", 1}});
      g.rule("and cm", {{"cm", 6}, {"ot", 4}});
      g.rule("cm cm", {{"cm", 6}, {"ot", 4}});
      g.rule("and inv", {{"ot", 1}});
      return make_task(name, g.build(end), ToyCircuitTask::from_table(2, kAnd), kHdr2, 8);
    }
    case 4: {  // three-input parity: the second gate is usually wrong
      g.tok("hdr", kHdr3)
          .tok("x1", gate2("t", "XOR", "a", "b"))
          .tok("o1", gate2("t", "OR", "a", "b"))
          .tok("o2", gate2("u", "OR", "t", "c"))
          .tok("x2", gate2("u", "XOR", "t", "c"))
          .tok("a2", gate2("u", "AND", "t", "c"))
          .tok("ou", "out u;\n")
          .tok("end", "endmodule\n");
      g.rule("hdr", {{"x1", 55}, {"o1", 45}});
      g.rule("hdr x1", {{"o2", 50}, {"x2", 35}, {"a2", 15}});
      g.rule("hdr o1", {{"x2", 60}, {"o2", 40}});
      for (const char* x : {"x1", "o1"}) {
        for (const char* y : {"o2", "x2", "a2"}) g.rule(std::string(x) + " " + y, {{"ou", 1}});
      }
      return make_task(name, g.build(end), ToyCircuitTask::from_table(3, "01101001"), kHdr3, 8);
    }
    default:
      throw ConfigError("greedy-trap index must be 0..4");
  }
}

namespace {

const char* kParHdr = "module par;\ninputs a b c;\n";
const char* kLargeHdr = "inputs a b c d e f;\n";

// Shared vocabulary for both parity tasks so stored code tokenizes in the
// large task's prompt.
std::shared_ptr<const ToyGrammarModel> parity_model(std::uint64_t seed) {
  Jitter j(0xa11ce000 + seed, 0.1);
  Grammar g;
  g.tok("hs", kParHdr)
      .tok("hl", kLargeHdr)
      .tok("x1", gate2("t", "XOR", "a", "b"))
      .tok("o1", gate2("t", "OR", "a", "b"))
      .tok("x2", gate2("u", "XOR", "t", "c"))
      .tok("o2", gate2("u", "OR", "t", "c"))
      .tok("su", "out u;\n")
      .tok("l1", gate2("p", "XOR", "a", "b"))
      .tok("l1o", gate2("p", "OR", "a", "b"))
      .tok("l2", gate2("q", "XOR", "p", "c"))
      .tok("l2o", gate2("q", "OR", "p", "c"))
      .tok("l3", gate2("r", "XOR", "q", "d"))
      .tok("l3a", gate2("r", "AND", "q", "d"))
      .tok("l4", gate2("s", "XOR", "r", "e"))
      .tok("l4o", gate2("s", "OR", "r", "e"))
      .tok("l5", gate2("w", "XOR", "s", "f"))
      .tok("l5a", gate2("w", "AND", "s", "f"))
      .tok("ow", "out w;\n")
      .tok("pa", "p = par(a, b, c);\n")
      .tok("pb", "q = par(d, e, f);\n")
      .tok("pr", gate2("r", "XOR", "p", "q"))
      .tok("orr", "out r;\n")
      .tok("end", "endmodule\n");
  // Small module.
  g.rule("hs", j({{"x1", 70}, {"o1", 30}}));
  g.rule("hs x1", j({{"x2", 65}, {"o2", 35}}));
  g.rule("hs o1", j({{"x2", 50}, {"o2", 50}}));
  for (const char* x : {"x1", "o1"}) {
    for (const char* y : {"x2", "o2"}) g.rule(std::string(x) + " " + y, {{"su", 1}});
  }
  // Large module, written from scratch.
  g.rule("hl", j({{"l1", 55}, {"pa", 30}, {"l1o", 15}}));
  g.rule("hl l1", j({{"l2o", 52}, {"l2", 48}}));
  g.rule("hl l1o", j({{"l2", 60}, {"l2o", 40}}));
  for (const char* p : {"l1", "l1o"}) {
    g.rule(std::string(p) + " l2", j({{"l3a", 52}, {"l3", 48}}));
    g.rule(std::string(p) + " l2o", j({{"l3", 60}, {"l3a", 40}}));
  }
  for (const char* p : {"l2", "l2o"}) {
    g.rule(std::string(p) + " l3", j({{"l4o", 52}, {"l4", 48}}));
    g.rule(std::string(p) + " l3a", j({{"l4", 60}, {"l4o", 40}}));
  }
  for (const char* p : {"l3", "l3a"}) {
    g.rule(std::string(p) + " l4", j({{"l5a", 52}, {"l5", 48}}));
    g.rule(std::string(p) + " l4o", j({{"l5", 60}, {"l5a", 40}}));
  }
  for (const char* p : {"l4", "l4o"}) {
    g.rule(std::string(p) + " l5", {{"ow", 1}});
    g.rule(std::string(p) + " l5a", {{"ow", 1}});
  }
  // Large module after a stored `par` definition.
  g.rule("end hl", j({{"pa", 80}, {"l1", 20}}));
  g.rule("hl pa", j({{"pb", 90}, {"l2", 10}}));
  g.rule("pa pb", {{"pr", 1}});
  g.rule("pb pr", {{"orr", 1}});
  g.rule("pa l2", j({{"l3", 50}, {"l3a", 50}}));
  return g.build({"end"});
}

}  // namespace

ToyTask parity_small_task(std::uint64_t seed) {
  auto t = make_task("parity-small:" + std::to_string(seed), parity_model(seed),
                     ToyCircuitTask::from_table(3, "01101001"), kParHdr, 8, 3);
  t.kind = "parity";
  return t;
}

ToyTask parity_large_task(std::uint64_t seed) {
  std::string table;
  for (unsigned r = 0; r < 64; ++r) table.push_back((__builtin_popcount(r) & 1) ? '1' : '0');
  auto t = make_task("parity-large:" + std::to_string(seed), parity_model(seed), ToyCircuitTask::from_table(6, table),
                     kLargeHdr, 12, 6);
  t.kind = "parity";
  return t;
}

CompositionPolicy parity_composition_policy() {
  CompositionPolicy p;
  p.large_threshold_bits = 6;
  p.dependencies[ModuleKey{"parity", 6}] = {ModuleKey{"parity", 3}};
  return p;
}

ToyTask sweep_reference_task() {
  // Three-input parity. Most netlists are wrong; the functional ones are a
  // two-XOR chain (ADP 12) and a chain padded with a double inversion (ADP 32).
  Grammar g;
  g.tok("hdr", kHdr3)
      .tok("x1", gate2("t", "XOR", "a", "b"))
      .tok("o1", gate2("t", "OR", "a", "b"))
      .tok("a1", gate2("t", "AND", "a", "b"))
      .tok("cm", "// parity\n")
      .tok("n1", "n = NOT(t);\n")
      .tok("n2", "m = NOT(n);\n")
      .tok("xm", gate2("u", "XOR", "m", "c"))
      .tok("xn", gate2("u", "XOR", "n", "c"))
      .tok("x2", gate2("u", "XOR", "t", "c"))
      .tok("o2", gate2("u", "OR", "t", "c"))
      .tok("a2", gate2("u", "AND", "t", "c"))
      .tok("ou", "out u;\n")
      .tok("end", "endmodule\n");
  g.rule("hdr", {{"o1", 35}, {"x1", 25}, {"cm", 20}, {"a1", 20}});
  g.rule("hdr cm", {{"o1", 50}, {"x1", 50}});
  for (const char* p : {"hdr", "cm"}) {
    g.rule(std::string(p) + " x1", {{"o2", 35}, {"n1", 30}, {"a2", 20}, {"x2", 15}});
    g.rule(std::string(p) + " o1", {{"x2", 50}, {"o2", 30}, {"n1", 20}});
    g.rule(std::string(p) + " a1", {{"x2", 60}, {"o2", 40}});
  }
  for (const char* p : {"x1", "o1", "a1"}) {
    g.rule(std::string(p) + " n1", {{"xn", 50}, {"n2", 50}});
    for (const char* q : {"x2", "o2", "a2"}) g.rule(std::string(p) + " " + q, {{"ou", 1}});
  }
  g.rule("n1 n2", {{"xm", 1}});
  g.rule("n1 xn", {{"ou", 1}});
  g.rule("n2 xm", {{"ou", 1}});
  return make_task("sweep-reference", g.build({"end"}), ToyCircuitTask::from_table(3, "01101001"), kHdr3, 10);
}

ToyTask easy_task() {
  Grammar g;
  g.tok("hdr", kHdr2)
      .tok("and", gate2("t", "AND", "a", "b"))
      .tok("or", gate2("t", "OR", "a", "b"))
      .tok("ot", "out t;\n")
      .tok("end", "endmodule\n");
  g.rule("hdr", {{"and", 7}, {"or", 3}});
  g.rule("hdr and", {{"ot", 1}});
  g.rule("hdr or", {{"ot", 1}});
  return make_task("easy", g.build({"end"}), ToyCircuitTask::from_table(2, kAnd), kHdr2, 8);
}

ToyTask hard_task() {
  // Four-input parity; every step prefers a wrong gate.
  Grammar g;
  g.tok("hdr", "inputs a b c d;\n")
      .tok("x1", gate2("t", "XOR", "a", "b"))
      .tok("o1", gate2("t", "OR", "a", "b"))
      .tok("x2", gate2("u", "XOR", "t", "c"))
      .tok("o2", gate2("u", "OR", "t", "c"))
      .tok("x3", gate2("v", "XOR", "u", "d"))
      .tok("a3", gate2("v", "AND", "u", "d"))
      .tok("ov", "out v;\n")
      .tok("end", "endmodule\n");
  g.rule("hdr", {{"o1", 6}, {"x1", 4}});
  for (const char* p : {"x1", "o1"}) g.rule(std::string("hdr ") + p, {{"o2", 6}, {"x2", 4}});
  for (const char* p : {"x1", "o1"}) {
    for (const char* q : {"x2", "o2"}) g.rule(std::string(p) + " " + q, {{"a3", 6}, {"x3", 4}});
  }
  for (const char* p : {"x2", "o2"}) {
    for (const char* q : {"x3", "a3"}) g.rule(std::string(p) + " " + q, {{"ov", 1}});
  }
  return make_task("hard", g.build({"end"}), ToyCircuitTask::from_table(4, "0110100110010110"), "inputs a b c d;\n",
                   10);
}

ToyTask random_toy_task(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  const std::size_t v = 4 + below(6);
  const std::size_t m = 1 + below(2);
  Grammar g;
  std::vector<std::string> names;
  g.tok("hdr", kHdr2);
  names.push_back("hdr");
  g.tok("end", "endmodule\n");
  names.push_back("end");
  g.tok("cm", "// note\n");
  names.push_back("cm");
  for (std::size_t i = names.size(); i < v; ++i) {
    const auto name = "w" + std::to_string(i);
    g.tok(name, gate2(std::string(1, static_cast<char>('c' + i)), "AND", "a", "b"));
    names.push_back(name);
  }
  g.builder.context_len(m);

  std::vector<std::vector<std::string>> contexts{{}};
  for (std::size_t len = 1; len <= m; ++len) {
    std::vector<std::vector<std::string>> grown;
    for (const auto& c : contexts) {
      if (c.size() + 1 != len) continue;
      for (const auto& n : names) {
        auto next = c;
        next.push_back(n);
        grown.push_back(std::move(next));
      }
    }
    contexts.insert(contexts.end(), grown.begin(), grown.end());
  }
  for (const auto& c : contexts) {
    if (c.empty() || below(10) < 3) continue;
    Weights w;
    for (const auto& n : names) {
      if (below(3) == 0) w.emplace_back(n, static_cast<double>(1 + below(3)));
    }
    if (w.empty()) w.emplace_back(names[below(names.size())], 1.0);
    // A context whose only continuation is a comment would leave the search nothing to expand.
    if (w.size() == 1 && w.front().first == "cm") w.emplace_back("end", 1.0);
    std::string key;
    for (const auto& n : c) key += n + " ";
    g.rule(key, std::move(w));
  }
  std::vector<std::string> fallback;
  for (const auto& n : names) {
    if (below(2) == 0) fallback.push_back(n);
  }
  if (fallback.empty() || fallback == std::vector<std::string>{"cm"}) fallback.push_back("end");
  return make_task("random:" + std::to_string(seed), g.build(fallback), ToyCircuitTask::from_table(2, kAnd), kHdr2,
                   4 + below(8));
}

std::vector<std::string> builtin_task_names() {
  std::vector<std::string> out;
  for (int i = 1; i <= 5; ++i) out.push_back("oracle-" + std::to_string(i));
  for (int i = 0; i < 5; ++i) out.push_back("redundant-logic:" + std::to_string(i));
  for (int i = 0; i < 5; ++i) out.push_back("greedy-trap:" + std::to_string(i));
  for (int i = 0; i < 5; ++i) out.push_back("parity-small:" + std::to_string(i));
  for (int i = 0; i < 5; ++i) out.push_back("parity-large:" + std::to_string(i));
  out.insert(out.end(), {"sweep-reference", "easy", "hard"});
  return out;
}

ToyTask builtin_task(const std::string& name) {
  if (name.starts_with("oracle-")) {
    const auto i = std::stoul(name.substr(7));
    auto tasks = oracle_tasks();
    if (i >= 1 && i <= tasks.size()) return tasks[i - 1];
  }
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    const auto family = name.substr(0, colon);
    std::uint64_t arg = 0;
    try {
      arg = std::stoull(name.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad task index in '" + name + "'");
    }
    if (family == "redundant-logic") return redundant_logic_task(arg);
    if (family == "greedy-trap") return greedy_trap_task(arg);
    if (family == "parity-small") return parity_small_task(arg);
    if (family == "parity-large") return parity_large_task(arg);
    if (family == "random") return random_toy_task(arg);
  }
  if (name == "sweep-reference") return sweep_reference_task();
  if (name == "easy") return easy_task();
  if (name == "hard") return hard_task();
  throw ConfigError("unknown builtin task '" + name + "'");
}

}  // namespace rtlmcts
