#include "rtlmcts/toy_circuit.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include "rtlmcts/errors.hpp"

namespace rtlmcts {

namespace {

constexpr std::size_t kMaxInputs = 6;

const std::set<std::string, std::less<>> kKeywords{"inputs", "out", "module", "endmodule"};

bool is_builtin(std::string_view op) {
  return op == "NOT" || op == "AND" || op == "OR" || op == "XOR" || op == "NAND" || op == "NOR";
}

std::uint64_t row_mask(std::size_t n) { return n >= kMaxInputs ? ~std::uint64_t{0} : (std::uint64_t{1} << (1u << n)) - 1; }

std::uint64_t input_column(std::size_t j, std::size_t n) {
  std::uint64_t col = 0;
  const std::size_t rows = std::size_t{1} << n;
  for (std::size_t r = 0; r < rows; ++r) {
    if ((r >> j) & 1u) col |= std::uint64_t{1} << r;
  }
  return col;
}

enum class Kind { Ident, Gate, Keyword, Punct, End };

struct Lexeme {
  Kind kind;
  std::string text;
  std::size_t line;
};

std::vector<Lexeme> lex(std::string_view src) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      const auto close = src.find("*/", i + 2);
      if (close == std::string_view::npos) throw ToyParseError("line " + std::to_string(line) + ": unterminated comment");
      line += static_cast<std::size_t>(std::count(src.begin() + static_cast<std::ptrdiff_t>(i),
                                                  src.begin() + static_cast<std::ptrdiff_t>(close), '\n'));
      i = close + 2;
    } else if (c >= 'a' && c <= 'z') {
      std::size_t j = i + 1;
      while (j < src.size() && ((src[j] >= 'a' && src[j] <= 'z') || (src[j] >= '0' && src[j] <= '9'))) ++j;
      std::string word(src.substr(i, j - i));
      out.push_back({kKeywords.count(word) ? Kind::Keyword : Kind::Ident, std::move(word), line});
      i = j;
    } else if (c >= 'A' && c <= 'Z') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] >= 'A' && src[j] <= 'Z') ++j;
      out.push_back({Kind::Gate, std::string(src.substr(i, j - i)), line});
      i = j;
    } else if (c == '=' || c == '(' || c == ')' || c == ',' || c == ';') {
      out.push_back({Kind::Punct, std::string(1, c), line});
      ++i;
    } else {
      throw ToyParseError("line " + std::to_string(line) + ": unexpected character '" + std::string(1, c) + "'");
    }
  }
  out.push_back({Kind::End, "", line});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Lexeme> lexemes) : lx_(std::move(lexemes)) {}

  ToyProgram parse() {
    ToyProgram program;
    while (true) {
      program.modules.push_back(parse_module(program));
      if (peek().kind == Kind::End) break;
      if (!ended_) fail("expected 'endmodule' before the next module");
    }
    if (program.top().gates.empty()) fail("top module has no gates");
    return program;
  }

 private:
  const Lexeme& peek() const { return lx_[pos_]; }
  const Lexeme& next() { return lx_[pos_ < lx_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ToyParseError("line " + std::to_string(peek().line) + ": " + msg);
  }

  void expect_punct(char c) {
    if (peek().kind != Kind::Punct || peek().text[0] != c) fail(std::string("expected '") + c + "'");
    next();
  }

  std::string expect_ident() {
    if (peek().kind != Kind::Ident) fail("expected identifier");
    return next().text;
  }

  bool at_keyword(std::string_view kw) const { return peek().kind == Kind::Keyword && peek().text == kw; }

  ToyModule parse_module(const ToyProgram& program) {
    ToyModule m;
    ended_ = false;
    if (at_keyword("module")) {
      next();
      m.name = expect_ident();
      for (const auto& other : program.modules) {
        if (other.name == m.name) fail("module '" + m.name + "' defined twice");
      }
      expect_punct(';');
    }
    if (!at_keyword("inputs")) fail("expected 'inputs'");
    next();
    std::set<std::string> defined;
    while (peek().kind == Kind::Ident) {
      auto name = next().text;
      if (!defined.insert(name).second) fail("input '" + name + "' declared twice");
      m.inputs.push_back(std::move(name));
    }
    if (m.inputs.empty()) fail("module declares no inputs");
    if (m.inputs.size() > kMaxInputs) fail("more than 6 inputs");
    expect_punct(';');

    while (peek().kind == Kind::Ident) {
      ToyGate g;
      g.output = next().text;
      if (defined.count(g.output)) fail("'" + g.output + "' assigned twice");
      expect_punct('=');
      std::size_t arity = 0;
      if (peek().kind == Kind::Gate) {
        g.op = next().text;
        if (!is_builtin(g.op)) fail("unknown gate '" + g.op + "'");
        arity = g.op == "NOT" ? 1 : 2;
      } else if (peek().kind == Kind::Ident) {
        g.op = next().text;
        auto it = std::find_if(program.modules.begin(), program.modules.end(),
                               [&](const ToyModule& other) { return other.name == g.op; });
        if (it == program.modules.end()) fail("unknown module '" + g.op + "'");
        arity = it->inputs.size();
      } else {
        fail("expected gate or module name");
      }
      expect_punct('(');
      while (true) {
        auto arg = expect_ident();
        if (!defined.count(arg)) fail("'" + arg + "' used before definition");
        g.args.push_back(std::move(arg));
        if (peek().kind == Kind::Punct && peek().text == ",") {
          next();
          continue;
        }
        break;
      }
      expect_punct(')');
      expect_punct(';');
      if (g.args.size() != arity) {
        fail("'" + g.op + "' takes " + std::to_string(arity) + " argument(s), got " + std::to_string(g.args.size()));
      }
      defined.insert(g.output);
      m.gates.push_back(std::move(g));
    }

    if (!at_keyword("out")) fail("expected 'out'");
    next();
    m.output = expect_ident();
    if (!defined.count(m.output)) fail("output '" + m.output + "' is not defined");
    expect_punct(';');
    if (at_keyword("endmodule")) {
      next();
      ended_ = true;
    } else if (peek().kind != Kind::End) {
      fail("unexpected text after 'out'");
    }
    return m;
  }

  std::vector<Lexeme> lx_;
  std::size_t pos_ = 0;
  bool ended_ = false;
};

struct ModuleSummary {
  double area = 0.0;
  double delay = 0.0;
};

class Analyzer {
 public:
  Analyzer(const ToyProgram& program, const std::map<std::string, double>& costs) : program_(program), costs_(costs) {}

  std::uint64_t simulate(std::size_t index, const std::vector<std::uint64_t>& inputs) const {
    const auto& m = program_.modules[index];
    std::map<std::string, std::uint64_t> value;
    for (std::size_t j = 0; j < m.inputs.size(); ++j) value[m.inputs[j]] = inputs[j];
    for (const auto& g : m.gates) {
      std::vector<std::uint64_t> args;
      for (const auto& a : g.args) args.push_back(value.at(a));
      std::uint64_t v = 0;
      if (g.op == "NOT") v = ~args[0];
      else if (g.op == "AND") v = args[0] & args[1];
      else if (g.op == "OR") v = args[0] | args[1];
      else if (g.op == "XOR") v = args[0] ^ args[1];
      else if (g.op == "NAND") v = ~(args[0] & args[1]);
      else if (g.op == "NOR") v = ~(args[0] | args[1]);
      else v = simulate(module_index(g.op), args);
      value[g.output] = v;
    }
    return value.at(m.output);
  }

  ModuleSummary summarize(std::size_t index) {
    if (auto it = memo_.find(index); it != memo_.end()) return it->second;
    const auto& m = program_.modules[index];
    std::map<std::string, double> arrival;
    for (const auto& in : m.inputs) arrival[in] = 0.0;
    ModuleSummary s;
    for (const auto& g : m.gates) {
      double latest = 0.0;
      for (const auto& a : g.args) latest = std::max(latest, arrival.at(a));
      if (is_builtin(g.op)) {
        s.area += cost(g.op);
        arrival[g.output] = latest + 1.0;
      } else {
        const auto sub = summarize(module_index(g.op));
        s.area += sub.area;
        arrival[g.output] = latest + sub.delay;
      }
    }
    s.delay = arrival.at(m.output);
    memo_[index] = s;
    return s;
  }

 private:
  std::size_t module_index(const std::string& name) const {
    for (std::size_t i = 0; i < program_.modules.size(); ++i) {
      if (program_.modules[i].name == name) return i;
    }
    throw ToyParseError("unknown module '" + name + "'");
  }

  double cost(const std::string& op) const {
    if (auto it = costs_.find(op); it != costs_.end()) return it->second;
    return ToyCircuitTask::default_gate_costs().at(op);
  }

  const ToyProgram& program_;
  const std::map<std::string, double>& costs_;
  std::map<std::size_t, ModuleSummary> memo_;
};

}  // namespace

std::map<std::string, double> ToyCircuitTask::default_gate_costs() {
  return {{"NOT", 1.0}, {"AND", 2.0}, {"OR", 2.0}, {"XOR", 3.0}, {"NAND", 2.0}, {"NOR", 2.0}};
}

ToyCircuitTask ToyCircuitTask::from_table(std::size_t input_count, std::string_view table) {
  ToyCircuitTask t;
  t.input_count = input_count;
  if (input_count == 0 || input_count > kMaxInputs) throw ConfigError("toy task needs 1..6 inputs");
  if (table.size() != (std::size_t{1} << input_count)) {
    throw ConfigError("truth table must have 2^n = " + std::to_string(std::size_t{1} << input_count) + " entries");
  }
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (table[r] == '1') t.truth_table |= std::uint64_t{1} << r;
    else if (table[r] != '0') throw ConfigError("truth table entries must be '0' or '1'");
  }
  return t;
}

std::string ToyCircuitTask::table_string() const {
  std::string s;
  for (std::size_t r = 0; r < (std::size_t{1} << input_count); ++r) s.push_back(((truth_table >> r) & 1u) ? '1' : '0');
  return s;
}

void ToyCircuitTask::validate() const {
  if (input_count == 0 || input_count > kMaxInputs) throw ConfigError("toy task needs 1..6 inputs");
  if ((truth_table & ~row_mask(input_count)) != 0) throw ConfigError("truth table has bits beyond 2^n rows");
  for (const auto& [gate, c] : gate_costs) {
    if (!is_builtin(gate)) throw ConfigError("unknown gate '" + gate + "' in gate_costs");
    if (!(c > 0.0)) throw ConfigError("gate costs must be positive");
  }
}

nlohmann::json ToyCircuitTask::to_json() const {
  return {{"inputs", input_count}, {"truth_table", table_string()}, {"gate_costs", gate_costs}};
}

ToyCircuitTask ToyCircuitTask::from_json(const nlohmann::json& j) {
  auto t = from_table(j.at("inputs").get<std::size_t>(), j.at("truth_table").get<std::string>());
  if (j.contains("gate_costs")) {
    for (const auto& [gate, c] : j.at("gate_costs").items()) t.gate_costs[gate] = c.get<double>();
  }
  t.validate();
  return t;
}

ToyProgram parse_toy_netlist(std::string_view code) { return Parser(lex(code)).parse(); }

ToyMetrics analyze_toy_program(const ToyProgram& program, const std::map<std::string, double>& gate_costs) {
  Analyzer analyzer(program, gate_costs);
  const auto& top = program.top();
  const std::size_t n = top.inputs.size();
  std::vector<std::uint64_t> columns;
  for (std::size_t j = 0; j < n; ++j) columns.push_back(input_column(j, n));
  ToyMetrics metrics;
  metrics.output_column = analyzer.simulate(program.modules.size() - 1, columns) & row_mask(n);
  const auto summary = analyzer.summarize(program.modules.size() - 1);
  metrics.area = summary.area;
  metrics.delay = summary.delay;
  return metrics;
}

EvaluationOutcome toy_evaluate(std::string_view code, const ToyCircuitTask& task) {
  ToyProgram program;
  try {
    program = parse_toy_netlist(code);
  } catch (const ToyParseError& e) {
    return EvaluationOutcome::not_compilable(e.what());
  }
  if (program.top().inputs.size() != task.input_count) {
    return EvaluationOutcome::not_compilable("top module declares " + std::to_string(program.top().inputs.size()) +
                                             " inputs, task expects " + std::to_string(task.input_count));
  }
  const auto metrics = analyze_toy_program(program, task.gate_costs);
  if (metrics.output_column != task.truth_table) {
    return EvaluationOutcome::not_functional("simulated truth table differs from the target");
  }
  return EvaluationOutcome::functional_with(metrics.area, metrics.delay);
}

ToyEvaluator::ToyEvaluator(ToyCircuitTask task) : task_(std::move(task)) { task_.validate(); }

}  // namespace rtlmcts
