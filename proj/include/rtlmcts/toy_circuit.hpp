#pragma once

// A tiny gate-level netlist language with an exhaustive simulator and a
// unit area / unit delay cost model. Stands in for compile + simulate +
// synthesize on real HDL.
//
//   module half;            (optional header, needed to instantiate it later)
//   inputs a b;
//   t = XOR(a, b);          NOT is unary, AND OR XOR NAND NOR are binary
//   out t;
//   endmodule               (required between modules, optional at the end)
//
// A later module may call an earlier named module like a gate. The last
// module is the one checked against the task. `//` and `/* */` comments
// are ignored.

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rtlmcts/evaluation.hpp"

namespace rtlmcts {

struct ToyCircuitTask {
  std::size_t input_count = 0;  // n <= 6
  /// Bit r is the output for input row r, where input j (declaration order)
  /// takes bit j of r.
  std::uint64_t truth_table = 0;
  std::map<std::string, double> gate_costs = default_gate_costs();

  static std::map<std::string, double> default_gate_costs();

  /// `table` has 2^n characters '0'/'1'; character r is row r.
  static ToyCircuitTask from_table(std::size_t input_count, std::string_view table);
  std::string table_string() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ToyCircuitTask from_json(const nlohmann::json& j);
};

class ToyParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ToyGate {
  std::string output;
  std::string op;  // builtin gate name or an earlier module name
  std::vector<std::string> args;
};

struct ToyModule {
  std::string name;  // empty for an unnamed module
  std::vector<std::string> inputs;
  std::vector<ToyGate> gates;
  std::string output;
};

struct ToyProgram {
  std::vector<ToyModule> modules;

  const ToyModule& top() const { return modules.back(); }
};

/// Parses and checks a toy netlist (definitions before use, arities, single
/// output, at least one gate in the top module). Throws ToyParseError.
ToyProgram parse_toy_netlist(std::string_view code);

struct ToyMetrics {
  std::uint64_t output_column = 0;  // simulated truth table of the top module
  double area = 0.0;
  double delay = 0.0;
};

/// Simulates `program` on all 2^n rows and applies the cost model.
ToyMetrics analyze_toy_program(const ToyProgram& program, const std::map<std::string, double>& gate_costs);

EvaluationOutcome toy_evaluate(std::string_view code, const ToyCircuitTask& task);

class ToyEvaluator : public Evaluator {
 public:
  explicit ToyEvaluator(ToyCircuitTask task);

  EvaluationOutcome evaluate(std::string_view code) const override { return toy_evaluate(code, task_); }
  std::string id() const override { return "toy-circuit"; }
  const ToyCircuitTask& task() const noexcept { return task_; }

 private:
  ToyCircuitTask task_;
};

}  // namespace rtlmcts
