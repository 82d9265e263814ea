#pragma once

// Built-in toy tasks: a grammar model, a target truth table and a prompt.
//
// Families:
//   oracle-1..5         tiny trees that can be enumerated exhaustively
//   redundant-logic:S   greedy finds a functional but bloated netlist
//   greedy-trap:I       greedy ends in a non-functional or broken netlist
//   parity-small:S      3-input parity, stored as module `par`
//   parity-large:S      6-input parity that can instantiate `par`
//   sweep-reference     several functional netlists of different cost
//   easy, hard          short and long minimal solutions

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtlmcts/composition.hpp"
#include "rtlmcts/evaluation.hpp"
#include "rtlmcts/toy_circuit.hpp"
#include "rtlmcts/toy_model.hpp"

namespace rtlmcts {

struct ToyTask {
  std::string name;
  std::string kind;  // library kind; defaults to name
  int bit_width = 1;
  std::shared_ptr<const ToyGrammarModel> model;
  ToyCircuitTask circuit;
  std::string prompt;
  std::size_t t_max = 16;

  ModuleKey key() const { return {kind, bit_width}; }
};

nlohmann::json to_json(const ToyTask& task);
/// {"name", "kind"?, "width"?, "prompt", "t_max"?, "model": {...} | "model_file", "circuit": {...}}
ToyTask toy_task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ToyTask load_toy_task(const std::filesystem::path& path);

std::vector<ToyTask> oracle_tasks();
ToyTask redundant_logic_task(std::uint64_t seed);
ToyTask greedy_trap_task(std::size_t index);  // index in 0..4
ToyTask parity_small_task(std::uint64_t seed);
ToyTask parity_large_task(std::uint64_t seed);
ToyTask sweep_reference_task();
ToyTask easy_task();
ToyTask hard_task();

/// Dependency map entry making parity-large depend on parity-small, with
/// the large-module threshold at 6 inputs.
CompositionPolicy parity_composition_policy();

/// Random grammar over a small vocabulary with its prompt, for property
/// tests. Weights come from a small integer set so ties are common.
ToyTask random_toy_task(std::uint64_t seed);

/// Names accepted by builtin_task, e.g. "oracle-3", "greedy-trap:2".
std::vector<std::string> builtin_task_names();
ToyTask builtin_task(const std::string& name);

}  // namespace rtlmcts
