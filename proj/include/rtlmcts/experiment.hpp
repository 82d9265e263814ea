#pragma once

// Batch runner: tasks x methods, persisted logs, best code and reports.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtlmcts/composition.hpp"
#include "rtlmcts/remote_model.hpp"
#include "rtlmcts/search.hpp"
#include "rtlmcts/tool_evaluator.hpp"
#include "rtlmcts/toy_suite.hpp"

namespace rtlmcts {

enum class Method { Mcts, Greedy, Beam };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// A task backed by external tools: a prompt file, tool commands and either
/// a toy model file or the experiment's remote model.
struct ExternalTaskSpec {
  std::string name;
  std::string kind;
  int bit_width = 0;
  std::filesystem::path prompt_file;
  ToolCommands tools;
  std::optional<std::filesystem::path> model_file;
};

struct TaskSpec {
  std::optional<ToyTask> toy;
  std::optional<ExternalTaskSpec> external;

  const std::string& name() const;
  ModuleKey key() const;
};

struct ExperimentConfig {
  std::vector<TaskSpec> tasks;
  std::vector<Method> methods{Method::Greedy, Method::Beam, Method::Mcts};
  SearchConfig search;
  std::size_t beam_width = 5;
  std::vector<std::uint64_t> seeds{0};
  std::size_t workers = 1;
  CompositionPolicy composition;
  std::optional<std::filesystem::path> library_dir;  // default {output_dir}/library
  bool compare_without_composition = true;
  std::optional<RemoteModelConfig> model;
  std::filesystem::path output_dir = "rtlmcts-out";

  void validate() const;
  std::filesystem::path library_path() const { return library_dir ? *library_dir : output_dir / "library"; }
};

/// Relative paths in the document resolve against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const nlohmann::json& overrides = {});

/// Merges `overrides` into `base` key by key (objects recursively).
nlohmann::json merge_json(nlohmann::json base, const nlohmann::json& overrides);

struct RunRow {
  std::string task;
  std::string method;  // mcts, greedy, beam, or mcts-nocomp
  std::uint64_t seed = 0;
  bool functional = false;
  std::optional<double> best_adp;
  std::optional<double> best_area;
  std::optional<double> best_delay;
  double best_reward = 0.0;
  std::optional<std::size_t> first_functional_iteration;
  std::size_t iterations_run = 0;
  double iteration_rate_per_min = 0.0;  // timing
  double wall_seconds = 0.0;            // timing
  std::string best_code_path;           // relative to the output directory
  std::string log_path;
  std::vector<std::string> injected;
  std::optional<std::string> error;
  std::vector<bool> functional_by_iteration;
};

struct CompositionRow {
  std::string task;
  std::uint64_t seed = 0;
  std::vector<std::string> injected;
  std::vector<std::string> missing;
  std::optional<std::size_t> with_first_functional;
  std::optional<std::size_t> without_first_functional;
  double with_rate_per_min = 0.0;     // timing
  double without_rate_per_min = 0.0;  // timing
};

struct RunReport {
  std::vector<RunRow> rows;
  std::vector<CompositionRow> composition;
  std::uint64_t seed = 0;  // first configured seed
  std::string run_id;
  nlohmann::json config;

  const RunRow* find(const std::string& task, const std::string& method, std::uint64_t seed = 0) const;
};

/// (base - mcts) / base, as a percentage; empty unless both are functional.
std::optional<double> adp_improvement_percent(const RunRow& baseline, const RunRow& mcts);

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);
/// The report without wall-clock fields, for determinism checks.
nlohmann::json strip_timing(nlohmann::json report_json);

std::string render_tables(const RunReport& report);
/// task,method,iteration,cumulative_functional; a never-functional run
/// gets one "none" row.
std::string render_curves_csv(const RunReport& report);

/// Runs every task in dependency order and writes report.json, tables.md,
/// curves.csv, per-run JSONL logs and best-code files under output_dir.
RunReport run_experiment(const ExperimentConfig& config);

struct SweepRow {
  double alpha_b = 0.0;
  double functional_fraction = 0.0;
  std::size_t distinct_terminals = 0;
  std::size_t max_identical_adp_streak = 0;
  std::optional<double> best_adp;
  double best_reward = 0.0;
  std::size_t iterations = 0;
};

/// MCTS on the first task with the first seed, once per alpha_b value.
std::vector<SweepRow> sweep_baseline_reward(const ExperimentConfig& config, const std::vector<double>& alpha_b_values);
nlohmann::json to_json(const std::vector<SweepRow>& rows);
std::string render_sweep_table(const std::vector<SweepRow>& rows);

/// Rebuilds tables.md and curves.csv in `dir` from report.json and the
/// JSONL logs it points to.
void rerender_reports(const std::filesystem::path& dir);

}  // namespace rtlmcts
