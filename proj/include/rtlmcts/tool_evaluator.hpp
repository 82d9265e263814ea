#pragma once

// Evaluator backed by user-supplied commands (e.g. Icarus Verilog for
// compile/simulate and a Yosys script for synthesis).
//
// Each command is a /bin/sh template with {code_file}, {work_dir} and
// {testbench} placeholders. Exit status 0 means the stage passed. The
// synthesis command must write {work_dir}/metrics.json as
// {"area": float, "delay": float}, both positive.

#include <chrono>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "rtlmcts/evaluation.hpp"

namespace rtlmcts {

struct ToolCommands {
  std::string compile;
  std::string functional;
  std::string synthesize;
  std::string testbench;
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};  // per stage
  std::filesystem::path work_root = std::filesystem::temp_directory_path() / "rtlmcts-eval";
  std::string code_filename = "design.v";

  void validate() const;
  nlohmann::json to_json() const;
  static ToolCommands from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

/// Replaces every {name} placeholder with the shell-quoted value.
std::string expand_command(const std::string& templ, const std::filesystem::path& code_file,
                           const std::filesystem::path& work_dir, const std::string& testbench);

class ToolEvaluator : public Evaluator {
 public:
  explicit ToolEvaluator(ToolCommands commands);

  /// Runs in a fresh working directory under work_root. Compile and
  /// functional timeouts fail their own stage; a synthesis failure or bad
  /// metrics file is a tool failure recorded as non-compilable.
  EvaluationOutcome evaluate(std::string_view code) const override;
  std::string id() const override { return "external-tools"; }

 private:
  ToolCommands commands_;
};

}  // namespace rtlmcts
