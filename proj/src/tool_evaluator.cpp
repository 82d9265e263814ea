#include "rtlmcts/tool_evaluator.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <vector>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/subprocess.hpp"

namespace rtlmcts {

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::filesystem::path make_work_dir(const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::string pattern = (root / "eval-XXXXXX").string();
  std::vector<char> buf(pattern.begin(), pattern.end());
  buf.push_back('\0');
  if (::mkdtemp(buf.data()) == nullptr) {
    throw std::runtime_error(std::string("mkdtemp failed: ") + std::strerror(errno));
  }
  return std::filesystem::path(buf.data());
}

std::string describe(const ProcessResult& r) {
  if (!r.spawn_error.empty()) return r.spawn_error;
  if (r.timed_out) return "timed out";
  if (r.signaled) return "killed by signal " + std::to_string(r.signal);
  return "exit code " + std::to_string(r.exit_code);
}

}  // namespace

void ToolCommands::validate() const {
  if (compile.empty() || functional.empty() || synthesize.empty()) {
    throw ConfigError("compile, functional and synthesize commands are all required");
  }
  if (timeout.count() <= 0) throw ConfigError("tool timeout must be positive");
  if (code_filename.empty()) throw ConfigError("code_filename must not be empty");
}

nlohmann::json ToolCommands::to_json() const {
  return {{"compile", compile},
          {"functional", functional},
          {"synthesize", synthesize},
          {"testbench", testbench},
          {"timeout_s", static_cast<double>(timeout.count()) / 1000.0},
          {"work_root", work_root.string()},
          {"code_filename", code_filename}};
}

ToolCommands ToolCommands::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ToolCommands c;
  c.compile = j.at("compile").get<std::string>();
  c.functional = j.at("functional").get<std::string>();
  c.synthesize = j.at("synthesize").get<std::string>();
  c.testbench = j.value("testbench", std::string{});
  if (!c.testbench.empty() && !base_dir.empty() && std::filesystem::path(c.testbench).is_relative()) {
    c.testbench = (base_dir / c.testbench).string();
  }
  if (j.contains("timeout_s")) {
    c.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(j.at("timeout_s").get<double>() * 1000.0)));
  }
  if (j.contains("work_root")) c.work_root = j.at("work_root").get<std::string>();
  c.code_filename = j.value("code_filename", c.code_filename);
  c.validate();
  return c;
}

std::string expand_command(const std::string& templ, const std::filesystem::path& code_file,
                           const std::filesystem::path& work_dir, const std::string& testbench) {
  auto s = replace_all(templ, "{code_file}", shell_quote(code_file.string()));
  s = replace_all(s, "{work_dir}", shell_quote(work_dir.string()));
  return replace_all(s, "{testbench}", shell_quote(testbench));
}

ToolEvaluator::ToolEvaluator(ToolCommands commands) : commands_(std::move(commands)) { commands_.validate(); }

EvaluationOutcome ToolEvaluator::evaluate(std::string_view code) const {
  const auto work_dir = make_work_dir(commands_.work_root);
  const auto code_file = work_dir / commands_.code_filename;
  {
    std::ofstream out(code_file, std::ios::binary);
    out.write(code.data(), static_cast<std::streamsize>(code.size()));
    if (!out) {
      auto o = EvaluationOutcome::not_compilable("cannot write " + code_file.string());
      o.tool_failure = true;
      return o;
    }
  }

  std::vector<std::string> artifacts{code_file.string()};
  auto run_stage = [&](const char* name, const std::string& templ) {
    const auto out_log = work_dir / (std::string(name) + ".out.log");
    const auto err_log = work_dir / (std::string(name) + ".err.log");
    artifacts.push_back(out_log.string());
    artifacts.push_back(err_log.string());
    return run_shell(expand_command(templ, code_file, work_dir, commands_.testbench), work_dir, commands_.timeout,
                     out_log, err_log);
  };
  auto finish = [&](EvaluationOutcome o) {
    o.artifacts = artifacts;
    return o;
  };
  auto crashed = [](const ProcessResult& r) { return !r.spawn_error.empty() || r.signaled; };

  const auto compiled = run_stage("compile", commands_.compile);
  if (!compiled.succeeded()) {
    auto o = EvaluationOutcome::not_compilable("compile stage: " + describe(compiled));
    o.tool_failure = crashed(compiled) || compiled.timed_out;
    return finish(std::move(o));
  }

  const auto checked = run_stage("functional", commands_.functional);
  if (!checked.succeeded()) {
    if (crashed(checked)) {
      auto o = EvaluationOutcome::not_compilable("functional stage crashed: " + describe(checked));
      o.tool_failure = true;
      return finish(std::move(o));
    }
    auto o = EvaluationOutcome::not_functional("functional stage: " + describe(checked));
    o.tool_failure = checked.timed_out;
    return finish(std::move(o));
  }

  const auto synthesized = run_stage("synthesize", commands_.synthesize);
  const auto metrics_file = work_dir / "metrics.json";
  auto tool_failure = [&](std::string why) {
    auto o = EvaluationOutcome::not_compilable(std::move(why));
    o.tool_failure = true;
    return finish(std::move(o));
  };
  if (!synthesized.succeeded()) return tool_failure("synthesis stage: " + describe(synthesized));
  artifacts.push_back(metrics_file.string());
  std::ifstream in(metrics_file);
  if (!in) return tool_failure("synthesis did not write " + metrics_file.string());
  try {
    const auto j = nlohmann::json::parse(in);
    const double area = j.at("area").get<double>();
    const double delay = j.at("delay").get<double>();
    if (!(area > 0.0 && delay > 0.0 && std::isfinite(area) && std::isfinite(delay))) {
      return tool_failure("metrics must be positive and finite");
    }
    return finish(EvaluationOutcome::functional_with(area, delay));
  } catch (const nlohmann::json::exception& e) {
    return tool_failure(std::string("bad metrics file: ") + e.what());
  }
}

}  // namespace rtlmcts
