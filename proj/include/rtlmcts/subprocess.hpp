#pragma once

#include <chrono>
#include <filesystem>
#include <string>

namespace rtlmcts {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  bool signaled = false;
  int signal = 0;
  std::string spawn_error;  // non-empty when the child could not be started

  bool succeeded() const noexcept { return spawn_error.empty() && !timed_out && !signaled && exit_code == 0; }
};

/// Runs `command` through /bin/sh -c inside `cwd` in its own process group,
/// redirecting stdout/stderr to the given files. The whole group is killed
/// when `timeout` elapses.
ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                        std::chrono::milliseconds timeout, const std::filesystem::path& stdout_file,
                        const std::filesystem::path& stderr_file);

/// Wraps `value` in single quotes for /bin/sh.
std::string shell_quote(const std::string& value);

}  // namespace rtlmcts
