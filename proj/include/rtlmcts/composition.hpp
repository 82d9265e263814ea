#pragma once

// On-disk library of optimized submodules and prompt composition for
// large targets.
//
// Layout: {root}/{kind}/{width}.json, one record per file.

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rtlmcts/evaluation.hpp"

namespace rtlmcts {

struct ModuleKey {
  std::string kind;
  int bit_width = 0;

  friend auto operator<=>(const ModuleKey&, const ModuleKey&) = default;
};

struct ModuleRecord {
  std::string name;
  int bit_width = 0;
  std::string kind;
  std::string code_text;
  EvaluationOutcome outcome;
  double reward = 0.0;
  std::string run_id;
  std::size_t iteration = 0;

  ModuleKey key() const { return {kind, bit_width}; }
  /// Throws ConfigError unless functional with non-empty code and a usable kind.
  void validate() const;
};

nlohmann::json to_json(const ModuleRecord& record);
ModuleRecord module_record_from_json(const nlohmann::json& j);

class ModuleLibrary {
 public:
  explicit ModuleLibrary(std::filesystem::path root);

  /// Persists the record unless the stored one for the same key has an
  /// equal or higher reward. Returns true when the file was written.
  bool store(const ModuleRecord& record);
  std::optional<ModuleRecord> fetch(const ModuleKey& key) const;
  std::vector<ModuleKey> keys() const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path path_for(const ModuleKey& key) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

struct CompositionPolicy {
  int large_threshold_bits = 32;
  std::map<ModuleKey, std::vector<ModuleKey>> dependencies;

  void validate() const;
  bool is_large(int bit_width) const { return bit_width >= large_threshold_bits; }
};

CompositionPolicy composition_policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CompositionPolicy& policy);

struct ComposedPrompt {
  std::string text;
  std::vector<ModuleKey> injected;
  std::vector<ModuleKey> missing;
};

/// Small targets get the base prompt back. Large targets get the stored
/// code of each available dependency, ascending width, before the base
/// prompt. Missing dependencies are logged and skipped.
ComposedPrompt compose_prompt(const std::string& base_prompt, const ModuleKey& target, const ModuleLibrary& library,
                              const CompositionPolicy& policy);

std::string to_string(const ModuleKey& key);

}  // namespace rtlmcts
