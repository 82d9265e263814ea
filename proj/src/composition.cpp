#include "rtlmcts/composition.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/hashing.hpp"

namespace rtlmcts {

namespace {

// Holds an flock on {dir}/.lock for cross-process writers.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& dir) {
    fd_ = ::open((dir / ".lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ >= 0) ::flock(fd_, LOCK_EX);
  }
  ~FileLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::optional<ModuleRecord> read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return module_record_from_json(nlohmann::json::parse(in));
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable library entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

ModuleKey key_from_json(const nlohmann::json& j) {
  return {j.at("kind").get<std::string>(), j.at("width").get<int>()};
}

nlohmann::json key_to_json(const ModuleKey& k) { return {{"kind", k.kind}, {"width", k.bit_width}}; }

}  // namespace

std::string to_string(const ModuleKey& key) { return key.kind + "/" + std::to_string(key.bit_width); }

void ModuleRecord::validate() const {
  if (!outcome.functional) throw ConfigError("only functional modules can be stored (" + name + ")");
  if (code_text.empty()) throw ConfigError("module record has empty code");
  if (kind.empty() || kind.find('/') != std::string::npos || kind.starts_with(".")) {
    throw ConfigError("module kind must be a plain path segment: '" + kind + "'");
  }
  if (bit_width <= 0) throw ConfigError("module bit width must be positive");
}

nlohmann::json to_json(const ModuleRecord& r) {
  return {{"name", r.name},
          {"kind", r.kind},
          {"bit_width", r.bit_width},
          {"code_text", r.code_text},
          {"code_sha256", sha256_hex(r.code_text)},
          {"outcome", to_json(r.outcome)},
          {"reward", r.reward},
          {"provenance", {{"run_id", r.run_id}, {"iteration", r.iteration}}}};
}

ModuleRecord module_record_from_json(const nlohmann::json& j) {
  ModuleRecord r;
  r.name = j.at("name").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.bit_width = j.at("bit_width").get<int>();
  r.code_text = j.at("code_text").get<std::string>();
  if (j.contains("code_sha256") && j.at("code_sha256").get<std::string>() != sha256_hex(r.code_text)) {
    throw ConfigError("code_sha256 does not match code_text");
  }
  r.outcome = outcome_from_json(j.at("outcome"));
  r.reward = j.at("reward").get<double>();
  const auto& p = j.at("provenance");
  r.run_id = p.value("run_id", std::string{});
  r.iteration = p.value("iteration", std::size_t{0});
  r.validate();
  return r;
}

ModuleLibrary::ModuleLibrary(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path ModuleLibrary::path_for(const ModuleKey& key) const {
  return root_ / key.kind / (std::to_string(key.bit_width) + ".json");
}

bool ModuleLibrary::store(const ModuleRecord& record) {
  record.validate();
  const auto path = path_for(record.key());
  std::lock_guard guard(mutex_);
  std::filesystem::create_directories(path.parent_path());
  FileLock lock(path.parent_path());
  if (const auto existing = read_record(path); existing && !(record.reward > existing->reward)) {
    spdlog::debug("library keeps {} (reward {} >= {})", to_string(record.key()), existing->reward, record.reward);
    return false;
  }
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp);
    out << to_json(record).dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
  return true;
}

std::optional<ModuleRecord> ModuleLibrary::fetch(const ModuleKey& key) const { return read_record(path_for(key)); }

std::vector<ModuleKey> ModuleLibrary::keys() const {
  std::vector<ModuleKey> out;
  if (!std::filesystem::exists(root_)) return out;
  for (const auto& kind_dir : std::filesystem::directory_iterator(root_)) {
    if (!kind_dir.is_directory()) continue;
    for (const auto& f : std::filesystem::directory_iterator(kind_dir.path())) {
      if (f.path().extension() != ".json") continue;
      try {
        out.push_back({kind_dir.path().filename().string(), std::stoi(f.path().stem().string())});
      } catch (const std::exception&) {
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void CompositionPolicy::validate() const {
  if (large_threshold_bits <= 0) throw ConfigError("large_threshold_bits must be positive");
}

CompositionPolicy composition_policy_from_json(const nlohmann::json& j) {
  CompositionPolicy p;
  p.large_threshold_bits = j.value("large_threshold_bits", p.large_threshold_bits);
  for (const auto& entry : j.value("dependencies", nlohmann::json::array())) {
    auto& deps = p.dependencies[key_from_json(entry.at("target"))];
    for (const auto& d : entry.at("modules")) deps.push_back(key_from_json(d));
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const CompositionPolicy& p) {
  auto deps = nlohmann::json::array();
  for (const auto& [target, modules] : p.dependencies) {
    auto list = nlohmann::json::array();
    for (const auto& m : modules) list.push_back(key_to_json(m));
    deps.push_back({{"target", key_to_json(target)}, {"modules", list}});
  }
  return {{"large_threshold_bits", p.large_threshold_bits}, {"dependencies", deps}};
}

ComposedPrompt compose_prompt(const std::string& base_prompt, const ModuleKey& target, const ModuleLibrary& library,
                              const CompositionPolicy& policy) {
  ComposedPrompt out{base_prompt, {}, {}};
  if (!policy.is_large(target.bit_width)) return out;
  const auto it = policy.dependencies.find(target);
  if (it == policy.dependencies.end()) return out;

  auto deps = it->second;
  std::stable_sort(deps.begin(), deps.end(),
                   [](const ModuleKey& a, const ModuleKey& b) { return a.bit_width < b.bit_width; });
  std::string prefix;
  for (const auto& dep : deps) {
    const auto record = library.fetch(dep);
    if (!record) {
      spdlog::warn("no stored module for {}; composing {} without it", to_string(dep), to_string(target));
      out.missing.push_back(dep);
      continue;
    }
    prefix += record->code_text;
    if (!prefix.ends_with('\n')) prefix.push_back('\n');
    out.injected.push_back(dep);
  }
  out.text = prefix + base_prompt;
  return out;
}

}  // namespace rtlmcts
