#pragma once

// HTTP client for a model server speaking the top-k protocol:
//
//   POST /v1/topk  {"prompt_token_ids":[int], "generated_token_ids":[int], "k":int}
//        -> {"candidates":[{"id":int,"text":string,"prob":float}, ...]}
//   GET  /v1/vocab -> {"tokens":[{"id":int,"text":string}], "eos_texts":[string]}
//   errors: 4xx/5xx with {"error": string}

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "rtlmcts/policy_model.hpp"

namespace rtlmcts {

struct RemoteModelConfig {
  std::string endpoint_url;  // e.g. http://127.0.0.1:8000
  std::size_t top_k = 5;
  std::chrono::milliseconds timeout{std::chrono::seconds(30)};
  std::size_t retry_count = 2;
  std::optional<std::filesystem::path> disk_cache_dir;
  VocabularyOptions vocab_options;  // eos_texts are added to the terminal markers

  void validate() const;
  static RemoteModelConfig from_json(const nlohmann::json& j);
};

/// Uncached client. Throws ModelError on transport failure after retries
/// or on a response that violates the protocol.
class RemoteModel : public TokenModel {
 public:
  explicit RemoteModel(RemoteModelConfig config);

  ModelDistribution next_distribution(const SequenceState& state, std::size_t k) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string id() const override { return id_; }

  /// Parses and checks a /v1/topk response body against the vocabulary.
  static ModelDistribution parse_topk_response(const nlohmann::json& body, const Vocabulary& vocab, std::size_t k,
                                               std::size_t step);

 private:
  nlohmann::json request(const std::string& method, const std::string& path, const nlohmann::json* body,
                         std::size_t step) const;
  std::optional<std::filesystem::path> cache_path(const SequenceState& state, std::size_t k) const;

  RemoteModelConfig config_;
  std::string scheme_host_port_;
  std::string base_path_;
  Vocabulary vocab_;
  std::string id_;
};

/// RemoteModel behind the per-run in-memory cache.
std::shared_ptr<CachingModel> make_remote_model(RemoteModelConfig config);

struct ServerCheck {
  bool healthy = false;
  std::size_t vocab_size = 0;
  std::string first_token;
  double first_prob = 0.0;
  std::string message;
};

/// Pings /healthz, loads the vocabulary and asks for one top-1 candidate.
ServerCheck check_server(const RemoteModelConfig& config);

}  // namespace rtlmcts
