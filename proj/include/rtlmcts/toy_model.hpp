#pragma once

// Deterministic weighted-production token model used as a desk-scale
// stand-in for a code LLM.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rtlmcts/policy_model.hpp"

namespace rtlmcts {

/// Conditions on the last `context_len` token names of
/// start_context . prompt tokens . generated tokens. Each token carries a
/// whitespace-free name used as its identifier in rule keys.
class ToyGrammarModel : public TokenModel {
 public:
  using Weights = std::vector<std::pair<std::string, double>>;

  struct Definition {
    std::vector<std::pair<std::string, std::string>> tokens;  // (name, text)
    std::size_t context_len = 2;
    std::vector<std::string> start_context;
    std::map<std::vector<std::string>, Weights> rules;
    std::vector<std::string> fallback;  // empty: whole vocabulary
    VocabularyOptions vocab_options;
  };

  explicit ToyGrammarModel(Definition def);

  /// {"vocab": [text | {"name","text"}], "context_len", "rules": {"n1 n2": {"n3": w}},
  ///  "start_context": [...], "fallback": [...], "terminal_markers", "comment_openers"}
  static Definition definition_from_json(const nlohmann::json& j);
  static std::shared_ptr<const ToyGrammarModel> from_json(const nlohmann::json& j);
  static std::shared_ptr<const ToyGrammarModel> load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  ModelDistribution next_distribution(const SequenceState& state, std::size_t k) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string id() const override { return id_; }

  const std::string& name_of(TokenId id) const { return names_.at(id); }
  TokenId id_of(const std::string& name) const;
  std::size_t context_len() const noexcept { return def_.context_len; }

  /// Number of queries answered by the fallback set so far.
  std::size_t fallback_hits() const noexcept { return fallback_hits_.load(); }

 private:
  std::vector<std::string> context_for(const SequenceState& state) const;

  Definition def_;
  Vocabulary vocab_;
  std::vector<std::string> names_;
  std::map<std::string, TokenId> by_name_;
  std::map<std::vector<std::string>, std::vector<Candidate>> table_;
  std::vector<Candidate> fallback_;
  std::string id_;
  mutable std::atomic<std::size_t> fallback_hits_{0};
};

/// Small fluent helper for authoring toy models in code.
class ToyModelBuilder {
 public:
  ToyModelBuilder& token(std::string name, std::string text);
  ToyModelBuilder& context_len(std::size_t m);
  ToyModelBuilder& start_context(std::vector<std::string> names);
  ToyModelBuilder& rule(std::vector<std::string> context, ToyGrammarModel::Weights weights);
  ToyModelBuilder& fallback(std::vector<std::string> names);
  ToyModelBuilder& terminal_markers(std::vector<std::string> markers);

  ToyGrammarModel::Definition definition() const { return def_; }
  std::shared_ptr<const ToyGrammarModel> build() const;

 private:
  ToyGrammarModel::Definition def_;
};

}  // namespace rtlmcts
