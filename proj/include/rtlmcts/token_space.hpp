#pragma once

// Tokens, vocabularies and the sequence states the search walks over.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rtlmcts {

using TokenId = std::uint32_t;

struct Token {
  TokenId id = 0;
  std::string text;

  friend bool operator==(const Token&, const Token&) = default;
};

struct VocabularyOptions {
  std::vector<std::string> terminal_markers{"endmodule"};
  std::vector<std::string> comment_openers{"//", "/*", "*/"};
};

/// Dense id -> text table plus the two text classifications the search
/// needs: which rendered suffixes end generation and which tokens open
/// comments.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> texts, VocabularyOptions options = {});

  /// One JSON object per line: {"id": int, "text": string}. Ids must be dense.
  static Vocabulary load_jsonl(const std::filesystem::path& path, VocabularyOptions options = {});

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  const Token& at(TokenId id) const;
  std::optional<TokenId> find(std::string_view text) const;

  bool is_comment_opener(TokenId id) const;

  /// True when `generated_text`, with trailing whitespace removed, ends with
  /// one of the terminal markers.
  bool ends_with_terminal_marker(std::string_view generated_text) const;

  /// Greedy longest-match segmentation. Throws ConfigError if some position
  /// starts no vocabulary token.
  std::vector<TokenId> tokenize(std::string_view text) const;

  const std::vector<std::string>& terminal_markers() const noexcept { return terminal_markers_; }
  const std::vector<std::string>& comment_openers() const noexcept { return comment_openers_; }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<std::string, TokenId> by_text_;
  std::vector<char> comment_flags_;
  std::vector<std::string> terminal_markers_;
  std::vector<std::string> comment_openers_;
  std::size_t max_text_len_ = 0;
};

bool is_comment_opener(const Token& token, const Vocabulary& vocab);

/// The fixed part of every state in one search. The raw text is what gets
/// rendered; the token ids are what models condition on.
struct Prompt {
  std::string text;
  std::vector<TokenId> tokens;
};

/// Tokenizes `text` with `vocab`. Throws ConfigError when it cannot.
std::shared_ptr<const Prompt> make_prompt(std::string text, const Vocabulary& vocab);

inline constexpr std::size_t kDefaultMaxTokens = 1024;

class SequenceState {
 public:
  SequenceState(std::shared_ptr<const Prompt> prompt, std::size_t t_max);

  const Prompt& prompt() const noexcept { return *prompt_; }
  const std::shared_ptr<const Prompt>& shared_prompt() const noexcept { return prompt_; }
  std::span<const TokenId> generated() const noexcept { return generated_; }
  const std::string& generated_text() const noexcept { return generated_text_; }
  std::size_t step() const noexcept { return generated_.size(); }
  std::size_t t_max() const noexcept { return t_max_; }
  bool terminal() const noexcept { return terminal_; }

  friend bool operator==(const SequenceState& a, const SequenceState& b) {
    return a.prompt_->text == b.prompt_->text && a.generated_ == b.generated_ && a.t_max_ == b.t_max_;
  }

 private:
  friend SequenceState transition(const SequenceState&, const Token&, const Vocabulary&);

  std::shared_ptr<const Prompt> prompt_;
  std::vector<TokenId> generated_;
  std::string generated_text_;
  std::size_t t_max_ = kDefaultMaxTokens;
  bool terminal_ = false;
};

/// S_{t+1} = S_t . a. Throws SearchLogicError on a terminal input.
SequenceState transition(const SequenceState& state, const Token& action, const Vocabulary& vocab);

inline bool is_terminal(const SequenceState& state) noexcept { return state.terminal(); }

/// Prompt text followed by the generated token texts.
std::string render(const SequenceState& state);

}  // namespace rtlmcts
