#include "rtlmcts/token_space.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rtlmcts/errors.hpp"

namespace rtlmcts {

namespace {

std::string_view rstrip(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> texts, VocabularyOptions options)
    : terminal_markers_(std::move(options.terminal_markers)),
      comment_openers_(std::move(options.comment_openers)) {
  tokens_.reserve(texts.size());
  comment_flags_.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw ConfigError("vocabulary token " + std::to_string(i) + " has empty text");
    }
    const auto id = static_cast<TokenId>(i);
    // Duplicate texts resolve to the lowest id.
    by_text_.emplace(texts[i], id);
    max_text_len_ = std::max(max_text_len_, texts[i].size());
    bool comment = false;
    for (const auto& opener : comment_openers_) {
      if (!opener.empty() && texts[i].find(opener) != std::string::npos) {
        comment = true;
        break;
      }
    }
    comment_flags_.push_back(comment ? 1 : 0);
    tokens_.push_back(Token{id, std::move(texts[i])});
  }
  for (const auto& marker : terminal_markers_) {
    if (marker.empty()) throw ConfigError("empty terminal marker");
  }
}

Vocabulary Vocabulary::load_jsonl(const std::filesystem::path& path, VocabularyOptions options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file " + path.string());
  std::map<std::int64_t, std::string> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (rstrip(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto id = j.at("id").get<std::int64_t>();
    if (id < 0) throw ConfigError(path.string() + ": negative token id");
    if (!entries.emplace(id, j.at("text").get<std::string>()).second) {
      throw ConfigError(path.string() + ": duplicate token id " + std::to_string(id));
    }
  }
  std::vector<std::string> texts;
  texts.reserve(entries.size());
  for (const auto& [id, text] : entries) {
    if (id != static_cast<std::int64_t>(texts.size())) {
      throw ConfigError(path.string() + ": token ids are not dense at " + std::to_string(texts.size()));
    }
    texts.push_back(text);
  }
  return Vocabulary(std::move(texts), std::move(options));
}

const Token& Vocabulary::at(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
  auto it = by_text_.find(std::string(text));
  if (it == by_text_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::is_comment_opener(TokenId id) const { return comment_flags_.at(id) != 0; }

bool Vocabulary::ends_with_terminal_marker(std::string_view generated_text) const {
  const auto text = rstrip(generated_text);
  return std::any_of(terminal_markers_.begin(), terminal_markers_.end(),
                     [&](const std::string& m) { return text.ends_with(m); });
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  std::size_t pos = 0;
  std::string probe;
  while (pos < text.size()) {
    const std::size_t longest = std::min(max_text_len_, text.size() - pos);
    bool matched = false;
    for (std::size_t len = longest; len > 0; --len) {
      probe.assign(text.substr(pos, len));
      auto it = by_text_.find(probe);
      if (it != by_text_.end()) {
        out.push_back(it->second);
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw ConfigError("text is not tokenizable with this vocabulary at offset " + std::to_string(pos));
    }
  }
  return out;
}

bool is_comment_opener(const Token& token, const Vocabulary& vocab) { return vocab.is_comment_opener(token.id); }

std::shared_ptr<const Prompt> make_prompt(std::string text, const Vocabulary& vocab) {
  auto tokens = vocab.tokenize(text);
  return std::make_shared<const Prompt>(Prompt{std::move(text), std::move(tokens)});
}

SequenceState::SequenceState(std::shared_ptr<const Prompt> prompt, std::size_t t_max)
    : prompt_(std::move(prompt)), t_max_(t_max) {
  if (!prompt_) throw ConfigError("sequence state needs a prompt");
  if (t_max_ == 0) throw ConfigError("t_max must be at least 1");
}

SequenceState transition(const SequenceState& state, const Token& action, const Vocabulary& vocab) {
  if (state.terminal()) {
    throw SearchLogicError("transition requested from a terminal state at step " + std::to_string(state.step()));
  }
  SequenceState next = state;
  next.generated_.push_back(action.id);
  next.generated_text_ += action.text;
  next.terminal_ = next.generated_.size() >= next.t_max_ || vocab.ends_with_terminal_marker(next.generated_text_);
  return next;
}

std::string render(const SequenceState& state) { return state.prompt().text + state.generated_text(); }

}  // namespace rtlmcts
