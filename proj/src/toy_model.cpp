#include "rtlmcts/toy_model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/hashing.hpp"

namespace rtlmcts {

namespace {

std::vector<std::string> split_names(const std::string& key) {
  std::istringstream in(key);
  std::vector<std::string> out;
  std::string name;
  while (in >> name) out.push_back(name);
  return out;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out.push_back(' ');
    out += n;
  }
  return out;
}

}  // namespace

ToyGrammarModel::ToyGrammarModel(Definition def) : def_(std::move(def)) {
  if (def_.context_len == 0) throw ConfigError("toy model context_len must be >= 1");
  std::vector<std::string> texts;
  for (const auto& [name, text] : def_.tokens) {
    if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos) {
      throw ConfigError("toy token name '" + name + "' must be non-empty and whitespace-free");
    }
    if (!by_name_.emplace(name, static_cast<TokenId>(names_.size())).second) {
      throw ConfigError("duplicate toy token name '" + name + "'");
    }
    names_.push_back(name);
    texts.push_back(text);
  }
  vocab_ = Vocabulary(std::move(texts), def_.vocab_options);

  auto to_candidates = [&](const Weights& weights, const std::string& where) {
    double total = 0.0;
    std::map<TokenId, double> merged;
    for (const auto& [name, w] : weights) {
      if (!(w > 0.0)) throw ConfigError("non-positive weight for '" + name + "' in " + where);
      merged[id_of(name)] += w;
      total += w;
    }
    std::vector<Candidate> out;
    for (const auto& [id, w] : merged) out.push_back(Candidate{vocab_.at(id), w / total});
    sort_candidates(out);
    return out;
  };

  for (const auto& [context, weights] : def_.rules) {
    if (weights.empty()) throw ConfigError("empty rule for context '" + join_names(context) + "'");
    if (context.size() > def_.context_len) {
      throw ConfigError("rule context '" + join_names(context) + "' is longer than context_len");
    }
    table_.emplace(context, to_candidates(weights, "rule '" + join_names(context) + "'"));
  }

  Weights fallback;
  if (def_.fallback.empty()) {
    for (const auto& n : names_) fallback.emplace_back(n, 1.0);
  } else {
    for (const auto& n : def_.fallback) fallback.emplace_back(n, 1.0);
  }
  if (!fallback.empty()) fallback_ = to_candidates(fallback, "fallback");

  id_ = "toy:" + sha256_hex(to_json().dump()).substr(0, 16);
}

TokenId ToyGrammarModel::id_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown toy token name '" + name + "'");
  return it->second;
}

std::vector<std::string> ToyGrammarModel::context_for(const SequenceState& state) const {
  const std::size_t m = def_.context_len;
  std::vector<std::string> ctx;
  ctx.reserve(m);
  // Walk backwards through generated, then prompt, then the start padding.
  auto gen = state.generated();
  const auto& prompt = state.prompt().tokens;
  for (std::size_t i = gen.size(); i > 0 && ctx.size() < m; --i) ctx.push_back(names_.at(gen[i - 1]));
  for (std::size_t i = prompt.size(); i > 0 && ctx.size() < m; --i) ctx.push_back(names_.at(prompt[i - 1]));
  for (std::size_t i = def_.start_context.size(); i > 0 && ctx.size() < m; --i) {
    ctx.push_back(def_.start_context[i - 1]);
  }
  std::reverse(ctx.begin(), ctx.end());
  return ctx;
}

ModelDistribution ToyGrammarModel::next_distribution(const SequenceState& state, std::size_t k) const {
  if (state.terminal()) throw SearchLogicError("next_distribution on a terminal state");
  if (k == 0) throw SearchLogicError("next_distribution needs k >= 1");
  const auto ctx = context_for(state);
  const std::vector<Candidate>* source = nullptr;
  if (auto it = table_.find(ctx); it != table_.end()) {
    source = &it->second;
  } else {
    ++fallback_hits_;
    spdlog::debug("toy model: no rule for context '{}', using fallback set", join_names(ctx));
    source = &fallback_;
  }
  if (source->empty()) throw ModelError("toy model has no candidates for context '" + join_names(ctx) + "'", state.step());
  ModelDistribution out;
  out.k = k;
  const auto n = std::min(k, source->size());
  out.candidates.assign(source->begin(), source->begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

ToyGrammarModel::Definition ToyGrammarModel::definition_from_json(const nlohmann::json& j) {
  Definition def;
  for (const auto& entry : j.at("vocab")) {
    if (entry.is_string()) {
      const auto text = entry.get<std::string>();
      def.tokens.emplace_back(text, text);
    } else {
      const auto text = entry.at("text").get<std::string>();
      def.tokens.emplace_back(entry.value("name", text), text);
    }
  }
  def.context_len = j.value("context_len", std::size_t{2});
  def.start_context = j.value("start_context", std::vector<std::string>{});
  def.fallback = j.value("fallback", std::vector<std::string>{});
  if (j.contains("terminal_markers")) {
    def.vocab_options.terminal_markers = j.at("terminal_markers").get<std::vector<std::string>>();
  }
  if (j.contains("comment_openers")) {
    def.vocab_options.comment_openers = j.at("comment_openers").get<std::vector<std::string>>();
  }
  for (const auto& [key, weights] : j.at("rules").items()) {
    Weights w;
    for (const auto& [name, weight] : weights.items()) w.emplace_back(name, weight.get<double>());
    def.rules[split_names(key)] = std::move(w);
  }
  return def;
}

std::shared_ptr<const ToyGrammarModel> ToyGrammarModel::from_json(const nlohmann::json& j) {
  return std::make_shared<const ToyGrammarModel>(definition_from_json(j));
}

std::shared_ptr<const ToyGrammarModel> ToyGrammarModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open toy model " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json ToyGrammarModel::to_json() const {
  nlohmann::json j;
  j["vocab"] = nlohmann::json::array();
  for (const auto& [name, text] : def_.tokens) j["vocab"].push_back({{"name", name}, {"text", text}});
  j["context_len"] = def_.context_len;
  j["start_context"] = def_.start_context;
  j["fallback"] = def_.fallback;
  j["terminal_markers"] = def_.vocab_options.terminal_markers;
  j["comment_openers"] = def_.vocab_options.comment_openers;
  j["rules"] = nlohmann::json::object();
  for (const auto& [context, weights] : def_.rules) {
    auto& slot = j["rules"][join_names(context)];
    slot = nlohmann::json::object();
    for (const auto& [name, w] : weights) slot[name] = w;
  }
  return j;
}

ToyModelBuilder& ToyModelBuilder::token(std::string name, std::string text) {
  def_.tokens.emplace_back(std::move(name), std::move(text));
  return *this;
}

ToyModelBuilder& ToyModelBuilder::context_len(std::size_t m) {
  def_.context_len = m;
  return *this;
}

ToyModelBuilder& ToyModelBuilder::start_context(std::vector<std::string> names) {
  def_.start_context = std::move(names);
  return *this;
}

ToyModelBuilder& ToyModelBuilder::rule(std::vector<std::string> context, ToyGrammarModel::Weights weights) {
  def_.rules[std::move(context)] = std::move(weights);
  return *this;
}

ToyModelBuilder& ToyModelBuilder::fallback(std::vector<std::string> names) {
  def_.fallback = std::move(names);
  return *this;
}

ToyModelBuilder& ToyModelBuilder::terminal_markers(std::vector<std::string> markers) {
  def_.vocab_options.terminal_markers = std::move(markers);
  return *this;
}

std::shared_ptr<const ToyGrammarModel> ToyModelBuilder::build() const {
  return std::make_shared<const ToyGrammarModel>(def_);
}

}  // namespace rtlmcts
