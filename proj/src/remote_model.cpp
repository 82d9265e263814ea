#include "rtlmcts/remote_model.hpp"

#include <fstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/hashing.hpp"

namespace rtlmcts {

namespace {

std::string ids_string(std::span<const TokenId> ids) {
  std::string s;
  for (TokenId id : ids) {
    s += std::to_string(id);
    s.push_back(',');
  }
  return s;
}

}  // namespace

void RemoteModelConfig::validate() const {
  if (endpoint_url.empty()) throw ConfigError("remote model endpoint_url is required");
  if (top_k == 0) throw ConfigError("top_k must be at least 1");
  if (timeout.count() <= 0) throw ConfigError("remote model timeout must be positive");
}

RemoteModelConfig RemoteModelConfig::from_json(const nlohmann::json& j) {
  RemoteModelConfig c;
  c.endpoint_url = j.at("endpoint_url").get<std::string>();
  c.top_k = j.value("top_k", c.top_k);
  if (j.contains("timeout_s")) {
    c.timeout = std::chrono::milliseconds(static_cast<long long>(j.at("timeout_s").get<double>() * 1000.0));
  }
  c.retry_count = j.value("retry_count", c.retry_count);
  if (j.contains("disk_cache_dir") && !j.at("disk_cache_dir").is_null()) {
    c.disk_cache_dir = j.at("disk_cache_dir").get<std::string>();
  }
  if (j.contains("terminal_markers")) {
    c.vocab_options.terminal_markers = j.at("terminal_markers").get<std::vector<std::string>>();
  }
  if (j.contains("comment_openers")) {
    c.vocab_options.comment_openers = j.at("comment_openers").get<std::vector<std::string>>();
  }
  c.validate();
  return c;
}

RemoteModel::RemoteModel(RemoteModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.endpoint_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = config_.endpoint_url.find('/', host_start);
  scheme_host_port_ = config_.endpoint_url.substr(0, path_start);
  if (path_start != std::string::npos) base_path_ = config_.endpoint_url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();

  const auto body = request("GET", "/v1/vocab", nullptr, 0);
  std::vector<std::string> texts;
  try {
    for (const auto& t : body.at("tokens")) {
      const auto id = t.at("id").get<std::size_t>();
      if (id != texts.size()) throw ModelError("vocabulary ids are not dense at " + std::to_string(texts.size()), 0);
      texts.push_back(t.at("text").get<std::string>());
    }
    auto options = config_.vocab_options;
    for (const auto& eos : body.value("eos_texts", std::vector<std::string>{})) {
      if (!eos.empty()) options.terminal_markers.push_back(eos);
    }
    vocab_ = Vocabulary(std::move(texts), std::move(options));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed /v1/vocab response: ") + e.what(), 0);
  }
  id_ = "remote:" + config_.endpoint_url + "#" + sha256_hex(body.dump()).substr(0, 16);
}

nlohmann::json RemoteModel::request(const std::string& method, const std::string& path, const nlohmann::json* body,
                                    std::size_t step) const {
  const auto full_path = base_path_ + path;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config_.retry_count; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100) * (1 << std::min<std::size_t>(attempt - 1, 5)));
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = method == "GET" ? client.Get(full_path)
                               : client.Post(full_path, body ? body->dump() : std::string("{}"), "application/json");
    if (!res) {
      last_error = method + " " + full_path + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ModelError(method + " " + full_path + ": response is not JSON: " + e.what(), step);
      }
    }
    std::string message = res->body;
    try {
      message = nlohmann::json::parse(res->body).value("error", res->body);
    } catch (const nlohmann::json::exception&) {
    }
    last_error = method + " " + full_path + ": HTTP " + std::to_string(res->status) + ": " + message;
    if (res->status < 500) break;
  }
  throw ModelError(last_error, step);
}

ModelDistribution RemoteModel::parse_topk_response(const nlohmann::json& body, const Vocabulary& vocab, std::size_t k,
                                                   std::size_t step) {
  ModelDistribution dist;
  dist.k = k;
  try {
    double previous = 2.0;
    for (const auto& c : body.at("candidates")) {
      const auto id = c.at("id").get<std::int64_t>();
      const auto prob = c.at("prob").get<double>();
      if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
        throw ModelError("candidate id " + std::to_string(id) + " outside the vocabulary", step);
      }
      if (!(prob > 0.0 && prob <= 1.0)) throw ModelError("candidate probability outside (0,1]", step);
      if (prob > previous) throw ModelError("candidates are not sorted by probability", step);
      previous = prob;
      dist.candidates.push_back(Candidate{vocab.at(static_cast<TokenId>(id)), prob});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed /v1/topk response: ") + e.what(), step);
  }
  if (dist.candidates.size() > k) dist.candidates.resize(k);
  // Equal probabilities from the server may come in any order.
  sort_candidates(dist.candidates);
  return dist;
}

std::optional<std::filesystem::path> RemoteModel::cache_path(const SequenceState& state, std::size_t k) const {
  if (!config_.disk_cache_dir) return std::nullopt;
  const auto model_key = sha256_hex(id_).substr(0, 16);
  const auto prompt_key = sha256_hex(ids_string(state.prompt().tokens)).substr(0, 16);
  const auto seq_key = sha256_hex(ids_string(state.generated()) + "k=" + std::to_string(k));
  return *config_.disk_cache_dir / model_key / prompt_key / (seq_key + ".json");
}

ModelDistribution RemoteModel::next_distribution(const SequenceState& state, std::size_t k) const {
  if (state.terminal()) throw SearchLogicError("next_distribution on a terminal state");
  if (k == 0) throw SearchLogicError("next_distribution needs k >= 1");
  const auto cached = cache_path(state, k);
  if (cached && std::filesystem::exists(*cached)) {
    std::ifstream in(*cached);
    try {
      return parse_topk_response(nlohmann::json::parse(in), vocab_, k, state.step());
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable cache entry {}: {}", cached->string(), e.what());
    }
  }
  const nlohmann::json body{{"prompt_token_ids", state.prompt().tokens},
                            {"generated_token_ids", std::vector<TokenId>(state.generated().begin(), state.generated().end())},
                            {"k", k}};
  const auto response = request("POST", "/v1/topk", &body, state.step());
  auto dist = parse_topk_response(response, vocab_, k, state.step());
  if (dist.empty()) throw ModelError("server returned no candidates", state.step());
  if (cached) {
    std::filesystem::create_directories(cached->parent_path());
    const auto tmp = cached->string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
      std::ofstream out(tmp);
      out << response.dump();
    }
    std::filesystem::rename(tmp, *cached);
  }
  return dist;
}

std::shared_ptr<CachingModel> make_remote_model(RemoteModelConfig config) {
  return std::make_shared<CachingModel>(std::make_shared<const RemoteModel>(std::move(config)));
}

ServerCheck check_server(const RemoteModelConfig& config) {
  ServerCheck check;
  try {
    config.validate();
    {
      const auto scheme_end = config.endpoint_url.find("://");
      const auto path_start = config.endpoint_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
      const auto host = config.endpoint_url.substr(0, path_start);
      const auto base = path_start == std::string::npos ? std::string{} : config.endpoint_url.substr(path_start);
      httplib::Client client(host);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout).count() + 1, 0);
      auto res = client.Get((base.ends_with("/") ? base.substr(0, base.size() - 1) : base) + "/healthz");
      if (!res) throw ModelError("healthz: " + httplib::to_string(res.error()), 0);
      if (res->status != 200) throw ModelError("healthz returned HTTP " + std::to_string(res->status), 0);
    }
    RemoteModel model(config);
    check.vocab_size = model.vocabulary().size();
    auto prompt = std::make_shared<const Prompt>(Prompt{});
    const auto dist = model.next_distribution(SequenceState(prompt, kDefaultMaxTokens), 1);
    check.first_token = dist.candidates.front().token.text;
    check.first_prob = dist.candidates.front().prob;
    check.healthy = true;
    check.message = "ok";
  } catch (const std::exception& e) {
    check.message = e.what();
  }
  return check;
}

}  // namespace rtlmcts
