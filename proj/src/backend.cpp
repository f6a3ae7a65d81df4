#include "lrsql/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lrsql/errors.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::MockOracle:
      return "mock-oracle";
    case BackendKind::ScriptedReplay:
      return "scripted-replay";
    case BackendKind::HttpChat:
      return "http-chat";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "mock-oracle") return BackendKind::MockOracle;
  if (name == "scripted-replay") return BackendKind::ScriptedReplay;
  if (name == "http-chat") return BackendKind::HttpChat;
  throw DataError("unknown backend kind '" + std::string(name) + "'");
}

void validate_backend_spec(const BackendSpec& spec) {
  if (spec.max_in_flight < 1) throw DataError("max in-flight requests must be at least 1");
  if (spec.kind == BackendKind::HttpChat && (!spec.endpoint || spec.endpoint->empty())) {
    throw DataError("http-chat backend requires an endpoint");
  }
  if (spec.kind == BackendKind::ScriptedReplay && !spec.replay_path) {
    throw DataError("scripted-replay backend requires a replay file");
  }
}

// --- mock oracle ------------------------------------------------------------

MockOracleBackend::MockOracleBackend(const std::vector<QAExample>& gold) {
  for (const auto& ex : gold) gold_.emplace(ex.question_id, ex);
}

std::string MockOracleBackend::complete(const ChatRequest& request) {
  const auto it = gold_.find(request.question_id);
  if (it == gold_.end()) throw BackendError("mock oracle has no gold entry for question " + request.question_id);
  const QAExample& ex = it->second;
  if (request.kind == RequestKind::SqlGeneration) return ex.gold_sql;

  std::set<std::string> gold;
  for (const auto& t : ex.gold_tables) gold.insert(text::to_lower(t));
  std::vector<std::string> hits;
  for (const auto& t : request.slice_tables) {
    if (gold.count(text::to_lower(t))) hits.push_back(t);
  }
  return hits.empty() ? std::string(kNoneToken) : text::join(hits, ", ");
}

// --- scripted replay --------------------------------------------------------

ScriptedReplayBackend::ScriptedReplayBackend(std::map<Key, ScriptedEntry> script) : script_(std::move(script)) {}

std::map<ScriptedReplayBackend::Key, ScriptedEntry> ScriptedReplayBackend::load_script(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open replay file '" + path.string() + "'");
  std::map<Key, ScriptedEntry> script;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      Key key{row.at("question_id").get<std::string>(), std::nullopt};
      if (row.contains("slice_index") && !row.at("slice_index").is_null()) {
        key.second = row.at("slice_index").get<std::size_t>();
      }
      ScriptedEntry entry;
      entry.response = row.value("response", std::string{});
      entry.fail_attempts = row.value("fail_attempts", 0);
      entry.error = row.value("error", entry.error);
      script[std::move(key)] = std::move(entry);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno, 1);
    }
  }
  return script;
}

void ScriptedReplayBackend::set(Key key, ScriptedEntry entry) {
  std::lock_guard lock(mutex_);
  script_[std::move(key)] = std::move(entry);
}

std::string ScriptedReplayBackend::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  captured_.push_back(request);
  const Key key{request.question_id, request.slice_index};
  const auto it = script_.find(key);
  if (it == script_.end()) {
    throw BackendError("no scripted response for question " + request.question_id +
                       (request.slice_index ? ", slice " + std::to_string(*request.slice_index) : ", sql"));
  }
  const int attempt = attempts_[key]++;
  if (it->second.fail_attempts < 0 || attempt < it->second.fail_attempts) throw BackendError(it->second.error);
  return it->second.response;
}

std::vector<ChatRequest> ScriptedReplayBackend::captured() const {
  std::lock_guard lock(mutex_);
  return captured_;
}

// --- http chat --------------------------------------------------------------

HttpChatBackend::HttpChatBackend(BackendSpec spec) : spec_(std::move(spec)) {
  validate_backend_spec(spec_);
  const std::string& url = *spec_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw DataError("endpoint '" + url + "' has no scheme");
  const std::string scheme = text::to_lower(url.substr(0, scheme_end));
  if (scheme != "http" && scheme != "https") throw DataError("endpoint scheme must be http or https");
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  constexpr std::string_view kSuffix = "/chat/completions";
  if (path_.size() < kSuffix.size() || path_.compare(path_.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
    path_ += kSuffix;
  }
  if (const char* key = std::getenv(spec_.api_key_env.c_str()); key && *key) api_key_ = key;
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  nlohmann::json body;
  body["model"] = spec_.model.value_or("default");
  body["temperature"] = 0;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  // One client per call keeps concurrent workers independent.
  httplib::Client client(origin_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(spec_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(spec_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  const auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("request to " + origin_ + path_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                       res->body.substr(0, 300));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string{} : content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec, const std::vector<QAExample>& gold) {
  validate_backend_spec(spec);
  switch (spec.kind) {
    case BackendKind::MockOracle:
      return std::make_shared<MockOracleBackend>(gold);
    case BackendKind::ScriptedReplay:
      return std::make_shared<ScriptedReplayBackend>(ScriptedReplayBackend::load_script(*spec.replay_path));
    case BackendKind::HttpChat:
      return std::make_shared<HttpChatBackend>(spec);
  }
  throw DataError("unsupported backend kind");
}

}  // namespace lrsql
