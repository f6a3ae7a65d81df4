#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lrsql/sft.hpp"

namespace lrsql {

struct ChatMessage {
  std::string role;
  std::string content;
};

enum class RequestKind { SchemaLink, SqlGeneration };

// A chat-completion request plus routing metadata. Only `messages` goes over
// the wire; the rest lets test backends answer deterministically.
struct ChatRequest {
  std::vector<ChatMessage> messages;
  RequestKind kind = RequestKind::SchemaLink;
  std::string question_id;
  std::optional<std::size_t> slice_index;
  std::vector<std::string> slice_tables;
};

// Implementations must be callable from several threads at once. Transport
// failures are reported as BackendError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

enum class BackendKind { MockOracle, ScriptedReplay, HttpChat };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct BackendSpec {
  BackendKind kind = BackendKind::MockOracle;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::chrono::milliseconds timeout{60'000};
  std::size_t max_in_flight = 1;
  std::string api_key_env = "LR_SQL_API_KEY";
  std::optional<std::filesystem::path> replay_path;
};

// Throws DataError when the spec breaks its invariants.
void validate_backend_spec(const BackendSpec& spec);

// Answers from gold annotations: the gold tables inside the slice, or the
// gold SQL.
class MockOracleBackend : public ChatBackend {
 public:
  explicit MockOracleBackend(const std::vector<QAExample>& gold);

  std::string complete(const ChatRequest& request) override;

 private:
  std::map<std::string, QAExample> gold_;
};

struct ScriptedEntry {
  std::string response;
  // Number of attempts that fail before the response is served; negative
  // fails forever.
  int fail_attempts = 0;
  std::string error = "scripted transport failure";
};

// Serves canned responses keyed by (question_id, slice_index); SQL requests
// use an absent slice_index. Every request is captured for inspection.
class ScriptedReplayBackend : public ChatBackend {
 public:
  using Key = std::pair<std::string, std::optional<std::size_t>>;

  ScriptedReplayBackend() = default;
  explicit ScriptedReplayBackend(std::map<Key, ScriptedEntry> script);

  // JSONL of {"question_id", "slice_index"?, "response", "fail_attempts"?, "error"?}.
  static std::map<Key, ScriptedEntry> load_script(const std::filesystem::path& path);

  void set(Key key, ScriptedEntry entry);
  std::string complete(const ChatRequest& request) override;
  std::vector<ChatRequest> captured() const;

 private:
  mutable std::mutex mutex_;
  std::map<Key, ScriptedEntry> script_;
  std::map<Key, int> attempts_;
  std::vector<ChatRequest> captured_;
};

// OpenAI-compatible chat completions over HTTP(S). The endpoint is either the
// full .../chat/completions URL or a base URL it is appended to.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendSpec spec);

  std::string complete(const ChatRequest& request) override;

 private:
  BackendSpec spec_;
  std::string origin_;
  std::string path_;
  std::optional<std::string> api_key_;
};

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec, const std::vector<QAExample>& gold);

}  // namespace lrsql
