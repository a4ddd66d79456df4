#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svarefine/errors.hpp"

namespace svarefine::agents {

enum class Role
{
    system,
    user,
};

[[nodiscard]] char const * to_string(Role role);

struct ChatMessage
{
    Role role = Role::user;
    std::string content;

    friend bool operator==(ChatMessage const &, ChatMessage const &) = default;
};

/// Stateless chat-completion endpoint. Every call is a fresh conversation.
class ChatBackend
{
public:
    virtual ~ChatBackend() = default;

    /// Returns the assistant text, or throws BackendError. Never returns an
    /// empty string silently; implementations report empty replies as errors.
    [[nodiscard]] virtual std::string complete(std::span<ChatMessage const> messages) = 0;

    [[nodiscard]] virtual bool supports_files() const { return false; }
    [[nodiscard]] virtual bool supports_images() const { return false; }
};

/// Concatenation of all message contents, used for substring matching.
[[nodiscard]] std::string flatten(std::span<ChatMessage const> messages);

struct ScriptEntry
{
    /// When set, the entry only answers prompts containing this substring.
    std::optional<std::string> match;
    std::string response;
};

/// Replays canned responses in order. Each call consumes the first entry
/// whose match key is absent or occurs in the prompt; no eligible entry is a
/// BackendError. Calls are serialized internally, but replay order across
/// threads is only deterministic when entries are keyed.
class ScriptedBackend final : public ChatBackend
{
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<ScriptEntry> script);
    ScriptedBackend(ScriptedBackend && other) noexcept;

    void push(std::string response);
    void push(std::string match, std::string response);

    [[nodiscard]] std::string complete(std::span<ChatMessage const> messages) override;

    [[nodiscard]] std::size_t remaining() const;
    [[nodiscard]] std::size_t call_count() const;
    /// Prompts received so far, flattened.
    [[nodiscard]] std::vector<std::string> prompts() const;

    /// {"responses": [{"match": "...", "response": "..."}, ...]}
    static ScriptedBackend from_json(nlohmann::json const & doc);
    static ScriptedBackend from_file(std::string const & path);

private:
    mutable std::mutex mutex_;
    std::deque<ScriptEntry> script_;
    std::vector<std::string> prompts_;
};

/// Adapts a callable. Used by tests and the Python bindings.
class CallbackBackend final : public ChatBackend
{
public:
    using Callback = std::function<std::string(std::vector<ChatMessage> const &)>;

    explicit CallbackBackend(Callback callback);

    [[nodiscard]] std::string complete(std::span<ChatMessage const> messages) override;

private:
    Callback callback_;
};

struct HttpBackendConfig
{
    /// Base URL such as "https://api.example.com" or "http://localhost:8080".
    std::string endpoint;
    /// Request path appended to the endpoint.
    std::string path = "/v1/chat/completions";
    std::string model;
    /// Name of the environment variable that holds the API key.
    std::string api_key_env = "SVAREFINE_API_KEY";
    std::chrono::seconds timeout{600};
    std::optional<double> temperature;
};

/// Chat-completion client over HTTP(S). Request body:
///   {"model": ..., "messages": [{"role": "system"|"user", "content": ...}]}
/// Reply text is taken from choices[0].message.content.
class HttpChatBackend final : public ChatBackend
{
public:
    explicit HttpChatBackend(HttpBackendConfig config);

    [[nodiscard]] std::string complete(std::span<ChatMessage const> messages) override;

    /// Request body for `messages`; exposed for tests.
    [[nodiscard]] nlohmann::json request_body(std::span<ChatMessage const> messages) const;

    /// Extracts the reply text from a response body. Throws BackendError.
    [[nodiscard]] static std::string parse_response(std::string const & body);

private:
    HttpBackendConfig config_;
    std::string api_key_;
};

} // namespace svarefine::agents
