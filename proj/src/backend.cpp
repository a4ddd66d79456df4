#include "svarefine/backend.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>

namespace svarefine::agents {

char const * to_string(Role role)
{
    return role == Role::system ? "system" : "user";
}

std::string flatten(std::span<ChatMessage const> messages)
{
    std::string out;
    for (auto const & m : messages) {
        if (!out.empty()) {
            out += '\n';
        }
        out += m.content;
    }
    return out;
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script)
: script_(std::make_move_iterator(script.begin()), std::make_move_iterator(script.end()))
{}

ScriptedBackend::ScriptedBackend(ScriptedBackend && other) noexcept
{
    std::lock_guard lock(other.mutex_);
    script_ = std::move(other.script_);
    prompts_ = std::move(other.prompts_);
}

void ScriptedBackend::push(std::string response)
{
    std::lock_guard lock(mutex_);
    script_.push_back(ScriptEntry{std::nullopt, std::move(response)});
}

void ScriptedBackend::push(std::string match, std::string response)
{
    std::lock_guard lock(mutex_);
    script_.push_back(ScriptEntry{std::move(match), std::move(response)});
}

std::string ScriptedBackend::complete(std::span<ChatMessage const> messages)
{
    auto prompt = flatten(messages);
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
    for (auto it = script_.begin(); it != script_.end(); ++it) {
        if (!it->match || prompt.find(*it->match) != std::string::npos) {
            std::string response = std::move(it->response);
            script_.erase(it);
            if (response.empty()) {
                throw BackendError("scripted response is empty");
            }
            return response;
        }
    }
    throw BackendError(script_.empty() ? "script exhausted" : "no scripted response matches the prompt");
}

std::size_t ScriptedBackend::remaining() const
{
    std::lock_guard lock(mutex_);
    return script_.size();
}

std::size_t ScriptedBackend::call_count() const
{
    std::lock_guard lock(mutex_);
    return prompts_.size();
}

std::vector<std::string> ScriptedBackend::prompts() const
{
    std::lock_guard lock(mutex_);
    return prompts_;
}

ScriptedBackend ScriptedBackend::from_json(nlohmann::json const & doc)
{
    auto const it = doc.find("responses");
    if (it == doc.end() || !it->is_array()) {
        throw LoadError("responses", "script must contain a 'responses' array");
    }
    std::vector<ScriptEntry> entries;
    for (std::size_t i = 0; i < it->size(); ++i) {
        auto const & e = (*it)[i];
        auto const path = "responses[" + std::to_string(i) + "]";
        if (e.is_string()) {
            entries.push_back(ScriptEntry{std::nullopt, e.get<std::string>()});
            continue;
        }
        if (!e.is_object() || !e.contains("response") || !e["response"].is_string()) {
            throw LoadError(path + ".response", "missing or not a string");
        }
        ScriptEntry entry;
        entry.response = e["response"].get<std::string>();
        if (auto m = e.find("match"); m != e.end() && !m->is_null()) {
            if (!m->is_string()) {
                throw LoadError(path + ".match", "must be a string");
            }
            entry.match = m->get<std::string>();
        }
        entries.push_back(std::move(entry));
    }
    return ScriptedBackend(std::move(entries));
}

ScriptedBackend ScriptedBackend::from_file(std::string const & path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read script file " + path);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (nlohmann::json::parse_error const & e) {
        throw LoadError(path, e.what());
    }
    return from_json(doc);
}

// ---------------------------------------------------------------------------

CallbackBackend::CallbackBackend(Callback callback)
: callback_(std::move(callback))
{}

std::string CallbackBackend::complete(std::span<ChatMessage const> messages)
{
    auto reply = callback_(std::vector<ChatMessage>(messages.begin(), messages.end()));
    if (reply.empty()) {
        throw BackendError("backend callback returned an empty reply");
    }
    return reply;
}

// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
: config_(std::move(config))
{
    if (config_.endpoint.empty()) {
        throw ConfigError("backend endpoint is not set");
    }
    if (config_.model.empty()) {
        throw ConfigError("backend model is not set");
    }
    if (!config_.api_key_env.empty()) {
        if (char const * key = std::getenv(config_.api_key_env.c_str())) {
            api_key_ = key;
        }
    }
}

nlohmann::json HttpChatBackend::request_body(std::span<ChatMessage const> messages) const
{
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array();
    for (auto const & m : messages) {
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    if (config_.temperature) {
        body["temperature"] = *config_.temperature;
    }
    return body;
}

std::string HttpChatBackend::parse_response(std::string const & body)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (nlohmann::json::parse_error const & e) {
        throw BackendError(std::string("malformed response body: ") + e.what());
    }
    if (doc.contains("error")) {
        auto const & err = doc["error"];
        throw BackendError(
            "backend error: " + (err.is_object() && err.contains("message") ? err["message"].dump() : err.dump()));
    }
    try {
        auto const & content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string() || content.get<std::string>().empty()) {
            throw BackendError("backend returned an empty completion");
        }
        return content.get<std::string>();
    } catch (nlohmann::json::exception const & e) {
        throw BackendError(std::string("unexpected response shape: ") + e.what());
    }
}

std::string HttpChatBackend::complete(std::span<ChatMessage const> messages)
{
    httplib::Client client(config_.endpoint);
    auto const secs = static_cast<time_t>(config_.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);

    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto const result = client.Post(config_.path, headers, request_body(messages).dump(), "application/json");
    if (!result) {
        throw BackendError("HTTP request failed: " + httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) {
        throw BackendError("HTTP status " + std::to_string(result->status) + ": " + result->body.substr(0, 500));
    }
    return parse_response(result->body);
}

} // namespace svarefine::agents
