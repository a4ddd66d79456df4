#include "svarefine/prompts.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "builtin_templates.hpp"
#include "svarefine/errors.hpp"

namespace svarefine::agents {

char const * to_string(AgentRole role)
{
    switch (role) {
    case AgentRole::signal_mapper: return "signal_mapper";
    case AgentRole::spec_analyzer: return "spec_analyzer";
    case AgentRole::waveform_analyzer: return "waveform_analyzer";
    case AgentRole::sva: return "sva";
    case AgentRole::critic: return "critic";
    case AgentRole::syntax_correction: return "syntax_correction";
    case AgentRole::deduplication: return "deduplication";
    }
    return "?";
}

std::optional<AgentRole> parse_role(std::string_view name)
{
    for (auto role : all_roles) {
        if (name == to_string(role)) {
            return role;
        }
    }
    return std::nullopt;
}

namespace {

bool name_start(char c)
{
    return (c >= 'a' && c <= 'z') || c == '_';
}

bool name_char(char c)
{
    return name_start(c) || (c >= '0' && c <= '9');
}

// Calls on_text for literal runs and on_name for placeholders.
template <typename Text, typename Name>
void scan(std::string_view tmpl, Text on_text, Name on_name)
{
    std::size_t i = 0;
    std::size_t literal_start = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{' && i + 1 < tmpl.size() && name_start(tmpl[i + 1])) {
            std::size_t j = i + 1;
            while (j < tmpl.size() && name_char(tmpl[j])) {
                ++j;
            }
            if (j < tmpl.size() && tmpl[j] == '}') {
                on_text(tmpl.substr(literal_start, i - literal_start));
                on_name(tmpl.substr(i + 1, j - i - 1));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        ++i;
    }
    on_text(tmpl.substr(literal_start));
}

std::string trim_newlines(std::string_view s)
{
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

} // namespace

std::vector<std::string> PromptTemplate::placeholders() const
{
    std::vector<std::string> out;
    scan(
        user_text_template, [](std::string_view) {},
        [&](std::string_view name) {
            if (std::find(out.begin(), out.end(), name) == out.end()) {
                out.emplace_back(name);
            }
        });
    return out;
}

PromptTemplate PromptTemplate::parse(AgentRole role, std::string_view file_text, std::string const & origin)
{
    constexpr std::string_view system_marker = "=== system ===";
    constexpr std::string_view user_marker = "=== user ===";

    // Body offsets (just past the marker line) and the marker line starts.
    std::optional<std::size_t> system_body;
    std::optional<std::size_t> user_body;
    std::size_t user_header = 0;
    std::size_t line_start = 0;
    while (line_start < file_text.size()) {
        auto line_end = file_text.find('\n', line_start);
        if (line_end == std::string_view::npos) {
            line_end = file_text.size();
        }
        auto line = file_text.substr(line_start, line_end - line_start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line == system_marker && !system_body) {
            system_body = line_end;
        } else if (line == user_marker && system_body && !user_body) {
            user_body = line_end;
            user_header = line_start;
        }
        line_start = line_end + 1;
    }
    if (!system_body) {
        throw LoadError(origin, "missing '=== system ===' section");
    }
    if (!user_body) {
        throw LoadError(origin, "missing '=== user ===' section after the system section");
    }

    PromptTemplate out;
    out.role = role;
    out.system_text = trim_newlines(file_text.substr(*system_body, user_header - *system_body));
    out.user_text_template = trim_newlines(file_text.substr(std::min(*user_body, file_text.size())));
    return out;
}

std::string PromptTemplate::serialize() const
{
    return "=== system ===\n" + system_text + "\n=== user ===\n" + user_text_template + "\n";
}

std::vector<ChatMessage> render_prompt(PromptTemplate const & tmpl, PromptContext const & context)
{
    std::string user;
    user.reserve(tmpl.user_text_template.size());
    scan(
        tmpl.user_text_template, [&](std::string_view text) { user += text; },
        [&](std::string_view name) {
            auto it = context.find(name);
            if (it == context.end()) {
                throw RenderError(std::string(name));
            }
            user += it->second;
        });
    return {ChatMessage{Role::system, tmpl.system_text}, ChatMessage{Role::user, std::move(user)}};
}

PromptLibrary const & PromptLibrary::builtin()
{
    static PromptLibrary const library = [] {
        PromptLibrary lib;
        for (auto role : all_roles) {
            auto const text = detail::builtin_template_text(to_string(role));
            lib.set(PromptTemplate::parse(role, text, std::string("builtin:") + to_string(role)));
        }
        return lib;
    }();
    return library;
}

PromptLibrary PromptLibrary::load(std::string const & dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw ConfigError("template directory not found: " + dir);
    }
    PromptLibrary lib = builtin();
    for (auto role : all_roles) {
        auto const path = fs::path(dir) / (std::string(to_string(role)) + ".txt");
        if (!fs::exists(path)) {
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        lib.set(PromptTemplate::parse(role, buf.str(), path.string()));
    }
    return lib;
}

PromptTemplate const & PromptLibrary::get(AgentRole role) const
{
    auto it = templates_.find(role);
    if (it == templates_.end()) {
        throw PreconditionError(std::string("no template for role ") + to_string(role));
    }
    return it->second;
}

void PromptLibrary::set(PromptTemplate tmpl)
{
    auto const role = tmpl.role;
    templates_.insert_or_assign(role, std::move(tmpl));
}

} // namespace svarefine::agents
