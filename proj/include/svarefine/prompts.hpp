#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svarefine/backend.hpp"

namespace svarefine::agents {

enum class AgentRole
{
    signal_mapper,
    spec_analyzer,
    waveform_analyzer,
    sva,
    critic,
    syntax_correction,
    deduplication,
};

inline constexpr std::array<AgentRole, 7> all_roles = {
    AgentRole::signal_mapper, AgentRole::spec_analyzer, AgentRole::waveform_analyzer, AgentRole::sva,
    AgentRole::critic,        AgentRole::syntax_correction, AgentRole::deduplication,
};

[[nodiscard]] char const * to_string(AgentRole role);
[[nodiscard]] std::optional<AgentRole> parse_role(std::string_view name);

using PromptContext = std::map<std::string, std::string, std::less<>>;

/// A system message plus a user message template with `{name}` placeholders.
/// Placeholder names are `[a-z_][a-z0-9_]*`; any other brace text is literal.
struct PromptTemplate
{
    AgentRole role = AgentRole::sva;
    std::string system_text;
    std::string user_text_template;

    /// Distinct placeholder names in order of first appearance.
    [[nodiscard]] std::vector<std::string> placeholders() const;

    /// Parses the template file format:
    ///   === system ===
    ///   ...
    ///   === user ===
    ///   ...
    /// Throws LoadError when a section is missing.
    static PromptTemplate parse(AgentRole role, std::string_view file_text, std::string const & origin = "template");

    [[nodiscard]] std::string serialize() const;

    friend bool operator==(PromptTemplate const &, PromptTemplate const &) = default;
};

/// Substitutes every placeholder in a single pass; substituted values are
/// never rescanned. Returns {system, user}. Throws RenderError naming the
/// first placeholder absent from `context`.
[[nodiscard]] std::vector<ChatMessage> render_prompt(PromptTemplate const & tmpl, PromptContext const & context);

/// One template per role.
class PromptLibrary
{
public:
    /// The templates compiled into the library.
    static PromptLibrary const & builtin();

    /// Built-in templates, overridden by any `<role>.txt` present in `dir`.
    static PromptLibrary load(std::string const & dir);

    [[nodiscard]] PromptTemplate const & get(AgentRole role) const;
    void set(PromptTemplate tmpl);

private:
    std::map<AgentRole, PromptTemplate> templates_;
};

} // namespace svarefine::agents
