#include "svarefine/agents.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "svarefine/errors.hpp"
#include "svarefine/sva.hpp"

namespace svarefine::agents {

namespace {

char lower(char c)
{
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool is_digit(char c)
{
    return c >= '0' && c <= '9';
}

void skip_spaces(std::string_view text, std::size_t & i)
{
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) {
        ++i;
    }
}

// Tries to read "[score: <number>]" at `i` ('[' already at i).
std::optional<std::string_view> score_marker_at(std::string_view text, std::size_t i)
{
    constexpr std::string_view word = "score";
    ++i;
    skip_spaces(text, i);
    if (text.size() - i < word.size()) {
        return std::nullopt;
    }
    for (std::size_t k = 0; k < word.size(); ++k) {
        if (lower(text[i + k]) != word[k]) {
            return std::nullopt;
        }
    }
    i += word.size();
    skip_spaces(text, i);
    if (i >= text.size() || text[i] != ':') {
        return std::nullopt;
    }
    ++i;
    skip_spaces(text, i);
    auto const number_begin = i;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
        ++i;
    }
    std::size_t digits = 0;
    while (i < text.size() && is_digit(text[i])) {
        ++i;
        ++digits;
    }
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && is_digit(text[i])) {
            ++i;
            ++digits;
        }
    }
    if (digits == 0) {
        return std::nullopt;
    }
    auto const number_end = i;
    skip_spaces(text, i);
    if (i >= text.size() || text[i] != ']') {
        return std::nullopt;
    }
    return text.substr(number_begin, number_end - number_begin);
}

std::string trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

struct FenceSplit
{
    std::vector<std::string> blocks;
    std::string outside;
};

bool is_fence(std::string_view line)
{
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
        ++i;
    }
    return line.substr(i, 3) == "```";
}

FenceSplit split_fences(std::string_view text)
{
    FenceSplit out;
    std::string current;
    bool inside = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        auto const next = end == std::string_view::npos ? text.size() : end + 1;
        auto line = text.substr(pos, (end == std::string_view::npos ? text.size() : end) - pos);
        if (is_fence(line)) {
            if (inside) {
                out.blocks.push_back(std::move(current));
                current.clear();
            }
            inside = !inside;
        } else if (inside) {
            current.append(text.substr(pos, next - pos));
        } else {
            out.outside.append(text.substr(pos, next - pos));
        }
        pos = next;
    }
    if (inside) {
        out.blocks.push_back(std::move(current)); // unterminated fence runs to the end
    }
    return out;
}

PromptContext signal_context(bank::SignalInfo const & signal, std::string const & workflow)
{
    return {
        {"signal_name", signal.verilog_name},
        {"specification_text", bank::describe(signal)},
        {"workflow_info", workflow},
    };
}

std::string ask(ChatBackend & backend, std::vector<ChatMessage> const & messages)
{
    return backend.complete(messages);
}

} // namespace

double parse_score(std::string_view text)
{
    std::optional<std::string_view> last;
    for (auto i = text.find('['); i != std::string_view::npos; i = text.find('[', i + 1)) {
        if (auto m = score_marker_at(text, i)) {
            last = m;
        }
    }
    if (!last) {
        throw ScoreParseError("critic reply carries no [SCORE: n] marker", std::string(text));
    }
    // from_chars rejects a leading '+'.
    auto number = *last;
    if (number.front() == '+') {
        number.remove_prefix(1);
    }
    double value = 0.0;
    auto const [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
    if (ec != std::errc() || ptr != number.data() + number.size() || !std::isfinite(value)) {
        throw ScoreParseError("unreadable score '" + std::string(*last) + "'", std::string(text));
    }
    if (value < -100.0 || value > 100.0) {
        throw RangeError("critic score " + std::string(*last) + " outside [-100, 100]");
    }
    return value;
}

double suppress(double score, double cap)
{
    return std::min(score, cap);
}

std::vector<std::string> extract_assertions(std::string_view text)
{
    std::vector<std::string> out;
    for (auto const & block : split_fences(text).blocks) {
        for (auto & unit : sva::split_units(block)) {
            out.push_back(std::move(unit));
        }
    }
    return out;
}

tree::AnswerContent parse_answer(std::string_view text)
{
    auto split = split_fences(text);
    tree::AnswerContent answer;
    for (auto const & block : split.blocks) {
        for (auto & unit : sva::split_units(block)) {
            answer.assertions.push_back(std::move(unit));
        }
    }
    answer.commentary = trim(split.outside);
    return answer;
}

std::string format_assertions(std::vector<std::string> const & assertions)
{
    if (assertions.empty()) {
        return "(none)";
    }
    std::string out;
    for (auto const & a : assertions) {
        if (!out.empty()) {
            out += "\n\n";
        }
        out += a;
    }
    return out;
}

tree::AnswerContent generate_weak_answer(
    ChatBackend & backend, bank::SignalInfo const & signal, std::string const & workflow, PromptLibrary const & prompts)
{
    if (signal.verilog_name.empty() || signal.description.empty()) {
        throw PreconditionError("weak answer needs a signal name and description");
    }
    auto ctx = signal_context(signal, workflow);
    ctx["assertions"] = "(none)";
    ctx["feedback"] = "";
    ctx["syntax_log"] = "";
    ctx["rag_context"] = "";
    auto messages = render_prompt(prompts.get(AgentRole::sva), ctx);
    messages.back().content += "\n\n";
    messages.back().content += brevity_instruction;
    return parse_answer(ask(backend, messages));
}

namespace {

std::vector<ChatMessage> critic_messages(bank::SignalInfo const & signal, std::string const & workflow,
    tree::AnswerContent const & answer, std::string const & syntax_log, PromptLibrary const & prompts)
{
    auto ctx = signal_context(signal, workflow);
    ctx["assertions"] = format_assertions(answer.assertions);
    ctx["syntax_log"] = syntax_log.empty() ? "(not checked yet)" : syntax_log;
    return render_prompt(prompts.get(AgentRole::critic), ctx);
}

} // namespace

CritiqueResult critique(ChatBackend & backend, bank::SignalInfo const & signal, std::string const & workflow,
    tree::AnswerContent const & answer, std::string const & syntax_log, tree::SearchParams const & params,
    PromptLibrary const & prompts)
{
    CritiqueResult result;
    result.feedback = ask(backend, critic_messages(signal, workflow, answer, syntax_log, prompts));
    result.raw_score = parse_score(result.feedback);
    result.suppressed_score = suppress(result.raw_score, params.score_cap);
    return result;
}

std::string critic_feedback(ChatBackend & backend, bank::SignalInfo const & signal, std::string const & workflow,
    tree::AnswerContent const & answer, std::string const & syntax_log, PromptLibrary const & prompts)
{
    return ask(backend, critic_messages(signal, workflow, answer, syntax_log, prompts));
}

tree::AnswerContent refine(ChatBackend & backend, bank::SignalInfo const & signal, tree::AnswerContent const & answer,
    std::string const & feedback, std::string const & syntax_log, std::string const & rag_context,
    std::string const & workflow, PromptLibrary const & prompts)
{
    auto ctx = signal_context(signal, workflow);
    ctx["assertions"] = format_assertions(answer.assertions);
    ctx["feedback"] = feedback.empty() ? "(none)" : feedback;
    ctx["syntax_log"] = syntax_log.empty() ? "(none)" : syntax_log;
    ctx["rag_context"] = rag_context.empty() ? "(none)" : rag_context;
    return parse_answer(ask(backend, render_prompt(prompts.get(AgentRole::sva), ctx)));
}

std::string format_for_correction(std::vector<sva::AssertionRecord> const & bad)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < bad.size(); ++i) {
        if (i) {
            os << "\n";
        }
        os << "Assertion " << (i + 1) << ":\n" << bad[i].text << "\nSyntax errors:\n";
        for (auto const & d : bad[i].diagnostics) {
            os << "- line " << d.line << ", column " << d.column << ": " << d.message << "\n";
        }
    }
    return os.str();
}

std::vector<std::string> correct_syntax(ChatBackend & backend, std::vector<sva::AssertionRecord> const & bad,
    std::string const & spec_excerpt, std::string const & signal_name, PromptLibrary const & prompts)
{
    if (bad.empty()) {
        return {};
    }
    for (std::size_t i = 0; i < bad.size(); ++i) {
        if (bad[i].diagnostics.empty()) {
            throw PreconditionError("record " + std::to_string(i) + " sent for correction carries no diagnostic");
        }
    }
    PromptContext ctx = {
        {"specification_text", spec_excerpt},
        {"signal_name", signal_name},
        {"assertions", format_for_correction(bad)},
    };
    return extract_assertions(ask(backend, render_prompt(prompts.get(AgentRole::syntax_correction), ctx)));
}

std::vector<std::string> normalize_pool(std::vector<std::string> const & pool)
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto const & text : pool) {
        auto key = sva::normalize(text);
        if (key.empty()) {
            continue;
        }
        if (seen.insert(std::move(key)).second) {
            out.push_back(text);
        }
    }
    return out;
}

DedupResult deduplicate(ChatBackend & backend, std::vector<std::string> const & pool, std::string const & spec_excerpt,
    std::string const & signal_name, PromptLibrary const & prompts)
{
    DedupResult result;
    auto const unique = normalize_pool(pool);
    if (unique.size() <= 1) {
        result.kept = unique;
        return result;
    }
    PromptContext ctx = {
        {"specification_text", spec_excerpt},
        {"signal_name", signal_name},
        {"assertions", format_assertions(unique)},
    };
    auto const reply = ask(backend, render_prompt(prompts.get(AgentRole::deduplication), ctx));
    result.backend_called = true;

    std::set<std::string> pool_keys;
    for (auto const & a : unique) {
        pool_keys.insert(sva::normalize(a));
    }
    std::set<std::string> chosen;
    std::vector<std::string> foreign;
    for (auto const & a : extract_assertions(reply)) {
        auto key = sva::normalize(a);
        if (pool_keys.count(key)) {
            chosen.insert(std::move(key));
        } else {
            foreign.push_back(a);
        }
    }
    if (!foreign.empty()) {
        result.warnings.push_back("deduplication reply rejected: " + std::to_string(foreign.size())
            + " assertion(s) not present in the pool; keeping all " + std::to_string(unique.size()));
        result.kept = unique;
        return result;
    }
    if (chosen.empty()) {
        result.warnings.push_back(
            "deduplication reply rejected: no assertions extracted; keeping all " + std::to_string(unique.size()));
        result.kept = unique;
        return result;
    }
    for (auto const & a : unique) {
        if (chosen.count(sva::normalize(a))) {
            result.kept.push_back(a);
        }
    }
    return result;
}

} // namespace svarefine::agents
