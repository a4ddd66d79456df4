#pragma once

// Generation, critique, correction and deduplication agents. Each operation
// renders one prompt, makes exactly one backend call (or none when the input
// is vacuous) and parses the reply. No operation mutates its inputs.

#include <string>
#include <string_view>
#include <vector>

#include "svarefine/backend.hpp"
#include "svarefine/bank.hpp"
#include "svarefine/checker.hpp"
#include "svarefine/prompts.hpp"
#include "svarefine/tree.hpp"

namespace svarefine::agents {

struct CritiqueResult
{
    std::string feedback;
    double raw_score = 0.0;
    double suppressed_score = 0.0;
};

/// Value of the last "[SCORE: n]" marker (case-insensitive, optional sign
/// and decimals). Throws ScoreParseError without a marker and RangeError
/// outside [-100, 100].
[[nodiscard]] double parse_score(std::string_view text);

/// min(score, cap).
[[nodiscard]] double suppress(double score, double cap);

/// Assertion units from fenced code blocks, in order.
[[nodiscard]] std::vector<std::string> extract_assertions(std::string_view text);

/// Units from fences plus everything outside fences as commentary.
[[nodiscard]] tree::AnswerContent parse_answer(std::string_view text);

/// Assertions joined by blank lines; "(none)" for an empty list.
[[nodiscard]] std::string format_assertions(std::vector<std::string> const & assertions);

inline constexpr std::string_view brevity_instruction =
    "Keep this first answer short: give only a few essential assertions and minimal explanation.";

[[nodiscard]] tree::AnswerContent generate_weak_answer(ChatBackend & backend, bank::SignalInfo const & signal,
    std::string const & workflow, PromptLibrary const & prompts = PromptLibrary::builtin());

/// One critic call; score required.
[[nodiscard]] CritiqueResult critique(ChatBackend & backend, bank::SignalInfo const & signal,
    std::string const & workflow, tree::AnswerContent const & answer, std::string const & syntax_log,
    tree::SearchParams const & params, PromptLibrary const & prompts = PromptLibrary::builtin());

/// One critic call used for its feedback text; a missing score is tolerated.
[[nodiscard]] std::string critic_feedback(ChatBackend & backend, bank::SignalInfo const & signal,
    std::string const & workflow, tree::AnswerContent const & answer, std::string const & syntax_log,
    PromptLibrary const & prompts = PromptLibrary::builtin());

[[nodiscard]] tree::AnswerContent refine(ChatBackend & backend, bank::SignalInfo const & signal,
    tree::AnswerContent const & answer, std::string const & feedback, std::string const & syntax_log,
    std::string const & rag_context, std::string const & workflow,
    PromptLibrary const & prompts = PromptLibrary::builtin());

/// Failing assertions with their diagnostics, as embedded in the correction prompt.
[[nodiscard]] std::string format_for_correction(std::vector<sva::AssertionRecord> const & bad);

/// Empty input returns empty without calling the backend. Every record must
/// carry at least one diagnostic (PreconditionError otherwise).
[[nodiscard]] std::vector<std::string> correct_syntax(ChatBackend & backend,
    std::vector<sva::AssertionRecord> const & bad, std::string const & spec_excerpt, std::string const & signal_name,
    PromptLibrary const & prompts = PromptLibrary::builtin());

/// Normalization pre-pass: first occurrence of each normalized text, in order.
[[nodiscard]] std::vector<std::string> normalize_pool(std::vector<std::string> const & pool);

struct DedupResult
{
    std::vector<std::string> kept;
    std::vector<std::string> warnings;
    bool backend_called = false;
};

/// Runs the pre-pass, then asks the backend only when more than one entry
/// remains. A reply naming anything outside the pool, or nothing at all, is
/// rejected and the pre-passed pool is kept. Output preserves pool order.
[[nodiscard]] DedupResult deduplicate(ChatBackend & backend, std::vector<std::string> const & pool,
    std::string const & spec_excerpt, std::string const & signal_name,
    PromptLibrary const & prompts = PromptLibrary::builtin());

} // namespace svarefine::agents
