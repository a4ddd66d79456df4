#pragma once

// Per-signal information bank built by the analyzer agents, plus its JSON
// persistence.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svarefine/backend.hpp"
#include "svarefine/prompts.hpp"

namespace svarefine::bank {

struct SignalInfo
{
    std::string spec_name;
    std::string verilog_name;
    std::string description;
    std::string definition;
    std::string functionality;
    std::string interconnection;
    std::string additional_info;
    std::vector<std::string> related_signals;

    friend bool operator==(SignalInfo const &, SignalInfo const &) = default;
};

struct WaveformSummary
{
    std::string waveform_name;
    std::vector<std::string> signals;
    std::string timing_relationship;
    std::string causal_dependencies;
    std::string state_transitions;
    std::string protocol_mechanisms;
    std::string additional_observations;

    friend bool operator==(WaveformSummary const &, WaveformSummary const &) = default;
};

struct InformationBank
{
    std::string design_name;
    std::string workflow_info;
    std::vector<SignalInfo> signals;
    std::vector<WaveformSummary> waveforms;

    /// Lookup by verilog_name.
    [[nodiscard]] SignalInfo const * find(std::string const & verilog_name) const;

    friend bool operator==(InformationBank const &, InformationBank const &) = default;
};

struct SignalMapping
{
    std::string verilog_name;
    std::string description;

    friend bool operator==(SignalMapping const &, SignalMapping const &) = default;
};

using Warnings = std::vector<std::string>;

/// Asks the mapper agent for "name: description" lines and keeps those whose
/// name occurs as an identifier in `verilog_decls`. Throws StageError when
/// nothing survives, PreconditionError on empty inputs.
[[nodiscard]] std::vector<SignalMapping> map_signals(agents::ChatBackend & backend, std::string const & spec_text,
    std::string const & verilog_decls, Warnings & warnings,
    agents::PromptLibrary const & prompts = agents::PromptLibrary::builtin());

/// Parses the mapper reply on its own; exposed for tests.
[[nodiscard]] std::vector<SignalMapping> parse_mapping(
    std::string const & reply, std::string const & verilog_decls, Warnings & warnings);

/// Throws StageError when the reply never mentions `signal_name`.
[[nodiscard]] SignalInfo analyze_signal(agents::ChatBackend & backend, std::string const & spec_text,
    std::string const & signal_name, agents::PromptLibrary const & prompts = agents::PromptLibrary::builtin());

[[nodiscard]] SignalInfo parse_signal_analysis(std::string const & reply, std::string const & signal_name);

/// Returns nullopt (with a warning) when the reply lists no signals.
/// `fallback_name` names the waveform when the reply does not.
[[nodiscard]] std::optional<WaveformSummary> analyze_waveform(agents::ChatBackend & backend,
    std::string const & spec_text, std::string const & waveform_text, std::string const & fallback_name,
    Warnings & warnings, agents::PromptLibrary const & prompts = agents::PromptLibrary::builtin());

[[nodiscard]] std::optional<WaveformSummary> parse_waveform_analysis(
    std::string const & reply, std::string const & fallback_name);

/// Text block handed to the generation agents as workflow information.
[[nodiscard]] std::string compose_workflow_info(std::vector<SignalMapping> const & mappings,
    std::vector<WaveformSummary> const & waveforms, std::string const & design_summary);

/// Signal entry rendered as prompt text.
[[nodiscard]] std::string describe(SignalInfo const & signal);

/// Throws ValidationError on an empty or duplicate verilog_name or a waveform
/// without signals; returns warnings for dangling related signals.
[[nodiscard]] Warnings validate(InformationBank const & bank);

[[nodiscard]] nlohmann::ordered_json to_json(InformationBank const & bank);
/// Throws LoadError with the offending field path, then ValidationError.
[[nodiscard]] InformationBank from_json(nlohmann::json const & doc);

void save_bank(InformationBank const & bank, std::string const & path);
[[nodiscard]] InformationBank load_bank(std::string const & path);

} // namespace svarefine::bank
