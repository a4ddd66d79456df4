#pragma once

// End-to-end driver: information bank, per-signal tree search, final
// correction and deduplication, call accounting and run artifacts.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svarefine/agents.hpp"
#include "svarefine/backend.hpp"
#include "svarefine/bank.hpp"
#include "svarefine/checker.hpp"
#include "svarefine/prompts.hpp"
#include "svarefine/rag.hpp"
#include "svarefine/tree.hpp"

namespace svarefine::pipeline {

struct BackendSettings
{
    std::string kind = "scripted"; // scripted | http
    std::string script_path;
    agents::HttpBackendConfig http;
};

enum class CheckerKind
{
    builtin,
    external,
};

struct CheckerSettings
{
    CheckerKind kind = CheckerKind::builtin;
    sva::ExternalCheckerConfig external;
};

struct RagSettings
{
    std::string index_path; // empty = no retrieval
    rag::ChunkParams chunking;
    std::size_t dimension = 512;
};

struct PathSettings
{
    std::string spec;
    std::string verilog;
    std::vector<std::string> waveforms;
    std::string design_summary;
    std::string bank;
    std::string output_dir = "out";
};

struct RunConfig
{
    tree::SearchParams search;
    BackendSettings backend;
    CheckerSettings checker;
    RagSettings rag;
    PathSettings paths;
    std::string design_name;
    bool early_stop = true;
    double early_stop_score = 90.0;
    std::optional<std::uint32_t> max_api_calls_per_signal;
    std::size_t parallel = 1;
    std::string templates_dir;

    /// 2 + 4 n + 2 unless overridden.
    [[nodiscard]] std::uint32_t call_budget() const;

    /// Throws ConfigError.
    void validate() const;

    /// Relative paths resolve against `base_dir`. Unknown keys and an inline
    /// API key are rejected with ConfigError.
    static RunConfig from_json(nlohmann::json const & doc, std::string const & base_dir = ".");
    static RunConfig load(std::string const & path);
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Maximum calls for one signal: 2 + 4 n + 2.
[[nodiscard]] constexpr std::uint32_t default_call_budget(std::uint32_t n_rollouts)
{
    return 2 + 4 * n_rollouts + 2;
}

/// Per-signal LLM call counter with a hard ceiling.
class CallLedger
{
public:
    explicit CallLedger(std::uint32_t limit);

    /// Counts one call; throws BudgetExceeded instead of passing the limit.
    void charge(agents::AgentRole role);

    [[nodiscard]] std::uint32_t limit() const { return limit_; }
    [[nodiscard]] std::uint32_t total() const;
    [[nodiscard]] std::uint32_t remaining() const;
    [[nodiscard]] std::map<std::string, std::uint32_t> by_role() const;
    [[nodiscard]] nlohmann::ordered_json to_json() const;

private:
    mutable std::mutex mutex_;
    std::uint32_t limit_;
    std::uint32_t total_ = 0;
    std::map<std::string, std::uint32_t> by_role_;
};

/// Backend decorator that charges a ledger before every call.
class MeteredBackend final : public agents::ChatBackend
{
public:
    MeteredBackend(agents::ChatBackend & inner, CallLedger & ledger);

    /// Role charged by subsequent calls.
    void use(agents::AgentRole role) { role_ = role; }

    [[nodiscard]] std::string complete(std::span<agents::ChatMessage const> messages) override;

private:
    agents::ChatBackend & inner_;
    CallLedger & ledger_;
    agents::AgentRole role_ = agents::AgentRole::sva;
};

/// Everything a stage needs besides the config.
struct Services
{
    agents::ChatBackend & backend;
    sva::SyntaxChecker const & checker;
    agents::PromptLibrary const & prompts;
    rag::FlatIndex const * index = nullptr;
    rag::Embedder const * embedder = nullptr;
};

struct Stage1Inputs
{
    std::string design_name;
    std::string spec_text;
    std::string verilog_decls;
    /// (name, description text) per waveform.
    std::vector<std::pair<std::string, std::string>> waveforms;
    std::string design_summary;
};

struct Stage1Result
{
    bank::InformationBank bank;
    bank::Warnings warnings;
    std::uint32_t calls = 0;
    std::map<std::string, std::uint32_t> calls_by_role;
};

/// Builds the information bank. Signals whose analysis fails are skipped
/// with a warning; throws StageError when no signal survives.
[[nodiscard]] Stage1Result run_stage1(Services const & services, Stage1Inputs const & inputs);

/// Reads spec, Verilog, waveforms and design summary named in the config.
[[nodiscard]] Stage1Inputs read_stage1_inputs(RunConfig const & config);

struct Stage2Result
{
    tree::ReasoningTree tree;
    std::vector<std::string> warnings;
    std::uint32_t calls = 0;
    bool stopped_early = false;
};

/// Tree search for one signal. Throws PreconditionError for an unknown
/// signal, BudgetExceeded on an accounting bug, BackendError from the backend.
[[nodiscard]] Stage2Result run_stage2(RunConfig const & config, Services const & services,
    bank::InformationBank const & bank, std::string const & signal, CallLedger & ledger);

struct SignalRunResult
{
    std::string signal;
    bool ok = false;
    std::string error;
    std::optional<tree::ReasoningTree> tree;
    std::vector<std::string> a1;
    std::vector<sva::AssertionRecord> a2;
    std::vector<std::string> a2_prime;
    std::vector<std::string> a3;
    std::vector<std::string> deduplicated;
    std::string stage3_log;
    std::vector<std::string> warnings;
    std::uint32_t stage2_calls = 0;
    std::uint32_t stage3_calls = 0;
    bool stopped_early = false;
    nlohmann::ordered_json ledger;
};

/// Pools, partitions, corrects and deduplicates. Throws PartitionError when
/// the checker cannot run.
void run_stage3(RunConfig const & config, Services const & services, tree::ReasoningTree const & tree,
    bank::InformationBank const & bank, std::string const & signal, CallLedger & ledger, SignalRunResult & result);

/// Stages 2 and 3 for one signal with failures captured in the result.
[[nodiscard]] SignalRunResult run_signal(
    RunConfig const & config, Services const & services, bank::InformationBank const & bank, std::string const & signal);

struct DesignResult
{
    std::string design_name;
    std::uint32_t call_budget = 0;
    std::optional<Stage1Result> stage1; // absent when the bank was loaded
    std::vector<SignalRunResult> signals;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t failures() const;
    [[nodiscard]] std::uint64_t max_calls() const { return std::uint64_t{call_budget} * signals.size(); }
    [[nodiscard]] std::uint64_t total_calls() const;
};

/// Runs stages 2 and 3 for `signals` (all bank signals when empty) using up
/// to config.parallel workers. Results keep bank order.
[[nodiscard]] DesignResult run_design(RunConfig const & config, Services const & services,
    bank::InformationBank const & bank, std::vector<std::string> const & signals = {});

/// Writes summary.json, summary.txt and signals/<name>/... under `dir`.
void write_artifacts(DesignResult const & result, std::string const & dir);

[[nodiscard]] nlohmann::ordered_json summary_json(DesignResult const & result);
[[nodiscard]] std::string summary_text(DesignResult const & result);

[[nodiscard]] std::unique_ptr<agents::ChatBackend> make_backend(BackendSettings const & settings);
[[nodiscard]] std::unique_ptr<sva::SyntaxChecker> make_checker(CheckerSettings const & settings);

/// Full run from a config: loads the bank when the bank file exists, builds
/// it otherwise, then runs every (or one) signal and writes artifacts.
[[nodiscard]] DesignResult run_all(RunConfig const & config, std::optional<std::string> const & only_signal = {});

} // namespace svarefine::pipeline
