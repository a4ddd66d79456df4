#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"

namespace svarefine::pipeline {

using agents::AgentRole;

// ---------------------------------------------------------------------------
// Ledger

CallLedger::CallLedger(std::uint32_t limit)
: limit_(limit)
{}

void CallLedger::charge(AgentRole role)
{
    std::lock_guard lock(mutex_);
    if (total_ >= limit_) {
        throw BudgetExceeded("call budget of " + std::to_string(limit_) + " exhausted before a "
            + agents::to_string(role) + " call");
    }
    ++total_;
    ++by_role_[agents::to_string(role)];
}

std::uint32_t CallLedger::total() const
{
    std::lock_guard lock(mutex_);
    return total_;
}

std::uint32_t CallLedger::remaining() const
{
    std::lock_guard lock(mutex_);
    return limit_ - total_;
}

std::map<std::string, std::uint32_t> CallLedger::by_role() const
{
    std::lock_guard lock(mutex_);
    return by_role_;
}

nlohmann::ordered_json CallLedger::to_json() const
{
    std::lock_guard lock(mutex_);
    nlohmann::ordered_json doc;
    doc["limit"] = limit_;
    doc["total_calls"] = total_;
    doc["calls_by_role"] = nlohmann::ordered_json::object();
    for (auto const & [role, n] : by_role_) {
        doc["calls_by_role"][role] = n;
    }
    return doc;
}

MeteredBackend::MeteredBackend(agents::ChatBackend & inner, CallLedger & ledger)
: inner_(inner)
, ledger_(ledger)
{}

std::string MeteredBackend::complete(std::span<agents::ChatMessage const> messages)
{
    ledger_.charge(role_);
    return inner_.complete(messages);
}

// ---------------------------------------------------------------------------
// Stage 1

namespace {

std::string read_file(std::string const & path, char const * what)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw StageError(std::string("cannot read ") + what + " file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

Stage1Inputs read_stage1_inputs(RunConfig const & config)
{
    if (config.paths.spec.empty() || config.paths.verilog.empty()) {
        throw ConfigError("paths.spec and paths.verilog are required to build the bank");
    }
    Stage1Inputs in;
    in.design_name = config.design_name;
    in.spec_text = read_file(config.paths.spec, "specification");
    in.verilog_decls = read_file(config.paths.verilog, "Verilog");
    for (auto const & w : config.paths.waveforms) {
        in.waveforms.emplace_back(std::filesystem::path(w).stem().string(), read_file(w, "waveform"));
    }
    if (!config.paths.design_summary.empty()) {
        in.design_summary = read_file(config.paths.design_summary, "design summary");
    }
    if (in.design_name.empty()) {
        in.design_name = std::filesystem::path(config.paths.verilog).stem().string();
    }
    return in;
}

Stage1Result run_stage1(Services const & services, Stage1Inputs const & inputs)
{
    CallLedger ledger(std::numeric_limits<std::uint32_t>::max());
    MeteredBackend backend(services.backend, ledger);
    Stage1Result result;

    backend.use(AgentRole::signal_mapper);
    auto const mappings
        = bank::map_signals(backend, inputs.spec_text, inputs.verilog_decls, result.warnings, services.prompts);

    backend.use(AgentRole::spec_analyzer);
    for (auto const & m : mappings) {
        try {
            auto info = bank::analyze_signal(backend, inputs.spec_text, m.verilog_name, services.prompts);
            if (info.description.empty()) {
                info.description = m.description;
            }
            result.bank.signals.push_back(std::move(info));
        } catch (StageError const & e) {
            result.warnings.push_back("signal '" + m.verilog_name + "' skipped: " + e.what());
        }
    }
    if (result.bank.signals.empty()) {
        throw StageError("no signal could be analysed");
    }

    backend.use(AgentRole::waveform_analyzer);
    for (auto const & [name, text] : inputs.waveforms) {
        if (auto w = bank::analyze_waveform(backend, inputs.spec_text, text, name, result.warnings, services.prompts)) {
            result.bank.waveforms.push_back(std::move(*w));
        }
    }

    result.bank.design_name = inputs.design_name;
    result.bank.workflow_info
        = bank::compose_workflow_info(mappings, result.bank.waveforms, inputs.design_summary);
    for (auto & w : bank::validate(result.bank)) {
        result.warnings.push_back(std::move(w));
    }
    result.calls = ledger.total();
    result.calls_by_role = ledger.by_role();
    return result;
}

// ---------------------------------------------------------------------------
// Stage 2

namespace {

constexpr std::uint32_t stage3_reserve = 2;
constexpr std::uint32_t calls_per_rollout = 4;

struct CheckOutcome
{
    std::string log;
    bool all_pass = false;
};

CheckOutcome check_answer(sva::SyntaxChecker const & checker, tree::AnswerContent const & answer)
{
    if (answer.assertions.empty()) {
        return {"(no assertions)", false};
    }
    std::vector<sva::AssertionRecord> records;
    for (auto const & a : answer.assertions) {
        records.push_back(sva::AssertionRecord{a, "", 0, sva::CheckStatus::unchecked, {}});
    }
    try {
        bool all_pass = true;
        for (auto & r : records) {
            sva::check_record(r, checker);
            all_pass = all_pass && r.status == sva::CheckStatus::pass;
        }
        return {sva::format_log(records), all_pass};
    } catch (CheckerUnavailable const & e) {
        return {std::string("checker unavailable: ") + e.what(), false};
    }
}

class Stage2Runner
{
public:
    Stage2Runner(RunConfig const & config, Services const & services, bank::SignalInfo const & signal,
        std::string const & workflow, CallLedger & ledger)
    : config_(config)
    , services_(services)
    , signal_(signal)
    , workflow_(workflow)
    , ledger_(ledger)
    , backend_(services.backend, ledger)
    {}

    Stage2Result run()
    {
        auto const & params = config_.search;

        backend_.use(AgentRole::sva);
        auto root_answer = agents::generate_weak_answer(backend_, signal_, workflow_, services_.prompts);
        auto const root_check = check_answer(services_.checker, root_answer);
        root_answer.syntax_log = root_check.log;
        Stage2Result result{tree::ReasoningTree(signal_.verilog_name, std::move(root_answer)), {}, 0, false};
        auto & tree = result.tree;

        // Nothing follows the root evaluation in the same rollout.
        auto const root_score = score(tree.node(tree.root()).answer, root_check.log, 1, result.warnings);
        if (!root_score) {
            result.warnings.push_back("root evaluation failed; tree search skipped");
            result.calls = ledger_.total();
            return result;
        }
        tree.record_reward(tree.root(), *root_score, params);

        for (std::uint32_t r = 0; r < params.n_rollouts; ++r) {
            if (!affordable(calls_per_rollout)) {
                result.warnings.push_back("rollout " + std::to_string(r + 1) + " skipped: call budget too small");
                break;
            }
            if (!rollout(tree, r, result.warnings)) {
                break;
            }
            tree.mark_rollout_completed();
            if (config_.early_stop && early_stop_reached(tree)) {
                result.stopped_early = r + 1 < params.n_rollouts;
                break;
            }
        }
        result.calls = ledger_.total();
        return result;
    }

private:
    // Calls still needed now, with Stage 3's share held back.
    bool affordable(std::uint32_t calls) const { return ledger_.remaining() >= calls + stage3_reserve; }

    /// Critic score with one retry on an unparseable reply. `still_needed`
    /// counts this call plus the calls that must follow in the rollout.
    std::optional<double> score(tree::AnswerContent const & answer, std::string const & log,
        std::uint32_t still_needed, std::vector<std::string> & warnings)
    {
        backend_.use(AgentRole::critic);
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                auto const c = agents::critique(
                    backend_, signal_, workflow_, answer, log, config_.search, services_.prompts);
                return c.suppressed_score;
            } catch (ScoreParseError const &) {
                warnings.push_back("critic reply had no usable score");
            } catch (RangeError const & e) {
                warnings.push_back(std::string("critic score rejected: ") + e.what());
            }
            if (attempt == 0 && !affordable(still_needed + 1)) {
                warnings.push_back("no budget left to retry the critic");
                break;
            }
        }
        return std::nullopt;
    }

    bool rollout(tree::ReasoningTree & tree, std::uint32_t index, std::vector<std::string> & warnings)
    {
        auto const & params = config_.search;
        auto const label = "rollout " + std::to_string(index + 1) + ": ";

        // Selection with a fresh reward sample for the chosen node.
        auto const selected = tree.select_node(params);
        auto const selected_answer = tree.node(selected).answer;
        auto const selected_log = selected_answer.syntax_log.value_or("");
        auto const resample = score(selected_answer, selected_log, 4, warnings);
        if (!resample) {
            warnings.push_back(label + "aborted during re-sampling");
            return false;
        }
        tree.record_reward(selected, *resample, params);
        tree.backpropagate(selected);

        // Expansion.
        backend_.use(AgentRole::critic);
        auto const feedback = agents::critic_feedback(
            backend_, signal_, workflow_, selected_answer, selected_log, services_.prompts);
        backend_.use(AgentRole::sva);
        auto refined = agents::refine(backend_, signal_, selected_answer, feedback, selected_log, rag_context(warnings),
            workflow_, services_.prompts);

        // Evaluation; the node is only inserted once it has a score.
        auto const check = check_answer(services_.checker, refined);
        refined.syntax_log = check.log;
        auto const reward = score(refined, check.log, 1, warnings);
        if (!reward) {
            warnings.push_back(label + "aborted during evaluation");
            return false;
        }
        auto const child = tree.add_child(selected, std::move(refined));
        tree.record_reward(child, *reward, params);
        tree.backpropagate(child);
        return true;
    }

    std::string rag_context(std::vector<std::string> & warnings) const
    {
        if (services_.index == nullptr || services_.embedder == nullptr) {
            return {};
        }
        if (services_.index->empty()) {
            warnings.push_back("retrieval index is empty");
            return {};
        }
        auto const hits = services_.index->query(
            signal_.verilog_name + " " + signal_.description, config_.rag.chunking.k, *services_.embedder);
        return rag::format_context(hits);
    }

    bool early_stop_reached(tree::ReasoningTree const & tree) const
    {
        auto const best = tree.best_node();
        if (!best) {
            return false;
        }
        auto const & node = tree.node(*best);
        if (node.reward_samples.back() < config_.early_stop_score) {
            return false;
        }
        return check_answer(services_.checker, node.answer).all_pass;
    }

    RunConfig const & config_;
    Services const & services_;
    bank::SignalInfo const & signal_;
    std::string const & workflow_;
    CallLedger & ledger_;
    MeteredBackend backend_;
};

} // namespace

Stage2Result run_stage2(RunConfig const & config, Services const & services, bank::InformationBank const & bank,
    std::string const & signal, CallLedger & ledger)
{
    auto const * info = bank.find(signal);
    if (info == nullptr) {
        throw PreconditionError("signal '" + signal + "' is not in the information bank");
    }
    return Stage2Runner(config, services, *info, bank.workflow_info, ledger).run();
}

// ---------------------------------------------------------------------------
// Stage 3

void run_stage3(RunConfig const & config, Services const & services, tree::ReasoningTree const & tree,
    bank::InformationBank const & bank, std::string const & signal, CallLedger & ledger, SignalRunResult & result)
{
    (void)config;
    auto const * info = bank.find(signal);
    if (info == nullptr) {
        throw PreconditionError("signal '" + signal + "' is not in the information bank");
    }
    auto const excerpt = bank::describe(*info);
    MeteredBackend backend(services.backend, ledger);
    auto const before = ledger.total();

    // Pool every node's assertions, first occurrence wins.
    std::vector<sva::AssertionRecord> records;
    std::set<std::string> seen;
    for (auto const & node : tree.nodes()) {
        for (auto const & a : node.answer.assertions) {
            auto key = sva::normalize(a);
            if (!key.empty() && seen.insert(std::move(key)).second) {
                records.push_back(sva::AssertionRecord{a, signal, node.id, sva::CheckStatus::unchecked, {}});
            }
        }
    }
    auto parts = sva::partition(records, services.checker);
    for (auto const & r : parts.passed) {
        result.a1.push_back(r.text);
    }
    result.a2 = parts.failed;

    backend.use(AgentRole::syntax_correction);
    auto const corrected = agents::correct_syntax(backend, result.a2, excerpt, signal, services.prompts);
    std::vector<sva::AssertionRecord> rechecked;
    for (auto const & text : corrected) {
        sva::AssertionRecord r{text, signal, 0, sva::CheckStatus::unchecked, {}};
        sva::check_record(r, services.checker);
        if (r.status == sva::CheckStatus::pass) {
            result.a2_prime.push_back(text);
        } else {
            result.warnings.push_back("corrected assertion still fails the checker; dropped");
        }
        rechecked.push_back(std::move(r));
    }

    result.a3 = result.a1;
    result.a3.insert(result.a3.end(), result.a2_prime.begin(), result.a2_prime.end());

    backend.use(AgentRole::deduplication);
    auto dedup = agents::deduplicate(backend, result.a3, excerpt, signal, services.prompts);
    result.deduplicated = std::move(dedup.kept);
    for (auto & w : dedup.warnings) {
        result.warnings.push_back(std::move(w));
    }

    std::ostringstream log;
    log << "== pooled assertions ==\n";
    std::vector<sva::AssertionRecord> all = parts.passed;
    all.insert(all.end(), parts.failed.begin(), parts.failed.end());
    log << sva::format_log(all);
    if (!rechecked.empty()) {
        log << "== corrected assertions ==\n" << sva::format_log(rechecked);
    }
    result.stage3_log = log.str();
    result.stage3_calls = ledger.total() - before;
}

SignalRunResult run_signal(
    RunConfig const & config, Services const & services, bank::InformationBank const & bank, std::string const & signal)
{
    SignalRunResult result;
    result.signal = signal;
    CallLedger ledger(config.call_budget());
    try {
        auto stage2 = run_stage2(config, services, bank, signal, ledger);
        result.stage2_calls = stage2.calls;
        result.stopped_early = stage2.stopped_early;
        result.warnings = std::move(stage2.warnings);
        result.tree = std::move(stage2.tree);
        run_stage3(config, services, *result.tree, bank, signal, ledger, result);
        result.ok = true;
    } catch (Error const & e) {
        result.ok = false;
        result.error = e.what();
        if (result.stage2_calls == 0 && !result.tree) {
            result.stage2_calls = ledger.total();
        }
    }
    result.ledger = ledger.to_json();
    return result;
}

} // namespace svarefine::pipeline
