#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"

namespace svarefine::pipeline {

namespace fs = std::filesystem;

std::size_t DesignResult::failures() const
{
    return static_cast<std::size_t>(
        std::count_if(signals.begin(), signals.end(), [](auto const & s) { return !s.ok; }));
}

std::uint64_t DesignResult::total_calls() const
{
    std::uint64_t n = 0;
    for (auto const & s : signals) {
        n += s.ledger.value("total_calls", 0U);
    }
    return n;
}

DesignResult run_design(RunConfig const & config, Services const & services, bank::InformationBank const & bank,
    std::vector<std::string> const & signals)
{
    DesignResult result;
    result.design_name = bank.design_name;
    result.call_budget = config.call_budget();

    std::vector<std::string> names = signals;
    if (names.empty()) {
        for (auto const & s : bank.signals) {
            names.push_back(s.verilog_name);
        }
    }
    result.signals.resize(names.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < names.size(); i = next++) {
            result.signals[i] = run_signal(config, services, bank, names[i]);
        }
    };
    auto const workers = std::min(config.parallel, names.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto & t : pool) {
            t.join();
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

void write_text(fs::path const & path, std::string const & text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << text;
}

std::string safe_name(std::string const & name)
{
    std::string out;
    for (char c : name) {
        auto const u = static_cast<unsigned char>(c);
        out += (std::isalnum(u) || c == '_' || c == '-' || c == '.') ? c : '_';
    }
    return out.empty() ? "_" : out;
}

nlohmann::ordered_json diagnostics_json(std::vector<sva::Diagnostic> const & ds)
{
    auto arr = nlohmann::ordered_json::array();
    for (auto const & d : ds) {
        arr.push_back({{"severity", d.severity == sva::Severity::error ? "error" : "warning"}, {"line", d.line},
            {"column", d.column}, {"code", d.code}, {"message", d.message}});
    }
    return arr;
}

nlohmann::ordered_json stage3_json(SignalRunResult const & r)
{
    nlohmann::ordered_json doc;
    doc["signal"] = r.signal;
    doc["status"] = r.ok ? "ok" : "failed";
    if (!r.ok) {
        doc["error"] = r.error;
    }
    doc["A1"] = r.a1;
    auto a2 = nlohmann::ordered_json::array();
    for (auto const & rec : r.a2) {
        a2.push_back({{"text", rec.text}, {"node_id", rec.node_id}, {"diagnostics", diagnostics_json(rec.diagnostics)}});
    }
    doc["A2"] = a2;
    doc["A2_prime"] = r.a2_prime;
    doc["A3"] = r.a3;
    doc["A_deduplicated"] = r.deduplicated;
    doc["stage2_calls"] = r.stage2_calls;
    doc["stage3_calls"] = r.stage3_calls;
    doc["stopped_early"] = r.stopped_early;
    doc["warnings"] = r.warnings;
    return doc;
}

std::string node_logs(tree::ReasoningTree const & tree)
{
    std::ostringstream os;
    for (auto const & n : tree.nodes()) {
        os << "== node " << n.id << " ==\n" << n.answer.syntax_log.value_or("(not checked)\n");
        if (!n.answer.syntax_log || (!n.answer.syntax_log->empty() && n.answer.syntax_log->back() != '\n')) {
            os << "\n";
        }
    }
    return os.str();
}

} // namespace

nlohmann::ordered_json summary_json(DesignResult const & result)
{
    nlohmann::ordered_json doc;
    doc["design_name"] = result.design_name;
    doc["signal_count"] = result.signals.size();
    doc["call_budget_per_signal"] = result.call_budget;
    doc["max_calls"] = result.max_calls();
    doc["total_calls"] = result.total_calls();
    if (result.stage1) {
        doc["stage1_calls"] = result.stage1->calls;
    }
    std::size_t final_total = 0;
    auto signals = nlohmann::ordered_json::array();
    auto failures = nlohmann::ordered_json::array();
    for (auto const & s : result.signals) {
        nlohmann::ordered_json j;
        j["signal"] = s.signal;
        j["status"] = s.ok ? "ok" : "failed";
        j["nodes"] = s.tree ? s.tree->size() : 0;
        j["rollouts_completed"] = s.tree ? s.tree->rollouts_completed() : 0;
        j["calls"] = s.ledger.value("total_calls", 0U);
        j["A1"] = s.a1.size();
        j["A2"] = s.a2.size();
        j["A2_prime"] = s.a2_prime.size();
        j["A3"] = s.a3.size();
        j["final"] = s.deduplicated.size();
        signals.push_back(std::move(j));
        final_total += s.deduplicated.size();
        if (!s.ok) {
            failures.push_back({{"signal", s.signal}, {"error", s.error}});
        }
    }
    doc["final_assertions"] = final_total;
    doc["signals"] = signals;
    doc["failures"] = failures;
    doc["warnings"] = result.warnings;
    return doc;
}

std::string summary_text(DesignResult const & result)
{
    std::ostringstream os;
    os << "design: " << result.design_name << "\n";
    os << "signals: " << result.signals.size() << "  failed: " << result.failures() << "\n";
    os << "calls: " << result.total_calls() << " of at most " << result.max_calls() << " (" << result.call_budget
       << " per signal)\n";
    if (result.stage1) {
        os << "bank calls: " << result.stage1->calls << "\n";
    }
    os << "\n";
    std::size_t width = 6;
    for (auto const & s : result.signals) {
        width = std::max(width, s.signal.size());
    }
    os << std::left << std::setw(static_cast<int>(width)) << "signal" << "  status  nodes  calls  A1  A2  A2'  final\n";
    std::size_t final_total = 0;
    for (auto const & s : result.signals) {
        os << std::left << std::setw(static_cast<int>(width)) << s.signal << "  " << std::setw(6)
           << (s.ok ? "ok" : "FAILED") << "  " << std::right << std::setw(5) << (s.tree ? s.tree->size() : 0) << "  "
           << std::setw(5) << s.ledger.value("total_calls", 0U) << "  " << std::setw(2) << s.a1.size() << "  "
           << std::setw(2) << s.a2.size() << "  " << std::setw(3) << s.a2_prime.size() << "  " << std::setw(5)
           << s.deduplicated.size() << "\n";
        final_total += s.deduplicated.size();
    }
    os << "\nfinal assertions: " << final_total << "\n";
    for (auto const & s : result.signals) {
        if (!s.ok) {
            os << "failed: " << s.signal << ": " << s.error << "\n";
        }
    }
    return os.str();
}

void write_artifacts(DesignResult const & result, std::string const & dir)
{
    fs::path const root(dir);
    fs::create_directories(root / "signals");
    write_text(root / "summary.json", summary_json(result).dump(2) + "\n");
    write_text(root / "summary.txt", summary_text(result));
    for (auto const & s : result.signals) {
        auto const sdir = root / "signals" / safe_name(s.signal);
        fs::create_directories(sdir);
        if (s.tree) {
            write_text(sdir / "tree.json", s.tree->to_json().dump(2) + "\n");
            write_text(sdir / "syntax_log.txt", node_logs(*s.tree) + s.stage3_log);
        }
        write_text(sdir / "stage3.json", stage3_json(s).dump(2) + "\n");
        write_text(sdir / "ledger.json", s.ledger.dump(2) + "\n");
        std::string sv;
        for (auto const & a : s.deduplicated) {
            sv += a + "\n\n";
        }
        write_text(sdir / "assertions.sv", sv);
    }
}

// ---------------------------------------------------------------------------

std::unique_ptr<agents::ChatBackend> make_backend(BackendSettings const & settings)
{
    if (settings.kind == "scripted") {
        if (settings.script_path.empty()) {
            throw ConfigError("backend.script is required for the scripted backend");
        }
        return std::make_unique<agents::ScriptedBackend>(agents::ScriptedBackend::from_file(settings.script_path));
    }
    if (settings.kind == "http") {
        return std::make_unique<agents::HttpChatBackend>(settings.http);
    }
    throw ConfigError("unknown backend kind '" + settings.kind + "'");
}

std::unique_ptr<sva::SyntaxChecker> make_checker(CheckerSettings const & settings)
{
    if (settings.kind == CheckerKind::external) {
        return std::make_unique<sva::ExternalChecker>(settings.external);
    }
    return std::make_unique<sva::BuiltinChecker>();
}

DesignResult run_all(RunConfig const & config, std::optional<std::string> const & only_signal)
{
    config.validate();
    auto backend = make_backend(config.backend);
    auto checker = make_checker(config.checker);
    auto const prompts = config.templates_dir.empty() ? agents::PromptLibrary::builtin()
                                                      : agents::PromptLibrary::load(config.templates_dir);

    std::optional<rag::FlatIndex> index;
    std::optional<rag::HashingEmbedder> embedder;
    if (!config.rag.index_path.empty()) {
        index = rag::FlatIndex::load(config.rag.index_path);
        embedder.emplace(index->dimension() == 0 ? config.rag.dimension : index->dimension());
        if (!index->embedder_name().empty() && index->embedder_name() != embedder->name()) {
            throw ConfigError("index was built with embedder '" + index->embedder_name() + "'");
        }
    }
    Services services{*backend, *checker, prompts, index ? &*index : nullptr, embedder ? &*embedder : nullptr};

    std::optional<Stage1Result> stage1;
    bank::InformationBank bank;
    if (!config.paths.bank.empty() && fs::exists(config.paths.bank)) {
        bank = bank::load_bank(config.paths.bank);
    } else {
        stage1 = run_stage1(services, read_stage1_inputs(config));
        bank = stage1->bank;
        if (!config.paths.bank.empty()) {
            bank::save_bank(bank, config.paths.bank);
        }
    }

    std::vector<std::string> signals;
    if (only_signal) {
        if (bank.find(*only_signal) == nullptr) {
            throw ConfigError("signal '" + *only_signal + "' is not in the information bank");
        }
        signals.push_back(*only_signal);
    }
    auto result = run_design(config, services, bank, signals);
    if (stage1) {
        result.warnings = stage1->warnings;
    }
    result.stage1 = std::move(stage1);
    if (index && index->empty()) {
        result.warnings.push_back("retrieval index is empty");
    }
    if (!config.paths.output_dir.empty()) {
        write_artifacts(result, config.paths.output_dir);
    }
    return result;
}

} // namespace svarefine::pipeline
