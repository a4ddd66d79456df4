// svarefine: command-line front end.
//
//   svarefine bank build --config run.json
//   svarefine rag build <dir> -o index.json
//   svarefine run --config run.json [--signal NAME]
//   svarefine check <file>
//   svarefine tree show <tree.json>
//
// Exit codes: 0 success, 1 per-signal failures (or check errors), 2 config
// or stage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"
#include "svarefine/rag.hpp"
#include "svarefine/sva.hpp"
#include "svarefine/tree.hpp"

namespace fs = std::filesystem;
using namespace svarefine;

namespace {

std::string read_all(std::string const & path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Overrides
{
    std::string config_path;
    std::optional<std::uint32_t> rollouts;
    std::optional<double> c;
    std::optional<double> epsilon;
    std::optional<double> score_cap;
    std::optional<std::string> checker;
    std::optional<std::string> checker_command;
    std::optional<std::size_t> parallel;
    bool no_early_stop = false;
    std::optional<std::string> out_dir;
    std::optional<std::string> bank;

    void add_to(CLI::App & app)
    {
        app.add_option("--config", config_path, "Run configuration (JSON)");
        app.add_option("--rollouts", rollouts, "Rollouts per signal");
        app.add_option("--c", c, "Exploration constant");
        app.add_option("--epsilon", epsilon, "Visit-count smoothing term");
        app.add_option("--score-cap", score_cap, "Critic score ceiling");
        app.add_option("--checker", checker, "Syntax checker")->check(CLI::IsMember({"builtin", "external"}));
        app.add_option("--checker-command", checker_command, "External checker command containing {file}");
        app.add_option("--parallel", parallel, "Signals processed concurrently")->check(CLI::PositiveNumber);
        app.add_flag("--no-early-stop", no_early_stop, "Always run every rollout");
        app.add_option("--out", out_dir, "Output directory");
        app.add_option("--bank", bank, "Information bank file");
    }

    pipeline::RunConfig resolve() const
    {
        auto config = config_path.empty() ? pipeline::RunConfig{} : pipeline::RunConfig::load(config_path);
        if (rollouts) {
            config.search.n_rollouts = *rollouts;
        }
        if (c) {
            config.search.c = *c;
        }
        if (epsilon) {
            config.search.epsilon = *epsilon;
        }
        if (score_cap) {
            config.search.score_cap = *score_cap;
        }
        if (checker_command) {
            config.checker.external = sva::ExternalCheckerConfig::generic_profile(*checker_command);
        }
        if (checker) {
            config.checker.kind = *checker == "external" ? pipeline::CheckerKind::external
                                                         : pipeline::CheckerKind::builtin;
        }
        if (parallel) {
            config.parallel = *parallel;
        }
        if (no_early_stop) {
            config.early_stop = false;
        }
        if (out_dir) {
            config.paths.output_dir = *out_dir;
        }
        if (bank) {
            config.paths.bank = *bank;
        }
        config.validate();
        return config;
    }
};

int cmd_bank_build(Overrides const & o, std::string const & out)
{
    auto config = o.resolve();
    auto const target = out.empty() ? config.paths.bank : out;
    if (target.empty()) {
        throw ConfigError("no bank file given (--out or paths.bank)");
    }
    auto backend = pipeline::make_backend(config.backend);
    auto checker = pipeline::make_checker(config.checker);
    auto const prompts = config.templates_dir.empty() ? agents::PromptLibrary::builtin()
                                                      : agents::PromptLibrary::load(config.templates_dir);
    pipeline::Services services{*backend, *checker, prompts};
    auto const result = pipeline::run_stage1(services, pipeline::read_stage1_inputs(config));
    for (auto const & w : result.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    bank::save_bank(result.bank, target);
    std::cout << "bank: " << result.bank.signals.size() << " signals, " << result.bank.waveforms.size()
              << " waveforms, " << result.calls << " calls -> " << target << "\n";
    return 0;
}

int cmd_rag_build(std::string const & dir, std::string const & out, rag::ChunkParams const & params,
    std::size_t dimension)
{
    if (!fs::is_directory(dir)) {
        throw ConfigError("not a directory: " + dir);
    }
    std::vector<fs::path> files;
    for (auto const & e : fs::recursive_directory_iterator(dir)) {
        auto const ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".txt" || ext == ".md")) {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    rag::HashingEmbedder embedder(dimension);
    rag::FlatIndex index;
    for (auto const & f : files) {
        auto const id = fs::relative(f, dir).generic_string();
        index.add(id, rag::chunk(read_all(f.string()), params.size, params.overlap), embedder);
    }
    if (index.empty()) {
        std::cerr << "warning: no .txt or .md text found under " << dir << "\n";
    }
    index.save(out);
    std::cout << "index: " << files.size() << " documents, " << index.size() << " chunks -> " << out << "\n";
    return 0;
}

int cmd_run(Overrides const & o, std::optional<std::string> const & signal)
{
    auto const config = o.resolve();
    auto const result = pipeline::run_all(config, signal);
    for (auto const & w : result.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << pipeline::summary_text(result);
    return result.failures() > 0 ? 1 : 0;
}

int cmd_check(Overrides const & o, std::string const & file)
{
    auto const config = o.resolve();
    auto const checker = pipeline::make_checker(config.checker);
    auto const text = read_all(file);
    auto units = sva::split_units(text);
    if (units.empty()) {
        std::cout << file << ": no assertions found\n";
        return 1;
    }
    std::vector<sva::AssertionRecord> records;
    for (auto & u : units) {
        sva::AssertionRecord r;
        r.text = std::move(u);
        sva::check_record(r, *checker);
        records.push_back(std::move(r));
    }
    std::cout << sva::format_log(records);
    auto const failed = std::count_if(
        records.begin(), records.end(), [](auto const & r) { return r.status == sva::CheckStatus::fail; });
    std::cout << records.size() << " assertion(s), " << failed << " with errors\n";
    return failed > 0 ? 1 : 0;
}

void print_node(tree::ReasoningTree const & t, tree::NodeId id, std::string const & indent, std::ostream & os)
{
    auto const & n = t.node(id);
    os << indent << "#" << n.id << "  Q=" << n.q_value << "  N=" << n.visit_count << "  samples=[";
    for (std::size_t i = 0; i < n.reward_samples.size(); ++i) {
        os << (i ? ", " : "") << n.reward_samples[i];
    }
    os << "]  assertions=" << n.answer.assertions.size() << "\n";
    for (auto child : n.children) {
        print_node(t, child, indent + "  ", os);
    }
}

int cmd_tree_show(std::string const & path, bool with_assertions)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_all(path));
    } catch (nlohmann::json::parse_error const & e) {
        throw LoadError(path, e.what());
    }
    auto const t = tree::ReasoningTree::from_json(doc);
    std::cout << "signal " << t.signal_name() << ": " << t.size() << " nodes, " << t.rollouts_completed()
              << " rollouts\n";
    print_node(t, t.root(), "", std::cout);
    if (auto best = t.best_node()) {
        std::cout << "best: #" << *best << "\n";
        if (with_assertions) {
            for (auto const & a : t.node(*best).answer.assertions) {
                std::cout << "\n" << a << "\n";
            }
        }
    }
    return 0;
}

} // namespace

int main(int argc, char ** argv)
{
    CLI::App app{"Assertion generation by tree-search self-refinement"};
    app.require_subcommand(1);

    Overrides overrides;

    auto * bank_cmd = app.add_subcommand("bank", "Information bank commands");
    bank_cmd->require_subcommand(1);
    auto * bank_build = bank_cmd->add_subcommand("build", "Build the information bank from the configured inputs");
    std::string bank_out;
    overrides.add_to(*bank_build);
    bank_build->add_option("-o,--output", bank_out, "Bank file (defaults to paths.bank)");

    auto * rag_cmd = app.add_subcommand("rag", "Retrieval index commands");
    rag_cmd->require_subcommand(1);
    auto * rag_build = rag_cmd->add_subcommand("build", "Index every .txt/.md file under a directory");
    std::string rag_dir;
    std::string rag_out = "rag_index.json";
    rag::ChunkParams chunking;
    std::size_t dimension = 512;
    rag_build->add_option("dir", rag_dir, "Directory of reference texts")->required();
    rag_build->add_option("-o,--output", rag_out, "Index file");
    rag_build->add_option("--chunk-size", chunking.size, "Chunk size in bytes");
    rag_build->add_option("--overlap", chunking.overlap, "Chunk overlap in bytes");
    rag_build->add_option("--dimension", dimension, "Embedding dimension")->check(CLI::PositiveNumber);

    auto * run_cmd = app.add_subcommand("run", "Run the full pipeline");
    overrides.add_to(*run_cmd);
    std::optional<std::string> signal;
    run_cmd->add_option("--signal", signal, "Run a single signal");

    auto * check_cmd = app.add_subcommand("check", "Check the assertions in a file");
    std::string check_file;
    check_cmd->add_option("file", check_file, "SystemVerilog file")->required();
    overrides.add_to(*check_cmd);

    auto * tree_cmd = app.add_subcommand("tree", "Reasoning tree commands");
    tree_cmd->require_subcommand(1);
    auto * tree_show = tree_cmd->add_subcommand("show", "Print a stored tree");
    std::string tree_file;
    bool with_assertions = false;
    tree_show->add_option("artifact", tree_file, "tree.json")->required();
    tree_show->add_flag("--assertions", with_assertions, "Print the best node's assertions");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const & e) {
        auto const rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (bank_build->parsed()) {
            return cmd_bank_build(overrides, bank_out);
        }
        if (rag_build->parsed()) {
            return cmd_rag_build(rag_dir, rag_out, chunking, dimension);
        }
        if (run_cmd->parsed()) {
            return cmd_run(overrides, signal);
        }
        if (check_cmd->parsed()) {
            return cmd_check(overrides, check_file);
        }
        if (tree_show->parsed()) {
            return cmd_tree_show(tree_file, with_assertions);
        }
    } catch (CheckerUnavailable const & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (Error const & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (std::exception const & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
