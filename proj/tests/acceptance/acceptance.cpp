// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/scripts.hpp"
#include "support/sva_corpus.hpp"
#include "svarefine/agents.hpp"
#include "svarefine/checker.hpp"
#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"
#include "svarefine/rag.hpp"
#include "svarefine/sva.hpp"
#include "svarefine/tree.hpp"

using namespace svarefine;
namespace fs = std::filesystem;

namespace {

// Empty string on success, otherwise the first failure.
using Check = std::function<std::string()>;

struct Criterion
{
    std::string name;
    double max_seconds;
    Check run;
};

template <typename... Parts>
std::string str(Parts const &... parts)
{
    std::ostringstream os;
    os.precision(17);
    (os << ... << parts);
    return os.str();
}

bool close_rel(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------

std::string uct_oracle()
{
    auto direct = [](double q, double n, double nf, double c, double eps) {
        return q + c * std::sqrt((std::log(nf) + 1.0) / (n + eps));
    };
    struct Tuple
    {
        double q;
        std::uint64_t n, nf;
        double c, eps;
    };
    std::vector<Tuple> tuples = {
        {50.0, 1, 2, 1.4, 1e-6},
        {30.0, 3, 7, 0.0, 1e-6},
        {0.0, 1, 1, 1.4, 1e-6},
    };
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> q(-100, 100), c(0, 3), eps(1e-9, 1e-2);
    while (tuples.size() < 20) {
        tuples.push_back({q(rng), 1 + rng() % 50, 1 + rng() % 500, c(rng), eps(rng)});
    }
    // Hand-evaluated worked examples.
    std::vector<double> const expected_head = {51.8217, 30.0, 1.4};
    for (std::size_t i = 0; i < tuples.size(); ++i) {
        auto const & t = tuples[i];
        tree::SearchParams p;
        p.c = t.c;
        p.epsilon = t.eps;
        auto const got = tree::uct_value(t.q, t.n, t.nf, p);
        auto const want = direct(t.q, static_cast<double>(t.n), static_cast<double>(t.nf), t.c, t.eps);
        if (!close_rel(got, want, 1e-9)) {
            return str("tuple ", i, ": got ", got, ", expected ", want);
        }
        if (i < expected_head.size() && std::abs(got - expected_head[i]) > 1e-3) {
            return str("worked example ", i, ": got ", got, ", expected ", expected_head[i]);
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

std::string backprop_oracle()
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> reward(-100, 100);
    tree::SearchParams params;
    for (int trial = 0; trial < 100; ++trial) {
        tree::ReasoningTree t("s", tree::AnswerContent{{"r"}, "", std::nullopt});
        t.record_reward(0, reward(rng), params);
        auto const size = 1 + rng() % 8;
        while (t.size() < size) {
            auto const parent = static_cast<tree::NodeId>(rng() % t.size());
            auto const child = t.add_child(parent, tree::AnswerContent{{"a"}, "", std::nullopt});
            // Some leaves stay unevaluated.
            if (rng() % 5 != 0) {
                auto const samples = 1 + rng() % 3;
                for (std::size_t s = 0; s < samples; ++s) {
                    t.record_reward(child, reward(rng), params);
                }
            }
        }
        auto const from = static_cast<tree::NodeId>(rng() % t.size());

        // Independent model: flat arrays, walk parents explicitly.
        std::vector<double> q;
        std::vector<std::optional<std::size_t>> parent;
        std::vector<bool> evaluated;
        for (auto const & n : t.nodes()) {
            q.push_back(n.q_value);
            parent.push_back(n.parent);
            evaluated.push_back(!n.reward_samples.empty());
        }
        for (auto cur = parent[from]; cur; cur = parent[*cur]) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < q.size(); ++k) {
                if (parent[k] == *cur && evaluated[k]) {
                    best = std::max(best, q[k]);
                }
            }
            if (std::isfinite(best)) {
                q[*cur] = (q[*cur] + best) / 2.0;
            }
        }

        t.backpropagate(from);
        for (auto const & n : t.nodes()) {
            if (std::abs(n.q_value - q[n.id]) > 1e-12) {
                return str("trial ", trial, " node ", n.id, ": got ", n.q_value, ", expected ", q[n.id]);
            }
            if (n.q_value < -100.0 || n.q_value > 100.0) {
                return str("trial ", trial, " node ", n.id, ": Q out of range ", n.q_value);
            }
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

bank::InformationBank make_bank(std::vector<std::string> const & names)
{
    bank::InformationBank b;
    b.design_name = "dut";
    b.workflow_info = "Signal mapping:";
    for (auto const & n : names) {
        bank::SignalInfo s;
        s.verilog_name = n;
        s.spec_name = n;
        s.description = n + " control";
        b.signals.push_back(s);
    }
    return b;
}

std::string node_count_and_budget()
{
    {
        agents::ScriptedBackend backend;
        testkit::push_all(backend, testkit::signal_replies("intr", 4));
        sva::BuiltinChecker checker;
        pipeline::Services services{backend, checker, agents::PromptLibrary::builtin()};
        pipeline::RunConfig config;
        auto const r = pipeline::run_signal(config, services, make_bank({"intr"}), "intr");
        if (!r.ok) {
            return "scripted signal failed: " + r.error;
        }
        if (r.tree->size() != 5) {
            return str("tree has ", r.tree->size(), " nodes, expected 5");
        }
        if (r.stage2_calls != 18) {
            return str("stage 2 used ", r.stage2_calls, " calls, expected 18");
        }
        auto const total = r.ledger.at("total_calls").get<std::uint32_t>();
        if (total > 20) {
            return str("signal used ", total, " calls, limit 20");
        }
    }
    for (auto const [n_signals, expected] : {std::pair{10U, 200U}, std::pair{23U, 460U}}) {
        agents::ScriptedBackend backend;
        std::vector<std::string> names;
        for (unsigned i = 0; i < n_signals; ++i) {
            names.push_back("s" + std::to_string(i));
            testkit::push_all(backend, testkit::signal_replies(names.back(), 4));
        }
        sva::BuiltinChecker checker;
        pipeline::Services services{backend, checker, agents::PromptLibrary::builtin()};
        auto const r = pipeline::run_design(pipeline::RunConfig{}, services, make_bank(names));
        if (r.max_calls() != expected) {
            return str(n_signals, "-signal design reports max ", r.max_calls(), ", expected ", expected);
        }
        if (r.total_calls() > r.max_calls() || r.failures() != 0) {
            return str(n_signals, "-signal design used ", r.total_calls(), " calls with ", r.failures(), " failures");
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

std::string suppression_law()
{
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> in_range(-100, 100);
    std::uniform_real_distribution<double> beyond(100.0001, 1000);
    static constexpr char const * noise[] = {"The assertions look reasonable.", "Missing reset coverage [see note].",
        "Consider $rose(req).", "", "[SCORE] would be premature here.", "Overall:"};
    bank::SignalInfo signal;
    signal.verilog_name = "intr";
    tree::AnswerContent answer{{"assert property (@(posedge clk) a |-> b);"}, "", std::nullopt};
    tree::SearchParams params;

    auto format = [&](double v) {
        switch (rng() % 4) {
        case 0: return str(static_cast<long long>(std::trunc(v)));
        case 1: return std::to_string(v);
        case 2: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", v);
            return std::string(buf);
        }
        default: return str(v);
        }
    };

    for (int i = 0; i < 10000; ++i) {
        double v = rng() % 5 == 0 ? beyond(rng) * (rng() % 2 ? 1 : -1) : in_range(rng);
        auto const text_value = format(v);
        // the printed text is what the critic said
        v = std::stod(text_value);
        bool const out_of_range = v < -100 || v > 100;
        std::string reply = noise[rng() % 6];
        if (rng() % 3 == 0) {
            reply += " [SCORE: 12]\nOn reflection:\n";
        }
        reply += std::string(noise[rng() % 6]) + "\n[SCORE: " + text_value + "]";

        agents::ScriptedBackend backend;
        backend.push(reply);
        try {
            auto const c = agents::critique(backend, signal, "", answer, "", params);
            if (out_of_range) {
                return "accepted out-of-range score in: " + reply;
            }
            if (c.raw_score != v || c.suppressed_score != std::min(v, 95.0)) {
                return str("score ", v, " became ", c.suppressed_score, " in: ", reply);
            }
        } catch (RangeError const &) {
            if (!out_of_range) {
                return "rejected in-range score in: " + reply;
            }
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

std::string sva_corpus()
{
    auto const corpus = testkit::sva_corpus();
    if (corpus.size() != 30) {
        return str("corpus has ", corpus.size(), " items");
    }
    auto const first = sva::parse_assertion(corpus.front());
    if (!first.ok() || sva::has_errors(first.diagnostics)) {
        return "reference assertion does not parse cleanly";
    }
    auto lexemes = [](std::vector<sva::Token> const & toks) {
        std::vector<std::string> out;
        for (auto const & t : toks) {
            if (t.kind != sva::TokenKind::end_of_input) {
                out.push_back(t.lexeme);
            }
        }
        return out;
    };
    std::size_t mutants = 0;
    std::size_t rejected = 0;
    std::vector<std::string> accepted;
    std::map<std::string, int> legal_by_token;
    for (auto const & src : corpus) {
        auto const r = sva::parse_assertion(src);
        if (!r.ok() || sva::has_errors(r.diagnostics)) {
            return "corpus item fails: " + src;
        }
        if (lexemes(r.ast->tokens()) != lexemes(sva::tokenize(src))) {
            return "token round-trip differs: " + src;
        }
        auto const toks = sva::tokenize(src);
        for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
            auto const mutated
                = src.substr(0, toks[k].offset) + src.substr(toks[k].offset + toks[k].lexeme.size());
            ++mutants;
            if (sva::has_errors(sva::parse_assertion(mutated).diagnostics)) {
                ++rejected;
            } else {
                ++legal_by_token[toks[k].lexeme];
                if (accepted.size() < 3) {
                    accepted.push_back(mutated);
                }
            }
        }
    }
    double const rate = static_cast<double>(rejected) / static_cast<double>(mutants);
    std::printf("  deletion mutants rejected: %zu / %zu (%.1f%%)\n", rejected, mutants, 100.0 * rate);
    std::string breakdown;
    for (auto const & [tok, n] : legal_by_token) {
        breakdown += str(" '", tok, "':", n);
    }
    std::printf("  accepted mutants by deleted token:%s\n", breakdown.c_str());
    if (rate < 0.95) {
        for (auto a : accepted) {
            std::replace(a.begin(), a.end(), '\n', ' ');
            std::printf("  accepted: %s\n", a.c_str());
        }
        return str(rejected, " of ", mutants, " mutants rejected, below 95%");
    }
    return {};
}

// ---------------------------------------------------------------------------

// Fails every text mentioning the BAD marker.
class MarkerChecker final : public sva::SyntaxChecker
{
public:
    std::vector<sva::Diagnostic> check(std::string const & text) const override
    {
        if (text.find("BAD") != std::string::npos) {
            return {sva::Diagnostic{sva::Severity::error, 1, 1, "marker", "marked bad"}};
        }
        return {};
    }
};

std::string stage3_laws()
{
    std::mt19937_64 rng(4242);
    MarkerChecker checker;
    auto unit = [](std::string const & lhs, int k) {
        return "assert property (@(posedge clk) " + lhs + " |-> ##" + std::to_string(k % 3 + 1) + " ack);";
    };
    for (int trial = 0; trial < 200; ++trial) {
        // Small vocabulary so duplicates across nodes are common.
        auto pick = [&] {
            auto const k = static_cast<int>(rng() % 12);
            return unit((k % 3 == 0 ? "BAD_" : "ok_") + std::to_string(k), k);
        };
        tree::SearchParams params;
        tree::ReasoningTree t("s", tree::AnswerContent{{pick()}, "", std::nullopt});
        t.record_reward(0, 10, params);
        auto const extra = rng() % 6;
        for (std::size_t i = 0; i < extra; ++i) {
            std::vector<std::string> as;
            for (std::size_t j = 0, m = rng() % 4; j < m; ++j) {
                auto a = pick();
                // Layout differences must not defeat pooling.
                if (rng() % 3 == 0) {
                    a = "  " + a + "  // dup";
                }
                as.push_back(a);
            }
            t.add_child(static_cast<tree::NodeId>(rng() % t.size()), tree::AnswerContent{as, "", std::nullopt});
        }

        // Pool as the stage sees it, to predict which calls happen.
        std::set<std::string> keys;
        std::vector<std::string> pool;
        for (auto const & n : t.nodes()) {
            for (auto const & a : n.answer.assertions) {
                if (keys.insert(sva::normalize(a)).second) {
                    pool.push_back(a);
                }
            }
        }
        std::size_t bad = 0;
        for (auto const & a : pool) {
            bad += a.find("BAD") != std::string::npos;
        }

        agents::ScriptedBackend backend;
        std::vector<std::string> fixes;
        if (bad > 0) {
            for (std::size_t i = 0; i < bad; ++i) {
                // Some corrections still fail and must be dropped.
                fixes.push_back(rng() % 4 == 0 ? unit("BAD_again", 1) : unit("fixed_" + std::to_string(rng() % 5), 2));
            }
            backend.push(testkit::sva_reply(fixes));
        }
        // Dedup reply: a random subset of everything that might be in A3,
        // occasionally with a foreign assertion that must be refused.
        std::vector<std::string> candidates;
        for (auto const & a : pool) {
            if (a.find("BAD") == std::string::npos && rng() % 2) {
                candidates.push_back(a);
            }
        }
        for (auto const & f : fixes) {
            if (rng() % 2) {
                candidates.push_back(f);
            }
        }
        if (rng() % 10 == 0) {
            candidates.push_back(unit("invented", 0));
        }
        if (candidates.empty()) {
            candidates.push_back(unit("ok_0", 0));
        }
        backend.push(testkit::sva_reply(candidates));

        pipeline::Services services{backend, checker, agents::PromptLibrary::builtin()};
        pipeline::RunConfig config;
        pipeline::CallLedger ledger(config.call_budget());
        pipeline::SignalRunResult r;
        pipeline::run_stage3(config, services, t, make_bank({"s"}), "s", ledger, r);

        // A1 and A2 partition the pool, in order.
        std::vector<std::string> a1_expected, a2_expected;
        for (auto const & a : pool) {
            (a.find("BAD") == std::string::npos ? a1_expected : a2_expected).push_back(a);
        }
        std::vector<std::string> a2_texts;
        for (auto const & rec : r.a2) {
            a2_texts.push_back(rec.text);
        }
        if (r.a1 != a1_expected || a2_texts != a2_expected) {
            return str("trial ", trial, ": A1/A2 do not partition the pool");
        }
        auto a3 = r.a1;
        a3.insert(a3.end(), r.a2_prime.begin(), r.a2_prime.end());
        if (r.a3 != a3) {
            return str("trial ", trial, ": A3 != A1 ++ A2'");
        }
        for (auto const & a : r.a2_prime) {
            if (sva::has_errors(checker.check(a))) {
                return str("trial ", trial, ": failing correction kept");
            }
        }
        std::set<std::string> a3_keys;
        for (auto const & a : r.a3) {
            a3_keys.insert(sva::normalize(a));
        }
        for (auto const & a : r.deduplicated) {
            if (!a3_keys.count(sva::normalize(a))) {
                return str("trial ", trial, ": final assertion not in A3: ", a);
            }
            if (sva::has_errors(checker.check(a))) {
                return str("trial ", trial, ": final assertion fails the checker: ", a);
            }
        }
        if (r.stage3_calls > 2) {
            return str("trial ", trial, ": stage 3 used ", r.stage3_calls, " calls");
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

std::string rag_oracle()
{
    std::mt19937_64 rng(8080);
    static constexpr char const * words[] = {"clock", "reset", "fifo", "write", "read", "pointer", "interrupt", "timer",
        "compare", "strobe", "acknowledge", "bus", "cycle", "enable", "counter", "overflow", "edge", "level"};
    auto sentence = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) {
            s += (i ? " " : "") + std::string(words[rng() % 18]);
        }
        return s;
    };
    rag::HashingEmbedder embedder(128);
    for (int q = 0; q < 50; ++q) {
        rag::FlatIndex index;
        std::vector<std::string> texts;
        auto const n = 1 + rng() % 500;
        for (std::size_t i = 0; i < n; ++i) {
            texts.push_back(sentence(3 + rng() % 12));
        }
        index.add("doc", texts, embedder);
        auto const k = 1 + rng() % 10;
        bool const identical = q % 5 == 0;
        auto const query = identical ? texts[rng() % n] : sentence(2 + rng() % 6);

        auto const hits = index.query(query, k, embedder);
        auto const qv = embedder.embed(query);
        std::vector<std::pair<double, std::size_t>> brute;
        for (std::size_t i = 0; i < n; ++i) {
            brute.emplace_back(rag::cosine(qv, embedder.embed(texts[i])), i);
        }
        std::stable_sort(brute.begin(), brute.end(), [](auto const & a, auto const & b) { return a.first > b.first; });
        if (hits.size() != std::min<std::size_t>(k, n)) {
            return str("query ", q, ": ", hits.size(), " hits for k=", k);
        }
        for (std::size_t i = 0; i < hits.size(); ++i) {
            if (std::abs(hits[i].similarity - brute[i].first) > 1e-12) {
                return str("query ", q, " rank ", i, ": similarity ", hits[i].similarity, " vs ", brute[i].first);
            }
            // Same score, same chunk unless tied.
            if (hits[i].chunk->chunk_index != brute[i].second
                && std::abs(brute[i].first - rag::cosine(qv, embedder.embed(texts[hits[i].chunk->chunk_index])))
                    > 1e-12) {
                return str("query ", q, " rank ", i, ": wrong chunk");
            }
        }
        if (identical && std::abs(hits[0].similarity - 1.0) > 1e-9) {
            return str("query ", q, ": identical text scored ", hits[0].similarity);
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

std::string slurp(fs::path const & p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string replay_determinism()
{
    auto const base = fs::temp_directory_path() / "svarefine_acceptance_replay";
    fs::remove_all(base);
    std::vector<std::string> names = {"intr", "mtime", "active"};
    std::vector<std::string> replies{testkit::mapping_reply(names)};
    for (auto const & n : names) {
        replies.push_back(testkit::analysis_reply(n));
    }
    replies.push_back(testkit::waveform_reply("tick", {"mtime", "intr"}));
    for (auto const & n : names) {
        auto const s = testkit::signal_replies(n, 4);
        replies.insert(replies.end(), s.begin(), s.end());
    }

    std::vector<std::map<std::string, std::string>> runs;
    for (auto const * tag : {"run_a", "run_b"}) {
        auto const dir = base / tag;
        fs::create_directories(dir);
        std::ofstream(dir / "spec.txt") << "A timer raises intr when mtime reaches the compare value.\n";
        std::ofstream(dir / "rv_timer.v") << "module rv_timer (input logic clk_i, input logic rst_ni, input logic active,"
                                             " input logic [63:0] mtime, output logic intr);\nendmodule\n";
        std::ofstream(dir / "tick.txt") << "mtime increments each tick; intr follows the compare match.\n";
        std::ofstream(dir / "script.json") << testkit::script_json(replies).dump(2);
        nlohmann::json doc = {{"backend", {{"kind", "scripted"}, {"script", "script.json"}}},
            {"paths",
                {{"spec", "spec.txt"}, {"verilog", "rv_timer.v"}, {"waveforms", {"tick.txt"}}, {"bank", "out/bank.json"},
                    {"output_dir", "out"}}},
            {"design_name", "rv_timer"}};
        auto const config = pipeline::RunConfig::from_json(doc, dir.string());
        fs::create_directories(dir / "out");
        auto const r = pipeline::run_all(config);
        if (r.failures() != 0) {
            return str(tag, ": ", r.failures(), " signal failures");
        }
        std::map<std::string, std::string> files;
        for (auto const & e : fs::recursive_directory_iterator(dir / "out")) {
            if (e.is_regular_file()) {
                files[fs::relative(e.path(), dir / "out").string()] = slurp(e.path());
            }
        }
        runs.push_back(std::move(files));
    }
    fs::remove_all(base);
    for (auto const * f : {"summary.json", "summary.txt", "bank.json", "signals/intr/tree.json",
             "signals/intr/syntax_log.txt", "signals/intr/stage3.json", "signals/intr/ledger.json"}) {
        if (!runs[0].count(f)) {
            return str("artifact missing: ", f);
        }
    }
    if (runs[0].size() != runs[1].size()) {
        return str("runs wrote ", runs[0].size(), " and ", runs[1].size(), " files");
    }
    for (auto const & [name, content] : runs[0]) {
        auto const it = runs[1].find(name);
        if (it == runs[1].end() || it->second != content) {
            return "artifact differs between runs: " + name;
        }
    }
    std::printf("  compared %zu artifacts\n", runs[0].size());
    return {};
}

} // namespace

int main(int argc, char ** argv)
{
    // Criteria that are expected to fail; they still print FAIL.
    std::set<std::string> known_failures;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) != "--known-failure") {
            std::fprintf(stderr, "usage: %s [--known-failure NAME]...\n", argv[0]);
            return 2;
        }
        known_failures.insert(argv[i + 1]);
    }
    std::vector<Criterion> const criteria = {
        {"uct-oracle", 1.0, uct_oracle},
        {"backprop-oracle", 1.0, backprop_oracle},
        {"node-count-and-budget", 5.0, node_count_and_budget},
        {"suppression-law", 1.0, suppression_law},
        {"sva-parser-corpus", 5.0, sva_corpus},
        {"stage3-set-laws", 5.0, stage3_laws},
        {"rag-oracle", 5.0, rag_oracle},
        {"replay-determinism", 60.0, replay_determinism},
    };
    int unexpected = 0;
    for (auto const & c : criteria) {
        auto const start = std::chrono::steady_clock::now();
        std::string error;
        try {
            error = c.run();
        } catch (std::exception const & e) {
            error = std::string("exception: ") + e.what();
        }
        double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (error.empty() && secs > c.max_seconds) {
            error = str("took ", secs, " s, limit ", c.max_seconds, " s");
        }
        bool const known = known_failures.count(c.name) > 0;
        std::printf("%s %s (%.3f s)%s%s%s\n", error.empty() ? "PASS" : "FAIL", c.name.c_str(), secs,
            error.empty() ? "" : ": ", error.c_str(), !error.empty() && known ? " [known failure]" : "");
        std::fflush(stdout);
        unexpected += !error.empty() && !known;
    }
    return unexpected == 0 ? 0 : 1;
}
