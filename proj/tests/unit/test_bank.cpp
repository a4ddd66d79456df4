#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "support/scripts.hpp"
#include "svarefine/bank.hpp"
#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"

using namespace svarefine;
using namespace svarefine::bank;
namespace fs = std::filesystem;

namespace {

std::string const decls = R"(module rv_timer (
  input  logic clk_i,
  input  logic rst_ni,
  input  logic [63:0] mtime,
  input  logic [63:0] mtimecmp [1],
  output logic [0:0] intr
);
)";

InformationBank two_signal_bank()
{
    InformationBank b;
    b.design_name = "rv_timer";
    b.workflow_info = "Signal mapping:\n- intr: interrupt";
    SignalInfo a;
    a.spec_name = "intr";
    a.verilog_name = "intr";
    a.description = "timer interrupt";
    a.related_signals = {"mtime"};
    SignalInfo m;
    m.spec_name = "mtime";
    m.verilog_name = "mtime";
    m.description = "free running counter";
    b.signals = {a, m};
    return b;
}

} // namespace

TEST(Mapping, ThreeSignals)
{
    agents::ScriptedBackend backend;
    backend.push("[mtime]: current time\n- `intr`: interrupt output\n3. mtimecmp[0]: compare value\n");
    Warnings w;
    auto const m = map_signals(backend, "spec text", decls, w);
    ASSERT_EQ(m.size(), 3U);
    EXPECT_EQ(m[0], (SignalMapping{"mtime", "current time"}));
    EXPECT_EQ(m[1].verilog_name, "intr");
    EXPECT_EQ(m[2].verilog_name, "mtimecmp");
    EXPECT_TRUE(w.empty());
}

TEST(Mapping, AbsentNameDropped)
{
    Warnings w;
    auto const m = parse_mapping("[intr]: interrupt\n[wb_ack_o]: not in this design\n", decls, w);
    ASSERT_EQ(m.size(), 1U);
    ASSERT_EQ(w.size(), 1U);
    EXPECT_NE(w[0].find("wb_ack_o"), std::string::npos);
}

TEST(Mapping, NameMustBeWholeIdentifier)
{
    Warnings w;
    // "time" occurs only inside "mtime"
    EXPECT_TRUE(parse_mapping("[time]: part of a word\n", decls, w).empty());
}

TEST(Mapping, ProseIsStageError)
{
    agents::ScriptedBackend backend;
    backend.push("I looked at the files and everything seems consistent");
    Warnings w;
    EXPECT_THROW((void)map_signals(backend, "spec", decls, w), StageError);
}

TEST(Mapping, EmptyInputs)
{
    agents::ScriptedBackend backend;
    Warnings w;
    EXPECT_THROW((void)map_signals(backend, "", decls, w), PreconditionError);
    EXPECT_EQ(backend.call_count(), 0U);
}

TEST(Analysis, FullFormat)
{
    agents::ScriptedBackend backend;
    backend.push(testkit::analysis_reply("intr"));
    auto const s = analyze_signal(backend, "spec", "intr");
    EXPECT_EQ(s.verilog_name, "intr");
    EXPECT_EQ(s.spec_name, "intr");
    EXPECT_EQ(s.description, "intr is a control signal of the design.");
    EXPECT_FALSE(s.definition.empty());
    EXPECT_FALSE(s.functionality.empty());
    EXPECT_FALSE(s.interconnection.empty());
    EXPECT_EQ(s.additional_info, "Active high.");
    EXPECT_EQ(s.related_signals, (std::vector<std::string>{"clk_i", "rst_ni"}));
}

TEST(Analysis, MissingAdditionalInformation)
{
    auto const s = parse_signal_analysis(testkit::analysis_reply("intr", false), "intr");
    EXPECT_TRUE(s.additional_info.empty());
    EXPECT_FALSE(s.description.empty());
}

TEST(Analysis, HeadersInAnyOrderAndCase)
{
    auto const s = parse_signal_analysis(
        "intr;\nFUNCTIONALITY: raises irq\ndescription: the interrupt\n[Definition] 1 bit\n", "intr");
    EXPECT_EQ(s.description, "the interrupt");
    EXPECT_EQ(s.functionality, "raises irq");
    EXPECT_EQ(s.definition, "1 bit");
}

TEST(Analysis, ReplyWithoutName)
{
    EXPECT_THROW((void)parse_signal_analysis("[Description]: something else", "intr"), StageError);
}

TEST(Analysis, TwentyThreeSignals)
{
    std::vector<std::string> names;
    std::string verilog = "module i2c (";
    for (int i = 0; i < 23; ++i) {
        names.push_back("sig_" + std::to_string(i));
        verilog += "input " + names.back() + (i < 22 ? ", " : ");");
    }
    agents::ScriptedBackend backend;
    backend.push(testkit::mapping_reply(names));
    for (auto const & n : names) {
        backend.push(testkit::analysis_reply(n));
    }
    pipeline::Stage1Inputs in{"i2c", "I2C master spec", verilog, {}, ""};
    sva::BuiltinChecker checker;
    pipeline::Services services{backend, checker, agents::PromptLibrary::builtin()};
    auto const r = pipeline::run_stage1(services, in);
    EXPECT_EQ(r.bank.signals.size(), 23U);
    EXPECT_EQ(r.calls, 24U);
    EXPECT_TRUE(r.bank.waveforms.empty());
}

TEST(Waveform, AllSections)
{
    agents::ScriptedBackend backend;
    backend.push(testkit::waveform_reply("Write cycle", {"req", "ack"}));
    Warnings w;
    auto const s = analyze_waveform(backend, "spec", "req rises then ack", "wave1", w);
    ASSERT_TRUE(s);
    EXPECT_EQ(s->waveform_name, "Write cycle");
    EXPECT_EQ(s->signals, (std::vector<std::string>{"req", "ack"}));
    EXPECT_FALSE(s->timing_relationship.empty());
    EXPECT_FALSE(s->causal_dependencies.empty());
    EXPECT_FALSE(s->state_transitions.empty());
    EXPECT_FALSE(s->protocol_mechanisms.empty());
    EXPECT_FALSE(s->additional_observations.empty());
    EXPECT_TRUE(w.empty());
}

TEST(Waveform, MalformedSkipped)
{
    agents::ScriptedBackend backend;
    backend.push("The picture is blurry.");
    Warnings w;
    EXPECT_FALSE(analyze_waveform(backend, "spec", "text", "wave1", w));
    EXPECT_EQ(w.size(), 1U);
}

TEST(Waveform, NoneStillValid)
{
    auto b = two_signal_bank();
    EXPECT_TRUE(b.waveforms.empty());
    EXPECT_NO_THROW((void)validate(b));
}

TEST(Persistence, RoundTrip)
{
    auto const b = two_signal_bank();
    auto const path = (fs::temp_directory_path() / "svarefine_bank_test.json").string();
    save_bank(b, path);
    EXPECT_EQ(load_bank(path), b);
    fs::remove(path);
}

TEST(Persistence, MissingVerilogName)
{
    auto doc = nlohmann::json::parse(to_json(two_signal_bank()).dump());
    doc["signals"][0].erase("verilog_name");
    try {
        (void)from_json(doc);
        FAIL() << "expected LoadError";
    } catch (LoadError const & e) {
        EXPECT_EQ(e.path(), "signals[0].verilog_name");
    }
}

TEST(Persistence, DuplicateName)
{
    auto b = two_signal_bank();
    b.signals[1].verilog_name = "intr";
    EXPECT_THROW((void)validate(b), ValidationError);
    EXPECT_THROW((void)from_json(nlohmann::json::parse(to_json(b).dump())), ValidationError);
}

TEST(Persistence, DanglingRelatedIsWarning)
{
    auto b = two_signal_bank();
    b.signals[0].related_signals.push_back("ghost");
    auto const w = validate(b);
    ASSERT_EQ(w.size(), 1U);
    EXPECT_NE(w[0].find("ghost"), std::string::npos);
}

TEST(PersistenceProperty, RandomBanksRoundTrip)
{
    std::mt19937_64 rng(99);
    auto word = [&] {
        std::string s;
        auto n = 1 + rng() % 10;
        for (std::size_t i = 0; i < n; ++i) {
            s += static_cast<char>("abcxyz_ \n\"\\{}"[rng() % 14]);
        }
        return s;
    };
    for (int trial = 0; trial < 100; ++trial) {
        InformationBank b;
        b.design_name = word();
        b.workflow_info = word();
        auto const n = 1 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            SignalInfo s;
            s.verilog_name = "s" + std::to_string(i);
            s.spec_name = word();
            s.description = word();
            s.definition = word();
            s.functionality = word();
            s.interconnection = word();
            s.additional_info = word();
            if (rng() % 2) {
                s.related_signals = {"s0"};
            }
            b.signals.push_back(s);
        }
        if (rng() % 2) {
            b.waveforms.push_back(WaveformSummary{word(), {"s0"}, word(), word(), word(), word(), word()});
        }
        ASSERT_EQ(from_json(nlohmann::json::parse(to_json(b).dump())), b);
    }
}

TEST(Stage1, Deterministic)
{
    std::vector<std::string> replies = {testkit::mapping_reply({"intr", "mtime"}), testkit::analysis_reply("intr"),
        testkit::analysis_reply("mtime"), testkit::waveform_reply("timer", {"mtime", "intr"})};
    std::string first;
    for (int run = 0; run < 2; ++run) {
        agents::ScriptedBackend backend;
        testkit::push_all(backend, replies);
        sva::BuiltinChecker checker;
        pipeline::Services services{backend, checker, agents::PromptLibrary::builtin()};
        pipeline::Stage1Inputs in{"rv_timer", "spec", decls, {{"timer", "mtime counts up; intr rises"}}, "A timer."};
        auto const r = pipeline::run_stage1(services, in);
        EXPECT_EQ(r.calls, 4U);
        auto const dumped = to_json(r.bank).dump(2);
        if (run == 0) {
            first = dumped;
        } else {
            EXPECT_EQ(dumped, first);
        }
    }
}
