#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "svarefine/backend.hpp"
#include "svarefine/errors.hpp"
#include "svarefine/prompts.hpp"

using namespace svarefine;
using namespace svarefine::agents;
namespace fs = std::filesystem;

namespace {

PromptContext full_context(PromptTemplate const & t)
{
    PromptContext ctx;
    for (auto const & p : t.placeholders()) {
        ctx[p] = "<" + p + ">";
    }
    return ctx;
}

} // namespace

TEST(Render, SubstitutesSignalName)
{
    auto const & critic = PromptLibrary::builtin().get(AgentRole::critic);
    auto ctx = full_context(critic);
    ctx["signal_name"] = "wb_rst_i";
    auto const msgs = render_prompt(critic, ctx);
    ASSERT_EQ(msgs.size(), 2U);
    EXPECT_EQ(msgs[0].role, Role::system);
    EXPECT_EQ(msgs[1].role, Role::user);
    EXPECT_NE(msgs[1].content.find("wb_rst_i"), std::string::npos);
    EXPECT_EQ(msgs[1].content.find("{signal_name}"), std::string::npos);
}

TEST(Render, MissingPlaceholderNamed)
{
    PromptTemplate t{AgentRole::sva, "sys", "Check {assertions} for {signal_name}"};
    try {
        (void)render_prompt(t, {{"signal_name", "x"}});
        FAIL() << "expected RenderError";
    } catch (RenderError const & e) {
        EXPECT_EQ(e.placeholder(), "assertions");
        EXPECT_NE(std::string(e.what()).find("assertions"), std::string::npos);
    }
}

TEST(Render, MapperSystemTextOpening)
{
    auto const & t = PromptLibrary::builtin().get(AgentRole::signal_mapper);
    EXPECT_EQ(t.system_text.rfind("Please act as a signal name mapping tool", 0), 0U);
}

TEST(Render, ValuesAreNotRescanned)
{
    PromptTemplate t{AgentRole::sva, "s", "{a} and {b}"};
    auto const msgs = render_prompt(t, {{"a", "{b}"}, {"b", "B"}});
    EXPECT_EQ(msgs[1].content, "{b} and B");
}

TEST(Render, NonPlaceholderBracesAreLiteral)
{
    PromptTemplate t{AgentRole::sva, "s", "{a} {cnt, 2'b00} {Upper} {}"};
    EXPECT_EQ(t.placeholders(), std::vector<std::string>{"a"});
    EXPECT_EQ(render_prompt(t, {{"a", "x"}})[1].content, "x {cnt, 2'b00} {Upper} {}");
}

TEST(Render, Deterministic)
{
    for (auto role : all_roles) {
        auto const & t = PromptLibrary::builtin().get(role);
        auto const ctx = full_context(t);
        EXPECT_EQ(render_prompt(t, ctx), render_prompt(t, ctx)) << to_string(role);
    }
}

TEST(Templates, AnchorPhrases)
{
    auto const & lib = PromptLibrary::builtin();
    for (auto role : {AgentRole::critic, AgentRole::sva}) {
        auto const & sys = lib.get(role).system_text;
        for (auto const * anchor : {"CORRECTNESS", "CONSISTENCY", "COMPLETENESS"}) {
            EXPECT_NE(sys.find(anchor), std::string::npos) << to_string(role) << " lacks " << anchor;
        }
    }
    EXPECT_NE(lib.get(AgentRole::spec_analyzer).system_text.find("professional VLSI specification analyzer"),
        std::string::npos);
    EXPECT_NE(lib.get(AgentRole::waveform_analyzer).system_text.find("professional waveform analyzer"),
        std::string::npos);
    EXPECT_NE(lib.get(AgentRole::critic).system_text.find("act as a critic to a professional"), std::string::npos);
    EXPECT_NE(lib.get(AgentRole::sva).system_text.find("write all the corresponding SVAs"), std::string::npos);
    EXPECT_NE(lib.get(AgentRole::syntax_correction).user_text_template.find("with their syntax issue fixed"),
        std::string::npos);
    EXPECT_NE(lib.get(AgentRole::deduplication).user_text_template.find("Extract all unique and valid assertions"),
        std::string::npos);
}

TEST(Templates, CriticAsksForScoreMarker)
{
    auto const & t = PromptLibrary::builtin().get(AgentRole::critic);
    EXPECT_NE(t.user_text_template.find("[SCORE:"), std::string::npos);
}

TEST(Templates, EveryRolePresent)
{
    for (auto role : all_roles) {
        auto const & t = PromptLibrary::builtin().get(role);
        EXPECT_FALSE(t.system_text.empty()) << to_string(role);
        EXPECT_FALSE(t.user_text_template.empty()) << to_string(role);
        EXPECT_EQ(parse_role(to_string(role)), role);
    }
    EXPECT_FALSE(parse_role("nope"));
}

TEST(Templates, ParseSerializeRoundTrip)
{
    for (auto role : all_roles) {
        auto const & t = PromptLibrary::builtin().get(role);
        EXPECT_EQ(PromptTemplate::parse(role, t.serialize()), t) << to_string(role);
    }
}

TEST(Templates, MissingSectionRejected)
{
    EXPECT_THROW((void)PromptTemplate::parse(AgentRole::sva, "just text"), LoadError);
    EXPECT_THROW((void)PromptTemplate::parse(AgentRole::sva, "=== system ===\nx\n"), LoadError);
}

TEST(Library, DirectoryOverridesOneRole)
{
    auto const dir = fs::temp_directory_path() / "svarefine_templates_test";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "critic.txt");
        out << "=== system ===\nBe harsh.\n=== user ===\nRate {assertions}\n";
    }
    auto const lib = PromptLibrary::load(dir.string());
    EXPECT_EQ(lib.get(AgentRole::critic).system_text, "Be harsh.");
    EXPECT_EQ(lib.get(AgentRole::sva), PromptLibrary::builtin().get(AgentRole::sva));
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------

TEST(Scripted, ReplaysInOrderThenFails)
{
    ScriptedBackend b;
    b.push("one");
    b.push("two");
    std::vector<ChatMessage> msgs{{Role::user, "hi"}};
    EXPECT_EQ(b.complete(msgs), "one");
    EXPECT_EQ(b.complete(msgs), "two");
    EXPECT_THROW((void)b.complete(msgs), BackendError);
    // the failed attempt is still a received call
    EXPECT_EQ(b.call_count(), 3U);
}

TEST(Scripted, KeyedEntries)
{
    ScriptedBackend b;
    b.push("critic", "[SCORE: 1]");
    b.push("plain");
    std::vector<ChatMessage> a{{Role::user, "generate"}};
    std::vector<ChatMessage> c{{Role::system, "you are a critic"}, {Role::user, "x"}};
    EXPECT_EQ(b.complete(a), "plain");
    EXPECT_EQ(b.complete(c), "[SCORE: 1]");
    EXPECT_EQ(b.remaining(), 0U);
}

TEST(Scripted, FromJson)
{
    auto b = ScriptedBackend::from_json(
        nlohmann::json::parse(R"({"responses": ["a", {"match": "k", "response": "b"}]})"));
    EXPECT_EQ(b.remaining(), 2U);
    EXPECT_THROW((void)ScriptedBackend::from_json(nlohmann::json::parse(R"({"responses": [3]})")), LoadError);
}

TEST(Scripted, EmptyResponseIsError)
{
    ScriptedBackend b;
    b.push("");
    std::vector<ChatMessage> msgs{{Role::user, "hi"}};
    EXPECT_THROW((void)b.complete(msgs), BackendError);
}
