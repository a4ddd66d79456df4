#include <random>

#include <gtest/gtest.h>

#include "support/sva_corpus.hpp"
#include "svarefine/agents.hpp"
#include "svarefine/errors.hpp"

using namespace svarefine;
using namespace svarefine::agents;

namespace {

bank::SignalInfo timer_signal()
{
    bank::SignalInfo s;
    s.spec_name = "Timer interrupt";
    s.verilog_name = "intr";
    s.description = "Raised when mtime reaches mtimecmp.";
    s.functionality = "Level interrupt per hart.";
    return s;
}

std::string fenced(std::string const & body)
{
    return "```systemverilog\n" + body + "\n```";
}

std::string const a1 = "assert property (@(posedge clk_i) a |-> b);";
std::string const a2 = "assert property (@(posedge clk_i) c |=> d);";
std::string const a3 = "assert property (@(posedge clk_i) e |-> ##1 f);";

} // namespace

TEST(ParseScore, LastMarkerWins)
{
    EXPECT_EQ(parse_score("first [SCORE: 40] then more text [SCORE: 55]"), 55.0);
}

TEST(ParseScore, CaseAndBoundary)
{
    EXPECT_EQ(parse_score("[score: -100]"), -100.0);
    EXPECT_EQ(parse_score("[Score:+12.5]"), 12.5);
    EXPECT_EQ(parse_score("[SCORE:   100 ]"), 100.0);
}

TEST(ParseScore, Errors)
{
    EXPECT_THROW((void)parse_score("[SCORE: 150]"), RangeError);
    EXPECT_THROW((void)parse_score("no marker at all"), ScoreParseError);
    EXPECT_THROW((void)parse_score("[SCORE: high]"), ScoreParseError);
    try {
        (void)parse_score("nothing here");
    } catch (ScoreParseError const & e) {
        EXPECT_EQ(e.raw_text(), "nothing here");
    }
}

TEST(Suppression, Law)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-100, 100);
    for (int i = 0; i < 2000; ++i) {
        // round to one decimal so the text form is exact
        double const s = std::round(dist(rng) * 10) / 10;
        char buf[64];
        std::snprintf(buf, sizeof buf, "feedback...\n[SCORE: %.1f]", s);
        double const parsed = parse_score(buf);
        ASSERT_DOUBLE_EQ(parsed, s);
        double const out = suppress(parsed, 95);
        ASSERT_LE(out, 95.0);
        ASSERT_EQ(out, std::min(s, 95.0));
    }
}

TEST(Extract, Assertion1SingleUnit)
{
    auto const units = extract_assertions("Here you go:\n" + fenced(testkit::sva_corpus().front()) + "\nDone.");
    ASSERT_EQ(units.size(), 1U);
    EXPECT_NE(units[0].find("mtime_intr_p"), std::string::npos);
}

TEST(Extract, TwoBareAsserts)
{
    EXPECT_EQ(extract_assertions(fenced(a1 + "\n" + a2)).size(), 2U);
}

TEST(Extract, NoFences)
{
    EXPECT_TRUE(extract_assertions(a1).empty());
}

TEST(Extract, SeveralFencesInOrder)
{
    auto const units = extract_assertions(fenced(a2) + "\ntext\n```\n" + a1 + "\n```");
    EXPECT_EQ(units, (std::vector<std::string>{a2, a1}));
}

TEST(WeakAnswer, OneAssertion)
{
    ScriptedBackend b;
    b.push("Short answer:\n" + fenced(a1));
    auto const ans = generate_weak_answer(b, timer_signal(), "workflow");
    EXPECT_EQ(ans.assertions, std::vector<std::string>{a1});
    EXPECT_NE(b.prompts().at(0).find(brevity_instruction), std::string::npos);
    EXPECT_NE(b.prompts().at(0).find("intr"), std::string::npos);
}

TEST(WeakAnswer, ProseOnly)
{
    ScriptedBackend b;
    b.push("I cannot write assertions for this signal.");
    auto const ans = generate_weak_answer(b, timer_signal(), "workflow");
    EXPECT_TRUE(ans.assertions.empty());
    EXPECT_EQ(ans.commentary, "I cannot write assertions for this signal.");
}

TEST(WeakAnswer, ExhaustedBackend)
{
    ScriptedBackend b;
    EXPECT_THROW((void)generate_weak_answer(b, timer_signal(), "w"), BackendError);
}

TEST(WeakAnswer, NeedsDescription)
{
    ScriptedBackend b;
    auto s = timer_signal();
    s.description.clear();
    EXPECT_THROW((void)generate_weak_answer(b, s, "w"), PreconditionError);
    EXPECT_EQ(b.call_count(), 0U);
}

TEST(Critique, Clamped)
{
    ScriptedBackend b;
    b.push("Nearly perfect.\n[SCORE: 97]");
    tree::AnswerContent ans{{a1}, "", std::nullopt};
    auto const r = critique(b, timer_signal(), "w", ans, "", tree::SearchParams{});
    EXPECT_EQ(r.raw_score, 97.0);
    EXPECT_EQ(r.suppressed_score, 95.0);
    EXPECT_EQ(r.feedback, "Nearly perfect.\n[SCORE: 97]");
}

TEST(Critique, NegativeKept)
{
    ScriptedBackend b;
    b.push("Wrong clock.\n[SCORE: -20]");
    tree::AnswerContent ans{{a1}, "", std::nullopt};
    EXPECT_EQ(critique(b, timer_signal(), "w", ans, "log", tree::SearchParams{}).suppressed_score, -20.0);
}

TEST(Critique, MissingScore)
{
    ScriptedBackend b;
    b.push("Looks fine to me.");
    tree::AnswerContent ans{{a1}, "", std::nullopt};
    EXPECT_THROW((void)critique(b, timer_signal(), "w", ans, "", tree::SearchParams{}), ScoreParseError);
}

TEST(Critique, FeedbackCallToleratesMissingScore)
{
    ScriptedBackend b;
    b.push("Add a reset check.");
    tree::AnswerContent ans{{a1}, "", std::nullopt};
    EXPECT_EQ(critic_feedback(b, timer_signal(), "w", ans, ""), "Add a reset check.");
}

TEST(Refine, ThreeAssertions)
{
    ScriptedBackend b;
    b.push(fenced(a1 + "\n\n" + a2 + "\n\n" + a3));
    tree::AnswerContent const prior{{a1}, "old", std::nullopt};
    auto const before = prior;
    auto const out = refine(b, timer_signal(), prior, "needs more", "[1] PASS", "ctx", "w");
    EXPECT_EQ(out.assertions.size(), 3U);
    EXPECT_EQ(prior, before);
    auto const prompt = b.prompts().at(0);
    EXPECT_NE(prompt.find(a1), std::string::npos);
    EXPECT_NE(prompt.find("needs more"), std::string::npos);
    EXPECT_NE(prompt.find("[1] PASS"), std::string::npos);
    EXPECT_NE(prompt.find("ctx"), std::string::npos);
}

TEST(Refine, EmptyChannelsAllowed)
{
    ScriptedBackend b;
    b.push(fenced(a2));
    tree::AnswerContent const prior{{}, "", std::nullopt};
    auto const out = refine(b, timer_signal(), prior, "", "", "", "w");
    EXPECT_EQ(out.assertions, std::vector<std::string>{a2});
}

TEST(Correct, EmptyInputNoCall)
{
    ScriptedBackend b;
    EXPECT_TRUE(correct_syntax(b, {}, "spec", "intr").empty());
    EXPECT_EQ(b.call_count(), 0U);
}

TEST(Correct, TwoFixes)
{
    sva::AssertionRecord r1{"assert property (@(posedge clk) a |-> );", "intr", 1, sva::CheckStatus::fail,
        {sva::Diagnostic{sva::Severity::error, 1, 39, "expected-expression", "expected expression after |->"}}};
    sva::AssertionRecord r2{"assert property (@(posedge clk) ##);", "intr", 2, sva::CheckStatus::fail,
        {sva::Diagnostic{sva::Severity::error, 1, 35, "expected-delay", "expected delay value after ## but found ')'"}}};
    ScriptedBackend b;
    b.push(fenced(a1 + "\n" + a2));
    auto const fixed = correct_syntax(b, {r1, r2}, "spec", "intr");
    EXPECT_EQ(fixed.size(), 2U);
    auto const prompt = b.prompts().at(0);
    EXPECT_NE(prompt.find("expected expression after |->"), std::string::npos);
    EXPECT_NE(prompt.find("expected delay value after ## but found ')'"), std::string::npos);
    EXPECT_NE(prompt.find(r1.text), std::string::npos);
}

TEST(Correct, RecordWithoutDiagnostics)
{
    ScriptedBackend b;
    sva::AssertionRecord r{"x", "intr", 0, sva::CheckStatus::fail, {}};
    EXPECT_THROW((void)correct_syntax(b, {r}, "spec", "intr"), PreconditionError);
}

TEST(Dedup, Singleton)
{
    ScriptedBackend b;
    auto const r = deduplicate(b, {a1}, "spec", "intr");
    EXPECT_EQ(r.kept, std::vector<std::string>{a1});
    EXPECT_FALSE(r.backend_called);
}

TEST(Dedup, IdenticalEntriesMergedByPrepass)
{
    ScriptedBackend b;
    auto const r = deduplicate(b, {a1, a1, "assert  property (@(posedge clk_i) a |-> b); // same"}, "spec", "intr");
    EXPECT_EQ(r.kept.size(), 1U);
    EXPECT_EQ(b.call_count(), 0U);
}

TEST(Dedup, ForeignAssertionRejected)
{
    ScriptedBackend b;
    b.push(fenced(a1 + "\n" + a3));
    auto const r = deduplicate(b, {a1, a2}, "spec", "intr");
    EXPECT_TRUE(r.backend_called);
    EXPECT_EQ(r.kept, (std::vector<std::string>{a1, a2}));
    ASSERT_EQ(r.warnings.size(), 1U);
}

TEST(Dedup, AcceptedSubsetKeepsPoolOrder)
{
    ScriptedBackend b;
    b.push(fenced(a3 + "\n" + a1));
    auto const r = deduplicate(b, {a1, a2, a3}, "spec", "intr");
    EXPECT_EQ(r.kept, (std::vector<std::string>{a1, a3}));
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Dedup, SubsetLawOnRandomReplies)
{
    std::vector<std::string> const pool = {a1, a2, a3, testkit::sva_corpus()[4], testkit::sva_corpus()[5]};
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::string reply;
        for (auto const & p : pool) {
            if (rng() % 2) {
                reply += p + "\n";
            }
        }
        if (rng() % 4 == 0) {
            reply += testkit::sva_corpus()[10] + "\n";
        }
        ScriptedBackend b;
        b.push(fenced(reply.empty() ? "// nothing" : reply));
        auto const r = deduplicate(b, pool, "spec", "intr");
        std::set<std::string> allowed;
        for (auto const & p : pool) {
            allowed.insert(sva::normalize(p));
        }
        for (auto const & k : r.kept) {
            ASSERT_TRUE(allowed.count(sva::normalize(k))) << k;
        }
        ASSERT_FALSE(r.kept.empty());
    }
}
