#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "svarefine/errors.hpp"
#include "svarefine/rag.hpp"

using namespace svarefine;
using namespace svarefine::rag;

namespace {

std::vector<std::size_t> starts(std::vector<std::string> const & chunks, std::size_t overlap)
{
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    for (auto const & c : chunks) {
        out.push_back(pos);
        pos += c.size() - overlap;
    }
    return out;
}

std::string random_text(std::mt19937_64 & rng, std::size_t n)
{
    static constexpr char alphabet[] = "abcdefgh  \n\t.,xyz";
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        s += alphabet[rng() % (sizeof alphabet - 1)];
    }
    return s;
}

} // namespace

TEST(Chunk, ShortTextIsOneChunk)
{
    auto const c = chunk("abcdefghij", 10, 0);
    EXPECT_EQ(c, std::vector<std::string>{"abcdefghij"});
}

TEST(Chunk, WindowArithmetic)
{
    std::string const text(100, 'x');
    auto const c = chunk(text, 40, 10);
    EXPECT_EQ(starts(c, 10), (std::vector<std::size_t>{0, 30, 60, 90}));
    for (auto const & piece : c) {
        EXPECT_LE(piece.size(), 40U);
    }
    // windows at offset 60 and 90 run to the end of the text
    EXPECT_EQ(c[2].size(), 40U);
    EXPECT_EQ(c[3].size(), 10U);
}

TEST(Chunk, OverlapMustBeSmaller)
{
    EXPECT_THROW((void)chunk("abc", 10, 10), PreconditionError);
    EXPECT_THROW((void)chunk("abc", 10, 11), PreconditionError);
    EXPECT_THROW((void)chunk("abc", 0, 0), PreconditionError);
}

TEST(Chunk, PrefersWhitespace)
{
    // band is a tenth of the window, so words shorter than that always fit
    std::string text;
    for (int i = 0; i < 60; ++i) {
        text += "word" + std::to_string(i) + " ";
    }
    auto const c = chunk(text, 120, 20);
    ASSERT_GT(c.size(), 2U);
    for (auto const & piece : c) {
        if (!std::string_view(text).ends_with(piece)) {
            EXPECT_TRUE(std::isspace(static_cast<unsigned char>(piece.back()))) << "[" << piece << "]";
        }
    }
    EXPECT_EQ(reconstruct(c, 20), text);
}

TEST(Chunk, EmptyText)
{
    EXPECT_TRUE(chunk("", 10, 2).empty());
    EXPECT_EQ(reconstruct({}, 2), "");
}

TEST(ChunkProperty, Reconstruction)
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        auto const size = 1 + rng() % 60;
        auto const overlap = rng() % size;
        auto const text = random_text(rng, rng() % 400);
        auto const c = chunk(text, size, overlap);
        for (std::size_t i = 0; i < c.size(); ++i) {
            ASSERT_LE(c[i].size(), size);
            ASSERT_FALSE(c[i].empty());
        }
        ASSERT_EQ(reconstruct(c, overlap), text) << "size " << size << " overlap " << overlap;
    }
}

TEST(Embedder, DeterministicAndNormalised)
{
    HashingEmbedder e(64);
    auto const v = e.embed("The timer raises intr when mtime >= mtimecmp");
    EXPECT_EQ(v, e.embed("The timer raises intr when mtime >= mtimecmp"));
    ASSERT_EQ(v.size(), 64U);
    double norm = 0;
    for (double x : v) {
        norm += x * x;
    }
    EXPECT_NEAR(norm, 1.0, 1e-12);
    // case folds
    EXPECT_EQ(v, e.embed("THE TIMER RAISES INTR WHEN MTIME >= MTIMECMP"));
}

TEST(Embedder, PinnedHash)
{
    // FNV-1a 64 reference values
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Embedder, PunctuationOnlyTextIsNonZero)
{
    HashingEmbedder e(32);
    auto const v = e.embed("|-> ##");
    double norm = 0;
    for (double x : v) {
        norm += x * x;
    }
    EXPECT_GT(norm, 0.0);
}

TEST(Index, AddFiveChunks)
{
    HashingEmbedder e(128);
    FlatIndex idx;
    idx.add("doc", {"one", "two", "three", "four", "five"}, e);
    EXPECT_EQ(idx.size(), 5U);
    EXPECT_EQ(idx.dimension(), 128U);
}

TEST(Index, DimensionMismatch)
{
    FlatIndex idx;
    idx.add("a", {"text"}, HashingEmbedder(128));
    EXPECT_THROW(idx.add("b", {"text"}, HashingEmbedder(64)), PreconditionError);
    EXPECT_EQ(idx.size(), 1U);
}

TEST(Index, UpsertReplacesDocument)
{
    HashingEmbedder e(64);
    FlatIndex idx;
    idx.add("a", {"x1", "x2", "x3"}, e);
    idx.add("b", {"y1"}, e);
    idx.add("a", {"z1"}, e);
    EXPECT_EQ(idx.size(), 2U);
    for (auto const & c : idx.chunks()) {
        if (c.doc_id == "a") {
            EXPECT_EQ(c.text, "z1");
        }
    }
}

TEST(Query, IdenticalTextFirst)
{
    HashingEmbedder e;
    FlatIndex idx;
    idx.add("book", {"the wishbone bus uses a strobe signal", "interrupts are level sensitive",
                        "a fifo has read and write pointers"}, e);
    auto const hits = idx.query("interrupts are level sensitive", 2, e);
    ASSERT_EQ(hits.size(), 2U);
    EXPECT_EQ(hits[0].chunk->text, "interrupts are level sensitive");
    EXPECT_NEAR(hits[0].similarity, 1.0, 1e-9);
    EXPECT_GE(hits[0].similarity, hits[1].similarity);
}

TEST(Query, KLargerThanIndex)
{
    HashingEmbedder e;
    FlatIndex idx;
    idx.add("d", {"a b", "c d"}, e);
    EXPECT_EQ(idx.query("a", 10, e).size(), 2U);
}

TEST(Query, EmptyIndexAndZeroK)
{
    HashingEmbedder e;
    FlatIndex idx;
    EXPECT_TRUE(idx.query("x", 3, e).empty());
    idx.add("d", {"a"}, e);
    EXPECT_THROW((void)idx.query("x", 0, e), PreconditionError);
}

TEST(Query, OrthogonalChunks)
{
    HashingEmbedder e;
    std::vector<std::string> const texts = {"apple banana cherry", "piston engine torque", "violin cello harp"};
    FlatIndex idx;
    idx.add("d", texts, e);
    auto const q = e.embed("engine torque");
    // brute force
    std::vector<double> sims;
    for (auto const & t : texts) {
        sims.push_back(cosine(q, e.embed(t)));
    }
    EXPECT_GT(sims[1], sims[0]);
    EXPECT_GT(sims[1], sims[2]);
    auto const hits = idx.query("engine torque", 3, e);
    EXPECT_EQ(hits[0].chunk->text, texts[1]);
    EXPECT_NEAR(hits[0].similarity, sims[1], 1e-12);
}

TEST(Query, TiesBrokenByDocThenIndex)
{
    FlatIndex idx;
    idx.add_chunk(RagChunk{"b", 0, "t", {1, 0}});
    idx.add_chunk(RagChunk{"a", 1, "t", {1, 0}});
    idx.add_chunk(RagChunk{"a", 0, "t", {1, 0}});
    auto const hits = idx.query_vector({1, 0}, 3);
    ASSERT_EQ(hits.size(), 3U);
    EXPECT_EQ(hits[0].chunk->doc_id, "a");
    EXPECT_EQ(hits[0].chunk->chunk_index, 0U);
    EXPECT_EQ(hits[1].chunk->chunk_index, 1U);
    EXPECT_EQ(hits[2].chunk->doc_id, "b");
}

TEST(QueryProperty, MatchesBruteForce)
{
    std::mt19937_64 rng(23);
    HashingEmbedder e(32);
    for (int trial = 0; trial < 100; ++trial) {
        FlatIndex idx;
        std::vector<std::string> texts;
        auto const n = 1 + rng() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            texts.push_back(random_text(rng, 5 + rng() % 30));
        }
        idx.add("doc", texts, e);
        auto const qtext = random_text(rng, 12);
        auto const k = 1 + rng() % 6;
        auto const hits = idx.query(qtext, k, e);
        ASSERT_EQ(hits.size(), std::min<std::size_t>(k, n));
        for (std::size_t i = 1; i < hits.size(); ++i) {
            ASSERT_GE(hits[i - 1].similarity, hits[i].similarity);
        }
        std::vector<std::pair<double, std::size_t>> brute;
        auto const q = e.embed(qtext);
        for (std::size_t i = 0; i < n; ++i) {
            brute.emplace_back(-cosine(q, e.embed(texts[i])), i);
        }
        std::sort(brute.begin(), brute.end());
        for (std::size_t i = 0; i < hits.size(); ++i) {
            ASSERT_NEAR(hits[i].similarity, -brute[i].first, 1e-12);
        }
    }
}

TEST(Persistence, RoundTrip)
{
    HashingEmbedder e(16);
    FlatIndex idx;
    idx.add("x.txt", chunk("some reference text about assertions and clocks", 20, 5), e);
    auto const path = (std::filesystem::temp_directory_path() / "svarefine_index_test.json").string();
    idx.save(path);
    auto const back = FlatIndex::load(path);
    EXPECT_EQ(back.chunks(), idx.chunks());
    EXPECT_EQ(back.dimension(), 16U);
    EXPECT_EQ(back.embedder_name(), e.name());
    std::filesystem::remove(path);
}

TEST(Persistence, BadDocument)
{
    EXPECT_THROW((void)FlatIndex::from_json(nlohmann::json::parse(R"({"format": "other"})")), LoadError);
}
