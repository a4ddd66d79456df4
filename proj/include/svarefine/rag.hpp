#pragma once

// Reference-document retrieval: fixed-window chunking, a pluggable embedder,
// and an exact cosine-similarity index.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace svarefine::rag {

struct ChunkParams
{
    std::size_t size = 1200;   // bytes
    std::size_t overlap = 200; // bytes, < size
    std::size_t k = 4;
};

/// Windows of at most `size` bytes. Each window starts `overlap` bytes before
/// the previous one ends; a window end is moved back to just after a
/// whitespace byte when one lies within a small band, except for the final
/// window. Throws PreconditionError unless overlap < size.
[[nodiscard]] std::vector<std::string> chunk(std::string_view text, std::size_t size, std::size_t overlap);

/// Inverse of `chunk` for the same overlap.
[[nodiscard]] std::string reconstruct(std::vector<std::string> const & chunks, std::size_t overlap);

class Embedder
{
public:
    virtual ~Embedder() = default;
    [[nodiscard]] virtual std::vector<double> embed(std::string_view text) const = 0;
    [[nodiscard]] virtual std::size_t dimension() const = 0;
    /// Stored with an index so a reload can detect a different embedder.
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Signed feature hashing of lowercase word tokens (FNV-1a 64), L2-normalised.
/// Text without word tokens is hashed whole; empty text maps to zero.
class HashingEmbedder final : public Embedder
{
public:
    explicit HashingEmbedder(std::size_t dimension = 512);

    [[nodiscard]] std::vector<double> embed(std::string_view text) const override;
    [[nodiscard]] std::size_t dimension() const override { return dimension_; }
    [[nodiscard]] std::string name() const override;

    /// Lowercased alphanumeric/underscore runs.
    [[nodiscard]] static std::vector<std::string> tokens(std::string_view text);

private:
    std::size_t dimension_;
};

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);

struct RagChunk
{
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::vector<double> vector;

    friend bool operator==(RagChunk const &, RagChunk const &) = default;
};

struct QueryHit
{
    RagChunk const * chunk = nullptr;
    double similarity = 0.0;
};

/// Exact flat index. Single writer while building; const queries are safe to
/// run concurrently afterwards.
class FlatIndex
{
public:
    FlatIndex() = default;

    [[nodiscard]] std::size_t size() const { return chunks_.size(); }
    [[nodiscard]] bool empty() const { return chunks_.empty(); }
    /// 0 until the first add.
    [[nodiscard]] std::size_t dimension() const { return dimension_; }
    [[nodiscard]] std::string const & embedder_name() const { return embedder_name_; }
    [[nodiscard]] std::vector<RagChunk> const & chunks() const { return chunks_; }

    /// Embeds and stores `texts` under `doc_id`, replacing any chunks already
    /// stored for it. Throws PreconditionError on a dimension mismatch.
    void add(std::string const & doc_id, std::vector<std::string> const & texts, Embedder const & embedder);

    /// Stores a precomputed vector. Same dimension rules as `add`.
    void add_chunk(RagChunk chunk);

    /// Top-k chunks by cosine similarity, descending; ties by (doc_id,
    /// chunk_index). Fewer than k chunks returns all. Empty index returns
    /// nothing. Throws PreconditionError for k == 0.
    [[nodiscard]] std::vector<QueryHit> query(std::string_view text, std::size_t k, Embedder const & embedder) const;
    [[nodiscard]] std::vector<QueryHit> query_vector(std::vector<double> const & q, std::size_t k) const;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    static FlatIndex from_json(nlohmann::json const & doc);

    void save(std::string const & path) const;
    static FlatIndex load(std::string const & path);

private:
    void check_dimension(std::size_t dim);

    std::vector<RagChunk> chunks_;
    std::vector<double> norms_;
    std::size_t dimension_ = 0;
    std::string embedder_name_;
};

[[nodiscard]] double cosine(std::vector<double> const & a, std::vector<double> const & b);

/// Retrieved chunks formatted for the generation prompt.
[[nodiscard]] std::string format_context(std::vector<QueryHit> const & hits);

} // namespace svarefine::rag
