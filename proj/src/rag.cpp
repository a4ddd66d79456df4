#include "svarefine/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "fsutil.hpp"
#include "svarefine/errors.hpp"

namespace svarefine::rag {

std::vector<std::string> chunk(std::string_view text, std::size_t size, std::size_t overlap)
{
    if (size == 0 || overlap >= size) {
        throw PreconditionError("chunk needs 0 <= overlap < size (size " + std::to_string(size) + ", overlap "
            + std::to_string(overlap) + ")");
    }
    std::size_t const step = size - overlap;
    std::size_t const band = std::min(size / 10, size - overlap - 1);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = start + size;
        if (end >= text.size()) {
            out.emplace_back(text.substr(start));
            start += step;
            continue;
        }
        for (std::size_t e = end; e + band > end && e > start; --e) {
            if (std::isspace(static_cast<unsigned char>(text[e - 1]))) {
                end = e;
                break;
            }
        }
        out.emplace_back(text.substr(start, end - start));
        start = end - overlap;
    }
    return out;
}

std::string reconstruct(std::vector<std::string> const & chunks, std::size_t overlap)
{
    std::string out;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (i == 0) {
            out = chunks[0];
        } else {
            out += chunks[i].substr(std::min(overlap, chunks[i].size()));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension)
: dimension_(dimension)
{
    if (dimension_ == 0) {
        throw ConfigError("embedding dimension must be positive");
    }
}

std::string HashingEmbedder::name() const
{
    return "hashing-fnv1a64-" + std::to_string(dimension_);
}

std::vector<std::string> HashingEmbedder::tokens(std::string_view text)
{
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        auto const u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '_') {
            current += static_cast<char>(std::tolower(u));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const
{
    std::vector<double> v(dimension_, 0.0);
    auto bump = [&](std::string_view feature) {
        auto const h = fnv1a64(feature);
        auto const slot = static_cast<std::size_t>(h % dimension_);
        v[slot] += ((h >> 40) & 1U) ? -1.0 : 1.0;
    };
    for (auto const & t : tokens(text)) {
        bump(t);
    }
    double norm = 0.0;
    for (double x : v) {
        norm += x * x;
    }
    if (norm == 0.0 && !text.empty()) {
        // No word tokens, or every token cancelled out.
        std::fill(v.begin(), v.end(), 0.0);
        bump(text);
        norm = 1.0;
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double & x : v) {
            x /= norm;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------

namespace {

double l2(std::vector<double> const & v)
{
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double dot(std::vector<double> const & a, std::vector<double> const & b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace

double cosine(std::vector<double> const & a, std::vector<double> const & b)
{
    if (a.size() != b.size()) {
        throw PreconditionError("cosine of vectors with different dimensions");
    }
    auto const na = l2(a);
    auto const nb = l2(b);
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

void FlatIndex::check_dimension(std::size_t dim)
{
    if (dim == 0) {
        throw PreconditionError("embedding dimension must be positive");
    }
    if (dimension_ == 0) {
        dimension_ = dim;
    } else if (dim != dimension_) {
        throw PreconditionError("embedding dimension " + std::to_string(dim) + " does not match index dimension "
            + std::to_string(dimension_));
    }
}

void FlatIndex::add(std::string const & doc_id, std::vector<std::string> const & texts, Embedder const & embedder)
{
    check_dimension(embedder.dimension());
    if (embedder_name_.empty()) {
        embedder_name_ = embedder.name();
    }
    std::vector<RagChunk> fresh;
    fresh.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto v = embedder.embed(texts[i]);
        if (v.size() != dimension_) {
            throw PreconditionError("embedder returned a vector of the wrong dimension");
        }
        fresh.push_back(RagChunk{doc_id, i, texts[i], std::move(v)});
    }
    // Upsert: drop the document's previous chunks.
    std::vector<RagChunk> kept;
    std::vector<double> kept_norms;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        if (chunks_[i].doc_id != doc_id) {
            kept.push_back(std::move(chunks_[i]));
            kept_norms.push_back(norms_[i]);
        }
    }
    chunks_ = std::move(kept);
    norms_ = std::move(kept_norms);
    for (auto & c : fresh) {
        norms_.push_back(l2(c.vector));
        chunks_.push_back(std::move(c));
    }
}

void FlatIndex::add_chunk(RagChunk chunk)
{
    check_dimension(chunk.vector.size());
    for (auto const & c : chunks_) {
        if (c.doc_id == chunk.doc_id && c.chunk_index == chunk.chunk_index) {
            throw PreconditionError(
                "duplicate chunk " + chunk.doc_id + "#" + std::to_string(chunk.chunk_index));
        }
    }
    norms_.push_back(l2(chunk.vector));
    chunks_.push_back(std::move(chunk));
}

std::vector<QueryHit> FlatIndex::query_vector(std::vector<double> const & q, std::size_t k) const
{
    if (k == 0) {
        throw PreconditionError("query needs k >= 1");
    }
    if (chunks_.empty()) {
        return {};
    }
    if (q.size() != dimension_) {
        throw PreconditionError("query vector dimension does not match the index");
    }
    auto const qn = l2(q);

    // "better" = higher similarity, then smaller (doc_id, chunk_index).
    auto better = [](QueryHit const & a, QueryHit const & b) {
        if (a.similarity != b.similarity) {
            return a.similarity > b.similarity;
        }
        if (a.chunk->doc_id != b.chunk->doc_id) {
            return a.chunk->doc_id < b.chunk->doc_id;
        }
        return a.chunk->chunk_index < b.chunk->chunk_index;
    };
    // Heap whose top is the worst of the current best k.
    std::priority_queue<QueryHit, std::vector<QueryHit>, decltype(better)> heap(better);
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        double const sim = (qn == 0.0 || norms_[i] == 0.0) ? 0.0 : dot(q, chunks_[i].vector) / (qn * norms_[i]);
        QueryHit hit{&chunks_[i], sim};
        if (heap.size() < k) {
            heap.push(hit);
        } else if (better(hit, heap.top())) {
            heap.pop();
            heap.push(hit);
        }
    }
    std::vector<QueryHit> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<QueryHit> FlatIndex::query(std::string_view text, std::size_t k, Embedder const & embedder) const
{
    if (k == 0) {
        throw PreconditionError("query needs k >= 1");
    }
    if (chunks_.empty()) {
        return {};
    }
    if (embedder.dimension() != dimension_) {
        throw PreconditionError("embedder dimension does not match the index");
    }
    return query_vector(embedder.embed(text), k);
}

nlohmann::ordered_json FlatIndex::to_json() const
{
    nlohmann::ordered_json doc;
    doc["format"] = "svarefine-rag-index";
    doc["version"] = 1;
    doc["embedder"] = embedder_name_;
    doc["dimension"] = dimension_;
    doc["count"] = chunks_.size();
    doc["chunks"] = nlohmann::ordered_json::array();
    for (auto const & c : chunks_) {
        nlohmann::ordered_json j;
        j["doc_id"] = c.doc_id;
        j["chunk_index"] = c.chunk_index;
        j["text"] = c.text;
        j["vector"] = c.vector;
        doc["chunks"].push_back(std::move(j));
    }
    return doc;
}

FlatIndex FlatIndex::from_json(nlohmann::json const & doc)
{
    auto fail = [](std::string path, std::string const & why) { throw LoadError(std::move(path), why); };
    if (!doc.is_object() || doc.value("format", "") != "svarefine-rag-index") {
        fail("format", "not an svarefine-rag-index document");
    }
    if (doc.value("version", 0) != 1) {
        fail("version", "unsupported version");
    }
    if (!doc.contains("dimension") || !doc["dimension"].is_number_unsigned()) {
        fail("dimension", "missing or not a non-negative integer");
    }
    if (!doc.contains("chunks") || !doc["chunks"].is_array()) {
        fail("chunks", "missing or not an array");
    }
    FlatIndex index;
    index.embedder_name_ = doc.value("embedder", "");
    auto const dim = doc["dimension"].get<std::size_t>();
    auto const & chunks = doc["chunks"];
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        auto const p = "chunks[" + std::to_string(i) + "]";
        auto const & j = chunks[i];
        if (!j.is_object()) {
            fail(p, "must be an object");
        }
        RagChunk c;
        if (!j.contains("doc_id") || !j["doc_id"].is_string()) {
            fail(p + ".doc_id", "missing or not a string");
        }
        if (!j.contains("chunk_index") || !j["chunk_index"].is_number_unsigned()) {
            fail(p + ".chunk_index", "missing or not a non-negative integer");
        }
        if (!j.contains("text") || !j["text"].is_string()) {
            fail(p + ".text", "missing or not a string");
        }
        if (!j.contains("vector") || !j["vector"].is_array()) {
            fail(p + ".vector", "missing or not an array");
        }
        c.doc_id = j["doc_id"].get<std::string>();
        c.chunk_index = j["chunk_index"].get<std::size_t>();
        c.text = j["text"].get<std::string>();
        for (auto const & x : j["vector"]) {
            if (!x.is_number()) {
                fail(p + ".vector", "must contain numbers");
            }
            c.vector.push_back(x.get<double>());
        }
        if (c.vector.size() != dim) {
            fail(p + ".vector", "length " + std::to_string(c.vector.size()) + " differs from dimension "
                + std::to_string(dim));
        }
        try {
            index.add_chunk(std::move(c));
        } catch (PreconditionError const & e) {
            fail(p, e.what());
        }
    }
    if (doc.contains("count") && doc["count"] != chunks.size()) {
        fail("count", "does not match the number of chunks");
    }
    if (index.dimension_ == 0) {
        index.dimension_ = dim;
    }
    return index;
}

void FlatIndex::save(std::string const & path) const
{
    detail::create_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write index file " + path);
    }
    out << to_json().dump() << "\n";
}

FlatIndex FlatIndex::load(std::string const & path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read index file " + path);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (nlohmann::json::parse_error const & e) {
        throw LoadError("$", e.what());
    }
    return from_json(doc);
}

std::string format_context(std::vector<QueryHit> const & hits)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i) {
            os << "\n\n";
        }
        os << "[" << hits[i].chunk->doc_id << " #" << hits[i].chunk->chunk_index << "]\n" << hits[i].chunk->text;
    }
    return os.str();
}

} // namespace svarefine::rag
