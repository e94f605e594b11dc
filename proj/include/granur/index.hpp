#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "granur/corpus.hpp"
#include "granur/parallel.hpp"

namespace granur {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
    std::uint32_t ordinal = 0;
    std::uint32_t tf = 0;
    friend bool operator==(const Posting&, const Posting&) = default;
};

struct PostingList {
    std::string term;
    std::vector<Posting> entries;  // ascending ordinal, tf >= 1
    friend bool operator==(const PostingList&, const PostingList&) = default;
};

/// A scored chunk; ordinal indexes the searched index's chunk list.
struct Hit {
    std::uint32_t ordinal = 0;
    double score = 0.0;
    friend bool operator==(const Hit&, const Hit&) = default;
};

/// Immutable BM25 inverted index over one list of chunks.
///
/// Scoring uses idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)), which stays
/// positive on tiny corpora, and the usual saturating tf component
/// tf (k1 + 1) / (tf + k1 (1 - b + b dl / avg_dl)). Each distinct query term
/// contributes once.
class Bm25Index {
public:
    Bm25Index() = default;

    /// Throws EmptyCorpus when token_lists is empty.
    static Bm25Index build(std::span<const std::vector<std::string>> token_lists, Bm25Params params,
                           std::vector<ChunkId> chunk_refs);

    std::vector<Hit> search(std::string_view query, std::size_t k) const;
    std::vector<Hit> search_tokens(std::span<const std::string> query_tokens, std::size_t k) const;

    double idf(std::string_view term) const;
    /// Reference scorer for a single chunk, used by tests and diagnostics.
    double score(std::span<const std::string> query_tokens, std::uint32_t ordinal) const;

    const PostingList* postings(std::string_view term) const;
    const std::vector<PostingList>& all_postings() const noexcept { return postings_; }
    const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
    const std::vector<ChunkId>& chunk_refs() const noexcept { return chunk_refs_; }
    std::size_t size() const noexcept { return doc_lengths_.size(); }
    double avg_dl() const noexcept { return avg_dl_; }
    const Bm25Params& params() const noexcept { return params_; }

    /// Writes header.json, postings.bin and refs.jsonl into dir.
    void save(const std::filesystem::path& dir) const;
    static Bm25Index load(const std::filesystem::path& dir);

    friend bool operator==(const Bm25Index& a, const Bm25Index& b) {
        return a.params_ == b.params_ && a.avg_dl_ == b.avg_dl_ && a.doc_lengths_ == b.doc_lengths_ &&
               a.postings_ == b.postings_ && a.chunk_refs_ == b.chunk_refs_;
    }

private:
    void finalize();
    std::vector<std::uint32_t> distinct_term_ids(std::span<const std::string> tokens) const;

    Bm25Params params_;
    double avg_dl_ = 0.0;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<PostingList> postings_;  // sorted by term
    std::vector<ChunkId> chunk_refs_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<double> idf_;
    std::vector<double> length_norm_;  // k1 (1 - b + b dl / avg_dl)
};

Bm25Index build_index(std::span<const Chunk> chunks, Bm25Params params = {});

/// Scores many queries against one index; Exec::parallel spreads queries over
/// OpenMP workers. Results are identical either way.
std::vector<std::vector<Hit>> search_batch(const Bm25Index& index,
                                           std::span<const std::vector<std::string>> queries,
                                           std::size_t k, Exec exec = Exec::parallel);

/// One finest retrieval unit: a level-1 chunk (MoG) or a graph node (MoGG).
struct Unit {
    std::string doc_id;
    std::uint32_t ordinal = 0;  // finest ordinal within the document, or node id
    friend bool operator==(const Unit&, const Unit&) = default;
};

/// An indexed chunk at some level together with the finest units it covers.
struct LevelChunk {
    ChunkId id;
    std::vector<std::uint32_t> members;  // global unit ids, first is the anchor
    std::string text;
    friend bool operator==(const LevelChunk&, const LevelChunk&) = default;
};

enum class IndexKind { mog, mogg };

/// One BM25 index per granularity level over the same units.
///
/// Besides the indices, each level records for every unit its home chunk:
/// the containing chunk for the hierarchical pyramid, or the neighborhood
/// centered on the unit for graph-backed sets.
class GranularityIndexSet {
public:
    struct Level {
        Bm25Index index;
        std::vector<LevelChunk> chunks;
        std::vector<std::uint32_t> home;  // unit id -> chunk ordinal
        friend bool operator==(const Level&, const Level&) = default;
    };

    GranularityIndexSet() = default;
    GranularityIndexSet(IndexKind kind, std::vector<Unit> units, std::vector<Level> levels);

    /// Tokenizes and indexes each level. homes[g][u] gives unit u's home chunk at level g.
    static GranularityIndexSet from_levels(IndexKind kind, std::vector<Unit> units,
                                           std::vector<std::vector<LevelChunk>> levels,
                                           std::vector<std::vector<std::uint32_t>> homes,
                                           Bm25Params params, Exec exec = Exec::parallel);

    IndexKind kind() const noexcept { return kind_; }
    int n_gra() const noexcept { return static_cast<int>(levels_.size()); }
    const std::vector<Unit>& units() const noexcept { return units_; }
    /// 1-based.
    const Level& level(int level) const;

    /// First n levels only; used to compare retrieval cost across level counts.
    GranularityIndexSet prefix(int n) const;

    void save(const std::filesystem::path& dir) const;
    static GranularityIndexSet load(const std::filesystem::path& dir);

    friend bool operator==(const GranularityIndexSet&, const GranularityIndexSet&) = default;

private:
    IndexKind kind_ = IndexKind::mog;
    std::vector<Unit> units_;
    std::vector<Level> levels_;
};

/// Hierarchical set: level g holds every pyramid's level-g chunks, units are the
/// level-1 chunks in document order.
GranularityIndexSet build_mog_indexset(std::span<const ChunkPyramid> pyramids, Bm25Params params = {},
                                       Exec exec = Exec::parallel);

using LevelHits = std::vector<std::vector<Hit>>;

/// k_r best chunks from each level; the pool holds at most n_gra * k_r hits.
LevelHits search_all_levels(const GranularityIndexSet& set, std::string_view query, std::size_t k_r);

}  // namespace granur
