#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "granur/embed.hpp"
#include "granur/index.hpp"
#include "granur/router.hpp"

namespace granur {

/// t_rs for one finest unit: the score of the retrieved chunk covering it at
/// each level (0 where none was retrieved), plus which chunk that was.
struct RelevanceRow {
    std::vector<double> scores;
    std::vector<std::optional<std::uint32_t>> source;  // chunk ordinal within the level
};

/// Rows of t_rs for every unit some hit covers, ascending by unit id, stored
/// flat: row i, level g lives at i * n_gra + g.
struct RelevanceMatrix {
    static constexpr std::uint32_t kNoSource = 0xffffffffu;

    int n_gra = 0;
    std::vector<std::uint32_t> units;
    std::vector<double> scores;
    std::vector<std::uint32_t> source;  // kNoSource where the level retrieved nothing

    bool empty() const noexcept { return units.empty(); }
    std::size_t size() const noexcept { return units.size(); }
    std::span<const double> scores_of(std::size_t row) const {
        return {scores.data() + row * static_cast<std::size_t>(n_gra), static_cast<std::size_t>(n_gra)};
    }
    /// Copy of the row for `unit`. Throws OutOfRange if no hit covers it.
    RelevanceRow row(std::uint32_t unit) const;
};

/// Expands every hit to the finest units it covers and records its score for
/// that level. A unit covered by several hits at one level keeps the maximum
/// (possible only for overlapping graph neighborhoods).
/// Throws InconsistentPyramid for hits that reference nonexistent chunks.
RelevanceMatrix build_relevance_matrix(const GranularityIndexSet& set, const LevelHits& hits);

/// How the returned granularity is chosen once chunk_r is fixed.
enum class LevelRule {
    /// argmax w_g over levels where chunk_r was actually retrieved; the
    /// returned snippet is the retrieved chunk containing chunk_r.
    containment,
    /// argmax w_g over all levels with w_g != 0, regardless of retrieval; the
    /// returned snippet is chunk_r's home chunk at that level.
    weight_only,
};

struct SelectionResult {
    std::uint32_t chunk_r = 0;  // global unit id
    Unit unit;
    int g_r = 1;  // 1-based
    LevelChunk snippet;
    std::uint32_t snippet_ordinal = 0;  // within level g_r
    double fused_score = 0.0;           // t_rs(chunk_r) . w
};

/// Ranks finest units by t_rs . w (ties by doc id, then ordinal) and expands
/// each of the top k to its snippet. Throws EmptyMatrix on an empty matrix and
/// DimMismatch if w's length differs from n_gra.
std::vector<SelectionResult> select(const GranularityIndexSet& set, const RelevanceMatrix& matrix,
                                    std::span<const double> w, std::size_t k, LevelRule rule = LevelRule::containment);

struct RetrieveParams {
    std::size_t k_r = 3;
    std::size_t k = 3;
    LevelRule rule = LevelRule::containment;
};

/// embed -> route -> per-level BM25 -> relevance matrix -> select. Returns an
/// empty list when nothing in the corpus matches the query.
std::vector<SelectionResult> retrieve(const GranularityIndexSet& set, const RouterModel& router,
                                      const Embedder& embedder, std::string_view query, const RetrieveParams& params);

/// Same as retrieve, with the router output already computed.
std::vector<SelectionResult> retrieve_weighted(const GranularityIndexSet& set, std::span<const double> w,
                                               std::string_view query, const RetrieveParams& params);

struct CorpusResult {
    std::string corpus_id;
    SelectionResult result;
};

struct CorpusResults {
    std::string corpus_id;
    std::vector<SelectionResult> results;
};

/// Global top k_final by fused score across corpora; ties by corpus id, then
/// document order.
std::vector<CorpusResult> fuse_corpora(std::span<const CorpusResults> per_corpus, std::size_t k_final = 2);

/// Snippets in rank order, each prefixed "[source: corpus/doc/level]",
/// separated by blank lines and cut at max_chars on a whitespace boundary.
std::string assemble_context(std::span<const CorpusResult> results, std::size_t max_chars);

}  // namespace granur
