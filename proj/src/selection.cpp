#include "granur/selection.hpp"

#include <algorithm>

#include "granur/error.hpp"

namespace granur {

RelevanceRow RelevanceMatrix::row(std::uint32_t unit) const {
    const auto it = std::lower_bound(units.begin(), units.end(), unit);
    if (it == units.end() || *it != unit)
        throw Error(ErrorCode::OutOfRange, "unit " + std::to_string(unit) + " has no relevance row");
    const auto i = static_cast<std::size_t>(it - units.begin());
    const auto n = static_cast<std::size_t>(n_gra);
    RelevanceRow r;
    r.scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(i * n), scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    for (std::size_t g = 0; g < n; ++g)
        r.source.push_back(source[i * n + g] == kNoSource ? std::nullopt : std::optional<std::uint32_t>(source[i * n + g]));
    return r;
}

RelevanceMatrix build_relevance_matrix(const GranularityIndexSet& set, const LevelHits& hits) {
    if (static_cast<int>(hits.size()) != set.n_gra())
        throw Error(ErrorCode::InconsistentPyramid, "hit lists do not match the index set's level count");
    const auto n = hits.size();
    const auto n_units = set.units().size();

    // Row slot per unit, reset before returning so the buffer stays all-empty.
    thread_local std::vector<std::uint32_t> slot;
    if (slot.size() < n_units) slot.assign(n_units, RelevanceMatrix::kNoSource);
    std::vector<std::uint32_t> units;
    std::vector<double> scores;
    std::vector<std::uint32_t> source;
    auto reset = [&] {
        for (auto u : units) slot[u] = RelevanceMatrix::kNoSource;
    };

    for (std::size_t g = 0; g < n; ++g) {
        const auto& chunks = set.level(static_cast<int>(g) + 1).chunks;
        for (const auto& hit : hits[g]) {
            if (hit.ordinal >= chunks.size()) {
                reset();
                throw Error(ErrorCode::InconsistentPyramid, "hit references chunk " + std::to_string(hit.ordinal) +
                                                                " beyond level " + std::to_string(g + 1));
            }
            for (auto unit : chunks[hit.ordinal].members) {
                if (unit >= n_units) {
                    reset();
                    throw Error(ErrorCode::InconsistentPyramid, "chunk covers unknown unit");
                }
                if (slot[unit] == RelevanceMatrix::kNoSource) {
                    slot[unit] = static_cast<std::uint32_t>(units.size());
                    units.push_back(unit);
                    scores.resize(scores.size() + n, 0.0);
                    source.resize(source.size() + n, RelevanceMatrix::kNoSource);
                }
                const auto at = static_cast<std::size_t>(slot[unit]) * n + g;
                const bool better = source[at] == RelevanceMatrix::kNoSource || hit.score > scores[at] ||
                                    (hit.score == scores[at] && hit.ordinal < source[at]);
                if (better) {
                    scores[at] = hit.score;
                    source[at] = hit.ordinal;
                }
            }
        }
    }
    reset();

    // Reorder rows by unit id.
    std::vector<std::uint32_t> order(units.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return units[a] < units[b]; });
    RelevanceMatrix m;
    m.n_gra = static_cast<int>(n);
    m.units.reserve(units.size());
    m.scores.reserve(scores.size());
    m.source.reserve(source.size());
    for (auto i : order) {
        m.units.push_back(units[i]);
        m.scores.insert(m.scores.end(), scores.begin() + static_cast<std::ptrdiff_t>(i * n),
                        scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
        m.source.insert(m.source.end(), source.begin() + static_cast<std::ptrdiff_t>(i * n),
                        source.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    }
    return m;
}

namespace {

struct Ranked {
    std::uint32_t unit;
    std::uint32_t row;
    double fused;
};

}  // namespace

std::vector<SelectionResult> select(const GranularityIndexSet& set, const RelevanceMatrix& matrix,
                                    std::span<const double> w, std::size_t k, LevelRule rule) {
    if (matrix.empty()) throw Error(ErrorCode::EmptyMatrix, "no candidate chunks to select from");
    if (static_cast<int>(w.size()) != matrix.n_gra || matrix.n_gra != set.n_gra())
        throw Error(ErrorCode::DimMismatch, "weight vector length differs from n_gra");
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");

    const auto& units = set.units();
    std::vector<Ranked> ranked;
    ranked.reserve(matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        const auto row = matrix.scores_of(i);
        double fused = 0.0;
        for (std::size_t g = 0; g < w.size(); ++g) fused += row[g] * w[g];
        ranked.push_back(Ranked{matrix.units[i], static_cast<std::uint32_t>(i), fused});
    }
    const std::size_t take = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                      [&](const Ranked& a, const Ranked& b) {
                          if (a.fused != b.fused) return a.fused > b.fused;
                          const auto& ua = units[a.unit];
                          const auto& ub = units[b.unit];
                          if (ua.doc_id != ub.doc_id) return ua.doc_id < ub.doc_id;
                          if (ua.ordinal != ub.ordinal) return ua.ordinal < ub.ordinal;
                          return a.unit < b.unit;
                      });

    std::vector<SelectionResult> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto unit = ranked[i].unit;
        const auto row = matrix.scores_of(ranked[i].row);
        const auto* src = matrix.source.data() + static_cast<std::size_t>(ranked[i].row) * w.size();
        std::optional<std::size_t> level;
        for (std::size_t g = 0; g < w.size(); ++g) {
            const bool eligible = rule == LevelRule::containment ? row[g] != 0.0 : w[g] != 0.0;
            if (eligible && (!level || w[g] > w[*level])) level = g;
        }
        if (!level) throw Error(ErrorCode::EmptyMatrix, "candidate row has no eligible level");
        const auto& lv = set.level(static_cast<int>(*level) + 1);
        const std::uint32_t snippet_ordinal =
            rule == LevelRule::containment && src[*level] != RelevanceMatrix::kNoSource ? src[*level] : lv.home[unit];
        out.push_back(SelectionResult{unit, units[unit], static_cast<int>(*level) + 1, lv.chunks[snippet_ordinal],
                                      snippet_ordinal, ranked[i].fused});
    }
    return out;
}

std::vector<SelectionResult> retrieve_weighted(const GranularityIndexSet& set, std::span<const double> w,
                                               std::string_view query, const RetrieveParams& params) {
    const auto hits = search_all_levels(set, query, params.k_r);
    const auto matrix = build_relevance_matrix(set, hits);
    if (matrix.empty()) return {};
    return select(set, matrix, w, params.k, params.rule);
}

std::vector<SelectionResult> retrieve(const GranularityIndexSet& set, const RouterModel& router,
                                      const Embedder& embedder, std::string_view query, const RetrieveParams& params) {
    if (router.n_gra() != set.n_gra())
        throw Error(ErrorCode::DimMismatch, "router outputs " + std::to_string(router.n_gra()) + " levels, index has " +
                                                std::to_string(set.n_gra()));
    const auto e_q = embedder.embed(query);
    const auto w = forward(router, e_q);
    return retrieve_weighted(set, w, query, params);
}

std::vector<CorpusResult> fuse_corpora(std::span<const CorpusResults> per_corpus, std::size_t k_final) {
    if (k_final == 0) throw Error(ErrorCode::InvalidArgument, "k_final must be >= 1");
    std::vector<CorpusResult> all;
    for (const auto& c : per_corpus)
        for (const auto& r : c.results) all.push_back(CorpusResult{c.corpus_id, r});
    std::stable_sort(all.begin(), all.end(), [](const CorpusResult& a, const CorpusResult& b) {
        if (a.result.fused_score != b.result.fused_score) return a.result.fused_score > b.result.fused_score;
        if (a.corpus_id != b.corpus_id) return a.corpus_id < b.corpus_id;
        if (a.result.unit.doc_id != b.result.unit.doc_id) return a.result.unit.doc_id < b.result.unit.doc_id;
        return a.result.unit.ordinal < b.result.unit.ordinal;
    });
    if (all.size() > k_final) all.resize(k_final);
    return all;
}

std::string assemble_context(std::span<const CorpusResult> results, std::size_t max_chars) {
    if (max_chars == 0) throw Error(ErrorCode::InvalidArgument, "max_chars must be > 0");
    std::string out;
    for (const auto& r : results) {
        if (!out.empty()) out += "\n\n";
        out += "[source: " + r.corpus_id + "/" + r.result.unit.doc_id + "/" + std::to_string(r.result.g_r) + "] ";
        out += r.result.snippet.text;
    }
    if (out.size() <= max_chars) return out;

    auto is_ws = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; };
    std::size_t cut = max_chars;
    if (!is_ws(out[cut])) {
        std::size_t back = cut;
        while (back > 0 && !is_ws(out[back - 1])) --back;
        if (back > 0) {
            cut = back - 1;
        } else {
            // No whitespace at all: cut hard, but not inside a UTF-8 sequence.
            while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
        }
    }
    out.resize(cut);
    while (!out.empty() && is_ws(out.back())) out.pop_back();
    return out;
}

}  // namespace granur
