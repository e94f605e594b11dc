#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "granur/embed.hpp"
#include "granur/index.hpp"
#include "granur/parallel.hpp"
#include "granur/router.hpp"
#include "granur/selection.hpp"
#include "granur/softlabel.hpp"

namespace granur {

struct NamedIndexSet {
    std::string corpus_id;
    GranularityIndexSet set;
};

/// Routed retrieval over several corpora with one router and one embedder.
/// Borrowed pointers must outlive the pipeline.
class Pipeline {
public:
    struct Answer {
        std::vector<double> weights;
        std::vector<CorpusResult> results;  // fused, at most k_final
    };

    Pipeline(std::vector<NamedIndexSet> corpora, const RouterModel* router, const Embedder* embedder,
             RetrieveParams params, std::size_t k_final);

    /// Per-corpus retrieval followed by cross-corpus fusion. When an index set
    /// has fewer levels than the router outputs, the leading weights are used.
    Answer query(std::string_view text) const;

    /// Same pipeline restricted to the first n levels of every corpus.
    Pipeline with_levels(int n) const;
    Pipeline with_params(RetrieveParams params) const;

    const std::vector<NamedIndexSet>& corpora() const noexcept { return corpora_; }
    const RetrieveParams& params() const noexcept { return params_; }
    std::size_t k_final() const noexcept { return k_final_; }
    int n_gra() const noexcept { return corpora_.front().set.n_gra(); }
    const RouterModel& router() const noexcept { return *router_; }
    const Embedder& embedder() const noexcept { return *embedder_; }

private:
    std::vector<NamedIndexSet> corpora_;
    const RouterModel* router_;
    const Embedder* embedder_;
    RetrieveParams params_;
    std::size_t k_final_;
};

/// True when the answer's token sequence occurs contiguously in the snippet's
/// tokens (both lowercased). Answers with no tokens never match.
bool contains_answer(std::string_view snippet, std::string_view answer);

struct EvalConfig {
    std::vector<std::string> corpora;
    int n_gra = 5;
    std::size_t k_r = 3;
    std::size_t k = 3;
    std::size_t k_final = 2;
    std::string method = "tfidf_cosine";
    std::uint64_t seed = 0;
    std::string embedder = "hashed_tfidf";
    std::string level_rule = "containment";
};

struct ResultRecord {
    std::string corpus;
    std::string doc_id;
    int level = 1;
    std::uint32_t ordinal = 0;         // snippet's ordinal at its level
    std::uint32_t finest_ordinal = 0;  // chunk_r's ordinal
    double fused_score = 0.0;
    bool hit = false;
};

struct QueryRecord {
    std::size_t qid = 0;
    std::string query;
    std::string gold;
    std::vector<ResultRecord> results;
    std::vector<double> weights;
    std::optional<std::size_t> first_hit_rank;  // 1-based
    double latency_ms = 0.0;
    std::string error;  // non-empty when the query failed
};

struct Metrics {
    std::size_t n_queries = 0;
    std::size_t n_failed = 0;
    std::vector<double> hitrate_at_k;  // index k-1, k = 1..k_final
    double mrr = 0.0;
    std::vector<double> mean_weight_per_level;
    double p50_latency_ms = 0.0;
    double p95_latency_ms = 0.0;
};

struct EvalRun {
    EvalConfig config;
    std::vector<QueryRecord> records;
    Metrics metrics;
};

/// Recomputes every aggregate from the per-query records.
Metrics aggregate(std::span<const QueryRecord> records, std::size_t k_final, int n_gra);

/// Evaluates each QA example: hit when any returned snippet contains the gold
/// answer, reciprocal rank of the first such snippet. Per-query failures are
/// recorded, not raised. Queries run on OpenMP workers under Exec::parallel;
/// records keep input order either way.
EvalRun eval_retrieval(const Pipeline& pipeline, std::span<const QaExample> qa, EvalConfig config,
                       Exec exec = Exec::parallel);

/// Metrics as CSV (metric,value). Latency is excluded so the file is
/// byte-identical across reruns.
std::string metrics_csv(const Metrics& m);
std::string latency_csv(const Metrics& m);

/// run.json, schema "v": 1. Latencies are included only when requested.
std::string run_json(const EvalRun& run, bool include_latency = false);

struct WeightReport {
    std::vector<double> mean_weight;
    std::vector<double> top1_fraction;
    std::vector<std::vector<std::size_t>> histogram;  // per level, 10 equal bins over [0, 1]
};

/// Router weight distribution over the questions.
WeightReport weight_report(const RouterModel& router, const Embedder& embedder, std::span<const QaExample> qa);
std::string weight_report_csv(const WeightReport& report);

struct SweepRow {
    std::size_t k_r = 0;
    Metrics metrics;
};

std::vector<SweepRow> sweep_k_r(const Pipeline& pipeline, std::span<const QaExample> qa,
                                std::span<const std::size_t> k_r_values, Exec exec = Exec::parallel);
std::string sweep_csv(std::span<const SweepRow> rows);

struct TimingRow {
    int levels = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

/// Wall-clock retrieval latency (embed, route, search, select) per level
/// count. Always serial: timing under contention is meaningless.
std::vector<TimingRow> timing_report(const Pipeline& pipeline, std::span<const QaExample> qa,
                                     std::span<const int> levels, int repeats = 1);
std::string timing_csv(std::span<const TimingRow> rows);

/// Nearest-rank percentile, p in (0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace granur
