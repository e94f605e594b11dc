#include "granur/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <charconv>

#include "json.hpp"

#include "granur/error.hpp"
#include "granur/text.hpp"

namespace granur {

using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

Pipeline::Pipeline(std::vector<NamedIndexSet> corpora, const RouterModel* router, const Embedder* embedder,
                   RetrieveParams params, std::size_t k_final)
    : corpora_(std::move(corpora)), router_(router), embedder_(embedder), params_(params), k_final_(k_final) {
    if (corpora_.empty()) throw Error(ErrorCode::InvalidArgument, "pipeline needs at least one corpus");
    if (router_ == nullptr || embedder_ == nullptr) throw Error(ErrorCode::InvalidArgument, "pipeline needs router and embedder");
    std::sort(corpora_.begin(), corpora_.end(),
              [](const NamedIndexSet& a, const NamedIndexSet& b) { return a.corpus_id < b.corpus_id; });
    for (const auto& c : corpora_) {
        if (c.set.n_gra() != corpora_.front().set.n_gra())
            throw Error(ErrorCode::Config, "corpora disagree on the number of levels");
        if (c.set.n_gra() > router_->n_gra())
            throw Error(ErrorCode::DimMismatch, "corpus '" + c.corpus_id + "' has more levels than the router outputs");
    }
    if (router_->input_dim() != embedder_->dim())
        throw Error(ErrorCode::DimMismatch, "router input " + std::to_string(router_->input_dim()) +
                                                " != embedder dim " + std::to_string(embedder_->dim()));
    if (k_final_ == 0) throw Error(ErrorCode::InvalidArgument, "k_final must be >= 1");
}

Pipeline::Answer Pipeline::query(std::string_view text) const {
    Answer answer;
    const auto e_q = embedder_->embed(text);
    answer.weights = forward(*router_, e_q);
    std::vector<double> w(answer.weights.begin(), answer.weights.begin() + n_gra());
    std::vector<CorpusResults> per_corpus;
    per_corpus.reserve(corpora_.size());
    for (const auto& c : corpora_) per_corpus.push_back(CorpusResults{c.corpus_id, retrieve_weighted(c.set, w, text, params_)});
    answer.results = fuse_corpora(per_corpus, k_final_);
    return answer;
}

Pipeline Pipeline::with_levels(int n) const {
    std::vector<NamedIndexSet> sub;
    for (const auto& c : corpora_) sub.push_back(NamedIndexSet{c.corpus_id, c.set.prefix(n)});
    return Pipeline(std::move(sub), router_, embedder_, params_, k_final_);
}

Pipeline Pipeline::with_params(RetrieveParams params) const {
    return Pipeline(corpora_, router_, embedder_, params, k_final_);
}

bool contains_answer(std::string_view snippet, std::string_view answer) {
    const auto needle = tokenize(answer);
    if (needle.empty()) return false;
    const auto hay = tokenize(snippet);
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

Metrics aggregate(std::span<const QueryRecord> records, std::size_t k_final, int n_gra) {
    Metrics m;
    m.n_queries = records.size();
    m.hitrate_at_k.assign(k_final, 0.0);
    m.mean_weight_per_level.assign(static_cast<std::size_t>(n_gra), 0.0);
    std::vector<double> latencies;
    std::size_t weighted = 0;
    for (const auto& r : records) {
        latencies.push_back(r.latency_ms);
        if (!r.error.empty()) {
            ++m.n_failed;
            continue;
        }
        if (r.first_hit_rank) {
            m.mrr += 1.0 / static_cast<double>(*r.first_hit_rank);
            for (std::size_t k = *r.first_hit_rank; k <= k_final; ++k) m.hitrate_at_k[k - 1] += 1.0;
        }
        if (r.weights.size() >= m.mean_weight_per_level.size()) {
            for (std::size_t g = 0; g < m.mean_weight_per_level.size(); ++g) m.mean_weight_per_level[g] += r.weights[g];
            ++weighted;
        }
    }
    if (m.n_queries > 0) {
        const auto n = static_cast<double>(m.n_queries);
        for (auto& h : m.hitrate_at_k) h /= n;
        m.mrr /= n;
    }
    if (weighted > 0)
        for (auto& w : m.mean_weight_per_level) w /= static_cast<double>(weighted);
    m.p50_latency_ms = percentile(latencies, 50.0);
    m.p95_latency_ms = percentile(latencies, 95.0);
    return m;
}

EvalRun eval_retrieval(const Pipeline& pipeline, std::span<const QaExample> qa, EvalConfig config, Exec exec) {
    EvalRun run;
    run.config = std::move(config);
    run.records.resize(qa.size());
    parallel_for(qa.size(), exec, [&](std::size_t i) {
        auto& rec = run.records[i];
        rec.qid = i;
        rec.query = qa[i].question;
        rec.gold = qa[i].answer;
        const auto start = std::chrono::steady_clock::now();
        try {
            auto answer = pipeline.query(qa[i].question);
            rec.weights = std::move(answer.weights);
            for (std::size_t r = 0; r < answer.results.size(); ++r) {
                const auto& res = answer.results[r];
                ResultRecord out{res.corpus_id,      res.result.unit.doc_id,       res.result.g_r,
                                 res.result.snippet.id.ordinal, res.result.unit.ordinal, res.result.fused_score,
                                 contains_answer(res.result.snippet.text, qa[i].answer)};
                if (out.hit && !rec.first_hit_rank) rec.first_hit_rank = r + 1;
                rec.results.push_back(std::move(out));
            }
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        rec.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    });
    run.metrics = aggregate(run.records, pipeline.k_final(), pipeline.n_gra());
    return run;
}

std::string metrics_csv(const Metrics& m) {
    std::string out = "metric,value\n";
    out += "n_queries," + std::to_string(m.n_queries) + "\n";
    out += "n_failed," + std::to_string(m.n_failed) + "\n";
    for (std::size_t k = 0; k < m.hitrate_at_k.size(); ++k)
        out += "hitrate_at_" + std::to_string(k + 1) + "," + num(m.hitrate_at_k[k]) + "\n";
    out += "mrr," + num(m.mrr) + "\n";
    for (std::size_t g = 0; g < m.mean_weight_per_level.size(); ++g)
        out += "mean_weight_level_" + std::to_string(g + 1) + "," + num(m.mean_weight_per_level[g]) + "\n";
    return out;
}

std::string latency_csv(const Metrics& m) {
    return "metric,value\np50_latency_ms," + num(m.p50_latency_ms) + "\np95_latency_ms," + num(m.p95_latency_ms) + "\n";
}

std::string run_json(const EvalRun& run, bool include_latency) {
    const auto& c = run.config;
    json config = {{"corpora", c.corpora}, {"n_gra", c.n_gra},   {"k_r", c.k_r},
                   {"k", c.k},             {"k_final", c.k_final}, {"method", c.method},
                   {"seed", c.seed},       {"embedder", c.embedder}, {"level_rule", c.level_rule}};
    json records = json::array();
    for (const auto& r : run.records) {
        json results = json::array();
        for (const auto& res : r.results)
            results.push_back({{"corpus", res.corpus},
                               {"doc_id", res.doc_id},
                               {"level", res.level},
                               {"ordinal", res.ordinal},
                               {"finest_ordinal", res.finest_ordinal},
                               {"fused_score", res.fused_score},
                               {"hit", res.hit}});
        json rec = {{"qid", r.qid},         {"query", r.query}, {"gold", r.gold}, {"results", std::move(results)},
                    {"weights", r.weights}, {"hit_rank", r.first_hit_rank ? json(*r.first_hit_rank) : json(nullptr)}};
        if (!r.error.empty()) rec["error"] = r.error;
        if (include_latency) rec["latency_ms"] = r.latency_ms;
        records.push_back(std::move(rec));
    }
    const auto& m = run.metrics;
    json metrics = {{"n_queries", m.n_queries},
                    {"n_failed", m.n_failed},
                    {"hitrate_at_k", m.hitrate_at_k},
                    {"mrr", m.mrr},
                    {"mean_weight_per_level", m.mean_weight_per_level}};
    if (include_latency) {
        metrics["p50_latency_ms"] = m.p50_latency_ms;
        metrics["p95_latency_ms"] = m.p95_latency_ms;
    }
    json j = {{"v", 1}, {"config", std::move(config)}, {"records", std::move(records)}, {"metrics", std::move(metrics)}};
    return j.dump(2) + "\n";
}

WeightReport weight_report(const RouterModel& router, const Embedder& embedder, std::span<const QaExample> qa) {
    const auto n = static_cast<std::size_t>(router.n_gra());
    WeightReport rep;
    rep.mean_weight.assign(n, 0.0);
    rep.top1_fraction.assign(n, 0.0);
    rep.histogram.assign(n, std::vector<std::size_t>(10, 0));
    if (qa.empty()) return rep;
    for (const auto& q : qa) {
        const auto w = forward(router, embedder.embed(q.question));
        std::size_t best = 0;
        for (std::size_t g = 0; g < n; ++g) {
            rep.mean_weight[g] += w[g];
            rep.histogram[g][std::min<std::size_t>(9, static_cast<std::size_t>(w[g] * 10.0))] += 1;
            if (w[g] > w[best]) best = g;
        }
        rep.top1_fraction[best] += 1.0;
    }
    for (std::size_t g = 0; g < n; ++g) {
        rep.mean_weight[g] /= static_cast<double>(qa.size());
        rep.top1_fraction[g] /= static_cast<double>(qa.size());
    }
    return rep;
}

std::string weight_report_csv(const WeightReport& report) {
    std::string out = "level,mean_weight,top1_fraction";
    for (int b = 0; b < 10; ++b) out += ",bin_" + std::to_string(b);
    out += "\n";
    for (std::size_t g = 0; g < report.mean_weight.size(); ++g) {
        out += std::to_string(g + 1) + "," + num(report.mean_weight[g]) + "," + num(report.top1_fraction[g]);
        for (auto c : report.histogram[g]) out += "," + std::to_string(c);
        out += "\n";
    }
    return out;
}

std::vector<SweepRow> sweep_k_r(const Pipeline& pipeline, std::span<const QaExample> qa,
                                std::span<const std::size_t> k_r_values, Exec exec) {
    std::vector<SweepRow> rows;
    for (auto k_r : k_r_values) {
        auto params = pipeline.params();
        params.k_r = k_r;
        EvalConfig cfg;
        cfg.k_r = k_r;
        rows.push_back(SweepRow{k_r, eval_retrieval(pipeline.with_params(params), qa, cfg, exec).metrics});
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "k_r,n_queries";
    const std::size_t width = rows.empty() ? 0 : rows.front().metrics.hitrate_at_k.size();
    for (std::size_t k = 0; k < width; ++k) out += ",hitrate_at_" + std::to_string(k + 1);
    out += ",mrr\n";
    for (const auto& r : rows) {
        out += std::to_string(r.k_r) + "," + std::to_string(r.metrics.n_queries);
        for (double h : r.metrics.hitrate_at_k) out += "," + num(h);
        out += "," + num(r.metrics.mrr) + "\n";
    }
    return out;
}

std::vector<TimingRow> timing_report(const Pipeline& pipeline, std::span<const QaExample> qa,
                                     std::span<const int> levels, int repeats) {
    std::vector<TimingRow> rows;
    for (int n : levels) {
        const auto sub = pipeline.with_levels(n);
        std::vector<double> samples;
        for (int rep = 0; rep < std::max(1, repeats); ++rep)
            for (const auto& q : qa) {
                const auto start = std::chrono::steady_clock::now();
                const auto answer = sub.query(q.question);
                samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
                (void)answer;
            }
        rows.push_back(TimingRow{n, percentile(samples, 50.0), percentile(samples, 95.0)});
    }
    return rows;
}

std::string timing_csv(std::span<const TimingRow> rows) {
    std::string out = "levels,median_ms,p95_ms\n";
    for (const auto& r : rows) out += std::to_string(r.levels) + "," + num(r.median_ms) + "," + num(r.p95_ms) + "\n";
    return out;
}

}  // namespace granur
