// Serial reference vs OpenMP kernels. Arg 0 runs Exec::serial, 1 Exec::parallel.

#include <benchmark/benchmark.h>

#include "granur/eval.hpp"
#include "granur/graph.hpp"
#include "granur/index.hpp"
#include "granur/softlabel.hpp"
#include "granur/text.hpp"

using namespace granur;

namespace {

std::string words(Rng& rng, std::size_t n, std::size_t vocab, std::size_t sentence_len = 12) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(rng.below(vocab));
        if ((i + 1) % sentence_len == 0) out += '.';
    }
    return out + ".";
}

std::vector<Document> corpus(std::size_t docs, std::size_t tokens) {
    Rng rng(1);
    std::vector<Document> out;
    for (std::size_t d = 0; d < docs; ++d) out.push_back(Document{"doc" + std::to_string(d), "", words(rng, tokens, 3000)});
    return out;
}

std::vector<QaExample> questions(std::size_t n) {
    Rng rng(2);
    std::vector<QaExample> qa;
    for (std::size_t i = 0; i < n; ++i) qa.push_back(make_qa(words(rng, 6, 3000, 100), words(rng, 2, 3000, 100)));
    return qa;
}

const GranularityIndexSet& mog_set() {
    static const GranularityIndexSet set = [] {
        std::vector<ChunkPyramid> p;
        for (const auto& d : corpus(100, 3200)) p.push_back(build_pyramid(d, 32, 5));
        return build_mog_indexset(p);
    }();
    return set;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_BuildIndexSet(benchmark::State& state) {
    std::vector<ChunkPyramid> p;
    for (const auto& d : corpus(100, 3200)) p.push_back(build_pyramid(d, 32, 5));
    for (auto _ : state) benchmark::DoNotOptimize(build_mog_indexset(p, {}, exec_of(state)));
}

void BM_BuildGraph(benchmark::State& state) {
    const auto nodes = build_nodes(corpus(40, 600), 2);
    for (auto _ : state) benchmark::DoNotOptimize(build_graph(nodes, 3, 0.0, {}, exec_of(state)));
    state.counters["nodes"] = static_cast<double>(nodes.size());
}

void BM_SearchBatch(benchmark::State& state) {
    const auto qa = questions(2000);
    std::vector<std::vector<std::string>> queries;
    for (const auto& q : qa) queries.push_back(tokenize(q.question));
    const auto& index = mog_set().level(1).index;
    for (auto _ : state) benchmark::DoNotOptimize(search_batch(index, queries, 3, exec_of(state)));
}

void BM_BuildDataset(benchmark::State& state) {
    const auto qa = questions(300);
    const HashedTfidfEmbedder emb(256);
    const SimilarityScorer scorer(SimMethod::tfidf_cosine, &mog_set().level(1).index);
    for (auto _ : state) benchmark::DoNotOptimize(build_dataset(mog_set(), qa, scorer, emb, {}, exec_of(state)));
}

void BM_Eval(benchmark::State& state) {
    const auto qa = questions(500);
    const HashedTfidfEmbedder emb(256);
    const auto router = RouterModel::initialize(default_layer_dims(256, 5), 3);
    const Pipeline pipeline({NamedIndexSet{"c", mog_set()}}, &router, &emb, {}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(eval_retrieval(pipeline, qa, {}, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_BuildIndexSet)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildGraph)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SearchBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Eval)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
