#include "granur/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "granur/config.hpp"
#include "granur/corpus.hpp"
#include "granur/error.hpp"
#include "granur/eval.hpp"
#include "granur/graph.hpp"
#include "granur/io.hpp"
#include "granur/parallel.hpp"
#include "granur/text.hpp"

namespace granur {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Ctx {
    PipelineConfig cfg;
    Exec exec = Exec::parallel;
    std::ostream& out;
    std::ostream& err;
};

fs::path index_dir(const PipelineConfig& cfg, const std::string& id) {
    return cfg.corpus_dir / id / (cfg.mogg ? "mogg" : "mog");
}

fs::path graph_path(const PipelineConfig& cfg, const std::string& id) { return cfg.corpus_dir / id / "graph.jsonl"; }

void require_corpora(const PipelineConfig& cfg) {
    if (cfg.corpora.empty()) throw Error(ErrorCode::Config, "no corpora given (use --corpus or corpora = ...)");
}

// Corpus ids to query: the configured corpora, else every built corpus under corpus_dir.
std::vector<std::string> corpus_ids(const PipelineConfig& cfg) {
    std::vector<std::string> ids;
    for (const auto& p : cfg.corpora) ids.push_back(corpus_id(p));
    if (ids.empty()) {
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(cfg.corpus_dir, ec))
            if (fs::is_directory(index_dir(cfg, entry.path().filename().string())))
                ids.push_back(entry.path().filename().string());
        std::sort(ids.begin(), ids.end());
    }
    if (ids.empty())
        throw Error(ErrorCode::Io, "no built " + std::string(cfg.mogg ? "mogg" : "mog") + " indexes under " +
                                       cfg.corpus_dir.string());
    return ids;
}

GranularityIndexSet load_set(const PipelineConfig& cfg, const std::string& id) {
    auto set = GranularityIndexSet::load(index_dir(cfg, id));
    if (set.n_gra() < cfg.n_gra)
        throw Error(ErrorCode::Config, "index '" + id + "' has " + std::to_string(set.n_gra()) + " levels, n_gra is " +
                                           std::to_string(cfg.n_gra));
    if (set.n_gra() > cfg.n_gra) set = set.prefix(cfg.n_gra);
    return set;
}

std::string label_corpus(const PipelineConfig& cfg) {
    if (!cfg.train_corpus.empty()) return cfg.train_corpus;
    return corpus_ids(cfg).front();
}

// Shortest text that reads back to the same double.
std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

int cmd_build_index(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    require_corpora(cfg);
    for (const auto& path : cfg.corpora) {
        const auto id = corpus_id(path);
        const auto docs = load_corpus_jsonl(path);
        std::vector<ChunkPyramid> pyramids;
        pyramids.reserve(docs.size());
        for (const auto& d : docs) pyramids.push_back(build_pyramid(d, cfg.base_size, cfg.n_gra));
        const auto set = build_mog_indexset(pyramids, cfg.bm25, ctx.exec);
        const auto dir = cfg.corpus_dir / id / "mog";
        set.save(dir);
        ctx.err << id << ": " << docs.size() << " documents, " << set.units().size() << " finest chunks -> "
                << dir.string() << "\n";
    }
    return 0;
}

int cmd_build_graph(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    require_corpora(cfg);
    for (const auto& path : cfg.corpora) {
        const auto id = corpus_id(path);
        const auto docs = load_corpus_jsonl(path);
        auto graph = build_graph(build_nodes(docs, cfg.sentences_per_node), cfg.k_graph, cfg.t_graph, cfg.bm25, ctx.exec);
        graph.save(graph_path(cfg, id));
        const auto set = build_graph_indexset(graph, cfg.n_gra, cfg.bm25, ctx.exec);
        const auto dir = cfg.corpus_dir / id / "mogg";
        set.save(dir);
        ctx.err << id << ": " << graph.size() << " nodes, " << graph.edge_count() << " edges -> " << dir.string() << "\n";
    }
    return 0;
}

int cmd_build_labels(Ctx& ctx, const fs::path& qa_path, const fs::path& out_path) {
    const auto& cfg = ctx.cfg;
    const auto id = label_corpus(cfg);
    const auto set = load_set(cfg, id);
    const auto qa = load_qa_jsonl(qa_path);
    const auto embedder = make_embedder(cfg.embedder);
    const SimilarityScorer scorer(cfg.method, &set.level(1).index, embedder.get());
    const auto ds = build_dataset(set, qa, scorer, *embedder, cfg.label_values, ctx.exec);
    save_dataset(ds, out_path);
    ctx.err << id << ": " << ds.examples.size() << " labeled, " << ds.skipped.size() << " skipped -> "
            << out_path.string() << "\n";
    return 0;
}

int cmd_train(Ctx& ctx, const fs::path& labels_path, const fs::path& out_path, const fs::path& loss_csv) {
    const auto& cfg = ctx.cfg;
    const auto ds = load_dataset(labels_path);
    if (ds.examples.empty()) throw Error(ErrorCode::EmptyCorpus, labels_path.string() + ": no training examples");
    std::vector<TrainExample> examples;
    examples.reserve(ds.examples.size());
    for (const auto& ex : ds.examples) examples.push_back(ex.example);

    const int d = static_cast<int>(examples.front().embedding.size());
    const int n_gra = static_cast<int>(examples.front().soft_label.size());
    std::vector<int> dims{d};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(n_gra);
    auto train_cfg = cfg.train;
    train_cfg.seed = cfg.seed;
    const auto result = train(RouterModel::initialize(dims, cfg.seed), examples, train_cfg);
    save_model(result.model, out_path);

    if (!loss_csv.empty()) {
        std::string csv = "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_history.size(); ++e)
            csv += std::to_string(e + 1) + "," + num(result.loss_history[e]) + "\n";
        io::write_file_atomic(loss_csv, csv);
    }
    ctx.err << "trained " << result.loss_history.size() << " epochs"
            << (result.early_stopped ? " (early stop)" : "") << ", final loss "
            << (result.loss_history.empty() ? 0.0 : result.loss_history.back()) << " -> " << out_path.string() << "\n";
    return 0;
}

std::vector<NamedIndexSet> load_corpora(const PipelineConfig& cfg) {
    std::vector<NamedIndexSet> sets;
    for (const auto& id : corpus_ids(cfg)) sets.push_back(NamedIndexSet{id, load_set(cfg, id)});
    return sets;
}

RetrieveParams retrieve_params(const PipelineConfig& cfg) { return RetrieveParams{cfg.k_r, cfg.k, cfg.rule}; }

int cmd_retrieve(Ctx& ctx, const std::string& query, const fs::path& router_path, bool context) {
    const auto& cfg = ctx.cfg;
    const auto router = load_model(router_path);
    const auto embedder = make_embedder(cfg.embedder);
    const Pipeline pipeline(load_corpora(cfg), &router, embedder.get(), retrieve_params(cfg), cfg.k_final);
    const auto answer = pipeline.query(query);
    if (context) {
        ctx.out << assemble_context(answer.results, cfg.max_chars) << "\n";
        return 0;
    }
    json arr = json::array();
    for (const auto& r : answer.results)
        arr.push_back({{"corpus", r.corpus_id},
                       {"doc_id", r.result.unit.doc_id},
                       {"level", r.result.g_r},
                       {"ordinal", r.result.snippet.id.ordinal},
                       {"finest_ordinal", r.result.unit.ordinal},
                       {"fused_score", r.result.fused_score},
                       {"text", r.result.snippet.text}});
    ctx.out << arr.dump(2) << "\n";
    return 0;
}

struct EvalOutputs {
    std::string qa, router, out, csv, latency_csv, weights_csv, sweep_csv, timing_csv;
    std::vector<std::size_t> sweep_k_r = {3, 8, 16, 32};
    std::vector<int> timing_levels;
    int timing_repeats = 3;
    bool with_latency = false;
};

int cmd_eval(Ctx& ctx, const EvalOutputs& o) {
    const auto& cfg = ctx.cfg;
    const auto router = load_model(o.router);
    const auto embedder = make_embedder(cfg.embedder);
    const auto qa = load_qa_jsonl(o.qa);
    const Pipeline pipeline(load_corpora(cfg), &router, embedder.get(), retrieve_params(cfg), cfg.k_final);

    EvalConfig ec;
    for (const auto& c : pipeline.corpora()) ec.corpora.push_back(c.corpus_id);
    ec.n_gra = pipeline.n_gra();
    ec.k_r = cfg.k_r;
    ec.k = cfg.k;
    ec.k_final = cfg.k_final;
    ec.method = std::string(to_string(cfg.method));
    ec.seed = cfg.seed;
    ec.embedder = cfg.embedder.kind == EmbedderKind::remote ? "remote" : "hashed_tfidf";
    ec.level_rule = to_string(cfg.rule);

    const auto run = eval_retrieval(pipeline, qa, ec, ctx.exec);
    if (!o.out.empty()) io::write_file_atomic(o.out, run_json(run, o.with_latency));
    if (!o.csv.empty()) io::write_file_atomic(o.csv, metrics_csv(run.metrics));
    if (!o.latency_csv.empty()) io::write_file_atomic(o.latency_csv, latency_csv(run.metrics));
    if (!o.weights_csv.empty()) io::write_file_atomic(o.weights_csv, weight_report_csv(weight_report(router, *embedder, qa)));
    if (!o.sweep_csv.empty()) io::write_file_atomic(o.sweep_csv, sweep_csv(sweep_k_r(pipeline, qa, o.sweep_k_r, ctx.exec)));
    if (!o.timing_csv.empty()) {
        auto levels = o.timing_levels;
        if (levels.empty())
            for (int n = 1; n <= pipeline.n_gra(); ++n) levels.push_back(n);
        for (int n : levels)
            if (n < 1 || n > pipeline.n_gra())
                throw Error(ErrorCode::Config, "timing level " + std::to_string(n) + " outside 1.." +
                                                   std::to_string(pipeline.n_gra()));
        io::write_file_atomic(o.timing_csv, timing_csv(timing_report(pipeline, qa, levels, o.timing_repeats)));
    }

    const auto& m = run.metrics;
    ctx.err << m.n_queries << " queries, " << m.n_failed << " failed, hitrate@" << cfg.k_final << " "
            << (m.hitrate_at_k.empty() ? 0.0 : m.hitrate_at_k.back()) << ", mrr " << m.mrr << "\n";
    return 0;
}

// Flag -> config key; a flag that was given overrides the config file.
struct Override {
    CLI::Option* option;
    std::string key;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"granur: multi-granularity retrieval with a learned level router", "granur"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    std::string config_path;
    std::vector<std::string> corpora;
    std::vector<std::string> sets;
    std::map<std::string, std::string> values;
    std::vector<Override> overrides;
    bool mogg_flag = false;
    CLI::Option* mogg_opt = nullptr;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--corpus", corpora, "Corpus JSONL file (repeatable); id = file stem");
        sub->add_option("--set", sets, "Extra key=value setting (repeatable)");
        auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
            overrides.push_back(Override{sub->add_option(name, values[key], help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast), key});
        };
        flag("--corpus-dir", "corpus_dir", "Directory holding built indexes");
        flag("--n-gra", "n_gra", "Number of granularity levels");
        flag("--threads", "threads", "Worker cap; 1 runs fully serial");
        flag("--seed", "seed", "Random seed");
        flag("--embedder", "embedder", "hashed_tfidf or remote");
        flag("--embed-dim", "embed_dim", "Embedding dimension");
        flag("--embed-url", "embed_url", "Remote embedding service base URL");
        mogg_opt = sub->add_flag("--mogg", mogg_flag, "Use the sentence-graph index");
    };
    auto retrieval_flags = [&](CLI::App* sub) {
        overrides.push_back(Override{sub->add_option("--k-r", values["k_r"], "Snippets retrieved per level"), "k_r"});
        overrides.push_back(Override{sub->add_option("--k", values["k"], "Results kept per corpus"), "k"});
        overrides.push_back(Override{sub->add_option("--k-final", values["k_final"], "Results kept across corpora"), "k_final"});
    };

    auto* build_index = app.add_subcommand("build-index", "Chunk corpora and build per-level BM25 indexes");
    common(build_index);
    overrides.push_back(Override{build_index->add_option("--base-size", values["base_size"], "Finest chunk size in tokens"), "base_size"});

    auto* build_graph_cmd = app.add_subcommand("build-graph", "Build sentence graphs and hop-level indexes");
    common(build_graph_cmd);
    overrides.push_back(Override{build_graph_cmd->add_option("--k-graph", values["k_graph"], "Neighbors proposed per node"), "k_graph"});
    overrides.push_back(Override{build_graph_cmd->add_option("--t-graph", values["t_graph"], "Minimum BM25 edge score (inf: no edges)"), "t_graph"});
    overrides.push_back(Override{build_graph_cmd->add_option("--sentences-per-node", values["sentences_per_node"], "1 or 2"), "sentences_per_node"});

    std::string qa_path, labels_out;
    auto* build_labels = app.add_subcommand("build-labels", "Derive soft level labels for QA pairs");
    common(build_labels);
    build_labels->add_option("--qa", qa_path, "QA JSONL")->required();
    build_labels->add_option("--out", labels_out, "Output labels JSONL")->required();
    overrides.push_back(Override{build_labels->add_option("--method", values["method"], "tfidf, hitrate or remote"), "method"});
    overrides.push_back(Override{build_labels->add_option("--train-corpus", values["train_corpus"], "Corpus id to label against"), "train_corpus"});

    std::string labels_in, model_out, loss_csv;
    auto* train_cmd = app.add_subcommand("train", "Train the level router");
    common(train_cmd);
    train_cmd->add_option("--labels", labels_in, "Labels JSONL")->required();
    train_cmd->add_option("--out", model_out, "Output model JSON")->required();
    train_cmd->add_option("--loss-csv", loss_csv, "Per-epoch loss CSV");
    overrides.push_back(Override{train_cmd->add_option("--lr", values["learning_rate"], "Adam learning rate"), "learning_rate"});
    overrides.push_back(Override{train_cmd->add_option("--max-epochs", values["max_epochs"], "Epoch limit"), "max_epochs"});

    std::string query, router_path;
    bool weight_only = false;
    bool context = false;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Answer one query with routed retrieval");
    common(retrieve_cmd);
    retrieval_flags(retrieve_cmd);
    retrieve_cmd->add_option("--query", query, "Query text")->required();
    retrieve_cmd->add_option("--router", router_path, "Router model JSON")->required();
    retrieve_cmd->add_flag("--weight-only", weight_only, "Pick the output level by weight alone");
    retrieve_cmd->add_flag("--context", context, "Print the assembled context instead of JSON");
    overrides.push_back(Override{retrieve_cmd->add_option("--max-chars", values["max_chars"], "Context length cap"), "max_chars"});

    EvalOutputs eo;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval on QA pairs");
    common(eval_cmd);
    retrieval_flags(eval_cmd);
    eval_cmd->add_option("--qa", eo.qa, "QA JSONL")->required();
    eval_cmd->add_option("--router", eo.router, "Router model JSON")->required();
    eval_cmd->add_option("--out", eo.out, "run.json output");
    eval_cmd->add_option("--csv", eo.csv, "Metrics CSV output");
    eval_cmd->add_option("--latency-csv", eo.latency_csv, "Latency percentiles CSV");
    eval_cmd->add_option("--weights-csv", eo.weights_csv, "Router weight report CSV");
    eval_cmd->add_option("--sweep-csv", eo.sweep_csv, "k_r sweep CSV");
    eval_cmd->add_option("--sweep-k-r", eo.sweep_k_r, "k_r values for the sweep")->delimiter(',');
    eval_cmd->add_option("--timing-csv", eo.timing_csv, "Latency per level count CSV");
    eval_cmd->add_option("--timing-levels", eo.timing_levels, "Level counts to time")->delimiter(',');
    eval_cmd->add_option("--timing-repeats", eo.timing_repeats, "Passes over the queries per level count")->check(CLI::PositiveNumber);
    eval_cmd->add_flag("--with-latency", eo.with_latency, "Include latencies in run.json");
    eval_cmd->add_flag("--weight-only", weight_only, "Pick the output level by weight alone");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        if (const char* url = std::getenv("GRANUR_EMBED_URL"); url && *url) cfg.embedder.endpoint = url;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::Config, "--set " + s + ": expected key=value");
            apply_setting(cfg, trim(std::string_view(s).substr(0, eq)), std::string_view(s).substr(eq + 1), "--set");
        }
        for (const auto& o : overrides)
            if (o.option->count() > 0) apply_setting(cfg, o.key, values[o.key], o.option->get_name());
        if (mogg_opt && mogg_opt->count() > 0) cfg.mogg = mogg_flag;
        if (!corpora.empty()) cfg.corpora.assign(corpora.begin(), corpora.end());
        if (weight_only) cfg.rule = LevelRule::weight_only;
        validate(cfg);

        if (cfg.threads > 0) set_thread_cap(cfg.threads);
        Ctx ctx{std::move(cfg), Exec::parallel, out, err};
        if (ctx.cfg.threads == 1) ctx.exec = Exec::serial;

        if (build_index->parsed()) return cmd_build_index(ctx);
        if (build_graph_cmd->parsed()) return cmd_build_graph(ctx);
        if (build_labels->parsed()) return cmd_build_labels(ctx, qa_path, labels_out);
        if (train_cmd->parsed()) return cmd_train(ctx, labels_in, model_out, loss_csv);
        if (retrieve_cmd->parsed()) return cmd_retrieve(ctx, query, router_path, context);
        return cmd_eval(ctx, eo);
    } catch (const Error& e) {
        err << "granur: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        err << "granur: " << e.what() << "\n";
        return 5;
    }
}

}  // namespace granur
