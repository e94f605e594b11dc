#include "granur/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "granur/error.hpp"
#include "granur/io.hpp"
#include "granur/text.hpp"

namespace granur {

namespace {

[[noreturn]] void bad(const std::string& where, std::string_view key, const std::string& msg) {
    throw Error(ErrorCode::Config, where + ": " + std::string(key) + ": " + msg);
}

template <class T>
T parse_int(std::string_view v, const std::string& where, std::string_view key, T lo) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad(where, key, "expected an integer, got '" + std::string(v) + "'");
    if (out < lo) bad(where, key, "must be >= " + std::to_string(lo));
    return out;
}

double parse_real(std::string_view v, const std::string& where, std::string_view key) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || std::isnan(out))
        bad(where, key, "expected a number, got '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view v, const std::string& where, std::string_view key) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    bad(where, key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = v.find(',');
        const auto item = trim(v.substr(0, comma));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

using Setter = std::function<void(PipelineConfig&, std::string_view, const std::string&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"corpora",
         [](PipelineConfig& c, std::string_view v, const std::string&, std::string_view) {
             c.corpora.clear();
             for (auto item : split_list(v)) c.corpora.emplace_back(std::string(item));
         }},
        {"corpus_dir",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             if (v.empty()) bad(w, k, "must not be empty");
             c.corpus_dir = std::string(v);
         }},
        {"n_gra", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.n_gra = parse_int(v, w, k, 1); }},
        {"base_size",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.base_size = parse_int(v, w, k, 1); }},
        {"k_r", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.k_r = parse_int<std::size_t>(v, w, k, 1); }},
        {"k", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.k = parse_int<std::size_t>(v, w, k, 1); }},
        {"k_final",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.k_final = parse_int<std::size_t>(v, w, k, 1); }},
        {"embedder",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             if (v == "hashed_tfidf") c.embedder.kind = EmbedderKind::hashed_tfidf;
             else if (v == "remote") c.embedder.kind = EmbedderKind::remote;
             else bad(w, k, "expected hashed_tfidf or remote, got '" + std::string(v) + "'");
         }},
        {"embed_dim",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.embedder.dim = parse_int(v, w, k, 1); }},
        {"embed_url", [](PipelineConfig& c, std::string_view v, const std::string&, std::string_view) { c.embedder.endpoint = std::string(v); }},
        {"embed_timeout_ms",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.embedder.timeout_ms = parse_int(v, w, k, 1); }},
        {"embed_max_in_flight",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.embedder.max_in_flight = parse_int(v, w, k, 1); }},
        {"bm25_k1",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.bm25.k1 = parse_real(v, w, k);
             if (!(c.bm25.k1 >= 0.0) || std::isinf(c.bm25.k1)) bad(w, k, "must be finite and >= 0");
         }},
        {"bm25_b",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.bm25.b = parse_real(v, w, k);
             if (!(c.bm25.b >= 0.0 && c.bm25.b <= 1.0)) bad(w, k, "must lie in [0, 1]");
         }},
        {"mogg", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.mogg = parse_bool(v, w, k); }},
        {"k_graph", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.k_graph = parse_int(v, w, k, 1); }},
        {"t_graph", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.t_graph = parse_real(v, w, k); }},
        {"sentences_per_node",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.sentences_per_node = parse_int(v, w, k, 1);
             if (c.sentences_per_node > 2) bad(w, k, "must be 1 or 2");
         }},
        {"seed",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.seed = parse_int<std::uint64_t>(v, w, k, 0);
             c.train.seed = c.seed;
         }},
        {"threads", [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.threads = parse_int(v, w, k, 0); }},
        {"level_rule",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             if (v == "containment") c.rule = LevelRule::containment;
             else if (v == "weight_only") c.rule = LevelRule::weight_only;
             else bad(w, k, "expected containment or weight_only, got '" + std::string(v) + "'");
         }},
        {"method",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             try {
                 c.method = parse_sim_method(v);
             } catch (const Error&) {
                 bad(w, k, "expected tfidf_cosine, hitrate or remote_embedding_cosine, got '" + std::string(v) + "'");
             }
         }},
        {"label_best",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.label_values.best = parse_real(v, w, k); }},
        {"label_second",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.label_values.second = parse_real(v, w, k); }},
        {"learning_rate",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.train.learning_rate = parse_real(v, w, k);
             if (!(c.train.learning_rate > 0.0) || std::isinf(c.train.learning_rate)) bad(w, k, "must be finite and > 0");
         }},
        {"max_epochs",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.train.max_epochs = parse_int(v, w, k, 1); }},
        {"batch_size",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.train.batch_size = parse_int(v, w, k, 1); }},
        {"early_stop_patience",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.train.early_stop_patience = parse_int(v, w, k, 0);
         }},
        {"min_improvement",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.train.min_improvement = parse_real(v, w, k);
             if (!(c.train.min_improvement >= 0.0)) bad(w, k, "must be >= 0");
         }},
        {"hidden",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) {
             c.hidden.clear();
             for (auto item : split_list(v)) c.hidden.push_back(parse_int(item, w, k, 1));
         }},
        {"max_chars",
         [](PipelineConfig& c, std::string_view v, const std::string& w, std::string_view k) { c.max_chars = parse_int<std::size_t>(v, w, k, 1); }},
        {"train_corpus", [](PipelineConfig& c, std::string_view v, const std::string&, std::string_view) { c.train_corpus = std::string(v); }},
    };
    return table;
}

std::string_view unquote(std::string_view v, const std::string& where) {
    if (!v.empty() && v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw Error(ErrorCode::Config, where + ": unterminated string");
        return v.substr(1, v.size() - 2);
    }
    return v;
}

// A '#' outside double quotes starts a comment.
std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        else if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

}  // namespace

void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value, const std::string& where) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::Config, where + ": unknown key '" + std::string(key) + "'");
    it->second(cfg, trim(value), where, key);
}

void apply_config_text(PipelineConfig& cfg, std::string_view text, const std::string& source) {
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = std::min(text.find('\n', pos), text.size());
        const auto line = trim(strip_comment(text.substr(pos, nl - pos)));
        pos = nl + 1;
        const auto where = source + ":" + std::to_string(++number);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::Config, where + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::Config, where + ": missing key");
        apply_setting(cfg, key, unquote(trim(line.substr(eq + 1)), where), where);
    }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
    apply_config_text(cfg, io::read_file(path), path.string());
}

void validate(const PipelineConfig& cfg) {
    const auto& lv = cfg.label_values;
    if (!(lv.best > lv.second && lv.second >= 0.0 && lv.best < 1.0))
        throw Error(ErrorCode::Config, "label values must satisfy 0 <= label_second < label_best < 1");
    if (cfg.hidden.empty()) throw Error(ErrorCode::Config, "hidden must list at least one layer width");
    if (cfg.embedder.kind == EmbedderKind::remote && cfg.embedder.endpoint.empty())
        throw Error(ErrorCode::Config, "embedder = remote needs embed_url (or GRANUR_EMBED_URL)");
    if (cfg.method == SimMethod::remote_embedding_cosine && cfg.embedder.kind != EmbedderKind::remote)
        throw Error(ErrorCode::Config, "method remote_embedding_cosine needs embedder = remote");
    std::vector<std::string> ids;
    for (const auto& p : cfg.corpora) {
        auto id = corpus_id(p);
        if (id.empty()) throw Error(ErrorCode::Config, "corpus path '" + p.string() + "' has no file name");
        for (const auto& seen : ids)
            if (seen == id) throw Error(ErrorCode::Config, "two corpora share the id '" + id + "'");
        ids.push_back(std::move(id));
    }
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, _] : setters()) out.push_back(k);
        return out;
    }();
    return keys;
}

std::string corpus_id(const std::filesystem::path& corpus_file) { return corpus_file.stem().string(); }

std::string to_string(LevelRule rule) { return rule == LevelRule::containment ? "containment" : "weight_only"; }

}  // namespace granur
