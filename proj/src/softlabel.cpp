#include "granur/softlabel.hpp"

#include <cmath>
#include <map>
#include <set>

#include "json.hpp"

#include "granur/error.hpp"
#include "granur/io.hpp"
#include "granur/text.hpp"

namespace granur {

using nlohmann::json;

QaExample make_qa(std::string question, std::string answer, std::optional<std::string> snippet) {
    QaExample qa{std::move(question), std::move(answer), {}};
    if (snippet && !trim(*snippet).empty())
        qa.label_text = std::move(*snippet);
    else
        qa.label_text = qa.question + " " + qa.answer;
    return qa;
}

std::vector<QaExample> load_qa_jsonl(const std::filesystem::path& path) {
    std::vector<QaExample> out;
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        const auto where = path.string() + ":" + std::to_string(number);
        try {
            auto j = json::parse(line);
            std::optional<std::string> snippet;
            if (j.contains("snippet") && j["snippet"].is_string()) snippet = j["snippet"].get<std::string>();
            auto qa = make_qa(j.at("question").get<std::string>(), j.at("answer").get<std::string>(), snippet);
            if (trim(qa.question).empty()) throw Error(ErrorCode::MalformedFile, where + ": empty question");
            if (trim(qa.label_text).empty()) throw Error(ErrorCode::MalformedFile, where + ": empty label");
            out.push_back(std::move(qa));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
        }
    });
    return out;
}

std::string_view to_string(SimMethod m) noexcept {
    switch (m) {
        case SimMethod::tfidf_cosine: return "tfidf_cosine";
        case SimMethod::hitrate: return "hitrate";
        case SimMethod::remote_embedding_cosine: return "remote_embedding_cosine";
    }
    return "unknown";
}

SimMethod parse_sim_method(std::string_view name) {
    if (name == "tfidf" || name == "tfidf_cosine") return SimMethod::tfidf_cosine;
    if (name == "hitrate") return SimMethod::hitrate;
    if (name == "remote" || name == "remote_embedding_cosine") return SimMethod::remote_embedding_cosine;
    throw Error(ErrorCode::Config, "unknown similarity method '" + std::string(name) + "'");
}

std::vector<std::optional<Hit>> best_per_level(const GranularityIndexSet& set, std::string_view question) {
    std::vector<std::optional<Hit>> out;
    for (auto& hits : search_all_levels(set, question, 1))
        out.push_back(hits.empty() ? std::nullopt : std::optional<Hit>(hits.front()));
    return out;
}

double hitrate(std::string_view snippet, std::string_view label) {
    const auto label_tokens = tokenize(label);
    const std::set<std::string> wanted(label_tokens.begin(), label_tokens.end());
    if (wanted.empty()) return 0.0;
    const auto snippet_tokens = tokenize(snippet);
    const std::set<std::string> have(snippet_tokens.begin(), snippet_tokens.end());
    std::size_t found = 0;
    for (const auto& t : wanted) found += have.count(t);
    return static_cast<double>(found) / static_cast<double>(wanted.size());
}

double tfidf_cosine(const Bm25Index& idf_source, std::string_view snippet, std::string_view label) {
    auto weigh = [&](std::string_view text) {
        std::map<std::string, double> v;
        for (auto& t : tokenize(text)) v[t] += 1.0;
        for (auto& [term, w] : v) w *= idf_source.idf(term);
        return v;
    };
    const auto a = weigh(snippet);
    const auto b = weigh(label);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [term, w] : a) {
        na += w * w;
        if (auto it = b.find(term); it != b.end()) dot += w * it->second;
    }
    for (const auto& [term, w] : b) nb += w * w;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb)));
}

SimilarityScorer::SimilarityScorer(SimMethod method, const Bm25Index* idf_source, const Embedder* embedder)
    : method_(method), idf_source_(idf_source), embedder_(embedder) {
    if (method == SimMethod::tfidf_cosine && idf_source == nullptr)
        throw Error(ErrorCode::InvalidArgument, "tfidf_cosine needs an idf source index");
    if (method == SimMethod::remote_embedding_cosine && embedder == nullptr)
        throw Error(ErrorCode::InvalidArgument, "remote_embedding_cosine needs an embedder");
}

double SimilarityScorer::operator()(std::string_view snippet, std::string_view label) const {
    if (trim(snippet).empty() || trim(label).empty()) throw Error(ErrorCode::EmptyText, "similarity of blank text");
    switch (method_) {
        case SimMethod::tfidf_cosine: return tfidf_cosine(*idf_source_, snippet, label);
        case SimMethod::hitrate: return hitrate(snippet, label);
        case SimMethod::remote_embedding_cosine: {
            const std::vector<std::string> texts{std::string(snippet), std::string(label)};
            const auto v = embedder_->embed_batch(texts);
            return cosine(v[0], v[1]);
        }
    }
    return 0.0;
}

SoftLabel build_soft_label(std::span<const std::optional<double>> sims, SoftLabelValues values) {
    std::optional<std::size_t> best, second;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (!sims[i]) continue;
        if (!best || *sims[i] > *sims[*best]) {
            second = best;
            best = i;
        } else if (!second || *sims[i] > *sims[*second]) {
            second = i;
        }
    }
    if (!best) throw Error(ErrorCode::NoCandidates, "no level produced a candidate snippet");
    SoftLabel sl;
    sl.values.assign(sims.size(), 0.0);
    sl.values[*best] = values.best;
    sl.best_level = static_cast<int>(*best) + 1;
    if (second) {
        sl.values[*second] = values.second;
        sl.second_level = static_cast<int>(*second) + 1;
    }
    return sl;
}

Dataset build_dataset(const GranularityIndexSet& set, std::span<const QaExample> qa, const SimilarityScorer& scorer,
                      const Embedder& query_embedder, SoftLabelValues values, Exec exec) {
    Dataset ds;
    ds.method = scorer.method();
    if (qa.empty()) return ds;

    std::vector<std::string> questions;
    questions.reserve(qa.size());
    for (const auto& q : qa) questions.push_back(q.question);
    auto embeddings = query_embedder.embed_batch(questions);

    struct Slot {
        std::optional<LabeledExample> labeled;
        std::string skip_reason;
    };
    std::vector<Slot> slots(qa.size());
    parallel_for(qa.size(), exec, [&](std::size_t i) {
        const auto best = best_per_level(set, qa[i].question);
        std::vector<std::optional<double>> sims(best.size());
        bool any = false;
        for (std::size_t g = 0; g < best.size(); ++g) {
            if (!best[g]) continue;
            const auto& chunk = set.level(static_cast<int>(g) + 1).chunks[best[g]->ordinal];
            sims[g] = scorer(chunk.text, qa[i].label_text);
            any = true;
        }
        if (!any) {
            slots[i].skip_reason = "no level retrieved a snippet for the question";
            return;
        }
        const auto sl = build_soft_label(sims, values);
        slots[i].labeled = LabeledExample{i, TrainExample{std::move(embeddings[i]), sl.values}, std::move(sims)};
    });

    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].labeled)
            ds.examples.push_back(std::move(*slots[i].labeled));
        else
            ds.skipped.push_back(SkippedExample{i, std::move(slots[i].skip_reason)});
    }
    return ds;
}

std::string dataset_to_jsonl(const Dataset& dataset) {
    std::string out;
    for (const auto& ex : dataset.examples) {
        json sims = json::array();
        for (const auto& s : ex.sims) sims.push_back(s ? json(*s) : json(nullptr));
        json j = {{"qid", ex.qid},
                  {"embedding", ex.example.embedding},
                  {"soft_label", ex.example.soft_label},
                  {"sims", std::move(sims)},
                  {"method", to_string(dataset.method)}};
        out += j.dump() + "\n";
    }
    return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    io::write_file_atomic(path, dataset_to_jsonl(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
    Dataset ds;
    bool first = true;
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        const auto where = path.string() + ":" + std::to_string(number);
        try {
            auto j = json::parse(line);
            const auto method = parse_sim_method(j.at("method").get<std::string>());
            if (first) ds.method = method;
            else if (method != ds.method) throw Error(ErrorCode::MalformedFile, where + ": mixed similarity methods");
            first = false;
            LabeledExample ex;
            ex.qid = j.at("qid").get<std::size_t>();
            ex.example.embedding = j.at("embedding").get<Embedding>();
            ex.example.soft_label = j.at("soft_label").get<std::vector<double>>();
            for (const auto& s : j.at("sims"))
                ex.sims.push_back(s.is_null() ? std::nullopt : std::optional<double>(s.get<double>()));
            if (ex.sims.size() != ex.example.soft_label.size())
                throw Error(ErrorCode::MalformedFile, where + ": sims and soft_label lengths differ");
            ds.examples.push_back(std::move(ex));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
        }
    });
    return ds;
}

}  // namespace granur
