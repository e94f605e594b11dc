#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "granur/embed.hpp"
#include "granur/index.hpp"
#include "granur/parallel.hpp"
#include "granur/router.hpp"

namespace granur {

struct QaExample {
    std::string question;
    std::string answer;
    std::string label_text;  // ground-truth snippet, else question + " " + answer
};

QaExample make_qa(std::string question, std::string answer, std::optional<std::string> snippet = std::nullopt);

/// QA file: JSONL {"question": str, "answer": str, "snippet": str (optional)}.
std::vector<QaExample> load_qa_jsonl(const std::filesystem::path& path);

enum class SimMethod { tfidf_cosine, hitrate, remote_embedding_cosine };

std::string_view to_string(SimMethod m) noexcept;
/// Accepts "tfidf", "tfidf_cosine", "hitrate", "remote", "remote_embedding_cosine".
SimMethod parse_sim_method(std::string_view name);

struct SoftLabelValues {
    double best = 0.8;
    double second = 0.2;
};

struct SoftLabel {
    std::vector<double> values;
    int best_level = 1;               // 1-based
    std::optional<int> second_level;  // 1-based
};

/// The single best BM25 chunk of every level for the question, or nullopt for
/// levels with no matching chunk.
std::vector<std::optional<Hit>> best_per_level(const GranularityIndexSet& set, std::string_view question);

/// Fraction of unique label tokens that also occur in the snippet.
double hitrate(std::string_view snippet, std::string_view label);

/// Cosine of tf * idf term vectors, idf taken from idf_source.
double tfidf_cosine(const Bm25Index& idf_source, std::string_view snippet, std::string_view label);

/// Scores a snippet against a label with one of the supported methods.
class SimilarityScorer {
public:
    /// idf_source is required for tfidf_cosine, embedder for remote_embedding_cosine.
    SimilarityScorer(SimMethod method, const Bm25Index* idf_source, const Embedder* embedder = nullptr);

    SimMethod method() const noexcept { return method_; }
    double operator()(std::string_view snippet, std::string_view label) const;

private:
    SimMethod method_;
    const Bm25Index* idf_source_;
    const Embedder* embedder_;
};

/// best value at the argmax, second value at the runner-up, 0 elsewhere.
/// Absent entries never compete; ties go to the finer (lower) level.
/// Throws NoCandidates when every entry is absent.
SoftLabel build_soft_label(std::span<const std::optional<double>> sims, SoftLabelValues values = {});

struct LabeledExample {
    std::size_t qid = 0;
    TrainExample example;
    std::vector<std::optional<double>> sims;
};

struct SkippedExample {
    std::size_t qid = 0;
    std::string reason;
};

struct Dataset {
    SimMethod method = SimMethod::tfidf_cosine;
    std::vector<LabeledExample> examples;  // input order
    std::vector<SkippedExample> skipped;
};

/// For every QA example: best chunk per level for the question, similarity of
/// each to the label, soft label from the similarities, and the question
/// embedding. Examples with no candidate at any level are skipped.
Dataset build_dataset(const GranularityIndexSet& set, std::span<const QaExample> qa, const SimilarityScorer& scorer,
                      const Embedder& query_embedder, SoftLabelValues values = {}, Exec exec = Exec::parallel);

/// Soft-label file: JSONL {"qid", "embedding", "soft_label", "sims", "method"};
/// absent sims are written as null.
std::string dataset_to_jsonl(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace granur
