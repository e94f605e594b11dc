#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "granur/embed.hpp"
#include "granur/index.hpp"
#include "granur/router.hpp"
#include "granur/selection.hpp"
#include "granur/softlabel.hpp"

namespace granur {

struct PipelineConfig {
    std::vector<std::filesystem::path> corpora;  // corpus JSONL files; id = file stem
    std::filesystem::path corpus_dir = "granur_data";
    int n_gra = 5;
    int base_size = 64;
    std::size_t k_r = 3;
    std::size_t k = 3;
    std::size_t k_final = 2;
    EmbedderConfig embedder;
    Bm25Params bm25;
    bool mogg = false;
    int k_graph = 3;
    double t_graph = 0.0;
    int sentences_per_node = 2;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: OpenMP default
    LevelRule rule = LevelRule::containment;
    SimMethod method = SimMethod::tfidf_cosine;
    SoftLabelValues label_values;
    TrainConfig train;
    std::vector<int> hidden = {256, 64};
    std::size_t max_chars = 4000;
    std::string train_corpus;  // corpus id used for labels; empty: the first corpus
};

/// Sets one key from its textual value. `where` prefixes error messages
/// (e.g. "run.conf:12" or "--k-r").
void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value, const std::string& where);

/// key = value lines; '#' starts a comment, blank lines are skipped, values
/// may be double-quoted. Unknown keys and bad values raise Config errors
/// carrying the line number.
void apply_config_text(PipelineConfig& cfg, std::string_view text, const std::string& source);
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

/// Cross-field checks once every source has been applied.
void validate(const PipelineConfig& cfg);

/// Every recognised key, for help output.
const std::vector<std::string>& config_keys();

std::string corpus_id(const std::filesystem::path& corpus_file);
std::string to_string(LevelRule rule);

}  // namespace granur
