#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "granur/corpus.hpp"
#include "granur/index.hpp"
#include "granur/router.hpp"

namespace fixture {

inline std::vector<std::string> vocabulary(std::size_t n) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
    return words;
}

inline std::string random_text(granur::Rng& rng, const std::vector<std::string>& vocab, std::size_t n_tokens,
                               std::size_t sentence_len = 0) {
    std::string out;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        if (i) out += ' ';
        out += vocab[rng.below(vocab.size())];
        if (sentence_len && (i + 1) % sentence_len == 0) out += '.';
    }
    if (sentence_len && n_tokens % sentence_len) out += '.';
    return out;
}

inline std::vector<granur::Document> random_docs(granur::Rng& rng, std::size_t n_docs, std::size_t min_tokens,
                                                 std::size_t max_tokens, const std::vector<std::string>& vocab,
                                                 std::size_t sentence_len = 0) {
    std::vector<granur::Document> docs;
    for (std::size_t d = 0; d < n_docs; ++d) {
        const auto n = min_tokens + rng.below(max_tokens - min_tokens + 1);
        docs.push_back(granur::Document{"doc" + std::to_string(d), "", random_text(rng, vocab, n, sentence_len)});
    }
    return docs;
}

inline std::vector<granur::ChunkPyramid> pyramids(const std::vector<granur::Document>& docs, int base_size,
                                                  int n_gra) {
    std::vector<granur::ChunkPyramid> out;
    for (const auto& d : docs) out.push_back(granur::build_pyramid(d, base_size, n_gra));
    return out;
}

struct SelectionInstance {
    std::vector<granur::Document> docs;
    granur::GranularityIndexSet set;
    std::string query;
    std::vector<double> w;
};

// Random documents totalling at most max_finest finest chunks, a query drawn
// from the same vocabulary and weights in (0, 1).
inline SelectionInstance selection_instance(std::uint64_t seed, int n_gra, std::size_t max_finest) {
    granur::Rng rng(seed);
    const auto vocab = vocabulary(6 + rng.below(20));
    const int base = 1 + static_cast<int>(rng.below(6));
    SelectionInstance inst;
    std::size_t finest = 0;
    const auto n_docs = 1 + rng.below(5);
    for (std::size_t d = 0; d < n_docs && finest < max_finest; ++d) {
        const auto room = max_finest - finest;
        const auto chunks = 1 + rng.below(std::min<std::size_t>(room, max_finest / n_docs + 1));
        const auto tokens = (chunks - 1) * static_cast<std::size_t>(base) + 1 + rng.below(static_cast<std::size_t>(base));
        inst.docs.push_back(granur::Document{"doc" + std::to_string(d), "", random_text(rng, vocab, tokens)});
        finest += chunks;
    }
    inst.set = granur::build_mog_indexset(pyramids(inst.docs, base, n_gra), {}, granur::Exec::serial);
    inst.query = random_text(rng, vocab, 1 + rng.below(4));
    for (int g = 0; g < n_gra; ++g) inst.w.push_back(rng.uniform(0.001, 0.999));
    return inst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        granur::Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
        path_ = std::filesystem::temp_directory_path() / ("granur_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(rng.next() % 1000000007));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace fixture
