#include "granur/corpus.hpp"

#include <unordered_set>

#include "json.hpp"

#include "granur/error.hpp"
#include "granur/io.hpp"
#include "granur/text.hpp"

namespace granur {

ChunkPyramid::ChunkPyramid(std::string doc_id, int base_size, std::vector<std::vector<Chunk>> levels)
    : doc_id_(std::move(doc_id)), base_size_(base_size), levels_(std::move(levels)) {
    if (levels_.empty() || levels_.front().empty())
        throw Error(ErrorCode::EmptyDocument, "pyramid for '" + doc_id_ + "' has no chunks");
}

const std::vector<Chunk>& ChunkPyramid::level(int level) const {
    if (level < 1 || level > n_gra())
        throw Error(ErrorCode::OutOfRange, "level " + std::to_string(level) + " outside [1, " +
                                               std::to_string(n_gra()) + "]");
    return levels_[static_cast<std::size_t>(level - 1)];
}

std::size_t ChunkPyramid::capacity(int level) const {
    this->level(level);
    return static_cast<std::size_t>(base_size_) << (level - 1);
}

ChunkPyramid build_pyramid(const Document& doc, int base_size, int n_gra) {
    if (base_size < 1) throw Error(ErrorCode::InvalidArgument, "base_size must be >= 1");
    if (n_gra < 1) throw Error(ErrorCode::InvalidArgument, "n_gra must be >= 1");

    const auto spans = tokenize_spans(doc.text);
    if (spans.empty()) throw Error(ErrorCode::EmptyDocument, "document '" + doc.doc_id + "' has no tokens");

    const std::string_view text = doc.text;
    const auto per = static_cast<std::size_t>(base_size);
    const std::size_t n_finest = (spans.size() + per - 1) / per;

    std::vector<std::vector<Chunk>> levels;
    levels.reserve(static_cast<std::size_t>(n_gra));

    std::vector<Chunk> finest;
    finest.reserve(n_finest);
    for (std::size_t i = 0; i < n_finest; ++i) {
        const std::size_t from = i == 0 ? 0 : spans[i * per].begin;
        const std::size_t to = i + 1 < n_finest ? spans[(i + 1) * per].begin : text.size();
        const auto ord = static_cast<std::uint32_t>(i);
        finest.push_back(Chunk{ChunkId{doc.doc_id, 1, ord}, FinestRange{ord, ord + 1},
                               std::string(trim(text.substr(from, to - from)))});
    }
    levels.push_back(std::move(finest));

    for (int level = 2; level <= n_gra; ++level) {
        const auto& below = levels.back();
        std::vector<Chunk> current;
        current.reserve((below.size() + 1) / 2);
        for (std::size_t i = 0; i < below.size(); i += 2) {
            const auto ord = static_cast<std::uint32_t>(i / 2);
            Chunk c{ChunkId{doc.doc_id, level, ord}, below[i].finest_range, below[i].text};
            if (i + 1 < below.size()) {
                c.finest_range.end = below[i + 1].finest_range.end;
                c.text += ' ';
                c.text += below[i + 1].text;
            }
            current.push_back(std::move(c));
        }
        levels.push_back(std::move(current));
    }
    return ChunkPyramid(doc.doc_id, base_size, std::move(levels));
}

const Chunk& containing_chunk(const ChunkPyramid& pyramid, std::uint32_t finest_ordinal, int level) {
    const auto& chunks = pyramid.level(level);
    if (finest_ordinal >= pyramid.finest_count())
        throw Error(ErrorCode::OutOfRange, "finest ordinal " + std::to_string(finest_ordinal) + " >= " +
                                               std::to_string(pyramid.finest_count()));
    return chunks[finest_ordinal >> (level - 1)];
}

std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path) {
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        const auto where = path.string() + ":" + std::to_string(number);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
            !j["text"].is_string())
            throw Error(ErrorCode::MalformedFile, where + ": expected {\"id\": str, \"text\": str}");
        Document doc{j["id"].get<std::string>(), j.value("title", std::string{}),
                     j["text"].get<std::string>()};
        if (trim(doc.text).empty()) throw Error(ErrorCode::MalformedFile, where + ": empty text");
        if (!seen.insert(doc.doc_id).second)
            throw Error(ErrorCode::MalformedFile, where + ": duplicate id '" + doc.doc_id + "'");
        docs.push_back(std::move(doc));
    });
    return docs;
}

}  // namespace granur
