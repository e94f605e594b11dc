#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace granur {

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;
};

/// Half-open interval of finest-chunk ordinals within one document.
struct FinestRange {
    std::uint32_t start = 0;
    std::uint32_t end = 0;

    std::uint32_t width() const noexcept { return end - start; }
    bool contains(std::uint32_t ordinal) const noexcept { return ordinal >= start && ordinal < end; }
    friend bool operator==(const FinestRange&, const FinestRange&) = default;
};

struct ChunkId {
    std::string doc_id;
    int level = 1;  // 1-based, 1 is finest
    std::uint32_t ordinal = 0;
    friend bool operator==(const ChunkId&, const ChunkId&) = default;
};

struct Chunk {
    ChunkId id;
    FinestRange finest_range;
    std::string text;
};

/// Non-overlapping multi-granularity chunking of a single document. Level j
/// pairs adjacent level j-1 chunks left to right; an odd trailing chunk is
/// promoted alone. Immutable after construction.
class ChunkPyramid {
public:
    ChunkPyramid(std::string doc_id, int base_size, std::vector<std::vector<Chunk>> levels);

    const std::string& doc_id() const noexcept { return doc_id_; }
    int n_gra() const noexcept { return static_cast<int>(levels_.size()); }
    int base_size() const noexcept { return base_size_; }
    std::size_t finest_count() const noexcept { return levels_.front().size(); }

    /// 1-based level access.
    const std::vector<Chunk>& level(int level) const;

    /// Token capacity of a chunk at the given level: base_size * 2^(level-1).
    std::size_t capacity(int level) const;

private:
    std::string doc_id_;
    int base_size_;
    std::vector<std::vector<Chunk>> levels_;
};

/// Level-1 chunks are consecutive windows of base_size tokens. Chunk text is
/// the source text from the chunk's first token up to the next chunk's first
/// token, trimmed, so punctuation stays with the preceding chunk. Coarser
/// chunk text is the single-space join of its children.
/// Throws EmptyDocument when the text has no tokens.
ChunkPyramid build_pyramid(const Document& doc, int base_size, int n_gra);

/// The unique level chunk whose finest range contains finest_ordinal.
/// Throws OutOfRange on a bad ordinal or level.
const Chunk& containing_chunk(const ChunkPyramid& pyramid, std::uint32_t finest_ordinal, int level);

/// Reads a JSON Lines corpus: {"id", "title", "text"} per line. Enforces unique
/// ids and non-empty text; violations throw MalformedFile with a line number.
std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path);

}  // namespace granur
