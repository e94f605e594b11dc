#include "granur/index.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

#include "granur/error.hpp"
#include "granur/io.hpp"
#include "granur/text.hpp"

namespace granur {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kPostingsMagic[8] = {'G', 'B', 'M', '2', '5', 'P', 'L', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string where) : bytes_(bytes), where_(std::move(where)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw Error(ErrorCode::MalformedFile, where_ + ": truncated");
    }

    std::string_view bytes_;
    std::string where_;
    std::size_t pos_ = 0;
};

struct Candidate {
    std::uint32_t ordinal;
    double score;
};

bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    return a.ordinal < b.ordinal;
}

}  // namespace

Bm25Index Bm25Index::build(std::span<const std::vector<std::string>> token_lists, Bm25Params params,
                           std::vector<ChunkId> chunk_refs) {
    if (token_lists.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index zero chunks");
    if (chunk_refs.size() != token_lists.size())
        throw Error(ErrorCode::InvalidArgument, "chunk_refs length differs from chunk count");

    std::map<std::string, std::vector<Posting>, std::less<>> by_term;
    Bm25Index index;
    index.params_ = params;
    index.doc_lengths_.reserve(token_lists.size());
    for (std::size_t ord = 0; ord < token_lists.size(); ++ord) {
        const auto& tokens = token_lists[ord];
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            auto it = by_term.find(term);
            if (it == by_term.end()) it = by_term.emplace(std::string(term), std::vector<Posting>{}).first;
            it->second.push_back(Posting{static_cast<std::uint32_t>(ord), count});
        }
    }
    index.postings_.reserve(by_term.size());
    for (auto& [term, entries] : by_term) index.postings_.push_back(PostingList{term, std::move(entries)});
    index.chunk_refs_ = std::move(chunk_refs);
    index.finalize();
    return index;
}

void Bm25Index::finalize() {
    std::uint64_t total = 0;
    for (auto dl : doc_lengths_) total += dl;
    if (total == 0) throw Error(ErrorCode::EmptyCorpus, "indexed chunks contain no tokens");
    avg_dl_ = static_cast<double>(total) / static_cast<double>(doc_lengths_.size());

    const auto n_docs = static_cast<double>(doc_lengths_.size());
    term_ids_.clear();
    term_ids_.reserve(postings_.size());
    idf_.resize(postings_.size());
    for (std::size_t i = 0; i < postings_.size(); ++i) {
        term_ids_.emplace(postings_[i].term, static_cast<std::uint32_t>(i));
        const auto df = static_cast<double>(postings_[i].entries.size());
        idf_[i] = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    }
    length_norm_.resize(doc_lengths_.size());
    for (std::size_t d = 0; d < doc_lengths_.size(); ++d)
        length_norm_[d] = params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[d] / avg_dl_);
}

std::vector<std::uint32_t> Bm25Index::distinct_term_ids(std::span<const std::string> tokens) const {
    std::vector<std::uint32_t> ids;
    for (const auto& t : tokens) {
        auto it = term_ids_.find(t);
        if (it == term_ids_.end()) continue;
        if (std::find(ids.begin(), ids.end(), it->second) == ids.end()) ids.push_back(it->second);
    }
    return ids;
}

std::vector<Hit> Bm25Index::search(std::string_view query, std::size_t k) const {
    const auto tokens = tokenize(query);
    return search_tokens(tokens, k);
}

std::vector<Hit> Bm25Index::search_tokens(std::span<const std::string> query_tokens, std::size_t k) const {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    thread_local std::vector<double> acc;
    thread_local std::vector<std::uint32_t> touched;
    if (acc.size() < size()) acc.assign(size(), 0.0);
    touched.clear();

    const double k1p1 = params_.k1 + 1.0;
    for (auto term : distinct_term_ids(query_tokens)) {
        const double idf = idf_[term];
        for (const auto& p : postings_[term].entries) {
            if (acc[p.ordinal] == 0.0) touched.push_back(p.ordinal);
            const double tf = p.tf;
            acc[p.ordinal] += idf * tf * k1p1 / (tf + length_norm_[p.ordinal]);
        }
    }

    std::vector<Candidate> cands;
    cands.reserve(touched.size());
    for (auto ord : touched) {
        cands.push_back(Candidate{ord, acc[ord]});
        acc[ord] = 0.0;
    }
    const std::size_t take = std::min(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), ranks_before);
    std::vector<Hit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) hits.push_back(Hit{cands[i].ordinal, cands[i].score});
    return hits;
}

double Bm25Index::idf(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) {
        const auto n = static_cast<double>(size());
        return std::log(1.0 + (n + 0.5) / 0.5);
    }
    return idf_[it->second];
}

double Bm25Index::score(std::span<const std::string> query_tokens, std::uint32_t ordinal) const {
    if (ordinal >= size()) throw Error(ErrorCode::OutOfRange, "chunk ordinal out of range");
    double total = 0.0;
    for (auto term : distinct_term_ids(query_tokens)) {
        const auto& entries = postings_[term].entries;
        auto it = std::lower_bound(entries.begin(), entries.end(), ordinal,
                                   [](const Posting& p, std::uint32_t o) { return p.ordinal < o; });
        if (it == entries.end() || it->ordinal != ordinal) continue;
        const double tf = it->tf;
        total += idf_[term] * tf * (params_.k1 + 1.0) / (tf + length_norm_[ordinal]);
    }
    return total;
}

const PostingList* Bm25Index::postings(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? nullptr : &postings_[it->second];
}

void Bm25Index::save(const fs::path& dir) const {
    fs::create_directories(dir);
    json header = {{"format", 1},          {"k1", params_.k1},        {"b", params_.b},
                   {"avg_dl", avg_dl_},     {"n_chunks", size()},      {"n_terms", postings_.size()}};
    io::write_file_atomic(dir / "header.json", header.dump(2) + "\n");

    std::string bin(kPostingsMagic, sizeof(kPostingsMagic));
    put_u32(bin, static_cast<std::uint32_t>(size()));
    put_u32(bin, static_cast<std::uint32_t>(postings_.size()));
    for (auto dl : doc_lengths_) put_u32(bin, dl);
    for (std::size_t id = 0; id < postings_.size(); ++id) {
        put_u32(bin, static_cast<std::uint32_t>(id));
        put_u32(bin, static_cast<std::uint32_t>(postings_[id].term.size()));
        bin += postings_[id].term;
    }
    for (const auto& list : postings_) {
        put_u32(bin, static_cast<std::uint32_t>(list.entries.size()));
        std::uint32_t prev = 0;
        for (const auto& p : list.entries) {
            put_u32(bin, p.ordinal - prev);
            put_u32(bin, p.tf);
            prev = p.ordinal;
        }
    }
    io::write_file_atomic(dir / "postings.bin", bin);

    std::string refs;
    for (const auto& r : chunk_refs_)
        refs += json{{"doc", r.doc_id}, {"level", r.level}, {"ord", r.ordinal}}.dump() + "\n";
    io::write_file_atomic(dir / "refs.jsonl", refs);
}

Bm25Index Bm25Index::load(const fs::path& dir) {
    const auto where = dir.string();
    json header;
    try {
        header = json::parse(io::read_file(dir / "header.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, where + "/header.json: " + e.what());
    }
    Bm25Index index;
    std::size_t n_chunks = 0;
    std::size_t n_terms = 0;
    double stored_avg = 0.0;
    try {
        index.params_ = Bm25Params{header.at("k1").get<double>(), header.at("b").get<double>()};
        n_chunks = header.at("n_chunks").get<std::size_t>();
        n_terms = header.at("n_terms").get<std::size_t>();
        stored_avg = header.at("avg_dl").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, where + "/header.json: " + e.what());
    }

    const std::string bin = io::read_file(dir / "postings.bin");
    ByteReader in(bin, where + "/postings.bin");
    if (in.take(sizeof(kPostingsMagic)) != std::string_view(kPostingsMagic, sizeof(kPostingsMagic)))
        throw Error(ErrorCode::MalformedFile, where + "/postings.bin: bad magic");
    if (in.u32() != n_chunks || in.u32() != n_terms)
        throw Error(ErrorCode::MalformedFile, where + ": header and postings disagree");
    index.doc_lengths_.resize(n_chunks);
    for (auto& dl : index.doc_lengths_) dl = in.u32();
    index.postings_.resize(n_terms);
    for (std::size_t id = 0; id < n_terms; ++id) {
        if (in.u32() != id) throw Error(ErrorCode::MalformedFile, where + ": term table out of order");
        const auto len = in.u32();
        index.postings_[id].term = std::string(in.take(len));
    }
    for (auto& list : index.postings_) {
        const auto count = in.u32();
        list.entries.resize(count);
        std::uint32_t prev = 0;
        for (auto& p : list.entries) {
            p.ordinal = prev + in.u32();
            p.tf = in.u32();
            if (p.ordinal >= n_chunks || p.tf == 0)
                throw Error(ErrorCode::MalformedFile, where + ": invalid posting for '" + list.term + "'");
            prev = p.ordinal;
        }
    }
    if (!in.done()) throw Error(ErrorCode::MalformedFile, where + "/postings.bin: trailing bytes");

    io::for_each_line(dir / "refs.jsonl", [&](std::string_view line, std::size_t number) {
        try {
            auto j = json::parse(line);
            index.chunk_refs_.push_back(ChunkId{j.at("doc").get<std::string>(), j.at("level").get<int>(),
                                                j.at("ord").get<std::uint32_t>()});
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, where + "/refs.jsonl:" + std::to_string(number) + ": " + e.what());
        }
    });
    if (index.chunk_refs_.size() != n_chunks)
        throw Error(ErrorCode::MalformedFile, where + ": refs count differs from n_chunks");

    index.finalize();
    if (index.avg_dl_ != stored_avg)
        throw Error(ErrorCode::MalformedFile, where + ": avg_dl does not match doc lengths");
    return index;
}

Bm25Index build_index(std::span<const Chunk> chunks, Bm25Params params) {
    std::vector<std::vector<std::string>> tokens;
    std::vector<ChunkId> refs;
    tokens.reserve(chunks.size());
    refs.reserve(chunks.size());
    for (const auto& c : chunks) {
        tokens.push_back(tokenize(c.text));
        refs.push_back(c.id);
    }
    return Bm25Index::build(tokens, params, std::move(refs));
}

std::vector<std::vector<Hit>> search_batch(const Bm25Index& index, std::span<const std::vector<std::string>> queries,
                                           std::size_t k, Exec exec) {
    std::vector<std::vector<Hit>> out(queries.size());
    parallel_for(queries.size(), exec, [&](std::size_t i) { out[i] = index.search_tokens(queries[i], k); });
    return out;
}

// --- GranularityIndexSet ---------------------------------------------------

GranularityIndexSet::GranularityIndexSet(IndexKind kind, std::vector<Unit> units, std::vector<Level> levels)
    : kind_(kind), units_(std::move(units)), levels_(std::move(levels)) {
    if (levels_.empty()) throw Error(ErrorCode::InvalidArgument, "index set needs at least one level");
    for (std::size_t g = 0; g < levels_.size(); ++g) {
        const auto& lv = levels_[g];
        if (lv.chunks.size() != lv.index.size())
            throw Error(ErrorCode::InconsistentPyramid, "level " + std::to_string(g + 1) + " chunk count mismatch");
        if (lv.home.size() != units_.size())
            throw Error(ErrorCode::InconsistentPyramid, "level " + std::to_string(g + 1) + " home table size mismatch");
        for (const auto& c : lv.chunks)
            for (auto m : c.members)
                if (m >= units_.size())
                    throw Error(ErrorCode::InconsistentPyramid, "chunk member outside unit range");
        for (auto h : lv.home)
            if (h >= lv.chunks.size()) throw Error(ErrorCode::InconsistentPyramid, "home chunk out of range");
    }
}

GranularityIndexSet GranularityIndexSet::from_levels(IndexKind kind, std::vector<Unit> units,
                                                     std::vector<std::vector<LevelChunk>> levels,
                                                     std::vector<std::vector<std::uint32_t>> homes,
                                                     Bm25Params params, Exec exec) {
    if (levels.size() != homes.size()) throw Error(ErrorCode::InvalidArgument, "levels and homes differ in count");
    std::vector<Level> built(levels.size());
    parallel_for(levels.size(), exec, [&](std::size_t g) {
        std::vector<std::vector<std::string>> tokens(levels[g].size());
        std::vector<ChunkId> refs;
        refs.reserve(levels[g].size());
        for (std::size_t i = 0; i < levels[g].size(); ++i) {
            tokens[i] = tokenize(levels[g][i].text);
            refs.push_back(levels[g][i].id);
        }
        built[g].index = Bm25Index::build(tokens, params, std::move(refs));
        built[g].chunks = std::move(levels[g]);
        built[g].home = std::move(homes[g]);
    });
    return GranularityIndexSet(kind, std::move(units), std::move(built));
}

const GranularityIndexSet::Level& GranularityIndexSet::level(int level) const {
    if (level < 1 || level > n_gra())
        throw Error(ErrorCode::OutOfRange, "level " + std::to_string(level) + " outside [1, " + std::to_string(n_gra()) + "]");
    return levels_[static_cast<std::size_t>(level - 1)];
}

GranularityIndexSet GranularityIndexSet::prefix(int n) const {
    if (n < 1 || n > n_gra()) throw Error(ErrorCode::OutOfRange, "prefix length outside [1, n_gra]");
    return GranularityIndexSet(kind_, units_, std::vector<Level>(levels_.begin(), levels_.begin() + n));
}

void GranularityIndexSet::save(const fs::path& dir) const {
    fs::create_directories(dir);
    json manifest = {{"v", 1},
                     {"kind", kind_ == IndexKind::mog ? "mog" : "mogg"},
                     {"n_gra", n_gra()},
                     {"n_units", units_.size()}};
    io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

    std::string units;
    for (const auto& u : units_) units += json{{"doc", u.doc_id}, {"ord", u.ordinal}}.dump() + "\n";
    io::write_file_atomic(dir / "units.jsonl", units);

    for (int g = 1; g <= n_gra(); ++g) {
        const auto& lv = level(g);
        const auto level_dir = dir / ("level_" + std::to_string(g));
        lv.index.save(level_dir);
        std::string chunks;
        for (const auto& c : lv.chunks) chunks += json{{"members", c.members}, {"text", c.text}}.dump() + "\n";
        io::write_file_atomic(level_dir / "chunks.jsonl", chunks);
        std::string home;
        put_u32(home, static_cast<std::uint32_t>(lv.home.size()));
        for (auto h : lv.home) put_u32(home, h);
        io::write_file_atomic(level_dir / "home.bin", home);
    }
}

GranularityIndexSet GranularityIndexSet::load(const fs::path& dir) {
    json manifest;
    IndexKind kind = IndexKind::mog;
    int n_gra = 0;
    try {
        manifest = json::parse(io::read_file(dir / "manifest.json"));
        if (manifest.at("v").get<int>() != 1) throw Error(ErrorCode::MalformedFile, dir.string() + ": unsupported manifest version");
        const auto k = manifest.at("kind").get<std::string>();
        if (k != "mog" && k != "mogg") throw Error(ErrorCode::MalformedFile, dir.string() + ": unknown index kind " + k);
        kind = k == "mog" ? IndexKind::mog : IndexKind::mogg;
        n_gra = manifest.at("n_gra").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, (dir / "manifest.json").string() + ": " + e.what());
    }

    std::vector<Unit> units;
    io::for_each_line(dir / "units.jsonl", [&](std::string_view line, std::size_t number) {
        try {
            auto j = json::parse(line);
            units.push_back(Unit{j.at("doc").get<std::string>(), j.at("ord").get<std::uint32_t>()});
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, (dir / "units.jsonl").string() + ":" + std::to_string(number) + ": " + e.what());
        }
    });

    std::vector<Level> levels(static_cast<std::size_t>(n_gra));
    for (int g = 1; g <= n_gra; ++g) {
        auto& lv = levels[static_cast<std::size_t>(g - 1)];
        const auto level_dir = dir / ("level_" + std::to_string(g));
        lv.index = Bm25Index::load(level_dir);
        std::size_t i = 0;
        io::for_each_line(level_dir / "chunks.jsonl", [&](std::string_view line, std::size_t number) {
            try {
                auto j = json::parse(line);
                if (i >= lv.index.size()) throw Error(ErrorCode::MalformedFile, "more chunks than index entries");
                lv.chunks.push_back(LevelChunk{lv.index.chunk_refs()[i], j.at("members").get<std::vector<std::uint32_t>>(),
                                               j.at("text").get<std::string>()});
                ++i;
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedFile,
                            (level_dir / "chunks.jsonl").string() + ":" + std::to_string(number) + ": " + e.what());
            }
        });
        const std::string home = io::read_file(level_dir / "home.bin");
        ByteReader in(home, (level_dir / "home.bin").string());
        lv.home.resize(in.u32());
        for (auto& h : lv.home) h = in.u32();
        if (!in.done()) throw Error(ErrorCode::MalformedFile, (level_dir / "home.bin").string() + ": trailing bytes");
    }
    return GranularityIndexSet(kind, std::move(units), std::move(levels));
}

GranularityIndexSet build_mog_indexset(std::span<const ChunkPyramid> pyramids, Bm25Params params, Exec exec) {
    if (pyramids.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents to index");
    const int n_gra = pyramids.front().n_gra();
    std::vector<Unit> units;
    std::vector<std::vector<LevelChunk>> levels(static_cast<std::size_t>(n_gra));
    std::vector<std::vector<std::uint32_t>> homes(static_cast<std::size_t>(n_gra));

    for (const auto& pyr : pyramids) {
        if (pyr.n_gra() != n_gra) throw Error(ErrorCode::InconsistentPyramid, "pyramids disagree on n_gra");
        const auto unit_offset = static_cast<std::uint32_t>(units.size());
        for (std::uint32_t i = 0; i < pyr.finest_count(); ++i) units.push_back(Unit{pyr.doc_id(), i});
        for (int g = 1; g <= n_gra; ++g) {
            auto& out = levels[static_cast<std::size_t>(g - 1)];
            auto& home = homes[static_cast<std::size_t>(g - 1)];
            const auto chunk_offset = static_cast<std::uint32_t>(out.size());
            for (const auto& c : pyr.level(g)) {
                LevelChunk lc{c.id, {}, c.text};
                for (auto f = c.finest_range.start; f < c.finest_range.end; ++f) lc.members.push_back(unit_offset + f);
                out.push_back(std::move(lc));
            }
            for (std::uint32_t i = 0; i < pyr.finest_count(); ++i) home.push_back(chunk_offset + (i >> (g - 1)));
        }
    }
    return GranularityIndexSet::from_levels(IndexKind::mog, std::move(units), std::move(levels), std::move(homes), params,
                                            exec);
}

LevelHits search_all_levels(const GranularityIndexSet& set, std::string_view query, std::size_t k_r) {
    if (k_r == 0) throw Error(ErrorCode::InvalidArgument, "k_r must be >= 1");
    const auto tokens = tokenize(query);
    LevelHits hits(static_cast<std::size_t>(set.n_gra()));
    for (int g = 1; g <= set.n_gra(); ++g) hits[static_cast<std::size_t>(g - 1)] = set.level(g).index.search_tokens(tokens, k_r);
    return hits;
}

}  // namespace granur
