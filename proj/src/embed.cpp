#include "granur/embed.hpp"

#include <cmath>
#include <cstdlib>
#include <semaphore>

#include "httplib.h"
#include "json.hpp"

#include "granur/error.hpp"
#include "granur/text.hpp"

namespace granur {

using nlohmann::json;

std::vector<Embedding> Embedder::embed_batch(std::span<const std::string> texts) const {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "embed_batch needs at least one text");
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

void l2_normalize(Embedding& v) noexcept {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) return;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
}

double cosine(std::span<const double> a, std::span<const double> b) noexcept {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// --- hashed ------------------------------------------------------------------

HashedTfidfEmbedder::HashedTfidfEmbedder(int dim) : dim_(dim) {
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "embedding dim must be >= 1");
}

Embedding HashedTfidfEmbedder::embed(std::string_view text) const {
    if (trim(text).empty()) throw Error(ErrorCode::EmptyText, "cannot embed blank text");
    Embedding v(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& token : tokenize(text)) {
        const std::uint64_t h = fnv1a64(token);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % static_cast<std::uint64_t>(dim_)] += sign;
    }
    l2_normalize(v);
    return v;
}

// --- remote ------------------------------------------------------------------

struct RemoteEmbedder::Impl {
    std::string scheme_host_port;
    std::string embed_path;
    mutable std::counting_semaphore<> in_flight;

    explicit Impl(int max_in_flight) : in_flight(max_in_flight) {}
};

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : config_(std::move(config)) {
    if (config_.dim < 1) throw Error(ErrorCode::InvalidArgument, "embedding dim must be >= 1");
    if (config_.max_in_flight < 1) throw Error(ErrorCode::InvalidArgument, "max_in_flight must be >= 1");
    const auto& url = config_.endpoint;
    const auto scheme_end = url.find("://");
    if (url.empty() || scheme_end == std::string::npos)
        throw Error(ErrorCode::Config, "remote embedder endpoint must be an http URL, got '" + url + "'");
    auto path_begin = url.find('/', scheme_end + 3);
    impl_ = std::make_unique<Impl>(config_.max_in_flight);
    impl_->scheme_host_port = url.substr(0, path_begin);
    std::string base = path_begin == std::string::npos ? std::string{} : url.substr(path_begin);
    while (!base.empty() && base.back() == '/') base.pop_back();
    impl_->embed_path = base + "/embed";
}

RemoteEmbedder::~RemoteEmbedder() = default;

Embedding RemoteEmbedder::embed(std::string_view text) const {
    std::string owned(text);
    return embed_batch(std::span<const std::string>(&owned, 1)).front();
}

std::vector<Embedding> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "embed_batch needs at least one text");
    for (const auto& t : texts)
        if (trim(t).empty()) throw Error(ErrorCode::EmptyText, "cannot embed blank text");

    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += kMaxTextsPerRequest) {
        const auto end = std::min(texts.size(), begin + kMaxTextsPerRequest);
        const json body = {{"texts", std::vector<std::string>(texts.begin() + begin, texts.begin() + end)}};

        impl_->in_flight.acquire();
        httplib::Result res;
        {
            httplib::Client client(impl_->scheme_host_port);
            const auto sec = config_.timeout_ms / 1000;
            const auto usec = (config_.timeout_ms % 1000) * 1000;
            client.set_connection_timeout(sec, usec);
            client.set_read_timeout(sec, usec);
            client.set_write_timeout(sec, usec);
            res = client.Post(impl_->embed_path, body.dump(), "application/json");
        }
        impl_->in_flight.release();

        if (!res) throw Error(ErrorCode::RemoteUnavailable, config_.endpoint + ": " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(ErrorCode::RemoteUnavailable, config_.endpoint + ": HTTP " + std::to_string(res->status));

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::RemoteUnavailable, config_.endpoint + ": unparseable reply: " + e.what());
        }
        if (!reply.contains("vectors") || !reply["vectors"].is_array())
            throw Error(ErrorCode::RemoteUnavailable, config_.endpoint + ": reply lacks 'vectors'");
        if (reply.contains("dim") && reply["dim"] != config_.dim)
            throw Error(ErrorCode::DimMismatch, "service dim " + reply["dim"].dump() + " != configured " +
                                                    std::to_string(config_.dim));
        const auto& vectors = reply["vectors"];
        if (vectors.size() != end - begin)
            throw Error(ErrorCode::RemoteUnavailable, config_.endpoint + ": vector count differs from text count");
        for (const auto& jv : vectors) {
            Embedding v;
            try {
                v = jv.get<Embedding>();
            } catch (const json::exception& e) {
                throw Error(ErrorCode::RemoteUnavailable, config_.endpoint + ": bad vector: " + e.what());
            }
            if (v.size() != static_cast<std::size_t>(config_.dim))
                throw Error(ErrorCode::DimMismatch, "service returned length " + std::to_string(v.size()) +
                                                        ", expected " + std::to_string(config_.dim));
            for (double x : v)
                if (!std::isfinite(x)) throw Error(ErrorCode::RemoteUnavailable, "service returned non-finite value");
            l2_normalize(v);
            out.push_back(std::move(v));
        }
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
    switch (config.kind) {
        case EmbedderKind::hashed_tfidf: return std::make_unique<HashedTfidfEmbedder>(config.dim);
        case EmbedderKind::remote: return std::make_unique<RemoteEmbedder>(config);
    }
    throw Error(ErrorCode::Config, "unknown embedder kind");
}

Embedding embed_query(const EmbedderConfig& config, std::string_view text) { return make_embedder(config)->embed(text); }

std::vector<Embedding> embed_batch(const EmbedderConfig& config, std::span<const std::string> texts) {
    return make_embedder(config)->embed_batch(texts);
}

}  // namespace granur
