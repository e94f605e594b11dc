#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace granur {

using Embedding = std::vector<double>;

enum class EmbedderKind { hashed_tfidf, remote };

struct EmbedderConfig {
    EmbedderKind kind = EmbedderKind::hashed_tfidf;
    int dim = 256;
    std::string endpoint;  // remote only, e.g. http://127.0.0.1:8876
    int timeout_ms = 30000;
    int max_in_flight = 4;
};

/// Query encoder consumed by the router. Implementations are stateless after
/// construction and safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual int dim() const noexcept = 0;

    /// Throws EmptyText when text is blank.
    virtual Embedding embed(std::string_view text) const = 0;

    /// Element i equals embed(texts[i]). Any failure aborts the whole batch.
    virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) const;
};

/// Feature-hashed token counts: each token adds +-1 to bucket
/// fnv1a64(token) mod dim, signed by the hash's top bit, then the vector is
/// L2-normalized.
class HashedTfidfEmbedder final : public Embedder {
public:
    explicit HashedTfidfEmbedder(int dim = 256);

    int dim() const noexcept override { return dim_; }
    Embedding embed(std::string_view text) const override;

private:
    int dim_;
};

/// Client for the external embedding service:
///   POST {endpoint}/embed  {"texts": [...]}  ->  {"vectors": [[...]], "dim": d}
/// Non-200 and transport failures raise RemoteUnavailable; wrong lengths raise
/// DimMismatch. Vectors are L2-normalized client side.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderConfig config);
    ~RemoteEmbedder() override;

    int dim() const noexcept override { return config_.dim; }
    Embedding embed(std::string_view text) const override;
    std::vector<Embedding> embed_batch(std::span<const std::string> texts) const override;

    static constexpr std::size_t kMaxTextsPerRequest = 256;

private:
    struct Impl;
    EmbedderConfig config_;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

Embedding embed_query(const EmbedderConfig& config, std::string_view text);
std::vector<Embedding> embed_batch(const EmbedderConfig& config, std::span<const std::string> texts);

/// In-place L2 normalization; the zero vector is left unchanged.
void l2_normalize(Embedding& v) noexcept;

double cosine(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace granur
