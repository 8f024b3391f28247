#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "birouter/core.hpp"

namespace birouter {

struct EncoderUnavailable : Error {
    using Error::Error;
};

inline constexpr int kEmbeddingDim = 256;
inline constexpr int kMaxTokens = 128;
inline constexpr uint64_t kHashEncoderSeed = 0xB1907735ULL;

// Unit-L2 pooled embedding. Zero vectors stay zero and carry the flag.
struct EmbeddingVector {
    Eigen::VectorXd values;
    bool degenerate = false;
};

// One vector per text token, at most kMaxTokens (texts are truncated to their
// leading tokens). The hashing encoder emits one-active-bucket +-1 vectors,
// kept in sparse form; the remote adapter produces dense rows.
struct TokenEmbeddingSequence {
    int dim = 0;
    bool degenerate = false;  // empty-text padding sequence
    bool sparse = true;
    std::vector<int> bucket;   // sparse: active bucket per token
    std::vector<double> sign;  // sparse: +-1 per token
    Eigen::MatrixXd rows;      // dense: tokens x dim

    int token_count() const {
        return sparse ? static_cast<int>(bucket.size()) : static_cast<int>(rows.rows());
    }
    Eigen::MatrixXd dense_rows() const;
};

class Encoder {
  public:
    virtual ~Encoder() = default;
    virtual int dim() const = 0;
    virtual std::pair<TokenEmbeddingSequence, EmbeddingVector> encode(std::string_view text) const = 0;

    EmbeddingVector pooled(std::string_view text) const { return encode(text).second; }
};

// Deterministic reference encoder: lowercase, whitespace-split, each token
// feature-hashed into `dim` buckets with a sign hash. Pooling accumulates the
// integer per-bucket sign counts, so the pooled vector is exactly invariant
// to token order, then L2-normalizes. Frozen: it has no trainable state.
class HashingEncoder : public Encoder {
  public:
    explicit HashingEncoder(int dim = kEmbeddingDim, int max_tokens = kMaxTokens,
                            uint64_t seed = kHashEncoderSeed)
        : dim_(dim), max_tokens_(max_tokens), seed_(seed) {}

    int dim() const override { return dim_; }
    int max_tokens() const { return max_tokens_; }
    std::pair<TokenEmbeddingSequence, EmbeddingVector> encode(std::string_view text) const override;

  private:
    int dim_;
    int max_tokens_;
    uint64_t seed_;
};

struct RemoteEncoderConfig {
    std::string host;  // e.g. "localhost"
    int port = 0;
    std::string path = "/encode";
    int deadline_ms = 2000;
    int dim = kEmbeddingDim;
};

// HTTP adapter for an external embedding service. POSTs {"text": ...} and
// expects {"embedding": [...]} of the configured dimension; the vector is
// re-normalized locally and also exposed as a single-token sequence.
class RemoteEncoder : public Encoder {
  public:
    explicit RemoteEncoder(RemoteEncoderConfig config) : config_(std::move(config)) {}

    int dim() const override { return config_.dim; }
    std::pair<TokenEmbeddingSequence, EmbeddingVector> encode(std::string_view text) const override;

  private:
    RemoteEncoderConfig config_;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Chain history rendered as "Q: <query> | <agent>: <message> | ...".
std::string render_history(const ChainHistory& history);

// Keeps the trailing `max_tokens` whitespace tokens (drops the oldest text).
std::string truncate_left_tokens(std::string_view text, int max_tokens);

// Scoring context for the cohesion branch: rendered history plus the current
// agent's description, left-truncated to the encoder token budget.
std::string render_gap_context(const ChainHistory& history, std::string_view current_desc,
                               int max_tokens = kMaxTokens);

}  // namespace birouter
