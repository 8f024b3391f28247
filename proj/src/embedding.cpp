#include "birouter/embedding.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "birouter/rng.hpp"

#include <httplib.h>
#include <json.hpp>

namespace birouter {

Eigen::MatrixXd TokenEmbeddingSequence::dense_rows() const {
    if (!sparse) return rows;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bucket.size()), dim);
    for (size_t t = 0; t < bucket.size(); ++t) out(static_cast<Eigen::Index>(t), bucket[t]) = sign[t];
    return out;
}

namespace {

constexpr uint64_t kSignSalt = 0x9E3779B97F4A7C15ULL;

}  // namespace

std::pair<TokenEmbeddingSequence, EmbeddingVector> HashingEncoder::encode(std::string_view text) const {
    std::string lowered(text);
    for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::vector<std::string> tokens = split_tokens(lowered);
    if (static_cast<int>(tokens.size()) > max_tokens_) tokens.resize(static_cast<size_t>(max_tokens_));

    TokenEmbeddingSequence seq;
    seq.dim = dim_;
    seq.sparse = true;
    seq.bucket.reserve(tokens.size());
    seq.sign.reserve(tokens.size());

    std::vector<int64_t> counts(static_cast<size_t>(dim_), 0);
    for (const std::string& tok : tokens) {
        uint64_t h = fnv1a64(tok, seed_);
        int b = static_cast<int>(h % static_cast<uint64_t>(dim_));
        double s = (fnv1a64(tok, seed_ ^ kSignSalt) & 1ULL) ? 1.0 : -1.0;
        seq.bucket.push_back(b);
        seq.sign.push_back(s);
        counts[static_cast<size_t>(b)] += (s > 0) ? 1 : -1;
    }

    EmbeddingVector pooled;
    pooled.values = Eigen::VectorXd::Zero(dim_);
    long double norm_sq = 0.0L;
    for (size_t b = 0; b < counts.size(); ++b) {
        norm_sq += static_cast<long double>(counts[b]) * static_cast<long double>(counts[b]);
    }
    if (tokens.empty() || norm_sq == 0.0L) {
        pooled.degenerate = true;
        seq.degenerate = tokens.empty();
        if (tokens.empty()) {
            // Pad so downstream attention always has at least one key row.
            seq.bucket.push_back(0);
            seq.sign.push_back(0.0);
        }
        return {std::move(seq), std::move(pooled)};
    }
    double inv_norm = 1.0 / std::sqrt(static_cast<double>(norm_sq));
    for (int b = 0; b < dim_; ++b) {
        pooled.values[b] = static_cast<double>(counts[static_cast<size_t>(b)]) * inv_norm;
    }
    return {std::move(seq), std::move(pooled)};
}

std::pair<TokenEmbeddingSequence, EmbeddingVector> RemoteEncoder::encode(std::string_view text) const {
    httplib::Client client(config_.host, config_.port);
    client.set_connection_timeout(0, config_.deadline_ms * 1000);
    client.set_read_timeout(0, config_.deadline_ms * 1000);

    nlohmann::json body;
    body["text"] = std::string(text);
    auto res = client.Post(config_.path, body.dump(), "application/json");
    if (!res) throw EncoderUnavailable("remote encoder unreachable at " + config_.host);
    if (res->status != 200) {
        throw EncoderUnavailable("remote encoder returned status " + std::to_string(res->status));
    }

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw EncoderUnavailable(std::string("remote encoder sent malformed JSON: ") + e.what());
    }
    if (!parsed.contains("embedding") || !parsed["embedding"].is_array()) {
        throw EncoderUnavailable("remote encoder response missing embedding array");
    }
    const auto& arr = parsed["embedding"];
    if (static_cast<int>(arr.size()) != config_.dim) {
        throw EncoderUnavailable("remote encoder dimension mismatch: got " +
                                 std::to_string(arr.size()) + ", expected " +
                                 std::to_string(config_.dim));
    }

    EmbeddingVector pooled;
    pooled.values = Eigen::VectorXd::Zero(config_.dim);
    for (int i = 0; i < config_.dim; ++i) {
        if (!arr[static_cast<size_t>(i)].is_number()) {
            throw EncoderUnavailable("remote encoder embedding has non-numeric entry");
        }
        pooled.values[i] = arr[static_cast<size_t>(i)].get<double>();
    }
    double norm = pooled.values.norm();
    TokenEmbeddingSequence seq;
    seq.dim = config_.dim;
    seq.sparse = false;
    if (norm == 0.0) {
        pooled.degenerate = true;
        seq.degenerate = true;
        seq.rows = Eigen::MatrixXd::Zero(1, config_.dim);
    } else {
        pooled.values /= norm;
        seq.rows = pooled.values.transpose();
    }
    return {std::move(seq), std::move(pooled)};
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.degenerate || b.degenerate) return 0.0;
    double na = a.values.norm();
    double nb = b.values.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.values.dot(b.values) / (na * nb);
}

std::string render_history(const ChainHistory& history) {
    std::string out = "Q: " + history.query.text;
    for (const auto& [agent, message] : history.steps) {
        out += " | ";
        out += agent;
        out += ": ";
        out += message.content;
    }
    return out;
}

std::string truncate_left_tokens(std::string_view text, int max_tokens) {
    std::vector<std::string> tokens = split_tokens(text);
    if (static_cast<int>(tokens.size()) <= max_tokens) return std::string(text);
    std::string out;
    for (size_t i = tokens.size() - static_cast<size_t>(max_tokens); i < tokens.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::string render_gap_context(const ChainHistory& history, std::string_view current_desc,
                               int max_tokens) {
    std::string full = render_history(history) + " | now: " + std::string(current_desc);
    return truncate_left_tokens(full, max_tokens);
}

}  // namespace birouter
