#include "birouter/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "birouter/rng.hpp"

namespace birouter {

namespace {

void fill_uniform(Rng& rng, double range, Eigen::Ref<Eigen::MatrixXd> m) {
    // Row-major fill order so the draw sequence matches the serialized layout.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rng.uniform(-range, range);
        }
    }
}

ScoringHeadParams init_params(Rng& rng, int d, int h, double range) {
    ScoringHeadParams p;
    p.d = d;
    p.h = h;
    p.Wq.resize(d, d);
    p.Wk.resize(d, d);
    p.Wv.resize(d, d);
    p.W1.resize(h, d);
    p.b1.resize(h);
    p.W2.resize(h);
    fill_uniform(rng, range, p.Wq);
    fill_uniform(rng, range, p.Wk);
    fill_uniform(rng, range, p.Wv);
    fill_uniform(rng, range, p.W1);
    for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1[i] = rng.uniform(-range, range);
    for (Eigen::Index i = 0; i < p.W2.size(); ++i) p.W2[i] = rng.uniform(-range, range);
    p.b2 = rng.uniform(-range, range);
    return p;
}

// X * W for a token sequence, using the one-active-bucket structure of the
// hashing encoder when available (signed row gather instead of a GEMM).
Eigen::MatrixXd project(const TokenEmbeddingSequence& seq, const Eigen::MatrixXd& W) {
    if (!seq.sparse) return seq.rows * W;
    Eigen::MatrixXd out(seq.token_count(), W.cols());
    for (int t = 0; t < seq.token_count(); ++t) {
        const double s = seq.sign[static_cast<size_t>(t)];
        if (s == 0.0) {
            out.row(t).setZero();  // degenerate padding token
        } else {
            out.row(t) = s * W.row(seq.bucket[static_cast<size_t>(t)]);
        }
    }
    return out;
}

// dL/dW contribution X^T * dProj, mirrored on the sparse path.
void accumulate_projection_grad(const TokenEmbeddingSequence& seq, const Eigen::MatrixXd& dProj,
                                Eigen::MatrixXd& dW) {
    if (!seq.sparse) {
        dW.noalias() += seq.rows.transpose() * dProj;
        return;
    }
    for (int t = 0; t < seq.token_count(); ++t) {
        const double s = seq.sign[static_cast<size_t>(t)];
        if (s != 0.0) dW.row(seq.bucket[static_cast<size_t>(t)]) += s * dProj.row(t);
    }
}

struct ForwardCache {
    Eigen::MatrixXd Qp, Kp, Vp;  // mq x d, mx x d, mx x d
    Eigen::MatrixXd A;           // mq x mx attention weights
    Eigen::VectorXd p;           // pooled attended vector
    Eigen::VectorXd a1;          // tanh hidden activations
    double y = 0.0;
};

double forward(const ScoringHeadParams& params, const TokenEmbeddingSequence& input,
               const TokenEmbeddingSequence& candidate, ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;

    c.Qp = project(input, params.Wq);
    c.Kp = project(candidate, params.Wk);
    c.Vp = project(candidate, params.Wv);

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.d));
    Eigen::MatrixXd S = (c.Qp * c.Kp.transpose()) * inv_sqrt_d;
    c.A.resize(S.rows(), S.cols());
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const double row_max = S.row(i).maxCoeff();
        Eigen::ArrayXd e = (S.row(i).array() - row_max).exp();
        c.A.row(i) = (e / e.sum()).matrix();
    }

    Eigen::MatrixXd O = c.A * c.Vp;
    c.p = O.colwise().mean();
    c.a1 = (params.W1 * c.p + params.b1).array().tanh();
    const double z2 = params.W2.dot(c.a1) + params.b2;
    c.y = 1.0 / (1.0 + std::exp(-z2));
    return c.y;
}

struct HeadGrads {
    Eigen::MatrixXd Wq, Wk, Wv, W1;
    Eigen::VectorXd b1, W2;
    double b2 = 0.0;

    explicit HeadGrads(const ScoringHeadParams& p)
        : Wq(Eigen::MatrixXd::Zero(p.d, p.d)),
          Wk(Eigen::MatrixXd::Zero(p.d, p.d)),
          Wv(Eigen::MatrixXd::Zero(p.d, p.d)),
          W1(Eigen::MatrixXd::Zero(p.h, p.d)),
          b1(Eigen::VectorXd::Zero(p.h)),
          W2(Eigen::VectorXd::Zero(p.h)),
          b2(0.0) {}

    void set_zero() {
        Wq.setZero();
        Wk.setZero();
        Wv.setZero();
        W1.setZero();
        b1.setZero();
        W2.setZero();
        b2 = 0.0;
    }
};

void backward(const ScoringHeadParams& params, const TokenEmbeddingSequence& input,
              const TokenEmbeddingSequence& candidate, const ForwardCache& c, double dy,
              HeadGrads& g) {
    const double dz2 = dy * c.y * (1.0 - c.y);
    g.W2.noalias() += dz2 * c.a1;
    g.b2 += dz2;

    Eigen::VectorXd dz1 =
        (dz2 * params.W2).cwiseProduct((1.0 - c.a1.array().square()).matrix());
    g.W1.noalias() += dz1 * c.p.transpose();
    g.b1.noalias() += dz1;

    Eigen::VectorXd dp = params.W1.transpose() * dz1;

    const Eigen::Index mq = c.A.rows();
    // p is the row mean of O, so every row of dO equals dp / mq.
    Eigen::MatrixXd dO = (Eigen::VectorXd::Ones(mq) / static_cast<double>(mq)) * dp.transpose();
    Eigen::MatrixXd dVp = c.A.transpose() * dO;
    Eigen::MatrixXd dA = dO * c.Vp.transpose();

    Eigen::MatrixXd dS(dA.rows(), dA.cols());
    for (Eigen::Index i = 0; i < dA.rows(); ++i) {
        const double row_dot = dA.row(i).dot(c.A.row(i));
        dS.row(i) =
            c.A.row(i).cwiseProduct(dA.row(i) - Eigen::RowVectorXd::Constant(dA.cols(), row_dot));
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.d));
    Eigen::MatrixXd dQp = (dS * c.Kp) * inv_sqrt_d;
    Eigen::MatrixXd dKp = (dS.transpose() * c.Qp) * inv_sqrt_d;

    accumulate_projection_grad(input, dQp, g.Wq);
    accumulate_projection_grad(candidate, dKp, g.Wk);
    accumulate_projection_grad(candidate, dVp, g.Wv);
}

struct EncodedExample {
    const TokenEmbeddingSequence* input;
    const TokenEmbeddingSequence* candidate;
    double label;
};

// Token sequences are owned by the pool; examples point into it. Texts repeat
// heavily (few agent descriptions, many labels), so encoding each distinct
// text once matters.
struct EncodedDataset {
    std::vector<TokenEmbeddingSequence> pool;
    std::vector<EncodedExample> examples;
};

EncodedDataset encode_dataset(const std::vector<LabeledExample>& dataset, const Encoder& encoder) {
    EncodedDataset out;
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::pair<std::size_t, std::size_t>> index_pairs;
    index_pairs.reserve(dataset.size());
    auto intern = [&](const std::string& text) {
        auto it = seen.find(text);
        if (it != seen.end()) return it->second;
        std::size_t idx = out.pool.size();
        out.pool.push_back(encoder.encode(text).first);
        seen.emplace(text, idx);
        return idx;
    };
    for (const auto& ex : dataset) {
        index_pairs.emplace_back(intern(ex.input_text), intern(ex.candidate_text));
    }
    // pool is stable from here on; resolve pointers
    out.examples.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out.examples.push_back(
            {&out.pool[index_pairs[i].first], &out.pool[index_pairs[i].second], dataset[i].label});
    }
    return out;
}

double dataset_mse(const ScoringHeadParams& params, const std::vector<EncodedExample>& examples) {
    double total = 0.0;
    for (const auto& ex : examples) {
        const double y = forward(params, *ex.input, *ex.candidate, nullptr);
        const double diff = y - ex.label;
        total += diff * diff;
    }
    return total / static_cast<double>(examples.size());
}

// Mean squared error over the batch plus parameter gradients.
double batch_loss_and_grad(const ScoringHeadParams& params,
                           const std::vector<EncodedExample>& batch, HeadGrads& grads) {
    grads.set_zero();
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        ForwardCache cache;
        const double y = forward(params, *ex.input, *ex.candidate, &cache);
        const double diff = y - ex.label;
        total += diff * diff;
        backward(params, *ex.input, *ex.candidate, cache, 2.0 * diff * inv_b, grads);
    }
    return total * inv_b;
}

// Adam moment constants are fixed; only the learning rate is configurable.
// The second-moment decay is kept short so step sizes adapt quickly on the
// small datasets this head is trained on.
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
    HeadGrads m, v;
    long t = 0;
    explicit AdamState(const ScoringHeadParams& p) : m(p), v(p) {}
};

template <typename Tensor>
void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, double lr,
                        double bc1, double bc2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v.array() = kAdamBeta2 * v.array() + (1.0 - kAdamBeta2) * grad.array().square();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

void adam_step(ScoringHeadParams& params, const HeadGrads& grads, AdamState& state, double lr) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    adam_update_tensor(params.Wq, grads.Wq, state.m.Wq, state.v.Wq, lr, bc1, bc2);
    adam_update_tensor(params.Wk, grads.Wk, state.m.Wk, state.v.Wk, lr, bc1, bc2);
    adam_update_tensor(params.Wv, grads.Wv, state.m.Wv, state.v.Wv, lr, bc1, bc2);
    adam_update_tensor(params.W1, grads.W1, state.m.W1, state.v.W1, lr, bc1, bc2);
    adam_update_tensor(params.b1, grads.b1, state.m.b1, state.v.b1, lr, bc1, bc2);
    adam_update_tensor(params.W2, grads.W2, state.m.W2, state.v.W2, lr, bc1, bc2);
    state.m.b2 = kAdamBeta1 * state.m.b2 + (1.0 - kAdamBeta1) * grads.b2;
    state.v.b2 = kAdamBeta2 * state.v.b2 + (1.0 - kAdamBeta2) * grads.b2 * grads.b2;
    params.b2 -= lr * (state.m.b2 / bc1) / (std::sqrt(state.v.b2 / bc2) + kAdamEps);
}

// Flat views over every parameter tensor in declared order, for the
// finite-difference probe of gradient_check.
std::vector<std::pair<double*, std::size_t>> tensor_spans(ScoringHeadParams& p) {
    const std::size_t dd = static_cast<std::size_t>(p.d) * static_cast<std::size_t>(p.d);
    const std::size_t hd = static_cast<std::size_t>(p.h) * static_cast<std::size_t>(p.d);
    const std::size_t h = static_cast<std::size_t>(p.h);
    return {{p.Wq.data(), dd}, {p.Wk.data(), dd}, {p.Wv.data(), dd},
            {p.W1.data(), hd}, {p.b1.data(), h},  {p.W2.data(), h},
            {&p.b2, 1}};
}

std::vector<std::pair<const double*, std::size_t>> tensor_spans(const HeadGrads& g) {
    return {{g.Wq.data(), static_cast<std::size_t>(g.Wq.size())},
            {g.Wk.data(), static_cast<std::size_t>(g.Wk.size())},
            {g.Wv.data(), static_cast<std::size_t>(g.Wv.size())},
            {g.W1.data(), static_cast<std::size_t>(g.W1.size())},
            {g.b1.data(), static_cast<std::size_t>(g.b1.size())},
            {g.W2.data(), static_cast<std::size_t>(g.W2.size())},
            {&g.b2, 1}};
}

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}
uint16_t get_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
double get_f64(const unsigned char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
}

void put_matrix_row_major(std::string& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
    }
}

}  // namespace

ScoringHeadParams ScoringHeadParams::init(uint64_t seed, int d, int h, double range) {
    Rng rng(seed);
    return init_params(rng, d, h, range);
}

bool ScoringHeadParams::all_finite() const {
    return Wq.allFinite() && Wk.allFinite() && Wv.allFinite() && W1.allFinite() &&
           b1.allFinite() && W2.allFinite() && std::isfinite(b2);
}

std::string params_to_bytes(const ScoringHeadParams& params) {
    std::string out;
    out.reserve(14 + params.parameter_count() * 8);
    out += "BRTR";
    put_u16(out, kParamsFormatVersion);
    put_u32(out, static_cast<uint32_t>(params.d));
    put_u32(out, static_cast<uint32_t>(params.h));
    put_matrix_row_major(out, params.Wq);
    put_matrix_row_major(out, params.Wk);
    put_matrix_row_major(out, params.Wv);
    put_matrix_row_major(out, params.W1);
    for (Eigen::Index i = 0; i < params.b1.size(); ++i) put_f64(out, params.b1[i]);
    for (Eigen::Index i = 0; i < params.W2.size(); ++i) put_f64(out, params.W2[i]);
    put_f64(out, params.b2);
    return out;
}

ScoringHeadParams params_from_bytes(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 14 || bytes.substr(0, 4) != "BRTR") {
        throw ParamsFileError("not a scoring-head params file (bad magic)");
    }
    const uint16_t version = get_u16(p + 4);
    if (version != kParamsFormatVersion) {
        throw ParamsFileError("unsupported params format version " + std::to_string(version));
    }
    const uint32_t d = get_u32(p + 6);
    const uint32_t h = get_u32(p + 10);
    if (d == 0 || h == 0 || d > 1 << 16 || h > 1 << 16) {
        throw ParamsFileError("implausible dimensions d=" + std::to_string(d) +
                              " h=" + std::to_string(h));
    }
    ScoringHeadParams params;
    params.d = static_cast<int>(d);
    params.h = static_cast<int>(h);
    const std::size_t expect = 14 + params.parameter_count() * 8;
    if (bytes.size() != expect) {
        throw ParamsFileError("params file size " + std::to_string(bytes.size()) +
                              " does not match expected " + std::to_string(expect));
    }
    std::size_t off = 14;
    auto read_matrix = [&](Eigen::MatrixXd& m, int rows, int cols) {
        m.resize(rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                m(r, c) = get_f64(p + off);
                off += 8;
            }
        }
    };
    read_matrix(params.Wq, params.d, params.d);
    read_matrix(params.Wk, params.d, params.d);
    read_matrix(params.Wv, params.d, params.d);
    read_matrix(params.W1, params.h, params.d);
    params.b1.resize(params.h);
    for (int i = 0; i < params.h; ++i) {
        params.b1[i] = get_f64(p + off);
        off += 8;
    }
    params.W2.resize(params.h);
    for (int i = 0; i < params.h; ++i) {
        params.W2[i] = get_f64(p + off);
        off += 8;
    }
    params.b2 = get_f64(p + off);
    return params;
}

void save_params(const std::string& path, const ScoringHeadParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParamsFileError("cannot open '" + path + "' for writing");
    const std::string bytes = params_to_bytes(params);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ParamsFileError("short write to '" + path + "'");
}

ScoringHeadParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParamsFileError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return params_from_bytes(ss.str());
}

double head_score(const ScoringHeadParams& params, const TokenEmbeddingSequence& input,
                  const TokenEmbeddingSequence& candidate) {
    return forward(params, input, candidate, nullptr);
}

ScoreVector imp_score(const Query& query, const std::vector<AgentProfile>& candidates,
                      const ScoringHeadParams& params, const Encoder& encoder) {
    if (candidates.empty()) throw EmptyCandidates("imp_score: no candidates");
    const auto [query_seq, query_pooled] = encoder.encode(query.text);
    ScoreVector out;
    out.values.resize(static_cast<Eigen::Index>(candidates.size()));
    out.candidate_order.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto cand_seq = encoder.encode(candidates[i].description).first;
        out.values[static_cast<Eigen::Index>(i)] = forward(params, query_seq, cand_seq, nullptr);
        out.candidate_order.push_back(candidates[i].id);
    }
    return out;
}

ScoreVector gap_score(const Observation& observation, const ScoringHeadParams& params,
                      const Encoder& encoder) {
    if (observation.candidate_descs.empty()) throw EmptyCandidates("gap_score: no candidates");
    const std::string context = render_gap_context(observation.history, observation.current_desc);
    const auto context_seq = encoder.encode(context).first;
    ScoreVector out;
    out.values.resize(static_cast<Eigen::Index>(observation.candidate_descs.size()));
    out.candidate_order.reserve(observation.candidate_descs.size());
    for (std::size_t i = 0; i < observation.candidate_descs.size(); ++i) {
        const auto cand_seq = encoder.encode(observation.candidate_descs[i]).first;
        out.values[static_cast<Eigen::Index>(i)] = forward(params, context_seq, cand_seq, nullptr);
        out.candidate_order.push_back(std::to_string(i));
    }
    return out;
}

double mse_loss(const ScoringHeadParams& params, const std::vector<LabeledExample>& dataset,
                const Encoder& encoder) {
    if (dataset.empty()) throw Error("mse_loss: empty dataset");
    const EncodedDataset enc = encode_dataset(dataset, encoder);
    return dataset_mse(params, enc.examples);
}

TrainResult train(const std::vector<LabeledExample>& dataset, const TrainingConfig& config,
                  const Encoder& encoder) {
    if (dataset.empty()) throw Error("train: empty dataset");
    if (config.learning_rate < 0.0) throw Error("train: negative learning rate");
    if (config.epochs < 0 || config.batch_size < 1) throw Error("train: bad epoch/batch config");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double l = dataset[i].label;
        if (!(l >= 0.0 && l <= 1.0)) {
            throw Error("train: label " + std::to_string(l) + " at example " + std::to_string(i) +
                        " outside [0,1]");
        }
    }

    const EncodedDataset enc = encode_dataset(dataset, encoder);

    // One seeded stream drives initialization first, epoch shuffles after, so
    // the whole run is a pure function of (dataset, config).
    Rng rng(config.seed);
    TrainResult result;
    result.params = init_params(rng, encoder.dim(), kMlpHidden, config.init_range);

    result.loss_trace.push_back(dataset_mse(result.params, enc.examples));

    AdamState adam(result.params);
    HeadGrads grads(result.params);
    std::vector<std::size_t> order(enc.examples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<EncodedExample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(enc.examples[order[i]]);

            const double batch_loss = batch_loss_and_grad(result.params, batch, grads);
            if (!std::isfinite(batch_loss)) {
                throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index));
            }
            adam_step(result.params, grads, adam, config.learning_rate);
        }
        result.loss_trace.push_back(dataset_mse(result.params, enc.examples));
    }
    return result;
}

double gradient_check(const ScoringHeadParams& params, const std::vector<LabeledExample>& batch,
                      const Encoder& encoder, uint64_t seed, int probes) {
    if (batch.empty()) throw Error("gradient_check: empty batch");
    const EncodedDataset enc = encode_dataset(batch, encoder);

    ScoringHeadParams work = params;
    HeadGrads analytic(work);
    batch_loss_and_grad(work, enc.examples, analytic);

    auto spans = tensor_spans(work);
    const auto grad_spans = tensor_spans(analytic);
    std::size_t total = 0;
    for (const auto& [_, n] : spans) total += n;

    Rng rng(seed);
    std::set<std::size_t> chosen;
    while (chosen.size() < static_cast<std::size_t>(probes)) chosen.insert(rng.below(total));

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t flat : chosen) {
        std::size_t tensor = 0, offset = flat;
        while (offset >= spans[tensor].second) {
            offset -= spans[tensor].second;
            ++tensor;
        }
        double* slot = spans[tensor].first + offset;
        const double a = *(grad_spans[tensor].first + offset);

        const double saved = *slot;
        *slot = saved + h;
        const double loss_plus = dataset_mse(work, enc.examples);
        *slot = saved - h;
        const double loss_minus = dataset_mse(work, enc.examples);
        *slot = saved;

        const double n = (loss_plus - loss_minus) / (2.0 * h);
        const double rel = std::abs(a - n) / std::max({1e-3, std::abs(a), std::abs(n)});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace birouter
