#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "birouter/core.hpp"
#include "birouter/embedding.hpp"

namespace birouter {

struct TrainingDiverged : Error {
    using Error::Error;
};
struct ParamsFileError : Error {
    using Error::Error;
};

inline constexpr int kMlpHidden = 64;
inline constexpr uint16_t kParamsFormatVersion = 1;

// One scoring branch: single-head cross-attention (input tokens as queries,
// candidate tokens as keys/values) followed by mean pooling and a d -> h -> 1
// MLP with tanh hidden units and a sigmoid output. The two branches of the
// router hold fully separate instances of these parameters.
struct ScoringHeadParams {
    int d = kEmbeddingDim;
    int h = kMlpHidden;
    Eigen::MatrixXd Wq;  // d x d
    Eigen::MatrixXd Wk;  // d x d
    Eigen::MatrixXd Wv;  // d x d
    Eigen::MatrixXd W1;  // h x d
    Eigen::VectorXd b1;  // h
    Eigen::VectorXd W2;  // h  (output layer weights)
    double b2 = 0.0;

    // All parameters drawn uniform in [-range, range] from one seeded stream,
    // in declared order (Wq, Wk, Wv, W1, b1, W2, b2), row-major per tensor.
    static ScoringHeadParams init(uint64_t seed, int d = kEmbeddingDim, int h = kMlpHidden,
                                  double range = 0.05);

    std::size_t parameter_count() const {
        return 3 * static_cast<std::size_t>(d) * d + static_cast<std::size_t>(h) * d + h + h + 1;
    }
    bool all_finite() const;
};

// Flat binary params file: magic "BRTR", version u16, d u32, h u32, then all
// parameters as row-major IEEE-754 little-endian doubles in declared order.
std::string params_to_bytes(const ScoringHeadParams& params);
ScoringHeadParams params_from_bytes(std::string_view bytes);
void save_params(const std::string& path, const ScoringHeadParams& params);
ScoringHeadParams load_params(const std::string& path);

// Per-candidate scores in (0,1), aligned with the candidate order handed in.
struct ScoreVector {
    Eigen::VectorXd values;
    std::vector<std::string> candidate_order;
};

// Raw head evaluation on encoded token sequences.
double head_score(const ScoringHeadParams& params, const TokenEmbeddingSequence& input,
                  const TokenEmbeddingSequence& candidate);

// Importance branch: how relevant each candidate is to the task itself.
// Query tokens attend over each candidate's description tokens.
ScoreVector imp_score(const Query& query, const std::vector<AgentProfile>& candidates,
                      const ScoringHeadParams& params, const Encoder& encoder);

// Cohesion branch: how well each candidate continues the chain. The rendered
// history plus the current agent's description attends over each candidate's
// description tokens. Scores align with observation.candidate_descs; the
// order labels are positional.
ScoreVector gap_score(const Observation& observation, const ScoringHeadParams& params,
                      const Encoder& encoder);

struct TrainingConfig {
    double learning_rate = 1e-3;
    int epochs = 50;
    int batch_size = 32;
    uint64_t seed = 0;
    double init_range = 0.05;
};

// (input text, candidate description, target score). The importance branch
// trains on (query, description) pairs, the cohesion branch on (rendered
// context, description) pairs; both reduce to this shape.
struct LabeledExample {
    std::string input_text;
    std::string candidate_text;
    double label = 0.0;
};

struct TrainResult {
    ScoringHeadParams params;
    // Full-dataset MSE before training, then after each epoch (epochs+1 entries).
    std::vector<double> loss_trace;
};

// Mini-batch MSE training (Adam) from seeded initialization. Bit-identical
// given identical (dataset, config). Throws TrainingDiverged with the batch
// index when a batch loss goes non-finite.
TrainResult train(const std::vector<LabeledExample>& dataset, const TrainingConfig& config,
                  const Encoder& encoder);

double mse_loss(const ScoringHeadParams& params, const std::vector<LabeledExample>& dataset,
                const Encoder& encoder);

// Compares analytic gradients against central finite differences (step 1e-5)
// on `probes` randomly chosen parameters; returns the max relative error
// |a - n| / max(1e-3, |a|, |n|).
double gradient_check(const ScoringHeadParams& params, const std::vector<LabeledExample>& batch,
                      const Encoder& encoder, uint64_t seed, int probes = 64);

}  // namespace birouter
