#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "birouter/core.hpp"
#include "birouter/embedding.hpp"
#include "birouter/network.hpp"
#include "birouter/reputation.hpp"
#include "birouter/rng.hpp"
#include "birouter/scorer.hpp"

namespace birouter {

struct ShapeMismatch : Error {
    using Error::Error;
};
struct ExecutorError : Error {
    using Error::Error;
};

enum class Selection { Argmax, Sample };

struct PolicyConfig {
    double alpha = 0.3;  // weight of the importance branch vs. the cohesion branch
    Selection selection = Selection::Argmax;
    uint64_t sample_seed = 0;  // PRNG stream for Selection::Sample
    int max_steps = 10;        // safety cap on routed hops, even in adaptive mode
    bool credit_gating = true;             // false: every credit treated as exactly 1
    bool successor_aware_messages = true;  // false: executors never see the successor
    bool adaptive_termination = true;      // false: run fixed_steps hops, then force the finisher
    int fixed_steps = 5;
    // Experimental: drop candidates whose credit falls below this value before
    // scoring (0 disables). If the filter would empty the candidate set it is
    // skipped, so termination stays possible.
    double credit_exclusion_threshold = 0.0;
};

// Everything the router saw and chose at one hop.
struct StepDecision {
    int step = 0;   // index of the deciding chain entry (0 = start agent)
    AgentId agent;  // the agent doing the choosing
    std::vector<AgentId> candidates;
    Eigen::VectorXd imp;
    Eigen::VectorXd gap;
    Eigen::VectorXd credits;  // as used: all ones when credit gating is off
    Eigen::VectorXd logits;
    Eigen::VectorXd probabilities;
    AgentId chosen;
    double chosen_probability = 1.0;
};

std::string decision_to_json_line(const StepDecision& decision);
void write_decisions_jsonl(std::ostream& out, const std::vector<StepDecision>& decisions);

// logits_j = credits_j * (alpha * s_imp_j + (1 - alpha) * s_gap_j)
Eigen::VectorXd synthesize_logits(const Eigen::VectorXd& s_imp, const Eigen::VectorXd& s_gap,
                                  const Eigen::VectorXd& credits, double alpha);

// Max-subtracted softmax over the logits, then either the argmax index (ties
// break to the lowest index) or a draw from the distribution.
std::pair<Eigen::Index, Eigen::VectorXd> select_successor(const Eigen::VectorXd& logits,
                                                          Selection selection, Rng* rng);

// Scoring interface the router consumes. The production implementation wraps
// the two trained heads; tests and ablations substitute rigged scorers.
class CandidateScorer {
  public:
    virtual ~CandidateScorer() = default;
    virtual Eigen::VectorXd imp_scores(const Query& query,
                                       const std::vector<AgentProfile>& candidates) = 0;
    virtual Eigen::VectorXd gap_scores(const Observation& observation,
                                       const std::vector<AgentProfile>& candidates) = 0;
};

// Trained-head scorer with a per-instance encoding cache (descriptions repeat
// across steps; contexts do not, but interning is still cheap).
class HeadScorer : public CandidateScorer {
  public:
    HeadScorer(ScoringHeadParams imp_params, ScoringHeadParams gap_params, const Encoder& encoder);

    Eigen::VectorXd imp_scores(const Query& query,
                               const std::vector<AgentProfile>& candidates) override;
    Eigen::VectorXd gap_scores(const Observation& observation,
                               const std::vector<AgentProfile>& candidates) override;

  private:
    const TokenEmbeddingSequence& encoded(const std::string& text);

    ScoringHeadParams imp_params_;
    ScoringHeadParams gap_params_;
    const Encoder& encoder_;
    std::unordered_map<std::string, TokenEmbeddingSequence> cache_;
};

// Produces the message an agent emits at its step. The successor pointer is
// null for terminal messages and when the router withholds it (blind mode).
class MessageExecutor {
  public:
    virtual ~MessageExecutor() = default;
    virtual Message execute(const Query& query, const ChainHistory& history,
                            const AgentProfile& agent, const AgentProfile* successor) = 0;
};

// Successor-aware message generation: the successor is resolved before the
// message is written, and blind mode withholds it from the executor.
Message generate_message(MessageExecutor& executor, const Query& query,
                         const ChainHistory& history, const AgentProfile& current,
                         const AgentProfile* successor, bool blind);

struct RunChainResult {
    enum class Status { Completed, DeadEnd, ExecutorFailed };

    AgentChain chain;
    std::vector<StepDecision> decisions;
    Status status = Status::Completed;
    std::string error;  // executor failure detail when status == ExecutorFailed
};

// The full routing loop: score candidates, select, write the successor-aware
// message, hop; ends when the finisher is selected (adaptive), after
// fixed_steps hops plus a forced finisher pass (fixed), or at the max_steps
// safety cap. Credits are read once per step from the store handed in; the
// store is never written here.
RunChainResult run_chain(const Query& query, const AgentId& start, const AgentCatalog& agents,
                         const Topology& topology, CandidateScorer& scorer,
                         const CreditStore& credits, MessageExecutor& executor,
                         const PolicyConfig& config);

}  // namespace birouter
