#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "birouter/core.hpp"
#include "birouter/network.hpp"
#include "birouter/policy.hpp"
#include "birouter/reputation.hpp"
#include "birouter/world.hpp"

namespace birouter {

struct OracleTooLarge : Error {
    using Error::Error;
};

// Unreliable agents claim progress but produce none. Their descriptions stay
// truthful-looking, so the attack is invisible to the router a priori.
struct AttackConfig {
    double unreliable_fraction = 0.0;
    enum class Corruption { WrongOutput };
    Corruption mode = Corruption::WrongOutput;
};

// Flags a seeded sample of floor(fraction x non-finisher agents) unreliable.
AgentCatalog inject_unreliable(const AgentCatalog& agents, const AttackConfig& attack,
                               uint64_t seed);

// One agent's turn against a task: the emitted message, the updated progress
// and how the step should be judged.
struct StepResult {
    Message message;
    int progress = 0;
    StepEffect effect = StepEffect::Declined;
};

// Deterministic executor rule table. An agent holding the next required
// capability advances progress (or only claims to, when unreliable) with a
// nominal-length message; a capability mismatch declines in 3 tokens; a
// completed task makes further work redundant; the finisher summarizes.
StepResult execute_step(const AgentProfile& agent, const world::SyntheticTask& task, int progress,
                        const AgentProfile* successor);

// MessageExecutor adapter that advances task progress as the chain runs and
// remembers one StepEffect per chain entry, in order.
class TaskExecutor : public MessageExecutor {
  public:
    explicit TaskExecutor(world::SyntheticTask task) : task_(std::move(task)) {}

    Message execute(const Query& query, const ChainHistory& history, const AgentProfile& agent,
                    const AgentProfile* successor) override;

    int progress() const { return progress_; }
    const std::vector<StepEffect>& effects() const { return effects_; }

  private:
    world::SyntheticTask task_;
    int progress_ = 0;
    std::vector<StepEffect> effects_;
};

struct EpisodeResult {
    std::string task_id;
    AgentChain chain;
    bool success = false;
    int progress = 0;
    long token_cost = 0;
    std::vector<StepDecision> decisions;
    RunChainResult::Status status = RunChainResult::Status::Completed;
    std::string error;
};

// One task through the routing loop. Success means every required capability
// was produced in order and the chain terminated (finisher or step cap), not
// by a dead end or executor failure. When update_credits is set, heuristic
// verdicts for the whole chain are applied to the store atomically at the end.
EpisodeResult run_episode(const world::SyntheticTask& task, const AgentCatalog& agents,
                          const Topology& topology, CandidateScorer& scorer, CreditStore& credits,
                          const PolicyConfig& policy, const AgentId& start, bool update_credits);

struct MetricsReport {
    long episodes = 0;
    double success_rate = 0.0;
    double mean_chain_length = 0.0;
    double mean_token_cost = 0.0;
    std::vector<EpisodeResult> episode_results;
    // Fraction of routing decisions that chose the agent, per episode quartile.
    std::map<AgentId, std::array<double, 4>> selection_frequency;
    // Credit snapshot after each episode (only agents with adjusted credits).
    std::vector<std::map<AgentId, double>> credit_history;
};

// Hands run_experiment the scorer for a task; heads are typically one shared
// instance, rigged test scorers may differ per task.
using ScorerProvider = std::function<CandidateScorer&(const world::SyntheticTask&)>;

struct ExperimentConfig {
    PolicyConfig policy;
    AgentId start = "coordinator";
    bool update_credits = true;
    // Episode count; 0 means one pass over the task set. Episode i runs
    // tasks[i % tasks.size()]. Sampled selection derives a per-episode RNG
    // stream from policy.sample_seed, so episodes stay independent.
    long episodes = 0;
};

MetricsReport run_experiment(const std::vector<world::SyntheticTask>& tasks,
                             const AgentCatalog& agents, const Topology& topology,
                             const ScorerProvider& scorer_for, CreditStore& credits,
                             const ExperimentConfig& config);

// CSV/JSONL exports. The credit trajectory uses the reputation module's
// column layout; decision traces use the policy module's JSON lines.
// write_summary_row appends one data row, so several reports can share a file.
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const std::string& label, const MetricsReport& report);
void write_summary_csv(std::ostream& out, const std::string& label, const MetricsReport& report);
void write_episodes_csv(std::ostream& out, const MetricsReport& report);
void write_credit_trajectory_csv(std::ostream& out, const MetricsReport& report);
void write_decision_traces(std::ostream& out, const MetricsReport& report);

struct OracleResult {
    AgentChain chain;
    bool success = false;
    long token_cost = 0;
};

// A small routing instance the exhaustive oracle can still afford: six agents
// (coordinator, one specialist per required capability, off-domain
// distractors, finisher) on a fully connected graph, with a task needing one
// or two pipeline stages in a single standard domain. Always solvable within
// max_depth hops by a chain the oracle can find.
struct OracleInstance {
    world::SyntheticTask task;
    AgentCatalog agents;
    Topology topology;
    AgentId start = "coordinator";
    int max_depth = 5;
};

std::vector<OracleInstance> make_oracle_instances(int count, uint64_t seed);

// Exhaustive enumeration of candidate-respecting chains from `start` up to
// max_depth entries, each simulated with execute_step. Returns the successful
// chain with minimum token cost (ties: shorter chain, then the one visited
// first in canonical successor order, which is lexicographically smallest).
// success=false with an empty chain when no enumerated chain solves the task.
OracleResult brute_force_optimal_chain(const world::SyntheticTask& task,
                                       const AgentCatalog& agents, const Topology& topology,
                                       const AgentId& start, int max_depth);

}  // namespace birouter
