#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "birouter/core.hpp"

namespace birouter {

struct InvalidFactor : Error {
    using Error::Error;
};
struct EvaluatorUnavailable : Error {
    using Error::Error;
};

struct PerformanceVerdict {
    AgentId agent;
    double factor = 1.0;  // multiplicative credit update, in [f_min, f_max]
};

// What one chain step did to the task, as judged by the synthetic task model.
// The routing policy never sees these; only post-episode evaluation does.
enum class StepEffect {
    Advanced,   // produced the missing capability, task moved forward
    Corrupted,  // claimed progress but delivered none (unreliable agent)
    Declined,   // honestly reported being unable to help
    Redundant,  // task already complete, step added only cost
    Finisher,   // terminal summary step
};

struct EpisodeOutcome {
    bool success = false;
    std::vector<StepEffect> step_effects;  // aligned with chain.entries
};

// Credit ledger behind the reputation gate. Reads never fail: agents without
// history score 1.0. All stored values stay inside [c_min, c_max].
class CreditStore {
  public:
    static constexpr double kDefaultMin = 0.1;
    static constexpr double kDefaultMax = 3.0;

    explicit CreditStore(double c_min = kDefaultMin, double c_max = kDefaultMax)
        : c_min_(c_min), c_max_(c_max) {}

    double credit_of(const AgentId& id) const;
    Eigen::VectorXd credits_of(const std::vector<AgentProfile>& candidates) const;

    // Applies every verdict or none: factors are validated up front, then
    // credit' = clamp(credit * factor) in verdict order. Application order is
    // observable only when the clamp bounds are hit.
    void apply_verdicts(const std::vector<PerformanceVerdict>& verdicts);

    void set(const AgentId& id, double credit);  // clamped; for seeding tests
    const std::map<AgentId, double>& snapshot() const { return credits_; }
    double min_credit() const { return c_min_; }
    double max_credit() const { return c_max_; }

  private:
    std::map<AgentId, double> credits_;
    double c_min_;
    double c_max_;
};

inline constexpr double kFactorMin = 0.8;
inline constexpr double kFactorMax = 1.2;

// Deterministic stand-in for an LLM judge: Advanced 1.1, Corrupted 0.85,
// everything else neutral; a failed episode folds an extra 0.95 into every
// factor before clamping to [f_min, f_max].
std::vector<PerformanceVerdict> heuristic_evaluator(const AgentChain& chain,
                                                    const EpisodeOutcome& outcome);

enum class EvaluatorFallback { Raise, Heuristic, Skip };

struct RemoteEvaluatorConfig {
    std::string host;
    int port = 0;
    std::string path = "/evaluate";
    int deadline_ms = 2000;
    EvaluatorFallback fallback = EvaluatorFallback::Raise;
};

// HTTP adapter for an external judge. POSTs the chain and outcome, expects
// {"verdicts": [{"agent": id, "factor": f}, ...]}; out-of-range factors are
// clamped with a warning on stderr. On network or parse failure the
// configured fallback decides: heuristic verdicts, an empty list, or
// EvaluatorUnavailable.
std::vector<PerformanceVerdict> remote_evaluator(const AgentChain& chain,
                                                 const EpisodeOutcome& outcome,
                                                 const RemoteEvaluatorConfig& config);

// Credit-trajectory CSV rows: episode_index,agent_id,credit (sorted by id).
void write_credit_csv_header(std::ostream& out);
void append_credit_csv(std::ostream& out, long episode_index, const CreditStore& store);

}  // namespace birouter
