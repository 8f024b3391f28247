#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "birouter/core.hpp"

namespace birouter {

struct InvalidK : Error {
    using Error::Error;
};

enum class TopologyMode { Centralized, KRandom };

// Directed successor graph: each agent's row lists the candidates it may hand
// the task to, in canonical (ascending id) order. The Finisher never has
// successors. Immutable once built.
class Topology {
  public:
    // Every non-Finisher agent may hand off to every other agent.
    static Topology build_centralized(const AgentCatalog& agents);

    // Self-organizing regime: each non-Finisher agent knows k distinct
    // non-Finisher peers drawn from a seeded PRNG, plus the Finisher when
    // finisher_always_candidate is set (the default, so termination is
    // always available).
    static Topology build_k_random(const AgentCatalog& agents, int k, uint64_t seed,
                                   bool finisher_always_candidate = true);

    static Topology from_json_text(std::string_view text);
    std::string to_json_text() const;

    const std::vector<AgentId>& successors_of(const AgentId& id) const;
    std::vector<AgentProfile> candidates_of(const AgentCatalog& agents, const AgentId& id) const;

    // True when the Finisher can be reached from every agent by following
    // successor edges. Guaranteed under finisher_always_candidate.
    bool finisher_reachable_from_all(const AgentCatalog& agents) const;

    TopologyMode mode() const { return mode_; }
    int k() const { return k_; }
    uint64_t seed() const { return seed_; }
    bool finisher_always_candidate() const { return finisher_always_candidate_; }
    const std::map<AgentId, std::vector<AgentId>>& neighbor_table() const { return table_; }

  private:
    TopologyMode mode_ = TopologyMode::Centralized;
    int k_ = 0;  // meaningful only in KRandom mode
    uint64_t seed_ = 0;
    bool finisher_always_candidate_ = true;
    std::map<AgentId, std::vector<AgentId>> table_;
};

}  // namespace birouter
