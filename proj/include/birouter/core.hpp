#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace birouter {

class Error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyCandidates : Error {
    using Error::Error;
};
struct InvalidProbability : Error {
    using Error::Error;
};
struct InvalidCatalog : Error {
    using Error::Error;
};
struct UnknownAgent : Error {
    using Error::Error;
};

using AgentId = std::string;

// One node of the agent network. `ground_truth_reliable` is a simulation-only
// label: the routing policy never reads it, only the synthetic executor does.
struct AgentProfile {
    AgentId id;
    std::string name;
    std::string description;
    std::vector<std::string> capabilities;
    bool is_finisher = false;
    bool ground_truth_reliable = true;
};

struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> domain_tags;
};

struct Message {
    AgentId sender;
    std::string content;
    int token_count = 0;
};

// Reference tokenizer: split on runs of whitespace. Message::token_count and
// every token budget in the system are defined against this count.
int count_tokens(std::string_view text);
std::vector<std::string> split_tokens(std::string_view text);

Message make_message(AgentId sender, std::string content);

struct ChainHistory {
    Query query;
    std::vector<std::pair<AgentId, Message>> steps;
};

// Strictly local view of one agent at one step: the chain so far (Past), its
// own description (Present) and its candidates' descriptions (Future).
struct Observation {
    ChainHistory history;
    std::string current_desc;
    std::vector<std::string> candidate_descs;
};

struct ChainEntry {
    AgentId agent;
    Message message;
    double step_probability = 1.0;  // probability with which this agent was chosen; 1 for the start agent
};

struct AgentChain {
    Query query;
    std::vector<ChainEntry> entries;
    bool terminated_by_finisher = false;

    std::size_t length() const { return entries.size(); }
};

Observation build_observation(const ChainHistory& history, const AgentProfile& current,
                              const std::vector<AgentProfile>& candidates);

// Product of the recorded per-step selection probabilities (the start agent
// contributes an empty factor). Length-1 chains give 1.
double chain_probability(const AgentChain& chain);

// Sum of token_count over every message in the chain.
long token_cost(const AgentChain& chain);

// Validated collection of agent profiles: unique ids, exactly one Finisher,
// non-empty descriptions. Profiles are kept sorted ascending by id, which is
// the canonical candidate order everywhere in the system.
class AgentCatalog {
  public:
    AgentCatalog() = default;
    explicit AgentCatalog(std::vector<AgentProfile> profiles);

    static AgentCatalog from_json_file(const std::string& path);
    static AgentCatalog from_json_text(std::string_view text);
    std::string to_json_text() const;

    const std::vector<AgentProfile>& profiles() const { return profiles_; }
    const AgentProfile& by_id(const AgentId& id) const;
    bool contains(const AgentId& id) const { return index_.count(id) > 0; }
    const AgentProfile& finisher() const { return profiles_[finisher_index_]; }
    std::size_t size() const { return profiles_.size(); }

  private:
    void validate_and_index();

    std::vector<AgentProfile> profiles_;
    std::map<AgentId, std::size_t> index_;
    std::size_t finisher_index_ = 0;
};

}  // namespace birouter
