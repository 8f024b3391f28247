#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "birouter/core.hpp"
#include "birouter/rng.hpp"

namespace birouter::world {

// Token budgets for the synthetic message economy. Useful work and redundant
// chatter both cost a nominal message; declines are cheap; the finisher's
// summary is a short fixed sentence.
inline constexpr int kNominalMessageTokens = 30;
inline constexpr int kDeclineTokens = 3;

// Processing stages every task walks through, in canonical pipeline order.
const std::vector<std::string>& stages();
int stage_index(const std::string& stage);  // -1 when unknown

// Reference catalog of 115 problem domains (single lowercase tokens).
const std::vector<std::string>& reference_domains();

// Compound capability tag: one token, "<stage>.<domain>".
std::string capability_tag(const std::string& stage, const std::string& domain);

// Shared text templates. Training data and the simulator both speak this
// vocabulary, which is what lets heads trained on generated labels route
// real simulated chains.
std::string agent_description(const std::string& stage, const std::vector<std::string>& domains);
std::string coordinator_description();
std::string finisher_description();
const std::vector<std::string>& query_verbs();
std::string query_text(const std::string& verb, const std::string& domain,
                       const std::vector<std::string>& stage_names);

AgentProfile make_finisher(AgentId id = "zz_finisher");
AgentProfile make_coordinator(AgentId id = "coordinator");

// Message bodies. Every builder yields an exact token count: advance and
// redundant messages are padded/truncated to `nominal_tokens`.
std::string advance_text(const std::string& stage, const std::string& domain,
                         const std::string* successor_name, int nominal_tokens);
std::string redundant_text(int nominal_tokens);
std::string decline_text();   // kDeclineTokens tokens
std::string finisher_text();  // short fixed summary

// The standard experiment world: per stage, four specialists holding
// overlapping 4-domain windows over the 8 standard domains (every
// (stage, domain) pair is covered twice), plus a capability-free coordinator
// that starts every chain and the finisher. 22 agents total.
const std::vector<std::string>& standard_domains();
AgentCatalog standard_catalog();

// One synthetic work item: a query plus the ordered capability tags that
// must be produced, in order, for the task to count as solved.
struct SyntheticTask {
    Query query;
    std::vector<std::string> required_capabilities;  // 1..4 entries
    int nominal_len = kNominalMessageTokens;
};

SyntheticTask make_task(const std::string& id, const std::string& verb, const std::string& domain,
                        const std::vector<std::string>& stage_names,
                        int nominal_len = kNominalMessageTokens);

// Seeded task mix over the standard domains: 50% single-capability tasks,
// 20% two, 20% three, 10% four (floor split, remainder to single-capability),
// shuffled into a seeded order.
std::vector<SyntheticTask> standard_task_mix(int count, uint64_t seed);

// Task-set JSON: array of {id, query_text, required_capabilities, nominal_len}.
std::vector<SyntheticTask> tasks_from_json_text(std::string_view text);
std::vector<SyntheticTask> tasks_from_json_file(const std::string& path);
std::string tasks_to_json_text(const std::vector<SyntheticTask>& tasks);

}  // namespace birouter::world
