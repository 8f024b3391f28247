#include "birouter/network.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include <json.hpp>

#include "birouter/rng.hpp"

namespace birouter {

Topology Topology::build_centralized(const AgentCatalog& agents) {
    if (agents.size() < 2) {
        throw InvalidCatalog("centralized topology needs at least 2 agents, got " +
                             std::to_string(agents.size()));
    }
    Topology t;
    t.mode_ = TopologyMode::Centralized;
    for (const auto& p : agents.profiles()) {
        auto& row = t.table_[p.id];
        if (p.is_finisher) continue;  // terminal node, empty row
        for (const auto& other : agents.profiles()) {
            if (other.id != p.id) row.push_back(other.id);
        }
    }
    return t;
}

Topology Topology::build_k_random(const AgentCatalog& agents, int k, uint64_t seed,
                                  bool finisher_always_candidate) {
    int non_finishers = static_cast<int>(agents.size()) - 1;
    if (k < 1) throw InvalidK("k must be >= 1, got " + std::to_string(k));
    if (k > non_finishers - 1) {
        throw InvalidK("k=" + std::to_string(k) + " exceeds the " +
                       std::to_string(non_finishers - 1) + " available non-finisher peers");
    }

    Topology t;
    t.mode_ = TopologyMode::KRandom;
    t.k_ = k;
    t.seed_ = seed;
    t.finisher_always_candidate_ = finisher_always_candidate;

    const AgentId finisher_id = agents.finisher().id;
    for (const auto& p : agents.profiles()) {
        auto& row = t.table_[p.id];
        if (p.is_finisher) continue;

        std::vector<AgentId> pool;
        for (const auto& other : agents.profiles()) {
            if (other.id != p.id && !other.is_finisher) pool.push_back(other.id);
        }
        // Per-agent stream so one agent's draw never shifts another's.
        Rng rng(splitmix64(seed ^ fnv1a64(p.id)));
        for (int i = 0; i < k; ++i) {
            std::size_t j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        pool.resize(static_cast<std::size_t>(k));
        std::sort(pool.begin(), pool.end());
        row = std::move(pool);
        if (finisher_always_candidate) row.push_back(finisher_id);
    }
    return t;
}

const std::vector<AgentId>& Topology::successors_of(const AgentId& id) const {
    auto it = table_.find(id);
    if (it == table_.end()) throw UnknownAgent("agent '" + id + "' not in topology");
    return it->second;
}

std::vector<AgentProfile> Topology::candidates_of(const AgentCatalog& agents,
                                                  const AgentId& id) const {
    std::vector<AgentProfile> out;
    for (const auto& succ : successors_of(id)) out.push_back(agents.by_id(succ));
    return out;
}

bool Topology::finisher_reachable_from_all(const AgentCatalog& agents) const {
    const AgentId target = agents.finisher().id;
    for (const auto& [start, _] : table_) {
        if (start == target) continue;
        std::set<AgentId> seen{start};
        std::deque<AgentId> frontier{start};
        bool reached = false;
        while (!frontier.empty() && !reached) {
            AgentId cur = frontier.front();
            frontier.pop_front();
            for (const auto& next : successors_of(cur)) {
                if (next == target) {
                    reached = true;
                    break;
                }
                if (seen.insert(next).second) frontier.push_back(next);
            }
        }
        if (!reached) return false;
    }
    return true;
}

std::string Topology::to_json_text() const {
    nlohmann::json doc;
    doc["mode"] = mode_ == TopologyMode::Centralized ? "centralized" : "k_random";
    doc["k"] = k_;
    doc["seed"] = seed_;
    doc["finisher_always_candidate"] = finisher_always_candidate_;
    nlohmann::json neighbors = nlohmann::json::object();
    for (const auto& [id, row] : table_) neighbors[id] = row;
    doc["neighbors"] = neighbors;
    return doc.dump(2) + "\n";
}

Topology Topology::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("topology is not valid JSON: ") + e.what());
    }
    Topology t;
    try {
        std::string mode = doc.at("mode").get<std::string>();
        if (mode == "centralized") {
            t.mode_ = TopologyMode::Centralized;
        } else if (mode == "k_random") {
            t.mode_ = TopologyMode::KRandom;
        } else {
            throw Error("unknown topology mode '" + mode + "'");
        }
        t.k_ = doc.value("k", 0);
        t.seed_ = doc.value("seed", static_cast<uint64_t>(0));
        t.finisher_always_candidate_ = doc.value("finisher_always_candidate", true);
        for (const auto& [id, row] : doc.at("neighbors").items()) {
            t.table_[id] = row.get<std::vector<AgentId>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad topology document: ") + e.what());
    }
    return t;
}

}  // namespace birouter
