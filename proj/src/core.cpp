#include "birouter/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace birouter {

int count_tokens(std::string_view text) {
    int n = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

Message make_message(AgentId sender, std::string content) {
    Message m;
    m.sender = std::move(sender);
    m.token_count = count_tokens(content);
    m.content = std::move(content);
    return m;
}

Observation build_observation(const ChainHistory& history, const AgentProfile& current,
                              const std::vector<AgentProfile>& candidates) {
    if (candidates.empty()) {
        throw EmptyCandidates("build_observation: candidate set is empty");
    }
    Observation obs;
    obs.history = history;
    obs.current_desc = current.description;
    obs.candidate_descs.reserve(candidates.size());
    for (const auto& c : candidates) obs.candidate_descs.push_back(c.description);
    return obs;
}

double chain_probability(const AgentChain& chain) {
    double p = 1.0;
    for (std::size_t i = 0; i < chain.entries.size(); ++i) {
        double sp = chain.entries[i].step_probability;
        if (!(sp > 0.0) || sp > 1.0) {
            throw InvalidProbability("chain_probability: step probability outside (0,1] at entry " +
                                     std::to_string(i));
        }
        if (i > 0) p *= sp;
    }
    return p;
}

long token_cost(const AgentChain& chain) {
    long total = 0;
    for (const auto& e : chain.entries) total += e.message.token_count;
    return total;
}

AgentCatalog::AgentCatalog(std::vector<AgentProfile> profiles) : profiles_(std::move(profiles)) {
    validate_and_index();
}

void AgentCatalog::validate_and_index() {
    std::sort(profiles_.begin(), profiles_.end(),
              [](const AgentProfile& a, const AgentProfile& b) { return a.id < b.id; });
    index_.clear();
    std::size_t finishers = 0;
    for (std::size_t i = 0; i < profiles_.size(); ++i) {
        const auto& p = profiles_[i];
        if (p.id.empty()) throw InvalidCatalog("agent with empty id");
        if (p.description.empty()) throw InvalidCatalog("agent '" + p.id + "' has empty description");
        if (!index_.emplace(p.id, i).second) throw InvalidCatalog("duplicate agent id '" + p.id + "'");
        if (p.is_finisher) {
            finisher_index_ = i;
            ++finishers;
        }
    }
    if (finishers != 1) {
        throw InvalidCatalog("catalog must contain exactly one finisher, found " +
                             std::to_string(finishers));
    }
}

const AgentProfile& AgentCatalog::by_id(const AgentId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownAgent("unknown agent id '" + id + "'");
    return profiles_[it->second];
}

AgentCatalog AgentCatalog::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidCatalog("cannot open agent catalog file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

AgentCatalog AgentCatalog::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidCatalog(std::string("agent catalog is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw InvalidCatalog("agent catalog must be a JSON array");
    std::vector<AgentProfile> profiles;
    for (const auto& item : doc) {
        AgentProfile p;
        try {
            p.id = item.at("id").get<std::string>();
            p.name = item.value("name", p.id);
            p.description = item.at("description").get<std::string>();
            p.capabilities = item.value("capabilities", std::vector<std::string>{});
            p.is_finisher = item.value("is_finisher", false);
            p.ground_truth_reliable = item.value("ground_truth_reliable", true);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidCatalog(std::string("bad agent entry: ") + e.what());
        }
        profiles.push_back(std::move(p));
    }
    return AgentCatalog(std::move(profiles));
}

std::string AgentCatalog::to_json_text() const {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& p : profiles_) {
        doc.push_back({{"id", p.id},
                       {"name", p.name},
                       {"description", p.description},
                       {"capabilities", p.capabilities},
                       {"is_finisher", p.is_finisher},
                       {"ground_truth_reliable", p.ground_truth_reliable}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace birouter
