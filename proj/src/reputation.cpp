#include "birouter/reputation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <ostream>

#include <httplib.h>
#include <json.hpp>

namespace birouter {

double CreditStore::credit_of(const AgentId& id) const {
    auto it = credits_.find(id);
    return it == credits_.end() ? 1.0 : it->second;
}

Eigen::VectorXd CreditStore::credits_of(const std::vector<AgentProfile>& candidates) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = credit_of(candidates[i].id);
    }
    return out;
}

void CreditStore::apply_verdicts(const std::vector<PerformanceVerdict>& verdicts) {
    for (const auto& v : verdicts) {
        if (!std::isfinite(v.factor) || v.factor < kFactorMin || v.factor > kFactorMax) {
            throw InvalidFactor("verdict factor " + std::to_string(v.factor) + " for agent '" +
                                v.agent + "' outside [" + std::to_string(kFactorMin) + ", " +
                                std::to_string(kFactorMax) + "]");
        }
    }
    for (const auto& v : verdicts) {
        double updated = credit_of(v.agent) * v.factor;
        credits_[v.agent] = std::clamp(updated, c_min_, c_max_);
    }
}

void CreditStore::set(const AgentId& id, double credit) {
    credits_[id] = std::clamp(credit, c_min_, c_max_);
}

std::vector<PerformanceVerdict> heuristic_evaluator(const AgentChain& chain,
                                                    const EpisodeOutcome& outcome) {
    std::vector<PerformanceVerdict> verdicts;
    verdicts.reserve(chain.entries.size());
    for (std::size_t i = 0; i < chain.entries.size(); ++i) {
        StepEffect effect =
            i < outcome.step_effects.size() ? outcome.step_effects[i] : StepEffect::Declined;
        double factor = 1.0;
        switch (effect) {
            case StepEffect::Advanced: factor = 1.1; break;
            case StepEffect::Corrupted: factor = 0.85; break;
            case StepEffect::Declined:
            case StepEffect::Redundant:
            case StepEffect::Finisher: factor = 1.0; break;
        }
        if (!outcome.success) factor *= 0.95;
        factor = std::clamp(factor, kFactorMin, kFactorMax);
        verdicts.push_back({chain.entries[i].agent, factor});
    }
    return verdicts;
}

namespace {

std::vector<PerformanceVerdict> fall_back(const AgentChain& chain, const EpisodeOutcome& outcome,
                                          const RemoteEvaluatorConfig& config,
                                          const std::string& reason) {
    switch (config.fallback) {
        case EvaluatorFallback::Heuristic:
            std::cerr << "remote evaluator: " << reason << "; falling back to heuristic\n";
            return heuristic_evaluator(chain, outcome);
        case EvaluatorFallback::Skip:
            std::cerr << "remote evaluator: " << reason << "; skipping credit update\n";
            return {};
        case EvaluatorFallback::Raise: break;
    }
    throw EvaluatorUnavailable("remote evaluator: " + reason);
}

}  // namespace

std::vector<PerformanceVerdict> remote_evaluator(const AgentChain& chain,
                                                 const EpisodeOutcome& outcome,
                                                 const RemoteEvaluatorConfig& config) {
    httplib::Client client(config.host, config.port);
    client.set_connection_timeout(0, config.deadline_ms * 1000);
    client.set_read_timeout(0, config.deadline_ms * 1000);

    nlohmann::json body;
    body["query"] = chain.query.text;
    body["success"] = outcome.success;
    body["chain"] = nlohmann::json::array();
    for (const auto& e : chain.entries) {
        body["chain"].push_back({{"agent", e.agent}, {"content", e.message.content}});
    }

    auto res = client.Post(config.path, body.dump(), "application/json");
    if (!res) return fall_back(chain, outcome, config, "endpoint unreachable");
    if (res->status != 200) {
        return fall_back(chain, outcome, config, "status " + std::to_string(res->status));
    }

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        return fall_back(chain, outcome, config, std::string("malformed JSON: ") + e.what());
    }
    if (!parsed.contains("verdicts") || !parsed["verdicts"].is_array()) {
        return fall_back(chain, outcome, config, "response missing verdicts array");
    }

    std::vector<PerformanceVerdict> verdicts;
    for (const auto& item : parsed["verdicts"]) {
        PerformanceVerdict v;
        try {
            v.agent = item.at("agent").get<std::string>();
            v.factor = item.at("factor").get<double>();
        } catch (const nlohmann::json::exception& e) {
            return fall_back(chain, outcome, config, std::string("bad verdict entry: ") + e.what());
        }
        if (!std::isfinite(v.factor)) {
            return fall_back(chain, outcome, config, "non-finite factor");
        }
        if (v.factor < kFactorMin || v.factor > kFactorMax) {
            double clamped = std::clamp(v.factor, kFactorMin, kFactorMax);
            std::cerr << "remote evaluator: factor " << v.factor << " for agent '" << v.agent
                      << "' out of range, clamped to " << clamped << "\n";
            v.factor = clamped;
        }
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

void write_credit_csv_header(std::ostream& out) { out << "episode_index,agent_id,credit\n"; }

void append_credit_csv(std::ostream& out, long episode_index, const CreditStore& store) {
    for (const auto& [id, credit] : store.snapshot()) {
        out << episode_index << ',' << id << ',' << credit << '\n';
    }
}

}  // namespace birouter
