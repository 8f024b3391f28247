#include "birouter/policy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

namespace birouter {

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

}  // namespace

std::string decision_to_json_line(const StepDecision& d) {
    nlohmann::json doc;
    doc["step"] = d.step;
    doc["agent"] = d.agent;
    doc["candidates"] = d.candidates;
    doc["imp"] = vec_to_json(d.imp);
    doc["gap"] = vec_to_json(d.gap);
    doc["credits"] = vec_to_json(d.credits);
    doc["logits"] = vec_to_json(d.logits);
    doc["probabilities"] = vec_to_json(d.probabilities);
    doc["chosen"] = d.chosen;
    doc["chosen_probability"] = d.chosen_probability;
    return doc.dump();
}

void write_decisions_jsonl(std::ostream& out, const std::vector<StepDecision>& decisions) {
    for (const auto& d : decisions) out << decision_to_json_line(d) << '\n';
}

Eigen::VectorXd synthesize_logits(const Eigen::VectorXd& s_imp, const Eigen::VectorXd& s_gap,
                                  const Eigen::VectorXd& credits, double alpha) {
    if (s_imp.size() == 0 || s_imp.size() != s_gap.size() || s_imp.size() != credits.size()) {
        throw ShapeMismatch("synthesize_logits: sizes imp=" + std::to_string(s_imp.size()) +
                            " gap=" + std::to_string(s_gap.size()) +
                            " credits=" + std::to_string(credits.size()));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error("synthesize_logits: alpha " + std::to_string(alpha) + " outside [0,1]");
    }
    return credits.cwiseProduct(alpha * s_imp + (1.0 - alpha) * s_gap);
}

std::pair<Eigen::Index, Eigen::VectorXd> select_successor(const Eigen::VectorXd& logits,
                                                          Selection selection, Rng* rng) {
    if (logits.size() == 0) throw ShapeMismatch("select_successor: empty logits");
    const double max_logit = logits.maxCoeff();
    Eigen::VectorXd probs = (logits.array() - max_logit).exp();
    probs /= probs.sum();

    if (selection == Selection::Argmax) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < probs.size(); ++i) {
            if (probs[i] > probs[best]) best = i;  // strict: ties keep the lowest index
        }
        return {best, std::move(probs)};
    }

    if (rng == nullptr) throw Error("select_successor: Sample mode needs a PRNG");
    const double u = rng->uniform01();
    double cum = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return {i, std::move(probs)};
    }
    return {probs.size() - 1, std::move(probs)};  // guard against rounding shortfall
}

HeadScorer::HeadScorer(ScoringHeadParams imp_params, ScoringHeadParams gap_params,
                       const Encoder& encoder)
    : imp_params_(std::move(imp_params)), gap_params_(std::move(gap_params)), encoder_(encoder) {}

const TokenEmbeddingSequence& HeadScorer::encoded(const std::string& text) {
    auto it = cache_.find(text);
    if (it == cache_.end()) it = cache_.emplace(text, encoder_.encode(text).first).first;
    return it->second;
}

Eigen::VectorXd HeadScorer::imp_scores(const Query& query,
                                       const std::vector<AgentProfile>& candidates) {
    if (candidates.empty()) throw EmptyCandidates("imp_scores: no candidates");
    const TokenEmbeddingSequence& q = encoded(query.text);
    Eigen::VectorXd out(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] =
            head_score(imp_params_, q, encoded(candidates[i].description));
    }
    return out;
}

Eigen::VectorXd HeadScorer::gap_scores(const Observation& observation,
                                       const std::vector<AgentProfile>& candidates) {
    if (candidates.empty()) throw EmptyCandidates("gap_scores: no candidates");
    const std::string context = render_gap_context(observation.history, observation.current_desc);
    const TokenEmbeddingSequence& ctx = encoded(context);
    Eigen::VectorXd out(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] =
            head_score(gap_params_, ctx, encoded(candidates[i].description));
    }
    return out;
}

Message generate_message(MessageExecutor& executor, const Query& query,
                         const ChainHistory& history, const AgentProfile& current,
                         const AgentProfile* successor, bool blind) {
    const AgentProfile* visible = blind ? nullptr : successor;
    Message raw = executor.execute(query, history, current, visible);
    Message out = make_message(current.id, std::move(raw.content));
    return out;
}

RunChainResult run_chain(const Query& query, const AgentId& start, const AgentCatalog& agents,
                         const Topology& topology, CandidateScorer& scorer,
                         const CreditStore& credits, MessageExecutor& executor,
                         const PolicyConfig& config) {
    if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
        throw Error("run_chain: alpha outside [0,1]");
    }
    if (config.max_steps < 1) throw Error("run_chain: max_steps must be >= 1");
    if (!config.adaptive_termination && config.fixed_steps < 1) {
        throw Error("run_chain: fixed_steps must be >= 1");
    }
    const AgentProfile& start_profile = agents.by_id(start);
    if (start_profile.is_finisher) throw Error("run_chain: start agent must not be the finisher");

    RunChainResult result;
    result.chain.query = query;
    ChainHistory history;
    history.query = query;

    Rng sample_rng(config.sample_seed);
    Rng* rng = config.selection == Selection::Sample ? &sample_rng : nullptr;
    const bool blind = !config.successor_aware_messages;

    const AgentProfile* current = &start_profile;
    double current_prob = 1.0;

    auto append_entry = [&](const Message& message, double prob) {
        result.chain.entries.push_back({current->id, message, prob});
        history.steps.emplace_back(current->id, message);
    };
    // Terminal emission: `current` writes its message knowing there is no
    // successor, the chain ends with it.
    auto finish_with_terminal_message = [&](RunChainResult::Status status) {
        try {
            Message msg = generate_message(executor, query, history, *current, nullptr, blind);
            append_entry(msg, current_prob);
            result.status = status;
        } catch (const ExecutorError& e) {
            result.status = RunChainResult::Status::ExecutorFailed;
            result.error = e.what();
        }
    };

    while (true) {
        const int entry_index = static_cast<int>(result.chain.entries.size());

        if (entry_index >= config.max_steps) {  // safety cap
            finish_with_terminal_message(RunChainResult::Status::Completed);
            return result;
        }

        // Fixed-length regime: after fixed_steps routed agents, the last one
        // hands off to the finisher unconditionally.
        const bool forced_finisher_hop =
            !config.adaptive_termination && entry_index == config.fixed_steps - 1;

        std::vector<AgentProfile> candidates = topology.candidates_of(agents, current->id);
        if (!config.adaptive_termination) {
            std::erase_if(candidates, [](const AgentProfile& p) { return p.is_finisher; });
        }
        if (config.credit_gating && config.credit_exclusion_threshold > 0.0) {
            std::vector<AgentProfile> kept;
            for (const auto& c : candidates) {
                if (credits.credit_of(c.id) >= config.credit_exclusion_threshold) kept.push_back(c);
            }
            if (!kept.empty()) candidates = std::move(kept);
        }

        const AgentProfile* successor = nullptr;
        double successor_prob = 1.0;

        if (forced_finisher_hop) {
            successor = &agents.finisher();
        } else {
            if (candidates.empty()) {
                finish_with_terminal_message(RunChainResult::Status::DeadEnd);
                return result;
            }
            Observation obs = build_observation(history, *current, candidates);

            StepDecision decision;
            decision.step = entry_index;
            decision.agent = current->id;
            for (const auto& c : candidates) decision.candidates.push_back(c.id);
            decision.imp = scorer.imp_scores(query, candidates);
            decision.gap = scorer.gap_scores(obs, candidates);
            decision.credits = config.credit_gating
                                   ? credits.credits_of(candidates)
                                   : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(candidates.size()));
            decision.logits =
                synthesize_logits(decision.imp, decision.gap, decision.credits, config.alpha);

            auto [chosen_index, probs] = select_successor(decision.logits, config.selection, rng);
            decision.probabilities = std::move(probs);
            decision.chosen = candidates[static_cast<std::size_t>(chosen_index)].id;
            decision.chosen_probability = decision.probabilities[chosen_index];

            successor = &agents.by_id(decision.chosen);
            successor_prob = decision.chosen_probability;
            result.decisions.push_back(std::move(decision));
        }

        // The current agent writes its message knowing (unless blind) who
        // comes next, then the token passes on.
        try {
            Message msg = generate_message(executor, query, history, *current, successor, blind);
            append_entry(msg, current_prob);
        } catch (const ExecutorError& e) {
            result.status = RunChainResult::Status::ExecutorFailed;
            result.error = e.what();
            return result;
        }

        current = successor;
        current_prob = successor_prob;

        if (current->is_finisher) {
            finish_with_terminal_message(RunChainResult::Status::Completed);
            if (result.status == RunChainResult::Status::Completed &&
                config.adaptive_termination) {
                result.chain.terminated_by_finisher = true;
            }
            return result;
        }
    }
}

}  // namespace birouter
