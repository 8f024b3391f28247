#include "birouter/simulator.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <utility>

#include "birouter/rng.hpp"

namespace birouter {

namespace {

bool holds_capability(const AgentProfile& agent, const std::string& tag) {
    return std::find(agent.capabilities.begin(), agent.capabilities.end(), tag) !=
           agent.capabilities.end();
}

}  // namespace

AgentCatalog inject_unreliable(const AgentCatalog& agents, const AttackConfig& attack,
                               uint64_t seed) {
    if (!(attack.unreliable_fraction >= 0.0 && attack.unreliable_fraction <= 1.0)) {
        throw Error("unreliable_fraction must be in [0, 1]");
    }
    std::vector<AgentProfile> profiles = agents.profiles();
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        profiles[i].ground_truth_reliable = true;
        if (!profiles[i].is_finisher) eligible.push_back(i);
    }
    const auto flagged =
        static_cast<std::size_t>(attack.unreliable_fraction * static_cast<double>(eligible.size()));
    Rng rng(seed);
    rng.shuffle(eligible);
    for (std::size_t i = 0; i < flagged; ++i) {
        profiles[eligible[i]].ground_truth_reliable = false;
    }
    return AgentCatalog(std::move(profiles));
}

StepResult execute_step(const AgentProfile& agent, const world::SyntheticTask& task, int progress,
                        const AgentProfile* successor) {
    StepResult out;
    out.progress = progress;
    if (agent.is_finisher) {
        out.message = make_message(agent.id, world::finisher_text());
        out.effect = StepEffect::Finisher;
        return out;
    }
    const auto required = static_cast<int>(task.required_capabilities.size());
    if (progress >= required) {
        out.message = make_message(agent.id, world::redundant_text(task.nominal_len));
        out.effect = StepEffect::Redundant;
        return out;
    }
    const std::string& needed = task.required_capabilities[static_cast<std::size_t>(progress)];
    if (!holds_capability(agent, needed)) {
        out.message = make_message(agent.id, world::decline_text());
        out.effect = StepEffect::Declined;
        return out;
    }
    const auto dot = needed.find('.');
    const std::string stage = needed.substr(0, dot);
    const std::string domain = dot == std::string::npos ? std::string() : needed.substr(dot + 1);
    const std::string* next_name = successor ? &successor->name : nullptr;
    out.message = make_message(agent.id, world::advance_text(stage, domain, next_name,
                                                             task.nominal_len));
    if (agent.ground_truth_reliable) {
        out.progress = progress + 1;
        out.effect = StepEffect::Advanced;
    } else {
        // Same message, no progress: the corruption is invisible in the text.
        out.effect = StepEffect::Corrupted;
    }
    return out;
}

Message TaskExecutor::execute(const Query&, const ChainHistory&, const AgentProfile& agent,
                              const AgentProfile* successor) {
    StepResult step = execute_step(agent, task_, progress_, successor);
    progress_ = step.progress;
    effects_.push_back(step.effect);
    return step.message;
}

EpisodeResult run_episode(const world::SyntheticTask& task, const AgentCatalog& agents,
                          const Topology& topology, CandidateScorer& scorer, CreditStore& credits,
                          const PolicyConfig& policy, const AgentId& start, bool update_credits) {
    TaskExecutor executor(task);
    RunChainResult run =
        run_chain(task.query, start, agents, topology, scorer, credits, executor, policy);

    EpisodeResult out;
    out.task_id = task.query.id;
    out.chain = std::move(run.chain);
    out.decisions = std::move(run.decisions);
    out.status = run.status;
    out.error = std::move(run.error);
    out.progress = executor.progress();
    out.token_cost = token_cost(out.chain);
    out.success = run.status == RunChainResult::Status::Completed &&
                  out.progress == static_cast<int>(task.required_capabilities.size());
    if (update_credits) {
        EpisodeOutcome outcome{out.success, executor.effects()};
        credits.apply_verdicts(heuristic_evaluator(out.chain, outcome));
    }
    return out;
}

MetricsReport run_experiment(const std::vector<world::SyntheticTask>& tasks,
                             const AgentCatalog& agents, const Topology& topology,
                             const ScorerProvider& scorer_for, CreditStore& credits,
                             const ExperimentConfig& config) {
    if (tasks.empty()) throw Error("experiment needs at least one task");
    if (config.episodes < 0) throw Error("episode count must be non-negative");
    const long episodes =
        config.episodes > 0 ? config.episodes : static_cast<long>(tasks.size());

    MetricsReport report;
    report.episodes = episodes;
    std::map<AgentId, std::array<long, 4>> chosen;
    std::array<long, 4> decisions_per_quartile{};
    double length_sum = 0.0;
    double cost_sum = 0.0;
    long successes = 0;

    for (long e = 0; e < episodes; ++e) {
        const world::SyntheticTask& task =
            tasks[static_cast<std::size_t>(e) % tasks.size()];
        PolicyConfig policy = config.policy;
        if (policy.selection == Selection::Sample) {
            policy.sample_seed =
                sub_seed(config.policy.sample_seed, "episode" + std::to_string(e));
        }
        EpisodeResult result = run_episode(task, agents, topology, scorer_for(task), credits,
                                           policy, config.start, config.update_credits);
        const int quartile = static_cast<int>(std::min<long>(3, e * 4 / episodes));
        for (const StepDecision& d : result.decisions) {
            chosen[d.chosen][static_cast<std::size_t>(quartile)]++;
            decisions_per_quartile[static_cast<std::size_t>(quartile)]++;
        }
        successes += result.success ? 1 : 0;
        length_sum += static_cast<double>(result.chain.length());
        cost_sum += static_cast<double>(result.token_cost);
        report.credit_history.push_back(credits.snapshot());
        report.episode_results.push_back(std::move(result));
    }

    report.success_rate = static_cast<double>(successes) / static_cast<double>(episodes);
    report.mean_chain_length = length_sum / static_cast<double>(episodes);
    report.mean_token_cost = cost_sum / static_cast<double>(episodes);
    for (const auto& [id, counts] : chosen) {
        std::array<double, 4> freq{};
        for (std::size_t q = 0; q < 4; ++q) {
            freq[q] = decisions_per_quartile[q] == 0
                          ? 0.0
                          : static_cast<double>(counts[q]) /
                                static_cast<double>(decisions_per_quartile[q]);
        }
        report.selection_frequency[id] = freq;
    }
    return report;
}

void write_summary_header(std::ostream& out) {
    out << "label,episodes,success_rate,mean_chain_length,mean_token_cost\n";
}

void write_summary_row(std::ostream& out, const std::string& label, const MetricsReport& report) {
    out << label << ',' << report.episodes << ',' << report.success_rate << ','
        << report.mean_chain_length << ',' << report.mean_token_cost << '\n';
}

void write_summary_csv(std::ostream& out, const std::string& label, const MetricsReport& report) {
    write_summary_header(out);
    write_summary_row(out, label, report);
}

void write_episodes_csv(std::ostream& out, const MetricsReport& report) {
    out << "episode,task_id,success,progress,chain_length,token_cost\n";
    for (std::size_t e = 0; e < report.episode_results.size(); ++e) {
        const EpisodeResult& r = report.episode_results[e];
        out << e << ',' << r.task_id << ',' << (r.success ? 1 : 0) << ',' << r.progress << ','
            << r.chain.length() << ',' << r.token_cost << '\n';
    }
}

void write_credit_trajectory_csv(std::ostream& out, const MetricsReport& report) {
    write_credit_csv_header(out);
    for (std::size_t e = 0; e < report.credit_history.size(); ++e) {
        for (const auto& [id, credit] : report.credit_history[e]) {
            out << e << ',' << id << ',' << credit << '\n';
        }
    }
}

void write_decision_traces(std::ostream& out, const MetricsReport& report) {
    for (const EpisodeResult& r : report.episode_results) {
        write_decisions_jsonl(out, r.decisions);
    }
}

std::vector<OracleInstance> make_oracle_instances(int count, uint64_t seed) {
    if (count < 0) throw Error("instance count must be non-negative");
    const std::vector<std::string>& domains = world::standard_domains();
    const std::vector<std::string>& stage_names = world::stages();
    const std::vector<std::string>& verbs = world::query_verbs();

    std::vector<OracleInstance> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(sub_seed(seed, "instance" + std::to_string(i)));
        const int n_caps = 1 + static_cast<int>(rng.below(2));
        const std::string& domain = domains[rng.below(domains.size())];

        std::vector<std::size_t> stage_order(stage_names.size());
        std::iota(stage_order.begin(), stage_order.end(), 0);
        rng.shuffle(stage_order);
        stage_order.resize(static_cast<std::size_t>(n_caps));
        std::sort(stage_order.begin(), stage_order.end());
        std::vector<std::string> wanted;
        for (std::size_t s : stage_order) wanted.push_back(stage_names[s]);

        const std::string& verb = verbs[rng.below(verbs.size())];
        world::SyntheticTask task =
            world::make_task("inst" + std::to_string(i), verb, domain, wanted);

        auto other_domain = [&](std::initializer_list<const std::string*> avoid) {
            while (true) {
                const std::string& pick = domains[rng.below(domains.size())];
                bool clash = false;
                for (const std::string* a : avoid) clash = clash || pick == *a;
                if (!clash) return pick;
            }
        };

        std::vector<AgentProfile> profiles{world::make_coordinator()};
        for (std::size_t j = 0; j < wanted.size(); ++j) {
            AgentProfile p;
            p.id = "w" + std::to_string(j + 1);
            p.name = p.id;
            p.description =
                world::agent_description(wanted[j], {domain, other_domain({&domain})});
            p.capabilities = {world::capability_tag(wanted[j], domain)};
            profiles.push_back(std::move(p));
        }
        // Distractors advertise an unrelated domain, like the off-domain
        // helpers the labeled paths are built with.
        const int n_distractors = 4 - n_caps;
        for (int j = 0; j < n_distractors; ++j) {
            const std::string& stage = stage_names[rng.below(stage_names.size())];
            const std::string off = other_domain({&domain});
            const std::string second = other_domain({&domain, &off});
            AgentProfile p;
            p.id = "x" + std::to_string(j + 1);
            p.name = p.id;
            p.description = world::agent_description(stage, {off, second});
            p.capabilities = {world::capability_tag(stage, off)};
            profiles.push_back(std::move(p));
        }
        profiles.push_back(world::make_finisher());

        AgentCatalog agents(std::move(profiles));
        Topology topology = Topology::build_centralized(agents);
        out.push_back(OracleInstance{std::move(task), std::move(agents), std::move(topology),
                                     "coordinator", 5});
    }
    return out;
}

OracleResult brute_force_optimal_chain(const world::SyntheticTask& task,
                                       const AgentCatalog& agents, const Topology& topology,
                                       const AgentId& start, int max_depth) {
    constexpr std::size_t kMaxAgents = 8;
    constexpr int kMaxDepth = 6;
    if (agents.size() > kMaxAgents) {
        throw OracleTooLarge("oracle handles at most " + std::to_string(kMaxAgents) +
                             " agents, got " + std::to_string(agents.size()));
    }
    if (max_depth > kMaxDepth) {
        throw OracleTooLarge("oracle handles depth at most " + std::to_string(kMaxDepth) +
                             ", got " + std::to_string(max_depth));
    }
    if (max_depth < 2) throw Error("oracle depth must allow at least one hop to the finisher");
    const AgentProfile& origin = agents.by_id(start);
    if (origin.is_finisher) throw Error("oracle start agent must not be the finisher");

    const auto required = static_cast<int>(task.required_capabilities.size());
    OracleResult best;
    bool found = false;
    std::vector<ChainEntry> entries;

    // Depth-first over successors in canonical (ascending id) order, so the
    // first success at a given (cost, length) is the lexicographically
    // smallest chain and later ties never replace it.
    std::function<void(const AgentProfile&, int, long)> extend =
        [&](const AgentProfile& current, int progress, long cost) {
            if (found && cost >= best.token_cost) return;
            const auto pending_length = static_cast<int>(entries.size()) + 1;
            if (pending_length >= max_depth) return;
            for (const AgentId& succ_id : topology.successors_of(current.id)) {
                const AgentProfile& succ = agents.by_id(succ_id);
                StepResult step = execute_step(current, task, progress, &succ);
                const long cost_after = cost + step.message.token_count;
                if (found && cost_after >= best.token_cost) continue;
                entries.push_back(ChainEntry{current.id, step.message, 1.0});
                if (succ.is_finisher) {
                    StepResult fin = execute_step(succ, task, step.progress, nullptr);
                    const long total = cost_after + fin.message.token_count;
                    const auto length = entries.size() + 1;
                    if (step.progress == required &&
                        (!found || total < best.token_cost ||
                         (total == best.token_cost && length < best.chain.entries.size()))) {
                        entries.push_back(ChainEntry{succ.id, fin.message, 1.0});
                        best.chain.query = task.query;
                        best.chain.entries = entries;
                        best.chain.terminated_by_finisher = true;
                        best.success = true;
                        best.token_cost = total;
                        found = true;
                        entries.pop_back();
                    }
                } else {
                    extend(succ, step.progress, cost_after);
                }
                entries.pop_back();
            }
        };
    extend(origin, 0, 0);
    if (!found) {
        best.chain.query = task.query;
    }
    return best;
}

}  // namespace birouter
