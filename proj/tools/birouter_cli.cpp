// birouter: one entry point for the full experiment pipeline. Every command
// is a pure function of (config file + flag overrides, global seed); the only
// timestamp lives in the manifest, so reruns are byte-identical elsewhere.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "birouter/core.hpp"
#include "birouter/embedding.hpp"
#include "birouter/marsgen.hpp"
#include "birouter/network.hpp"
#include "birouter/policy.hpp"
#include "birouter/reputation.hpp"
#include "birouter/rng.hpp"
#include "birouter/scorer.hpp"
#include "birouter/simulator.hpp"
#include "birouter/world.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Anything wrong with the configuration (bad keys, missing files, invalid
// values) exits 2; failures while the pipeline is running exit 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Overrides {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<long> episodes;
    std::optional<std::string> label;
};

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

std::string iso_now() {
    std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        json cfg = json::parse(in);
        if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

// Missing key or explicit null falls back to the default.
template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

json section(const json& cfg, const char* key) {
    if (!cfg.contains(key) || cfg.at(key).is_null()) return json::object();
    if (!cfg.at(key).is_object()) {
        throw ConfigError(std::string("config key '") + key + "' must be an object");
    }
    return cfg.at(key);
}

std::string require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) {
        throw ConfigError(std::string(what) + " '" + path + "' does not exist");
    }
    return path;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw birouter::Error("cannot write '" + path.string() + "'");
    return out;
}

// Everything a command needs: the resolved config, where to write, the seed
// and the hash that ties outputs back to the exact configuration.
struct Context {
    json cfg;
    fs::path out_dir;
    uint64_t seed = 0;
    std::string config_hash;
    std::string label;
};

Context make_context(const Overrides& ov) {
    json cfg = load_config(ov.config_path);
    if (ov.seed) cfg["seed"] = *ov.seed;
    if (ov.out) cfg["output_dir"] = *ov.out;
    if (ov.episodes) cfg["episodes"] = *ov.episodes;
    if (ov.label) cfg["label"] = *ov.label;

    Context ctx;
    ctx.cfg = cfg;
    ctx.seed = get_or<uint64_t>(cfg, "seed", 0);
    ctx.out_dir = get_or<std::string>(cfg, "output_dir", "out");
    ctx.label = get_or<std::string>(cfg, "label", "experiment");
    ctx.config_hash = hex64(birouter::fnv1a64(cfg.dump()));
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + ctx.out_dir.string() + "'");
    return ctx;
}

void write_manifest(const Context& ctx, const std::string& command, json extra) {
    json m;
    m["command"] = command;
    m["seed"] = ctx.seed;
    m["config_hash"] = ctx.config_hash;
    m["created"] = iso_now();
    m.update(extra);
    open_out(ctx.out_dir / "manifest.json") << m.dump(2) << "\n";
}

// ---- shared pieces -------------------------------------------------------

birouter::AgentCatalog load_catalog(const Context& ctx) {
    std::string path = get_or<std::string>(ctx.cfg, "agent_catalog", "");
    if (path.empty()) return birouter::world::standard_catalog();
    return birouter::AgentCatalog::from_json_file(require_file(path, "agent catalog"));
}

std::vector<birouter::world::SyntheticTask> load_tasks(const Context& ctx) {
    std::string path = get_or<std::string>(ctx.cfg, "task_set", "");
    if (!path.empty()) {
        return birouter::world::tasks_from_json_file(require_file(path, "task set"));
    }
    int count = get_or<int>(ctx.cfg, "task_count", 50);
    if (count < 1) throw ConfigError("task_count must be positive");
    return birouter::world::standard_task_mix(count, birouter::sub_seed(ctx.seed, "tasks"));
}

birouter::Topology build_topology(const Context& ctx, const birouter::AgentCatalog& agents) {
    json t = section(ctx.cfg, "topology");
    std::string mode = get_or<std::string>(t, "mode", "centralized");
    if (mode == "centralized") return birouter::Topology::build_centralized(agents);
    if (mode == "k_random") {
        int k = get_or<int>(t, "k", 3);
        return birouter::Topology::build_k_random(agents, k,
                                                  birouter::sub_seed(ctx.seed, "topology"));
    }
    throw ConfigError("topology.mode must be 'centralized' or 'k_random', got '" + mode + "'");
}

birouter::PolicyConfig parse_policy(const Context& ctx) {
    json p = section(ctx.cfg, "policy");
    birouter::PolicyConfig out;
    out.alpha = get_or<double>(p, "alpha", out.alpha);
    std::string selection = get_or<std::string>(p, "selection", "argmax");
    if (selection == "argmax") {
        out.selection = birouter::Selection::Argmax;
    } else if (selection == "sample") {
        out.selection = birouter::Selection::Sample;
    } else {
        throw ConfigError("policy.selection must be 'argmax' or 'sample', got '" + selection +
                          "'");
    }
    out.sample_seed = birouter::sub_seed(ctx.seed, "sampling");
    out.max_steps = get_or<int>(p, "max_steps", out.max_steps);
    out.credit_gating = get_or<bool>(p, "credit_gating", out.credit_gating);
    out.successor_aware_messages =
        get_or<bool>(p, "successor_aware_messages", out.successor_aware_messages);
    out.adaptive_termination = get_or<bool>(p, "adaptive_termination", out.adaptive_termination);
    out.fixed_steps = get_or<int>(p, "fixed_steps", out.fixed_steps);
    out.credit_exclusion_threshold =
        get_or<double>(p, "credit_exclusion_threshold", out.credit_exclusion_threshold);
    return out;
}

struct LoadedScorer {
    birouter::HashingEncoder encoder;
    std::unique_ptr<birouter::HeadScorer> head;
};

LoadedScorer load_scorer(const Context& ctx) {
    json s = section(ctx.cfg, "scorer");
    std::string imp = get_or<std::string>(s, "imp_params", (ctx.out_dir / "imp_params.bin"));
    std::string gap = get_or<std::string>(s, "gap_params", (ctx.out_dir / "gap_params.bin"));
    require_file(imp, "importance params file");
    require_file(gap, "cohesion params file");
    LoadedScorer out;
    out.head = std::make_unique<birouter::HeadScorer>(birouter::load_params(imp),
                                                      birouter::load_params(gap), out.encoder);
    return out;
}

// Episode count: a positive number runs that many episodes, absent/null runs
// one pass over the task set, and an explicit 0 writes empty outputs.
long episode_setting(const Context& ctx) {
    long episodes = get_or<long>(ctx.cfg, "episodes", -1);
    if (ctx.cfg.contains("episodes") && !ctx.cfg.at("episodes").is_null() && episodes < 0) {
        throw ConfigError("episodes must be non-negative");
    }
    return episodes;  // -1: one pass
}

// ---- commands ------------------------------------------------------------

int cmd_gen_data(const Context& ctx) {
    json g = section(ctx.cfg, "gen");
    birouter::DomainCatalog domains = birouter::DomainCatalog::reference();
    std::string domains_path = get_or<std::string>(g, "domains", "");
    birouter::TemplateGeneratorConfig tg;
    birouter::GenSizes sizes;
    birouter::DensityConfig density;
    birouter::ImpLabelConfig imp_config;
    std::unique_ptr<birouter::TemplateGenerator> base;
    std::unique_ptr<birouter::RemoteTextCompleter> completer;
    std::unique_ptr<birouter::RemoteQueryGenerator> remote;
    birouter::DatasetGenerator* generator = nullptr;
    try {
        if (!domains_path.empty()) {
            domains =
                birouter::DomainCatalog::from_json_file(require_file(domains_path, "domains file"));
        }
        tg.domains = domains;
        tg.path_len = get_or<int>(g, "path_len", tg.path_len);
        tg.off_domain_helper = get_or<bool>(g, "off_domain_helper", tg.off_domain_helper);
        base = std::make_unique<birouter::TemplateGenerator>(tg);
        generator = base.get();
        if (g.contains("remote") && !g.at("remote").is_null()) {
            json r = g.at("remote");
            birouter::RemoteGeneratorConfig rc;
            rc.host = get_or<std::string>(r, "host", "");
            rc.port = get_or<int>(r, "port", 0);
            rc.path = get_or<std::string>(r, "path", rc.path);
            rc.deadline_ms = get_or<int>(r, "deadline_ms", rc.deadline_ms);
            if (rc.host.empty() || rc.port <= 0) {
                throw ConfigError("gen.remote needs host and port");
            }
            completer = std::make_unique<birouter::RemoteTextCompleter>(rc);
            remote = std::make_unique<birouter::RemoteQueryGenerator>(*base, *completer);
            generator = remote.get();
        }
        sizes.queries = get_or<int>(g, "queries", sizes.queries);
        sizes.paths = get_or<int>(g, "paths", sizes.paths);
        sizes.iterations = get_or<int>(g, "iterations", sizes.iterations);
        density.sigma = get_or<double>(g, "sigma", density.sigma);
        density.acceptance_percentile =
            get_or<double>(g, "acceptance_percentile", density.acceptance_percentile);
        density.max_attempts = get_or<int>(g, "max_attempts", density.max_attempts);
        json ic = section(g, "imp");
        imp_config.l = get_or<double>(ic, "l", imp_config.l);
        imp_config.u = get_or<double>(ic, "u", imp_config.u);
        imp_config.beta = get_or<double>(ic, "beta", imp_config.beta);
        imp_config.long_path_threshold =
            get_or<int>(ic, "long_path_threshold", imp_config.long_path_threshold);
        imp_config.long_path_gamma =
            get_or<double>(ic, "long_path_gamma", imp_config.long_path_gamma);
    } catch (const birouter::Error& e) {
        throw ConfigError(e.what());
    }

    birouter::HashingEncoder encoder;
    std::vector<birouter::LabeledRecord> records = birouter::generate_dataset(
        *generator, encoder, sizes, density, imp_config, birouter::sub_seed(ctx.seed, "gen_data"));

    std::vector<birouter::LabeledRecord> imp_records;
    std::vector<birouter::LabeledRecord> gap_records;
    for (auto& r : records) {
        (r.kind == birouter::LabeledRecord::Kind::Imp ? imp_records : gap_records)
            .push_back(std::move(r));
    }
    {
        auto out = open_out(ctx.out_dir / "imp.jsonl");
        birouter::write_records_jsonl(out, imp_records);
    }
    {
        auto out = open_out(ctx.out_dir / "gap.jsonl");
        birouter::write_records_jsonl(out, gap_records);
    }
    write_manifest(ctx, "gen-data",
                   {{"sizes",
                     {{"queries", sizes.queries},
                      {"paths", sizes.paths},
                      {"iterations", sizes.iterations}}},
                    {"counts", {{"imp", imp_records.size()}, {"gap", gap_records.size()}}},
                    {"outputs", {"imp.jsonl", "gap.jsonl"}}});
    std::cout << "wrote " << imp_records.size() << " importance and " << gap_records.size()
              << " cohesion records to " << ctx.out_dir.string() << "\n";
    return 0;
}

int cmd_train(const Context& ctx) {
    json t = section(ctx.cfg, "train");
    std::string imp_path =
        get_or<std::string>(t, "imp_data", (ctx.out_dir / "imp.jsonl"));
    std::string gap_path =
        get_or<std::string>(t, "gap_data", (ctx.out_dir / "gap.jsonl"));
    require_file(imp_path, "importance data file");
    require_file(gap_path, "cohesion data file");

    birouter::TrainingConfig config;
    config.learning_rate = get_or<double>(t, "lr", config.learning_rate);
    config.epochs = get_or<int>(t, "epochs", config.epochs);
    config.batch_size = get_or<int>(t, "batch", config.batch_size);
    config.init_range = get_or<double>(t, "init_range", config.init_range);
    if (config.epochs < 0) throw ConfigError("train.epochs must be non-negative");
    if (config.batch_size < 1) throw ConfigError("train.batch must be positive");

    std::vector<birouter::LabeledExample> imp_examples;
    std::vector<birouter::LabeledExample> gap_examples;
    try {
        imp_examples = birouter::records_to_examples(
            birouter::read_records_jsonl_file(imp_path), birouter::LabeledRecord::Kind::Imp);
        gap_examples = birouter::records_to_examples(
            birouter::read_records_jsonl_file(gap_path), birouter::LabeledRecord::Kind::Gap);
    } catch (const birouter::Error& e) {
        throw ConfigError(e.what());
    }
    if (imp_examples.empty()) throw ConfigError("no importance examples in " + imp_path);
    if (gap_examples.empty()) throw ConfigError("no cohesion examples in " + gap_path);

    birouter::HashingEncoder encoder;
    auto run_branch = [&](const char* name, const std::vector<birouter::LabeledExample>& data,
                          const fs::path& params_file, const fs::path& loss_file) {
        birouter::TrainingConfig branch = config;
        branch.seed = birouter::sub_seed(ctx.seed, name);
        birouter::TrainResult result = birouter::train(data, branch, encoder);
        birouter::save_params(params_file.string(), result.params);
        auto out = open_out(loss_file);
        out << "epoch,mse\n";
        for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
            out << e << ',' << result.loss_trace[e] << '\n';
        }
        return result.loss_trace.back();
    };
    double imp_final =
        run_branch("train_imp", imp_examples, ctx.out_dir / "imp_params.bin",
                   ctx.out_dir / "loss_imp.csv");
    double gap_final =
        run_branch("train_gap", gap_examples, ctx.out_dir / "gap_params.bin",
                   ctx.out_dir / "loss_gap.csv");

    write_manifest(ctx, "train",
                   {{"examples", {{"imp", imp_examples.size()}, {"gap", gap_examples.size()}}},
                    {"epochs", config.epochs},
                    {"final_mse", {{"imp", imp_final}, {"gap", gap_final}}},
                    {"outputs",
                     {"imp_params.bin", "gap_params.bin", "loss_imp.csv", "loss_gap.csv"}}});
    std::cout << "trained both branches: final mse imp=" << imp_final << " gap=" << gap_final
              << "\n";
    return 0;
}

int cmd_simulate(const Context& ctx) {
    birouter::AgentCatalog agents = load_catalog(ctx);
    std::vector<birouter::world::SyntheticTask> tasks = load_tasks(ctx);
    birouter::Topology topology = build_topology(ctx, agents);
    LoadedScorer scorer = load_scorer(ctx);
    const long episodes = episode_setting(ctx);

    birouter::MetricsReport report;
    if (episodes == 0) {
        report = birouter::MetricsReport{};  // headers only below
    } else {
        birouter::ExperimentConfig config;
        config.policy = parse_policy(ctx);
        config.episodes = episodes < 0 ? 0 : episodes;  // library 0 = one pass
        config.update_credits = config.policy.credit_gating;
        birouter::CreditStore credits;
        report = birouter::run_experiment(
            tasks, agents, topology,
            [&](const birouter::world::SyntheticTask&) -> birouter::CandidateScorer& {
                return *scorer.head;
            },
            credits, config);
    }

    {
        auto out = open_out(ctx.out_dir / "summary.csv");
        birouter::write_summary_csv(out, ctx.label, report);
    }
    {
        auto out = open_out(ctx.out_dir / "episodes.csv");
        birouter::write_episodes_csv(out, report);
    }
    {
        auto out = open_out(ctx.out_dir / "credit_trajectory.csv");
        birouter::write_credit_trajectory_csv(out, report);
    }
    {
        auto out = open_out(ctx.out_dir / "decisions.jsonl");
        birouter::write_decision_traces(out, report);
    }
    open_out(ctx.out_dir / "topology.json") << topology.to_json_text();
    write_manifest(ctx, "simulate",
                   {{"episodes", report.episodes},
                    {"success_rate", report.success_rate},
                    {"outputs",
                     {"summary.csv", "episodes.csv", "credit_trajectory.csv", "decisions.jsonl",
                      "topology.json"}}});
    std::cout << "simulated " << report.episodes << " episodes, success rate "
              << report.success_rate << "\n";
    return 0;
}

int cmd_attack(const Context& ctx) {
    birouter::AgentCatalog agents = load_catalog(ctx);
    std::vector<birouter::world::SyntheticTask> tasks = load_tasks(ctx);
    birouter::Topology topology = build_topology(ctx, agents);
    LoadedScorer scorer = load_scorer(ctx);
    birouter::PolicyConfig policy = parse_policy(ctx);
    const long episodes = episode_setting(ctx);
    if (episodes == 0) throw ConfigError("attack needs at least one episode");

    json a = section(ctx.cfg, "attack");
    birouter::AttackConfig attack;
    attack.unreliable_fraction = get_or<double>(a, "unreliable_fraction", 0.5);
    if (attack.unreliable_fraction < 0.0 || attack.unreliable_fraction > 1.0) {
        throw ConfigError("attack.unreliable_fraction must be in [0, 1]");
    }
    birouter::AgentCatalog attacked =
        birouter::inject_unreliable(agents, attack, birouter::sub_seed(ctx.seed, "attack"));

    auto provider = [&](const birouter::world::SyntheticTask&) -> birouter::CandidateScorer& {
        return *scorer.head;
    };
    auto run_cell = [&](const birouter::AgentCatalog& catalog, bool reputation,
                        birouter::CreditStore& credits) {
        birouter::ExperimentConfig config;
        config.policy = policy;
        config.policy.credit_gating = reputation;
        config.update_credits = reputation;
        config.episodes = episodes < 0 ? 0 : episodes;
        return birouter::run_experiment(tasks, catalog, topology, provider, credits, config);
    };

    struct Cell {
        const char* name;
        const birouter::AgentCatalog* catalog;
        bool reputation;
    };
    const Cell cells[] = {{"clean_fixed_credit", &agents, false},
                          {"clean_reputation", &agents, true},
                          {"attacked_fixed_credit", &attacked, false},
                          {"attacked_reputation", &attacked, true}};

    auto summary = open_out(ctx.out_dir / "attack_summary.csv");
    birouter::write_summary_header(summary);
    for (const Cell& cell : cells) {
        birouter::CreditStore credits;
        birouter::MetricsReport report = run_cell(*cell.catalog, cell.reputation, credits);
        birouter::write_summary_row(summary, cell.name, report);
        {
            auto out = open_out(ctx.out_dir / ("episodes_" + std::string(cell.name) + ".csv"));
            birouter::write_episodes_csv(out, report);
        }
        if (cell.reputation) {
            std::string which = cell.catalog == &attacked ? "attacked" : "clean";
            auto out = open_out(ctx.out_dir / ("credit_trajectory_" + which + ".csv"));
            birouter::write_credit_trajectory_csv(out, report);
        }
        if (cell.reputation && cell.catalog == &attacked) {
            auto out = open_out(ctx.out_dir / "selection_frequency_attacked.csv");
            out << "agent_id,quartile1,quartile2,quartile3,quartile4,ground_truth_reliable\n";
            for (const auto& [id, freq] : report.selection_frequency) {
                out << id << ',' << freq[0] << ',' << freq[1] << ',' << freq[2] << ',' << freq[3]
                    << ',' << (attacked.by_id(id).ground_truth_reliable ? 1 : 0) << '\n';
            }
        }
    }
    summary.close();

    write_manifest(ctx, "attack",
                   {{"unreliable_fraction", attack.unreliable_fraction},
                    {"episodes", episodes < 0 ? static_cast<long>(tasks.size()) : episodes},
                    {"outputs",
                     {"attack_summary.csv", "episodes_clean_fixed_credit.csv",
                      "episodes_clean_reputation.csv", "episodes_attacked_fixed_credit.csv",
                      "episodes_attacked_reputation.csv", "credit_trajectory_clean.csv",
                      "credit_trajectory_attacked.csv", "selection_frequency_attacked.csv"}}});
    std::cout << "attack comparison written to " << (ctx.out_dir / "attack_summary.csv").string()
              << "\n";
    return 0;
}

int cmd_oracle_check(const Context& ctx) {
    json o = section(ctx.cfg, "oracle");
    int instances = get_or<int>(o, "instances", 20);
    int max_depth = get_or<int>(o, "max_depth", 5);
    if (instances < 1) throw ConfigError("oracle.instances must be positive");
    LoadedScorer scorer = load_scorer(ctx);
    birouter::PolicyConfig policy = parse_policy(ctx);

    std::vector<birouter::OracleInstance> worlds =
        birouter::make_oracle_instances(instances, birouter::sub_seed(ctx.seed, "oracle"));

    long policy_wins = 0;
    long oracle_wins = 0;
    long both_cost_policy = 0;
    long both_cost_oracle = 0;
    long both = 0;
    auto detail = open_out(ctx.out_dir / "oracle_instances.csv");
    detail << "instance,task_id,policy_success,oracle_success,policy_cost,oracle_cost,"
              "policy_chain,oracle_chain\n";
    auto chain_ids = [](const birouter::AgentChain& chain) {
        std::string s;
        for (const auto& e : chain.entries) {
            if (!s.empty()) s += '|';
            s += e.agent;
        }
        return s;
    };
    for (std::size_t i = 0; i < worlds.size(); ++i) {
        const birouter::OracleInstance& inst = worlds[i];
        birouter::OracleResult oracle;
        try {
            oracle = birouter::brute_force_optimal_chain(inst.task, inst.agents, inst.topology,
                                                         inst.start, max_depth);
        } catch (const birouter::OracleTooLarge& e) {
            throw ConfigError(std::string("oracle instance out of reach: ") + e.what());
        }
        birouter::CreditStore credits;
        birouter::EpisodeResult episode =
            birouter::run_episode(inst.task, inst.agents, inst.topology, *scorer.head, credits,
                                  policy, inst.start, false);
        policy_wins += episode.success ? 1 : 0;
        oracle_wins += oracle.success ? 1 : 0;
        if (episode.success && oracle.success) {
            ++both;
            both_cost_policy += episode.token_cost;
            both_cost_oracle += oracle.token_cost;
        }
        detail << i << ',' << inst.task.query.id << ',' << (episode.success ? 1 : 0) << ','
               << (oracle.success ? 1 : 0) << ',' << episode.token_cost << ','
               << oracle.token_cost << ',' << chain_ids(episode.chain) << ','
               << chain_ids(oracle.chain) << '\n';
    }
    detail.close();

    const double n = static_cast<double>(worlds.size());
    const double policy_rate = static_cast<double>(policy_wins) / n;
    const double oracle_rate = static_cast<double>(oracle_wins) / n;
    const double success_ratio = oracle_rate > 0.0 ? policy_rate / oracle_rate : 0.0;
    const double policy_mean_cost =
        both > 0 ? static_cast<double>(both_cost_policy) / static_cast<double>(both) : 0.0;
    const double oracle_mean_cost =
        both > 0 ? static_cast<double>(both_cost_oracle) / static_cast<double>(both) : 0.0;
    const double cost_ratio = oracle_mean_cost > 0.0 ? policy_mean_cost / oracle_mean_cost : 0.0;

    auto out = open_out(ctx.out_dir / "oracle_summary.csv");
    out << "instances,policy_success_rate,oracle_success_rate,success_ratio,"
           "policy_mean_cost,oracle_mean_cost,cost_ratio\n";
    out << worlds.size() << ',' << policy_rate << ',' << oracle_rate << ',' << success_ratio
        << ',' << policy_mean_cost << ',' << oracle_mean_cost << ',' << cost_ratio << '\n';
    out.close();

    write_manifest(ctx, "oracle-check",
                   {{"instances", worlds.size()},
                    {"success_ratio", success_ratio},
                    {"cost_ratio", cost_ratio},
                    {"outputs", {"oracle_summary.csv", "oracle_instances.csv"}}});
    std::cout << "oracle check: success ratio " << success_ratio << ", cost ratio " << cost_ratio
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized multi-agent task routing: data generation, training, simulation"};
    app.set_version_flag("--version",
                         "birouter params-file format version " +
                             std::to_string(birouter::kParamsFormatVersion));
    app.require_subcommand(1);

    Overrides ov;
    std::function<int(const Context&)> runner;
    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const Context&);
    };
    const Command commands[] = {
        {"gen-data", "generate labeled importance/cohesion datasets", cmd_gen_data},
        {"train", "train both scoring-head branches on generated data", cmd_train},
        {"simulate", "run routed episodes and export metrics", cmd_simulate},
        {"attack", "compare clean vs. unreliable-agent runs with and without reputation",
         cmd_attack},
        {"oracle-check", "compare the trained policy against the exhaustive oracle",
         cmd_oracle_check},
    };
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", ov.config_path, "JSON config file")->required();
        sub->add_option("--seed", ov.seed, "override the global seed");
        sub->add_option("--out", ov.out, "override the output directory");
        sub->add_option("--episodes", ov.episodes, "override the episode count");
        sub->add_option("--label", ov.label, "override the experiment label");
        sub->callback([&runner, fn = c.fn] { runner = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        Context ctx = make_context(ov);
        return runner(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
