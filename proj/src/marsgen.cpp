#include "birouter/marsgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "birouter/world.hpp"

namespace birouter {

namespace {

void validate_imp_config(const ImpLabelConfig& config) {
    if (!(config.l >= 0.0 && config.l < config.u && config.u <= 1.0)) {
        throw Error("importance label bounds must satisfy 0 <= l < u <= 1");
    }
    if (!(config.beta > 0.0)) throw Error("importance label beta must be positive");
    if (!(config.long_path_gamma > 0.0 && config.long_path_gamma <= 1.0)) {
        throw Error("long-path penalty must lie in (0, 1]");
    }
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Nearest-rank percentile of a sample (values copied and sorted).
double percentile_value(std::vector<double> values, double percentile) {
    std::sort(values.begin(), values.end());
    const double clamped = std::clamp(percentile, 0.0, 100.0);
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(clamped / 100.0 * static_cast<double>(values.size())));
    if (rank < 1) rank = 1;
    return values[rank - 1];
}

}  // namespace

DomainCatalog::DomainCatalog(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw InvalidCatalog("domain names must be non-empty");
        if (!seen.insert(n).second) throw InvalidCatalog("duplicate domain name: " + n);
    }
}

DomainCatalog DomainCatalog::reference() { return DomainCatalog(world::reference_domains()); }

DomainCatalog DomainCatalog::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("domain catalog is not valid JSON: ") + e.what());
    }
    const nlohmann::json* list = &doc;
    if (doc.is_object()) {
        if (!doc.contains("domains")) throw Error("domain catalog object needs a 'domains' key");
        list = &doc["domains"];
    }
    if (!list->is_array()) throw Error("domain catalog must be an array of names");
    std::vector<std::string> names;
    for (const auto& item : *list) names.push_back(item.get<std::string>());
    return DomainCatalog(std::move(names));
}

DomainCatalog DomainCatalog::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open domain catalog file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

double density(const EmbeddingVector& x, const std::vector<EmbeddingVector>& queries,
               double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw InvalidBandwidth("density bandwidth must be a positive finite number");
    }
    if (queries.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& q : queries) {
        if (q.values.size() != x.values.size()) {
            throw Error("density: embedding dimensions disagree");
        }
        const double sq = (x.values - q.values).squaredNorm();
        sum += std::exp(-sq / (2.0 * sigma * sigma));
    }
    return sum / static_cast<double>(queries.size());
}

double median_pairwise_distance(const std::vector<EmbeddingVector>& queries) {
    if (queries.size() < 2) return 1.0;
    std::vector<double> dists;
    dists.reserve(queries.size() * (queries.size() - 1) / 2);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = i + 1; j < queries.size(); ++j) {
            dists.push_back((queries[i].values - queries[j].values).norm());
        }
    }
    std::sort(dists.begin(), dists.end());
    const double median = dists[(dists.size() - 1) / 2];
    return median > 0.0 ? median : 1.0;
}

double imp_label(double rank, int n_r, const ImpLabelConfig& config) {
    validate_imp_config(config);
    if (n_r < 1) throw InvalidRank("path length must be at least 1");
    if (!(rank >= 1.0) || !(rank <= static_cast<double>(n_r))) {
        throw InvalidRank("rank " + std::to_string(rank) + " outside [1, " + std::to_string(n_r) +
                          "]");
    }
    const double gamma = config.gamma_for(n_r);
    return (config.l + (config.u - config.l) * logistic(config.beta * (n_r - rank))) * gamma;
}

std::vector<double> average_ranks(const std::vector<std::vector<double>>& iteration_ranks) {
    if (iteration_ranks.empty()) throw Error("rank averaging needs at least one iteration");
    const std::size_t n = iteration_ranks.front().size();
    std::vector<double> avg(n, 0.0);
    for (const auto& iter : iteration_ranks) {
        if (iter.size() != n) throw Error("every rank iteration must cover every agent");
        for (std::size_t i = 0; i < n; ++i) avg[i] += iter[i];
    }
    for (auto& v : avg) v /= static_cast<double>(iteration_ranks.size());
    return avg;
}

Eigen::VectorXd gap_labels(const PathRecord& path, int k) {
    const int n = path.n_r();
    if (k < 1 || k > n) {
        throw InvalidStep("step " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    Eigen::VectorXd labels = Eigen::VectorXd::Zero(n);
    for (int i = k; i <= n; ++i) {
        labels[i - 1] = 1.0 / static_cast<double>(i - k + 1);
    }
    return labels;
}

PathRecord append_finisher(PathRecord path, const AgentProfile& finisher) {
    if (path.agents.empty()) throw Error("cannot terminate an empty path");
    if (!finisher.is_finisher) throw Error("the appended profile must be a finisher");
    if (path.finisher_appended) throw AlreadyTerminated("path already has a finisher");
    for (const auto& a : path.agents) {
        if (a.is_finisher) throw AlreadyTerminated("path already has a finisher");
    }
    path.agents.push_back(finisher);
    path.finisher_appended = true;
    return path;
}

std::string record_to_json_line(const LabeledRecord& record) {
    nlohmann::json doc;
    doc["kind"] = record.kind == LabeledRecord::Kind::Imp ? "imp" : "gap";
    doc["query_id"] = record.query_id;
    doc["context"] = record.context ? nlohmann::json(*record.context) : nlohmann::json(nullptr);
    doc["query"] = record.query ? nlohmann::json(*record.query) : nlohmann::json(nullptr);
    doc["agent_desc"] = record.agent_desc;
    doc["label"] = record.label;
    return doc.dump();
}

LabeledRecord record_from_json_line(std::string_view line) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("labeled record is not valid JSON: ") + e.what());
    }
    LabeledRecord rec;
    const std::string kind = doc.value("kind", "");
    if (kind == "imp") {
        rec.kind = LabeledRecord::Kind::Imp;
    } else if (kind == "gap") {
        rec.kind = LabeledRecord::Kind::Gap;
    } else {
        throw Error("labeled record kind must be 'imp' or 'gap'");
    }
    rec.query_id = doc.value("query_id", "");
    if (doc.contains("context") && !doc["context"].is_null()) {
        rec.context = doc["context"].get<std::string>();
    }
    if (doc.contains("query") && !doc["query"].is_null()) {
        rec.query = doc["query"].get<std::string>();
    }
    if (!doc.contains("agent_desc") || !doc.contains("label")) {
        throw Error("labeled record needs agent_desc and label");
    }
    rec.agent_desc = doc["agent_desc"].get<std::string>();
    rec.label = doc["label"].get<double>();
    return rec;
}

void write_records_jsonl(std::ostream& out, const std::vector<LabeledRecord>& records) {
    for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

std::vector<LabeledRecord> read_records_jsonl(std::istream& in) {
    std::vector<LabeledRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json_line(line));
    }
    return records;
}

std::vector<LabeledRecord> read_records_jsonl_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open records file: " + path);
    return read_records_jsonl(in);
}

std::vector<LabeledExample> records_to_examples(const std::vector<LabeledRecord>& records,
                                                LabeledRecord::Kind kind) {
    std::vector<LabeledExample> examples;
    for (const auto& r : records) {
        if (r.kind != kind) continue;
        if (kind == LabeledRecord::Kind::Imp) {
            if (!r.query) throw Error("importance record without query text");
            examples.push_back({*r.query, r.agent_desc, r.label});
        } else {
            if (!r.context) throw Error("cohesion record without context text");
            examples.push_back({*r.context, r.agent_desc, r.label});
        }
    }
    return examples;
}

TemplateGenerator::TemplateGenerator(TemplateGeneratorConfig config)
    : config_(std::move(config)) {
    const int specialists = config_.path_len - (config_.off_domain_helper ? 1 : 0);
    if (specialists < 1 || specialists > static_cast<int>(world::stages().size())) {
        throw Error("template generator path length leaves no room for specialists");
    }
    // Specialist descriptions pair the query domain with a different one;
    // the helper needs two further distinct domains.
    if (config_.domains.size() < (config_.off_domain_helper ? 3u : 2u)) {
        throw Error("template generator needs more domains");
    }
}

Query TemplateGenerator::next_query(Rng& rng) {
    ++counter_;
    const auto& doms = config_.domains.names();
    const std::string domain = doms[rng.below(doms.size())];
    const int specialists = config_.path_len - (config_.off_domain_helper ? 1 : 0);

    std::vector<std::size_t> idx(world::stages().size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(specialists));
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> stage_names;
    for (std::size_t s : idx) stage_names.push_back(world::stages()[s]);

    const auto& verbs = world::query_verbs();
    Query q;
    q.id = "q" + std::to_string(counter_);
    q.text = world::query_text(verbs[rng.below(verbs.size())], domain, stage_names);
    q.domain_tags = {domain};
    info_[q.id] = {domain, std::move(stage_names)};
    return q;
}

TemplateGenerator::QueryInfo TemplateGenerator::info_for(const Query& query) const {
    auto it = info_.find(query.id);
    if (it != info_.end()) return it->second;

    // Externally supplied query: recover the domain and stages from the text.
    QueryInfo info;
    for (const auto& tok : split_tokens(query.text)) {
        if (info.domain.empty()) {
            const auto& doms = config_.domains.names();
            if (std::find(doms.begin(), doms.end(), tok) != doms.end()) {
                info.domain = tok;
                continue;
            }
        }
        if (world::stage_index(tok) >= 0) info.stage_names.push_back(tok);
    }
    if (info.domain.empty() || info.stage_names.empty()) {
        throw Error("query '" + query.id + "' names no known domain and stages");
    }
    return info;
}

std::vector<AgentProfile> TemplateGenerator::candidate_path(const Query& query, int path_index,
                                                            Rng& rng) {
    const QueryInfo info = info_for(query);
    const auto& doms = config_.domains.names();
    auto pick_avoiding = [&](std::initializer_list<const std::string*> avoid) {
        for (;;) {
            const std::string& cand = doms[rng.below(doms.size())];
            bool clashes = false;
            for (const std::string* a : avoid) {
                if (cand == *a) clashes = true;
            }
            if (!clashes) return cand;
        }
    };

    struct Slot {
        std::string stage;
        std::vector<std::string> desc_domains;
        std::string cap_domain;
    };
    std::vector<Slot> slots;
    for (const auto& stage : info.stage_names) {
        slots.push_back({stage, {info.domain, pick_avoiding({&info.domain})}, info.domain});
    }
    if (config_.off_domain_helper) {
        // The helper's description never mentions the query domain, so its
        // low labels cannot collide with a specialist's high ones.
        const std::string helper_stage = world::stages()[rng.below(world::stages().size())];
        const std::string helper_domain = pick_avoiding({&info.domain});
        const std::string second = pick_avoiding({&info.domain, &helper_domain});
        Slot helper{helper_stage, {helper_domain, second}, helper_domain};
        const std::size_t pos = rng.below(slots.size() + 1);
        slots.insert(slots.begin() + static_cast<std::ptrdiff_t>(pos), std::move(helper));
    }

    std::vector<AgentProfile> path;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        AgentId id = query.id + "_p" + std::to_string(path_index) + "_a" + std::to_string(i + 1);
        path.push_back({id, id, world::agent_description(slots[i].stage, slots[i].desc_domains),
                        {world::capability_tag(slots[i].stage, slots[i].cap_domain)},
                        false, true});
    }
    return path;
}

std::vector<double> TemplateGenerator::rank_once(const Query& query,
                                                 const std::vector<AgentProfile>& path, Rng& rng) {
    const QueryInfo info = info_for(query);

    // Criticality by capability match: on-domain specialists in path order,
    // off-domain helpers last, with enough noise for occasional swaps.
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < path.size(); ++i) {
        bool matches = false;
        if (!path[i].capabilities.empty()) {
            const std::string& cap = path[i].capabilities.front();
            const auto dot = cap.find('.');
            matches = dot != std::string::npos && cap.substr(dot + 1) == info.domain;
        }
        const double base = matches ? static_cast<double>(i + 1) : 1000.0 + static_cast<double>(i);
        scored.emplace_back(base + rng.uniform(-0.9, 0.9), i);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> ranks(path.size(), 0.0);
    for (std::size_t r = 0; r < scored.size(); ++r) {
        ranks[scored[r].second] = static_cast<double>(r + 1);
    }
    return ranks;
}

Message TemplateGenerator::path_message(const Query& query, const std::vector<AgentProfile>& path,
                                        std::size_t index) {
    (void)query;
    if (index >= path.size()) throw Error("path message index out of range");
    const AgentProfile& agent = path[index];
    if (agent.is_finisher) return make_message(agent.id, world::finisher_text());
    if (agent.capabilities.empty()) throw Error("path agent without capability: " + agent.id);
    const std::string& cap = agent.capabilities.front();
    const auto dot = cap.find('.');
    const std::string stage = dot == std::string::npos ? cap : cap.substr(0, dot);
    const std::string domain = dot == std::string::npos ? "" : cap.substr(dot + 1);
    const std::string* succ_name =
        index + 1 < path.size() ? &path[index + 1].name : nullptr;
    return make_message(agent.id,
                        world::advance_text(stage, domain, succ_name, world::kNominalMessageTokens));
}

AgentProfile TemplateGenerator::finisher() const { return world::make_finisher(); }

std::string TemplateGenerator::dispatch_description() const {
    return world::coordinator_description();
}

std::string RemoteTextCompleter::complete(const std::string& prompt) const {
    httplib::Client client(config_.host, config_.port);
    client.set_connection_timeout(config_.deadline_ms / 1000, (config_.deadline_ms % 1000) * 1000);
    client.set_read_timeout(config_.deadline_ms / 1000, (config_.deadline_ms % 1000) * 1000);

    nlohmann::json body{{"prompt", prompt}};
    auto res = client.Post(config_.path, body.dump(), "application/json");
    if (!res) throw GeneratorUnavailable("text generator unreachable at " + config_.host);
    if (res->status != 200) {
        throw GeneratorUnavailable("text generator returned status " +
                                   std::to_string(res->status));
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw GeneratorUnavailable("text generator sent malformed JSON");
    }
    if (!doc.contains("text") || !doc["text"].is_string()) {
        throw GeneratorUnavailable("text generator reply lacks a 'text' string");
    }
    return doc["text"].get<std::string>();
}

Query RemoteQueryGenerator::next_query(Rng& rng) {
    Query q = inner_.next_query(rng);
    const std::string text = completer_.complete("rewrite this task request in plain words: " +
                                                 q.text);
    if (count_tokens(text) == 0) {
        throw GeneratorUnavailable("text generator produced an empty query");
    }
    q.text = text;
    return q;
}

std::vector<Query> sample_sparse_queries(DatasetGenerator& generator,
                                         const std::vector<Query>& existing,
                                         const Encoder& encoder, const DensityConfig& config,
                                         int count, Rng& rng) {
    if (count < 0) throw Error("query count must be nonnegative");
    if (config.max_attempts < 1) throw Error("sampling needs at least one attempt");

    std::vector<EmbeddingVector> embedded;
    embedded.reserve(existing.size());
    for (const auto& q : existing) embedded.push_back(encoder.pooled(q.text));

    double sigma = config.sigma;
    if (!(sigma > 0.0)) sigma = median_pairwise_distance(embedded);

    double threshold = 0.0;
    if (!existing.empty()) {
        std::vector<double> densities;
        densities.reserve(embedded.size());
        for (const auto& e : embedded) densities.push_back(density(e, embedded, sigma));
        threshold = percentile_value(std::move(densities), config.acceptance_percentile);
    }

    std::vector<Query> accepted;
    accepted.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Query best;
        double best_density = 0.0;
        bool have_best = false;
        for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
            Query cand = generator.next_query(rng);
            if (existing.empty()) {
                accepted.push_back(std::move(cand));
                have_best = false;
                break;
            }
            const double rho = density(encoder.pooled(cand.text), embedded, sigma);
            if (rho <= threshold) {
                accepted.push_back(std::move(cand));
                have_best = false;
                break;
            }
            if (!have_best || rho < best_density) {
                best = std::move(cand);
                best_density = rho;
                have_best = true;
            }
        }
        if (have_best) accepted.push_back(std::move(best));  // sparsest candidate seen
    }
    return accepted;
}

std::vector<LabeledRecord> generate_dataset(DatasetGenerator& generator, const Encoder& encoder,
                                            const GenSizes& sizes,
                                            const DensityConfig& density_config,
                                            const ImpLabelConfig& imp_config, uint64_t seed) {
    if (sizes.queries < 0 || sizes.paths < 1 || sizes.iterations < 1) {
        throw Error("dataset sizes must be positive");
    }
    validate_imp_config(imp_config);

    Rng rng(seed);
    const AgentProfile finisher_profile = generator.finisher();
    std::vector<LabeledRecord> records;
    std::vector<Query> existing;

    for (int qi = 0; qi < sizes.queries; ++qi) {
        std::vector<Query> sampled =
            sample_sparse_queries(generator, existing, encoder, density_config, 1, rng);
        if (sampled.empty()) throw GeneratorUnavailable("query sampling produced nothing");
        const Query q = sampled.front();
        existing.push_back(q);

        for (int p = 0; p < sizes.paths; ++p) {
            PathRecord rec;
            rec.query = q;
            rec.agents = generator.candidate_path(q, p, rng);
            if (rec.agents.empty()) throw Error("generator produced an empty path");
            const std::vector<AgentProfile> workers = rec.agents;  // before the finisher
            rec = append_finisher(std::move(rec), finisher_profile);

            for (int it = 0; it < sizes.iterations; ++it) {
                rec.iteration_ranks.push_back(generator.rank_once(q, workers, rng));
            }
            rec.averaged_rank = average_ranks(rec.iteration_ranks);

            const int n_imp = static_cast<int>(workers.size());
            for (std::size_t i = 0; i < workers.size(); ++i) {
                LabeledRecord r;
                r.kind = LabeledRecord::Kind::Imp;
                r.query_id = q.id;
                r.query = q.text;
                r.agent_desc = workers[i].description;
                r.label = imp_label(rec.averaged_rank[i], n_imp, imp_config);
                records.push_back(std::move(r));
            }

            std::vector<Message> messages;
            if (rec.agents.size() > 1) {
                messages.reserve(rec.agents.size() - 1);
                for (std::size_t j = 0; j + 1 < rec.agents.size(); ++j) {
                    messages.push_back(generator.path_message(q, rec.agents, j));
                }
            }

            // Contexts mirror routing: deciding step k sees messages from
            // positions 1..k-2 and the description of position k-1.
            const int n_full = rec.n_r();
            for (int k = 1; k <= n_full; ++k) {
                ChainHistory history;
                history.query = q;
                for (int j = 0; j + 3 <= k; ++j) {
                    history.steps.emplace_back(rec.agents[static_cast<std::size_t>(j)].id,
                                               messages[static_cast<std::size_t>(j)]);
                }
                const std::string current_desc =
                    k == 1 ? generator.dispatch_description()
                           : rec.agents[static_cast<std::size_t>(k - 2)].description;
                const std::string context = render_gap_context(history, current_desc);
                const Eigen::VectorXd labels = gap_labels(rec, k);
                for (int i = 0; i < n_full; ++i) {
                    LabeledRecord r;
                    r.kind = LabeledRecord::Kind::Gap;
                    r.query_id = q.id;
                    r.context = context;
                    r.agent_desc = rec.agents[static_cast<std::size_t>(i)].description;
                    r.label = labels[i];
                    records.push_back(std::move(r));
                }
            }
        }
    }
    return records;
}

}  // namespace birouter
