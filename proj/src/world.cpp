#include "birouter/world.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace birouter::world {

namespace {

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

// Pads (or truncates) a token list to an exact length with a rotating filler
// phrase, so message costs are predictable regardless of names and stages.
std::string pad_to_tokens(std::vector<std::string> tokens, int target) {
    static const std::vector<std::string> filler = {"with", "notes",  "recorded", "for", "the",
                                                    "next", "stage", "of",       "this", "work"};
    if (static_cast<int>(tokens.size()) > target) tokens.resize(static_cast<std::size_t>(target));
    std::size_t f = 0;
    while (static_cast<int>(tokens.size()) < target) {
        tokens.push_back(filler[f % filler.size()]);
        ++f;
    }
    return join(tokens);
}

}  // namespace

const std::vector<std::string>& stages() {
    static const std::vector<std::string> s = {"parse", "analyze", "compute", "verify", "format"};
    return s;
}

int stage_index(const std::string& stage) {
    const auto& s = stages();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == stage) return static_cast<int>(i);
    }
    return -1;
}

const std::vector<std::string>& reference_domains() {
    static const std::vector<std::string> d = {
        // mathematics
        "algebra", "geometry", "calculus", "arithmetic", "statistics", "probability",
        "trigonometry", "topology", "logic", "combinatorics", "cryptography", "optimization",
        // natural sciences
        "physics", "chemistry", "biology", "astronomy", "geology", "ecology", "genetics",
        "neuroscience", "immunology", "botany", "zoology", "meteorology", "oceanography",
        "thermodynamics", "optics", "acoustics", "electromagnetism", "mechanics",
        // computing
        "robotics", "networking", "databases", "compilers", "algorithms", "security", "graphics",
        "vision", "audio", "speech", "translation", "retrieval", "ranking", "clustering",
        "simulation",
        // data and operations
        "regression", "classification", "forecasting", "scheduling", "routing", "planning",
        "inventory", "logistics", "telemetry", "indexing",
        // business
        "finance", "accounting", "taxation", "auditing", "economics", "marketing", "advertising",
        "procurement", "budgeting", "payroll",
        // humanities
        "law", "ethics", "history", "geography", "archaeology", "anthropology", "sociology",
        "psychology", "linguistics", "philosophy", "literature", "poetry", "drama", "fiction",
        "journalism",
        // language and arts
        "rhetoric", "grammar", "spelling", "etymology", "vocabulary", "music", "painting",
        "sculpture", "photography", "cinema", "animation", "architecture", "typography",
        "fashion", "calligraphy",
        // health
        "cooking", "nutrition", "medicine", "surgery", "pharmacology", "cardiology", "oncology",
        "pediatrics", "radiology", "anatomy",
        // industry
        "agriculture", "forestry", "fisheries", "mining", "energy", "transportation", "aviation",
        "maritime", "construction", "carpentry"};
    return d;
}

std::string capability_tag(const std::string& stage, const std::string& domain) {
    return stage + "." + domain;
}

std::string agent_description(const std::string& stage, const std::vector<std::string>& domains) {
    std::vector<std::string> tokens = {"expert", "agent", "that", "can", stage, "problems", "in"};
    for (std::size_t i = 0; i < domains.size(); ++i) {
        if (i) tokens.push_back("and");
        tokens.push_back(domains[i]);
    }
    return join(tokens);
}

std::string coordinator_description() {
    return "dispatch agent that routes incoming problems to capable specialists";
}

std::string finisher_description() { return "summarize and conclude completed tasks"; }

const std::vector<std::string>& query_verbs() {
    static const std::vector<std::string> v = {"solve", "handle", "resolve", "tackle", "complete"};
    return v;
}

std::string query_text(const std::string& verb, const std::string& domain,
                       const std::vector<std::string>& stage_names) {
    std::vector<std::string> tokens = {verb, "a", domain, "problem", "involving"};
    for (std::size_t i = 0; i < stage_names.size(); ++i) {
        if (i) tokens.push_back("then");
        tokens.push_back(stage_names[i]);
    }
    return join(tokens);
}

AgentProfile make_finisher(AgentId id) {
    return {std::move(id), "finisher", finisher_description(), {}, true, true};
}

AgentProfile make_coordinator(AgentId id) {
    return {std::move(id), "coordinator", coordinator_description(), {}, false, true};
}

std::string advance_text(const std::string& stage, const std::string& domain,
                         const std::string* successor_name, int nominal_tokens) {
    std::vector<std::string> tokens = {"applied", stage, "expertise", "in",   domain,
                                       "and",     "moved", "the",     "task", "forward"};
    if (successor_name != nullptr) {
        tokens.insert(tokens.end(), {"handing", "off", "to", *successor_name, "next"});
    }
    return pad_to_tokens(std::move(tokens), nominal_tokens);
}

std::string redundant_text(int nominal_tokens) {
    std::vector<std::string> tokens = {"the",  "task", "already", "appears", "complete", "this",
                                       "step", "only", "repeats", "existing", "results"};
    return pad_to_tokens(std::move(tokens), nominal_tokens);
}

std::string decline_text() { return "cannot help here"; }

std::string finisher_text() { return "final summary prepared the requested task is complete"; }

const std::vector<std::string>& standard_domains() {
    static const std::vector<std::string> d = {"algebra", "arithmetic", "statistics", "physics",
                                               "chemistry", "poetry", "history", "finance"};
    return d;
}

AgentCatalog standard_catalog() {
    const auto& doms = standard_domains();
    std::vector<AgentProfile> profiles;
    for (const auto& stage : stages()) {
        for (int window = 0; window < 8; window += 2) {
            std::vector<std::string> covered;
            std::vector<std::string> caps;
            for (int j = 0; j < 4; ++j) {
                const std::string& dom = doms[static_cast<std::size_t>((window + j) % 8)];
                covered.push_back(dom);
                caps.push_back(capability_tag(stage, dom));
            }
            AgentId id = stage + "_" + std::to_string(window);
            profiles.push_back(
                {id, id, agent_description(stage, covered), std::move(caps), false, true});
        }
    }
    profiles.push_back(make_coordinator());
    profiles.push_back(make_finisher());
    return AgentCatalog(std::move(profiles));
}

SyntheticTask make_task(const std::string& id, const std::string& verb, const std::string& domain,
                        const std::vector<std::string>& stage_names, int nominal_len) {
    if (stage_names.empty() || stage_names.size() > 4) {
        throw Error("task '" + id + "' must require between 1 and 4 capabilities");
    }
    if (nominal_len <= 0) throw Error("task '" + id + "' needs a positive nominal length");
    SyntheticTask task;
    task.query = {id, query_text(verb, domain, stage_names), {domain}};
    for (const auto& s : stage_names) task.required_capabilities.push_back(capability_tag(s, domain));
    task.nominal_len = nominal_len;
    return task;
}

std::vector<SyntheticTask> standard_task_mix(int count, uint64_t seed) {
    if (count < 0) throw Error("task mix count must be nonnegative");
    const int quads = count / 10;
    const int triples = count * 2 / 10;
    const int doubles = count * 2 / 10;
    const int singles = count - doubles - triples - quads;

    std::vector<int> sizes;
    sizes.insert(sizes.end(), static_cast<std::size_t>(singles), 1);
    sizes.insert(sizes.end(), static_cast<std::size_t>(doubles), 2);
    sizes.insert(sizes.end(), static_cast<std::size_t>(triples), 3);
    sizes.insert(sizes.end(), static_cast<std::size_t>(quads), 4);

    Rng rng(seed);
    rng.shuffle(sizes);

    const auto& doms = standard_domains();
    const auto& verbs = query_verbs();
    std::vector<SyntheticTask> tasks;
    tasks.reserve(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const std::string domain = doms[rng.below(doms.size())];
        const std::string verb = verbs[rng.below(verbs.size())];
        std::vector<std::size_t> idx(stages().size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        idx.resize(static_cast<std::size_t>(sizes[i]));
        std::sort(idx.begin(), idx.end());
        std::vector<std::string> chosen;
        for (std::size_t s : idx) chosen.push_back(stages()[s]);
        tasks.push_back(make_task("task" + std::to_string(i), verb, domain, chosen));
    }
    return tasks;
}

std::vector<SyntheticTask> tasks_from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("task set is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error("task set must be a JSON array");

    std::vector<SyntheticTask> tasks;
    for (const auto& item : doc) {
        if (!item.is_object()) throw Error("task entries must be JSON objects");
        SyntheticTask task;
        task.query.id = item.value("id", "");
        task.query.text = item.value("query_text", "");
        if (task.query.id.empty()) throw Error("task entry is missing an id");
        if (task.query.text.empty()) throw Error("task '" + task.query.id + "' has no query text");
        if (!item.contains("required_capabilities") || !item["required_capabilities"].is_array()) {
            throw Error("task '" + task.query.id + "' has no capability list");
        }
        for (const auto& cap : item["required_capabilities"]) {
            task.required_capabilities.push_back(cap.get<std::string>());
        }
        if (task.required_capabilities.empty() || task.required_capabilities.size() > 4) {
            throw Error("task '" + task.query.id + "' must require between 1 and 4 capabilities");
        }
        task.nominal_len = item.value("nominal_len", kNominalMessageTokens);
        if (task.nominal_len <= 0) {
            throw Error("task '" + task.query.id + "' needs a positive nominal length");
        }
        for (const auto& cap : task.required_capabilities) {
            auto dot = cap.find('.');
            if (dot == std::string::npos || dot + 1 >= cap.size()) continue;
            std::string dom = cap.substr(dot + 1);
            if (std::find(task.query.domain_tags.begin(), task.query.domain_tags.end(), dom) ==
                task.query.domain_tags.end()) {
                task.query.domain_tags.push_back(std::move(dom));
            }
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<SyntheticTask> tasks_from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open task set file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return tasks_from_json_text(buf.str());
}

std::string tasks_to_json_text(const std::vector<SyntheticTask>& tasks) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& t : tasks) {
        doc.push_back({{"id", t.query.id},
                       {"query_text", t.query.text},
                       {"required_capabilities", t.required_capabilities},
                       {"nominal_len", t.nominal_len}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace birouter::world
