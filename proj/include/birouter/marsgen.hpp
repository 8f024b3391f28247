#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "birouter/core.hpp"
#include "birouter/embedding.hpp"
#include "birouter/rng.hpp"
#include "birouter/scorer.hpp"

namespace birouter {

struct InvalidBandwidth : Error {
    using Error::Error;
};
struct InvalidRank : Error {
    using Error::Error;
};
struct InvalidStep : Error {
    using Error::Error;
};
struct AlreadyTerminated : Error {
    using Error::Error;
};
struct GeneratorUnavailable : Error {
    using Error::Error;
};

// Named list of problem domains the generator may draw from. The reference
// list ships 115 entries; callers can substitute their own.
class DomainCatalog {
  public:
    DomainCatalog() = default;
    explicit DomainCatalog(std::vector<std::string> names);

    static DomainCatalog reference();
    static DomainCatalog from_json_file(const std::string& path);
    static DomainCatalog from_json_text(std::string_view text);

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

  private:
    std::vector<std::string> names_;
};

// RBF kernel density of x against a query set: mean of exp(-||x-q||^2/(2s^2)).
// An empty query set has density 0 everywhere.
double density(const EmbeddingVector& x, const std::vector<EmbeddingVector>& queries,
               double sigma);

// Bandwidth heuristic: median pairwise distance of the embeddings; 1.0 when
// fewer than two points (or when every point coincides).
double median_pairwise_distance(const std::vector<EmbeddingVector>& queries);

struct DensityConfig {
    double sigma = 0.0;  // <= 0: use the median-pairwise-distance heuristic
    double acceptance_percentile = 25.0;
    int max_attempts = 50;  // per accepted query, then the sparsest candidate wins
};

struct ImpLabelConfig {
    double l = 0.3;
    double u = 1.0;
    double beta = 2.0;
    // Long chains burn tokens, so their agents are worth slightly less.
    int long_path_threshold = 5;
    double long_path_gamma = 0.9;

    double gamma_for(int n_r) const { return n_r >= long_path_threshold ? long_path_gamma : 1.0; }
};

// Importance label: [l + (u-l) * logistic(beta * (n_r - rank))] * gamma.
// Strictly decreasing in the rank; rank is real-valued after averaging.
double imp_label(double rank, int n_r, const ImpLabelConfig& config = {});

// One candidate execution path for a query, with per-iteration criticality
// ranks over the non-finisher agents and their average.
struct PathRecord {
    Query query;
    std::vector<AgentProfile> agents;  // path order; finisher last once appended
    std::vector<std::vector<double>> iteration_ranks;  // iterations x non-finisher agents
    std::vector<double> averaged_rank;                 // non-finisher agents
    bool finisher_appended = false;

    int n_r() const { return static_cast<int>(agents.size()); }
};

// Arithmetic mean across iterations; every iteration must rank every agent.
std::vector<double> average_ranks(const std::vector<std::vector<double>>& iteration_ranks);

// Cohesion labels at step k over the whole path (1-based positions):
// 1/(i-k+1) for i >= k, else 0. Exactly one entry equals 1, at i = k.
Eigen::VectorXd gap_labels(const PathRecord& path, int k);

// Appends the terminal summarization agent. The finisher takes part in
// cohesion labels through its path position but never receives an
// importance label.
PathRecord append_finisher(PathRecord path, const AgentProfile& finisher);

struct LabeledRecord {
    enum class Kind { Imp, Gap };
    Kind kind = Kind::Imp;
    std::string query_id;
    std::optional<std::string> context;  // gap records: rendered history
    std::optional<std::string> query;    // imp records: raw query text
    std::string agent_desc;
    double label = 0.0;
};

std::string record_to_json_line(const LabeledRecord& record);
LabeledRecord record_from_json_line(std::string_view line);
void write_records_jsonl(std::ostream& out, const std::vector<LabeledRecord>& records);
std::vector<LabeledRecord> read_records_jsonl(std::istream& in);
std::vector<LabeledRecord> read_records_jsonl_file(const std::string& path);

// Filters one record family and shapes it for the trainer.
std::vector<LabeledExample> records_to_examples(const std::vector<LabeledRecord>& records,
                                                LabeledRecord::Kind kind);

// Source of queries, candidate paths, criticality rankings and the messages
// path agents would emit. The reference implementation is deterministic and
// template-based; remote text models plug in through adapters.
class DatasetGenerator {
  public:
    virtual ~DatasetGenerator() = default;

    virtual Query next_query(Rng& rng) = 0;
    // Non-finisher agents, in execution order.
    virtual std::vector<AgentProfile> candidate_path(const Query& query, int path_index,
                                                     Rng& rng) = 0;
    // One criticality ranking over `path` (a permutation of 1..path.size()).
    virtual std::vector<double> rank_once(const Query& query,
                                          const std::vector<AgentProfile>& path, Rng& rng) = 0;
    // The message path[index] emits at its step (successor-aware).
    virtual Message path_message(const Query& query, const std::vector<AgentProfile>& path,
                                 std::size_t index) = 0;
    virtual AgentProfile finisher() const = 0;
    // Description standing in as the deciding agent for step-1 contexts.
    virtual std::string dispatch_description() const = 0;
};

struct TemplateGeneratorConfig {
    DomainCatalog domains = DomainCatalog::reference();
    // Path length including the off-domain helper, excluding the finisher.
    int path_len = 3;
    bool off_domain_helper = true;
};

// Deterministic reference generator. Queries follow the shared world
// templates; each candidate path holds one specialist per query stage plus
// (by default) one off-domain helper, ranked least critical, so importance
// labels span matched and unmatched agents.
class TemplateGenerator : public DatasetGenerator {
  public:
    explicit TemplateGenerator(TemplateGeneratorConfig config = {});

    Query next_query(Rng& rng) override;
    std::vector<AgentProfile> candidate_path(const Query& query, int path_index,
                                             Rng& rng) override;
    std::vector<double> rank_once(const Query& query, const std::vector<AgentProfile>& path,
                                  Rng& rng) override;
    Message path_message(const Query& query, const std::vector<AgentProfile>& path,
                         std::size_t index) override;
    AgentProfile finisher() const override;
    std::string dispatch_description() const override;

  private:
    struct QueryInfo {
        std::string domain;
        std::vector<std::string> stage_names;
    };
    QueryInfo info_for(const Query& query) const;

    TemplateGeneratorConfig config_;
    long counter_ = 0;
    std::map<std::string, QueryInfo> info_;
};

struct RemoteGeneratorConfig {
    std::string host;
    int port = 0;
    std::string path = "/complete";
    int deadline_ms = 2000;
};

// Minimal adapter for an external text model: POST {"prompt"} -> {"text"}.
// Any transport or protocol problem surfaces as GeneratorUnavailable.
class RemoteTextCompleter {
  public:
    explicit RemoteTextCompleter(RemoteGeneratorConfig config) : config_(std::move(config)) {}
    std::string complete(const std::string& prompt) const;

  private:
    RemoteGeneratorConfig config_;
};

// Swaps the inner generator's query text for remotely completed text while
// keeping paths, ranks and messages local and deterministic.
class RemoteQueryGenerator : public DatasetGenerator {
  public:
    RemoteQueryGenerator(DatasetGenerator& inner, const RemoteTextCompleter& completer)
        : inner_(inner), completer_(completer) {}

    Query next_query(Rng& rng) override;
    std::vector<AgentProfile> candidate_path(const Query& query, int path_index,
                                             Rng& rng) override {
        return inner_.candidate_path(query, path_index, rng);
    }
    std::vector<double> rank_once(const Query& query, const std::vector<AgentProfile>& path,
                                  Rng& rng) override {
        return inner_.rank_once(query, path, rng);
    }
    Message path_message(const Query& query, const std::vector<AgentProfile>& path,
                         std::size_t index) override {
        return inner_.path_message(query, path, index);
    }
    AgentProfile finisher() const override { return inner_.finisher(); }
    std::string dispatch_description() const override { return inner_.dispatch_description(); }

  private:
    DatasetGenerator& inner_;
    const RemoteTextCompleter& completer_;
};

// Density-guided rejection sampling: a candidate is accepted when its density
// against the existing queries is at or below the acceptance percentile of
// the existing queries' own densities; after max_attempts the sparsest
// candidate seen wins. An empty existing set accepts immediately.
std::vector<Query> sample_sparse_queries(DatasetGenerator& generator,
                                         const std::vector<Query>& existing,
                                         const Encoder& encoder, const DensityConfig& config,
                                         int count, Rng& rng);

struct GenSizes {
    int queries = 10;
    int paths = 3;      // candidate paths per query
    int iterations = 3;  // rank averaging iterations
};

// The full labeling pipeline: density-guided query sampling, path generation
// with the finisher appended, rank averaging, and label emission. Importance
// records pair the raw query with each non-finisher agent; cohesion records
// pair the rendered chain context at every step with every path agent.
std::vector<LabeledRecord> generate_dataset(DatasetGenerator& generator, const Encoder& encoder,
                                            const GenSizes& sizes,
                                            const DensityConfig& density_config,
                                            const ImpLabelConfig& imp_config, uint64_t seed);

}  // namespace birouter
