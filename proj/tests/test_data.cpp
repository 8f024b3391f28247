#include <fstream>
#include <sstream>
#include <string>

#include "birouter/marsgen.hpp"
#include "birouter/world.hpp"

#include <json.hpp>

#include "doctest.h"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(static_cast<bool>(in), "missing file: " << path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

TEST_SUITE("data") {

TEST_CASE("committed data files match the reference builders byte for byte") {
    const std::string data = BIROUTER_DATA_DIR;

    nlohmann::json domains;
    domains["domains"] = birouter::DomainCatalog::reference().names();
    CHECK(slurp(data + "/domains.json") == domains.dump(2) + "\n");

    CHECK(slurp(data + "/agents_standard.json") ==
          birouter::world::standard_catalog().to_json_text());

    CHECK(slurp(data + "/tasks_standard.json") ==
          birouter::world::tasks_to_json_text(birouter::world::standard_task_mix(50, 7)));
}

TEST_CASE("committed data files load through the public loaders") {
    const std::string data = BIROUTER_DATA_DIR;

    birouter::DomainCatalog domains =
        birouter::DomainCatalog::from_json_file(data + "/domains.json");
    CHECK(domains.size() == 115);

    birouter::AgentCatalog agents =
        birouter::AgentCatalog::from_json_file(data + "/agents_standard.json");
    CHECK(agents.size() == 22);
    CHECK(agents.finisher().id == "zz_finisher");

    auto tasks = birouter::world::tasks_from_json_file(data + "/tasks_standard.json");
    CHECK(tasks.size() == 50);
}

TEST_CASE("seed-7 fixture holds 200 records per branch from the generator") {
    const std::string fixtures = BIROUTER_FIXTURE_DIR;
    auto imp = birouter::read_records_jsonl_file(fixtures + "/mars_seed7_imp.jsonl");
    auto gap = birouter::read_records_jsonl_file(fixtures + "/mars_seed7_gap.jsonl");
    REQUIRE(imp.size() == 200);
    REQUIRE(gap.size() == 200);
    for (const auto& r : imp) {
        CHECK(r.kind == birouter::LabeledRecord::Kind::Imp);
        CHECK(r.label > 0.0);
        CHECK(r.label < 1.0);
    }
    for (const auto& r : gap) {
        CHECK(r.kind == birouter::LabeledRecord::Kind::Gap);
        CHECK(r.label >= 0.0);
        CHECK(r.label <= 1.0);
    }

    // Byte-exact regeneration: 34 length-2-path queries cover 200 records in
    // both branches (34 x 3 paths x 2 workers = 204 importance records).
    birouter::TemplateGeneratorConfig generator_config;
    generator_config.path_len = 2;
    birouter::TemplateGenerator generator{generator_config};
    birouter::HashingEncoder encoder;
    birouter::GenSizes sizes;
    sizes.queries = 34;
    auto records = birouter::generate_dataset(generator, encoder, sizes, birouter::DensityConfig{},
                                              birouter::ImpLabelConfig{}, 7);
    std::vector<birouter::LabeledRecord> imp_gen;
    std::vector<birouter::LabeledRecord> gap_gen;
    for (auto& r : records) {
        auto& branch = r.kind == birouter::LabeledRecord::Kind::Imp ? imp_gen : gap_gen;
        if (branch.size() < 200) branch.push_back(std::move(r));
    }
    std::ostringstream imp_text;
    std::ostringstream gap_text;
    birouter::write_records_jsonl(imp_text, imp_gen);
    birouter::write_records_jsonl(gap_text, gap_gen);
    CHECK(imp_text.str() == slurp(fixtures + "/mars_seed7_imp.jsonl"));
    CHECK(gap_text.str() == slurp(fixtures + "/mars_seed7_gap.jsonl"));
}

TEST_CASE("sample configs parse and carry a seed") {
    const std::string root = std::string(BIROUTER_DATA_DIR) + "/..";
    for (const char* name : {"pipeline", "attack", "krandom"}) {
        nlohmann::json cfg =
            nlohmann::json::parse(slurp(root + "/configs/" + name + ".json"));
        CHECK(cfg.contains("seed"));
        CHECK(cfg.contains("output_dir"));
    }
}

}  // TEST_SUITE

}  // namespace
