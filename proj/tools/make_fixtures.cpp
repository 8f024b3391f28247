// Regenerates the committed fixture and data files from the reference
// builders. Run from the repository root after intentional generator changes;
// the unit tests pin the outputs byte-for-byte.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "birouter/embedding.hpp"
#include "birouter/marsgen.hpp"
#include "birouter/world.hpp"

#include <json.hpp>

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << path << " (run from the repository root)\n";
        std::exit(1);
    }
    out << text;
    std::cout << "wrote " << path << "\n";
}

}  // namespace

int main() {
    using namespace birouter;

    // Seed-7 labeled dataset, truncated to 200 records per branch. Length-2
    // paths keep the contexts short enough that the default training budget
    // fits the cohesion branch cleanly; 34 queries x 3 paths x 2 workers =
    // 204 importance records, so both branches cover at least 200.
    TemplateGeneratorConfig generator_config;
    generator_config.path_len = 2;
    TemplateGenerator generator{generator_config};
    HashingEncoder encoder;
    GenSizes sizes;
    sizes.queries = 34;
    std::vector<LabeledRecord> records =
        generate_dataset(generator, encoder, sizes, DensityConfig{}, ImpLabelConfig{}, 7);

    std::vector<LabeledRecord> imp;
    std::vector<LabeledRecord> gap;
    for (auto& r : records) {
        auto& branch = r.kind == LabeledRecord::Kind::Imp ? imp : gap;
        if (branch.size() < 200) branch.push_back(std::move(r));
    }
    if (imp.size() != 200 || gap.size() != 200) {
        std::cerr << "unexpected branch sizes: imp=" << imp.size() << " gap=" << gap.size()
                  << "\n";
        return 1;
    }
    {
        std::ostringstream out;
        write_records_jsonl(out, imp);
        write_file("tests/fixtures/mars_seed7_imp.jsonl", out.str());
    }
    {
        std::ostringstream out;
        write_records_jsonl(out, gap);
        write_file("tests/fixtures/mars_seed7_gap.jsonl", out.str());
    }

    // Reference data files the CLI and tests can point at.
    nlohmann::json domains;
    domains["domains"] = DomainCatalog::reference().names();
    write_file("data/domains.json", domains.dump(2) + "\n");
    write_file("data/agents_standard.json", world::standard_catalog().to_json_text());
    write_file("data/tasks_standard.json",
               world::tasks_to_json_text(world::standard_task_mix(50, 7)));
    return 0;
}
