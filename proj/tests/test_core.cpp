#include <doctest.h>

#include <cmath>
#include <limits>

#include "birouter/core.hpp"
#include "birouter/rng.hpp"

using namespace birouter;

namespace {

AgentChain make_chain(const std::vector<double>& probs) {
    AgentChain chain;
    chain.query = {"q1", "test query", {}};
    for (std::size_t i = 0; i < probs.size(); ++i) {
        ChainEntry e;
        e.agent = "a" + std::to_string(i);
        e.message = make_message(e.agent, "msg " + std::to_string(i));
        e.step_probability = probs[i];
        chain.entries.push_back(std::move(e));
    }
    return chain;
}

const char* kCatalogJson = R"([
  {"id": "solver", "name": "Solver", "description": "solves arithmetic problems",
   "capabilities": ["compute"], "ground_truth_reliable": true},
  {"id": "fin", "name": "Finisher", "description": "summarize and conclude completed tasks",
   "is_finisher": true},
  {"id": "checker", "description": "verifies numeric results", "capabilities": ["verify"]}
])";

}  // namespace

TEST_SUITE("core") {

TEST_CASE("tokenizer counts whitespace-separated tokens") {
    CHECK(count_tokens("hello world") == 2);
    CHECK(count_tokens("  a \t b\nc  ") == 3);
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("   \n\t ") == 0);
    CHECK(count_tokens("one") == 1);

    auto toks = split_tokens("  solve a   math problem ");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0] == "solve");
    CHECK(toks[3] == "problem");
}

TEST_CASE("make_message records the token count of its content") {
    Message m = make_message("agent_a", "three word message");
    CHECK(m.sender == "agent_a");
    CHECK(m.token_count == 3);
    CHECK(make_message("x", "").token_count == 0);
}

TEST_CASE("build_observation copies history, current and candidate descriptions") {
    ChainHistory h;
    h.query = {"q7", "solve 2+2 then verify", {"arithmetic"}};
    h.steps.emplace_back("solver", make_message("solver", "the answer is 4"));

    AgentProfile current{"checker", "Checker", "verifies numeric results", {"verify"}, false, true};
    std::vector<AgentProfile> candidates{
        {"a", "A", "desc a", {}, false, true},
        {"b", "B", "desc b", {}, false, true},
        {"c", "C", "desc c", {}, false, true},
    };

    Observation obs = build_observation(h, current, candidates);
    CHECK(obs.history.query.text == "solve 2+2 then verify");
    REQUIRE(obs.history.steps.size() == 1);
    CHECK(obs.history.steps[0].second.content == "the answer is 4");
    CHECK(obs.current_desc == "verifies numeric results");
    REQUIRE(obs.candidate_descs.size() == candidates.size());
    CHECK(obs.candidate_descs[0] == "desc a");
    CHECK(obs.candidate_descs[2] == "desc c");
}

TEST_CASE("build_observation rejects an empty candidate set") {
    ChainHistory h;
    h.query = {"q", "anything", {}};
    AgentProfile current{"x", "X", "desc", {}, false, true};
    CHECK_THROWS_AS(build_observation(h, current, {}), EmptyCandidates);
}

TEST_CASE("chain probability multiplies every step after the first") {
    CHECK(chain_probability(make_chain({1.0, 0.5, 0.5})) == doctest::Approx(0.25).epsilon(1e-12));
    // The start entry's recorded probability is not a selection and never enters the product.
    CHECK(chain_probability(make_chain({0.2, 0.5})) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(chain_probability(make_chain({1.0})) == 1.0);
    CHECK(chain_probability(AgentChain{}) == 1.0);

    double p = chain_probability(make_chain({1.0, 0.73, 0.66, 0.83}));
    CHECK(p == doctest::Approx(0.73 * 0.66 * 0.83).epsilon(1e-12));
    CHECK(std::abs(p - 0.400) < 1e-3);
}

TEST_CASE("chain probability rejects out-of-range step probabilities") {
    CHECK_THROWS_AS(chain_probability(make_chain({1.0, 0.0})), InvalidProbability);
    CHECK_THROWS_AS(chain_probability(make_chain({1.0, -0.1})), InvalidProbability);
    CHECK_THROWS_AS(chain_probability(make_chain({1.0, 1.5})), InvalidProbability);
    CHECK_THROWS_AS(chain_probability(make_chain({1.0, std::numeric_limits<double>::quiet_NaN()})),
                    InvalidProbability);
    // The start entry is validated too, even though it is not multiplied in.
    CHECK_THROWS_AS(chain_probability(make_chain({0.0, 0.5})), InvalidProbability);
}

TEST_CASE("chain probability is the product of its parts and stays in (0,1]") {
    Rng rng(20240817);
    for (int iter = 0; iter < 500; ++iter) {
        std::size_t len = 1 + rng.below(8);
        std::vector<double> probs(len);
        for (auto& p : probs) p = 1.0 - rng.uniform(0.0, 0.999999);  // (0,1]
        AgentChain chain = make_chain(probs);

        long double expected = 1.0L;
        for (std::size_t i = 1; i < len; ++i) expected *= probs[i];
        double got = chain_probability(chain);
        CHECK(std::abs(got - static_cast<double>(expected)) <= 1e-12);
        CHECK(got > 0.0);
        CHECK(got <= 1.0);

        // Appending one more step multiplies the total by exactly that step.
        ChainEntry extra;
        extra.agent = "extra";
        extra.message = make_message("extra", "tail step");
        extra.step_probability = 0.25;
        chain.entries.push_back(extra);
        CHECK(chain_probability(chain) == doctest::Approx(got * 0.25).epsilon(1e-12));
    }
}

TEST_CASE("token cost sums message token counts over the chain") {
    AgentChain chain;
    chain.entries.push_back({"a", make_message("a", "one two three"), 1.0});
    chain.entries.push_back({"b", make_message("b", "four five"), 0.5});
    chain.entries.push_back({"c", make_message("c", ""), 0.5});
    CHECK(token_cost(chain) == 5);
    CHECK(token_cost(AgentChain{}) == 0);
}

TEST_CASE("agent catalog loads, sorts canonically and validates") {
    AgentCatalog cat = AgentCatalog::from_json_text(kCatalogJson);
    REQUIRE(cat.size() == 3);
    // Canonical order is ascending by id regardless of file order.
    CHECK(cat.profiles()[0].id == "checker");
    CHECK(cat.profiles()[1].id == "fin");
    CHECK(cat.profiles()[2].id == "solver");

    CHECK(cat.by_id("solver").name == "Solver");
    CHECK(cat.by_id("checker").name == "checker");  // name defaults to id
    CHECK(cat.by_id("solver").capabilities == std::vector<std::string>{"compute"});
    CHECK(cat.contains("fin"));
    CHECK_FALSE(cat.contains("nobody"));
    CHECK(cat.finisher().id == "fin");
    CHECK(cat.finisher().is_finisher);
    CHECK_THROWS_AS(cat.by_id("nobody"), UnknownAgent);
}

TEST_CASE("agent catalog round-trips through JSON") {
    AgentCatalog cat = AgentCatalog::from_json_text(kCatalogJson);
    AgentCatalog again = AgentCatalog::from_json_text(cat.to_json_text());
    REQUIRE(again.size() == cat.size());
    for (std::size_t i = 0; i < cat.size(); ++i) {
        CHECK(again.profiles()[i].id == cat.profiles()[i].id);
        CHECK(again.profiles()[i].description == cat.profiles()[i].description);
        CHECK(again.profiles()[i].capabilities == cat.profiles()[i].capabilities);
        CHECK(again.profiles()[i].is_finisher == cat.profiles()[i].is_finisher);
        CHECK(again.profiles()[i].ground_truth_reliable == cat.profiles()[i].ground_truth_reliable);
    }
}

TEST_CASE("agent catalog rejects malformed inputs") {
    CHECK_THROWS_AS(AgentCatalog::from_json_text("not json"), InvalidCatalog);
    CHECK_THROWS_AS(AgentCatalog::from_json_text(R"({"id":"x"})"), InvalidCatalog);

    // duplicate id
    CHECK_THROWS_AS(AgentCatalog::from_json_text(R"([
        {"id":"a","description":"d","is_finisher":true},
        {"id":"a","description":"d"}])"),
                    InvalidCatalog);
    // no finisher
    CHECK_THROWS_AS(AgentCatalog::from_json_text(R"([{"id":"a","description":"d"}])"),
                    InvalidCatalog);
    // two finishers
    CHECK_THROWS_AS(AgentCatalog::from_json_text(R"([
        {"id":"a","description":"d","is_finisher":true},
        {"id":"b","description":"d","is_finisher":true}])"),
                    InvalidCatalog);
    // empty description
    CHECK_THROWS_AS(AgentCatalog::from_json_text(R"([
        {"id":"a","description":"","is_finisher":true}])"),
                    InvalidCatalog);
    // missing required field
    CHECK_THROWS_AS(AgentCatalog::from_json_text(R"([{"description":"d","is_finisher":true}])"),
                    InvalidCatalog);
}

}  // TEST_SUITE
