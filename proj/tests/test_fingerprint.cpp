#include "doctest.h"
#include "repro/error.hpp"
#include "repro/fingerprint.hpp"
#include "repro/paper.hpp"
#include "test_util.hpp"

using namespace repro;

namespace {

Criterion make_criterion(const std::string& id, const std::string& fact,
                         const std::string& scope = "") {
    Criterion c;
    c.id = id;
    c.fact = fact;
    if (!scope.empty()) c.scope = scope;
    c.rendered = "The <fact>" + fact + "</fact>" +
                 (scope.empty() ? std::string(".") : " <scope>" + scope + "</scope>.");
    return c;
}

}  // namespace

TEST_SUITE("fingerprint") {

TEST_CASE("fact and scope spans parse verbatim") {
    auto [fact, scope] =
        parse_fact_scope("The <fact>AdamW optimizer</fact> is used <scope>for Cora</scope>.");
    CHECK(fact == "AdamW optimizer");
    REQUIRE(scope.has_value());
    CHECK(*scope == "for Cora");

    auto [fact2, scope2] = parse_fact_scope("Uses <fact>two layers</fact>.");
    CHECK(fact2 == "two layers");
    CHECK_FALSE(scope2.has_value());

    CHECK_THROWS_AS(parse_fact_scope("no spans at all"), SpanError);
    CHECK_THROWS_AS(parse_fact_scope("<fact>a</fact> and <fact>b</fact>"), SpanError);
    CHECK_THROWS_AS(parse_fact_scope("<fact>a <scope>x</scope></fact> <scope>y</scope>"),
                    SpanError);
    CHECK_THROWS_AS(parse_fact_scope("<fact>unclosed"), SpanError);
}

TEST_CASE("dedup normalization strips case and punctuation") {
    CHECK(normalize_for_dedup("The learning-rate is 0.01!") == "the learning rate is 0 01");
    CHECK(normalize_for_dedup("  Hello   World  ") == "hello world");
    CHECK(normalize_for_dedup("") == "");
}

TEST_CASE("dedup clusters by embedding threshold and collapses exact duplicates") {
    std::vector<Criterion> criteria = {
        make_criterion("c0", "weight decay is 5e-4", "for the AdamW optimizer"),
        make_criterion("c1", "weight decay is 5e-4", "for the optimizer AdamW"),
        make_criterion("c2", "hidden size is 64"),
        make_criterion("c3", "hidden size is 64"),
        make_criterion("c4", "dropout rate of 0.5"),
    };
    // c0,c1,c2,c3 pairwise-similar groups via identical embeddings; c4 apart.
    std::vector<std::vector<double>> emb = {
        {1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 1, 0}, {0, 0, 1}};
    auto result = dedup(criteria, emb, 0.92);

    REQUIRE(result.clusters.size() == 3);
    CHECK(result.clusters[0].member_ids == std::vector<std::string>{"c0", "c1"});
    CHECK(result.clusters[1].member_ids == std::vector<std::string>{"c2", "c3"});
    CHECK(result.clusters[2].member_ids == std::vector<std::string>{"c4"});

    // Distinct scopes both survive; the exact duplicate pair collapses.
    std::vector<std::string> ids;
    for (const auto& c : result.survivors) ids.push_back(c.id);
    CHECK(ids == std::vector<std::string>{"c0", "c1", "c2", "c4"});
}

TEST_CASE("dedup transitivity: chained similarity forms one cluster") {
    std::vector<Criterion> criteria = {make_criterion("a", "x"), make_criterion("b", "y"),
                                       make_criterion("c", "z")};
    // a~b and b~c but a!~c: single-linkage still merges all three.
    std::vector<std::vector<double>> emb = {{1, 0.3}, {1, 0.42}, {1, 0.55}};
    auto result = dedup(criteria, emb, 0.99);
    REQUIRE(result.clusters.size() == 1);
    CHECK(result.clusters[0].member_ids.size() == 3);
}

TEST_CASE("standardization worked examples parse to the expected criteria") {
    auto cases = testutil::load_json(testutil::fixture("standardization_cases.json"));
    PaperDoc doc = load_paper("placeholder body\n");
    for (const auto& c : cases) {
        nlohmann::json script = {{"responses", {{"standardize", {c["response"]}}}}};
        auto g = testutil::make_scripted(script);
        FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
        GuideUnit unit;
        unit.id = "g0";
        unit.text = c["summary_fact"];
        auto out = builder.standardize(unit, doc);
        REQUIRE(out.size() == c["expected"].size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].fact == c["expected"][i]["fact"]);
            REQUIRE(out[i].scope.has_value());
            CHECK(*out[i].scope == c["expected"][i]["scope"]);
            CHECK(out[i].rendered == c["expected_rendered"][i]);
        }
    }
}

TEST_CASE("standardization rejects malformed spans but keeps valid ones") {
    nlohmann::json script = {
        {"responses",
         {{"standardize",
           {"[{\"criterion\": \"bad entry with no spans\"}, "
            "{\"criterion\": \"Good <fact>fact here</fact>.\"}]"}}}}};
    auto g = testutil::make_scripted(script);
    FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
    GuideUnit unit;
    unit.id = "g0";
    unit.text = "something";
    auto out = builder.standardize(unit, load_paper("body\n"));
    REQUIRE(out.size() == 1);
    CHECK(out[0].fact == "fact here");
    CHECK_FALSE(builder.warnings().empty());
}

TEST_CASE("semantic filter clamps oversized selections to the cap") {
    std::vector<Criterion> members;
    for (int i = 0; i < 8; ++i)
        members.push_back(make_criterion("c" + std::to_string(i), "fact " + std::to_string(i)));

    nlohmann::json script = {
        {"responses",
         {{"filter",
           {"{\"selected_indices\": [1,2,3,4,5,6,7], \"reason\": \"too many\"}"}}}}};
    auto g = testutil::make_scripted(script);
    FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
    auto kept = builder.semantic_filter(members);
    CHECK(kept.size() == 5);  // fewer-than-six cap
    CHECK_FALSE(builder.warnings().empty());
}

TEST_CASE("semantic filter falls back to the first member on bad output") {
    std::vector<Criterion> members = {make_criterion("c0", "a"), make_criterion("c1", "b")};
    nlohmann::json script = {
        {"responses", {{"filter", {"{\"selected_indices\": [99], \"reason\": \"bad\"}"}}}}};
    auto g = testutil::make_scripted(script);
    FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
    CHECK(builder.semantic_filter(members) == std::vector<std::string>{"c0"});
}

TEST_CASE("empty grounding selection flags a miss") {
    nlohmann::json script = {{"defaults", {{"ground", "[]"}}}};
    auto g = testutil::make_scripted(script);
    FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
    PaperDoc doc = load_paper("First paragraph about data.\n\nSecond paragraph about training.\n");
    GuideUnit unit;
    unit.id = "g0";
    unit.text = "training uses AdamW";
    CHECK_FALSE(builder.ground(unit, doc));
    CHECK(unit.grounding_miss);
    CHECK_FALSE(unit.source.has_value());
    CHECK_FALSE(builder.warnings().empty());
}

TEST_CASE("grounding attaches sentence coordinates from the selection") {
    nlohmann::json script = {{"defaults", {{"ground", "[1]"}}}};
    auto g = testutil::make_scripted(script);
    FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
    PaperDoc doc = load_paper("Models are trained with AdamW. The rate is 0.01.\n");
    GuideUnit unit;
    unit.id = "g0";
    unit.text = "Models are trained with AdamW.";
    REQUIRE(builder.ground(unit, doc));
    REQUIRE(unit.source.has_value());
    CHECK(unit.source->paragraph_id == 0);
    CHECK(unit.source->sentence_indices == std::vector<int>{1});
}

TEST_CASE("unparseable extraction output is re-prompted then fails the stage") {
    nlohmann::json script = {{"defaults", {{"*", "no structure here"}}}};
    auto g = testutil::make_scripted(script);
    FingerprintConfig cfg;
    cfg.max_reprompts = 1;
    FingerprintBuilder builder(*g.gateway, cfg);
    PaperDoc doc = load_paper("Some prose body with one sentence.\n");
    CHECK_THROWS_AS(builder.extract_framework_guides(doc), StageFailure);
    CHECK(builder.reprompt_count() > 0);
}

TEST_CASE("full pipeline on the fixture paper yields the expected stage counts") {
    auto script = testutil::load_json(testutil::fixture("script_fingerprint.json"));
    auto g = testutil::make_scripted(script);
    FingerprintBuilder builder(*g.gateway, FingerprintConfig{});
    PaperDoc doc = load_paper(testutil::slurp(testutil::fixture("fixture_paper.md")), "fixture");
    Fingerprint fp = builder.build(doc);

    CHECK(fp.stage_counts.guides == 16);
    CHECK(fp.stage_counts.standardized == 12);
    CHECK(fp.stage_counts.after_dedup == 11);
    CHECK(fp.stage_counts.final_count == 10);
    CHECK(fp.stage_counts.standardized >= fp.stage_counts.after_dedup);
    CHECK(fp.stage_counts.after_dedup >= fp.stage_counts.final_count);
    REQUIRE(fp.criteria.size() == 10);
    CHECK(fp.criteria[0].fact == "Cora citation dataset");
    // The reworded duplicate scope lost to the filter's first pick.
    for (const auto& c : fp.criteria) CHECK(c.scope.value_or("") != "for the optimizer AdamW");
    // Grounded units carry source references.
    CHECK(fp.criteria[0].source.has_value());
}

TEST_CASE("guide units round-trip through JSON") {
    GuideUnit u;
    u.id = "g7";
    u.level = GuideLevel::configuration;
    u.text = "learning rate — 0.01";
    u.aspect = Aspect::training;
    u.source = SourceRef{3, {1, 2}};
    u.grounding_miss = false;
    GuideUnit back = guide_unit_from_json(to_json(u));
    CHECK(back.id == u.id);
    CHECK(back.level == u.level);
    CHECK(back.text == u.text);
    REQUIRE(back.aspect.has_value());
    CHECK(*back.aspect == Aspect::training);
    REQUIRE(back.source.has_value());
    CHECK(back.source->paragraph_id == 3);
    CHECK(back.source->sentence_indices == std::vector<int>{1, 2});
}

TEST_CASE("fingerprints round-trip through JSON") {
    Fingerprint fp;
    fp.criteria.push_back(make_criterion("c0", "hidden size is 64", "for the model"));
    fp.stage_counts = {5, 4, 3, 2};
    Fingerprint back = fingerprint_from_json(to_json(fp));
    REQUIRE(back.criteria.size() == 1);
    CHECK(back.criteria[0].fact == "hidden size is 64");
    CHECK(back.stage_counts.final_count == 2);
}

}  // TEST_SUITE
