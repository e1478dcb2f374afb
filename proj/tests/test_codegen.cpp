#include "doctest.h"
#include "repro/codegen.hpp"
#include "repro/error.hpp"
#include "repro/pysrc.hpp"
#include "test_util.hpp"

using namespace repro;

namespace {

const char* kStubScript = R"(import yaml


class Data:
    """Loads data."""

    def load(self, config):
        """Return splits."""
        pass


def main():
    """Entry point."""
    pass
)";

std::vector<GuideUnit> fixture_guides() {
    std::vector<GuideUnit> guides;
    GuideUnit fw;
    fw.id = "g0";
    fw.level = GuideLevel::framework;
    fw.aspect = Aspect::model;
    fw.text = "Two graph convolution layers with hidden size 64.";
    guides.push_back(fw);
    GuideUnit cfg;
    cfg.id = "g1";
    cfg.level = GuideLevel::configuration;
    cfg.text = "hidden size — 64";
    guides.push_back(cfg);
    GuideUnit cfg2;
    cfg2.id = "g2";
    cfg2.level = GuideLevel::configuration;
    cfg2.text = "learning rate: 0.01";
    guides.push_back(cfg2);
    return guides;
}

}  // namespace

TEST_SUITE("codegen") {

TEST_CASE("python source inspection finds imports and symbols") {
    auto imps = pysrc::imports(kStubScript);
    CHECK(imps.count("import yaml") == 1);

    auto symbols = pysrc::top_level_symbols(kStubScript);
    REQUIRE(symbols.size() == 2);
    CHECK(symbols[0].name == "Data");
    CHECK(symbols[0].kind == "class");
    CHECK(symbols[0].is_stub);
    CHECK(symbols[1].name == "main");
    CHECK(symbols[1].kind == "function");
    CHECK(symbols[1].is_stub);
    CHECK(pysrc::all_bodies_stubbed(kStubScript));
}

TEST_CASE("executable statements disqualify a stub") {
    std::string code = "def main():\n    \"\"\"Doc.\"\"\"\n    x = 1\n    return x\n";
    auto symbols = pysrc::top_level_symbols(code);
    REQUIRE(symbols.size() == 1);
    CHECK_FALSE(symbols[0].is_stub);
    CHECK_FALSE(pysrc::all_bodies_stubbed(code));
}

TEST_CASE("placeholder markers are detected case-insensitively") {
    CHECK(pysrc::has_placeholder("x = 1  # TODO fix"));
    CHECK(pysrc::has_placeholder("# Dummy implementation goes here"));
    CHECK(pysrc::has_placeholder("pass  # your implementation"));
    CHECK_FALSE(pysrc::has_placeholder("total = done + oversight"));
}

TEST_CASE("symbol replacement splices a new block in place") {
    auto symbols = pysrc::top_level_symbols(kStubScript);
    std::string updated = pysrc::replace_symbol_block(
        kStubScript, symbols[1], "def main():\n    \"\"\"Entry point.\"\"\"\n    run()\n");
    CHECK(updated.find("run()") != std::string::npos);
    CHECK(updated.find("class Data:") != std::string::npos);
    auto after = pysrc::top_level_symbols(updated);
    REQUIRE(after.size() == 2);
    CHECK_FALSE(after[1].is_stub);
}

TEST_CASE("import merging deduplicates and appends after existing imports") {
    std::string merged = pysrc::merge_imports(kStubScript, {"import yaml", "import math"});
    CHECK(merged.find("import math") != std::string::npos);
    // No duplicate of the existing import.
    CHECK(merged.find("import yaml") == merged.rfind("import yaml"));
    auto [leading, rest] = pysrc::split_leading_imports("import os\nimport re\n\nx = 1\n");
    CHECK(leading.size() == 2);
    CHECK(rest.find("x = 1") != std::string::npos);
}

TEST_CASE("code block extraction handles fenced and bare responses") {
    CHECK(extract_code_block("text\n```python\nx = 1\n```\nmore") == "x = 1\n");
    CHECK(extract_code_block("just raw code") == "just raw code");
}

TEST_CASE("configuration guides become a key-value config document") {
    std::string doc = synthesize_config_doc(fixture_guides());
    CHECK(doc.find("hidden_size: 64") != std::string::npos);
    CHECK(doc.find("learning_rate: 0.01") != std::string::npos);
    // Framework guides do not leak into the config document.
    CHECK(doc.find("convolution") == std::string::npos);
}

TEST_CASE("skeleton generation enforces mandated structure via re-prompts") {
    auto script = testutil::load_json(testutil::fixture("script_reproduce.json"));
    std::string good = script["responses"]["skeleton"][0];
    nlohmann::json two_try = {
        {"responses",
         {{"skeleton", {"```python\nclass Data:\n    \"\"\"d.\"\"\"\n    pass\n```", good}}}}};
    auto g = testutil::make_scripted(two_try);
    CodeGenerator generator(*g.gateway, CodegenConfig{});
    Workspace ws = generator.generate_skeleton(fixture_guides());
    REQUIRE(ws.files.count("main.py") == 1);
    CHECK(pysrc::all_bodies_stubbed(ws.files["main.py"]));
    CHECK_FALSE(generator.warnings().empty());  // records the re-prompt
    CHECK(ws.config_doc.find("hidden_size: 64") != std::string::npos);
}

TEST_CASE("skeletons that never satisfy the mandate fail the stage") {
    nlohmann::json script = {{"defaults", {{"*", "```python\nx = 1\n```"}}}};
    auto g = testutil::make_scripted(script);
    CodegenConfig cfg;
    cfg.max_reprompts = 1;
    CodeGenerator generator(*g.gateway, cfg);
    CHECK_THROWS_AS(generator.generate_skeleton(fixture_guides()), StageFailure);
}

TEST_CASE("fill targets come in mandated order before extras") {
    std::string code =
        "def helper():\n    \"\"\"h.\"\"\"\n    pass\n\n\n"
        "class Model:\n    \"\"\"m.\"\"\"\n\n    def build(self):\n        \"\"\"b.\"\"\"\n        pass\n\n\n"
        "class Data:\n    \"\"\"d.\"\"\"\n\n    def load(self):\n        \"\"\"l.\"\"\"\n        pass\n";
    Workspace ws;
    ws.files["main.py"] = code;
    auto g = testutil::make_scripted(nlohmann::json::object());
    CodeGenerator generator(*g.gateway, CodegenConfig{});
    auto targets = generator.list_fill_targets(ws);
    REQUIRE(targets.size() == 3);
    CHECK(targets[0].symbol == "Data");
    CHECK(targets[1].symbol == "Model");
    CHECK(targets[2].symbol == "helper");
}

TEST_CASE("placeholder responses are re-prompted during fills") {
    Workspace ws;
    ws.files["main.py"] = kStubScript;
    nlohmann::json script = {
        {"responses",
         {{"fill",
           {"```python\nclass Data:\n    \"\"\"d.\"\"\"\n    pass  # TODO later\n```",
            "```python\nclass Data:\n    \"\"\"d.\"\"\"\n\n    def load(self, config):\n"
            "        \"\"\"Return splits.\"\"\"\n        return read(config)\n```"}}}}};
    auto g = testutil::make_scripted(script);
    CodeGenerator generator(*g.gateway, CodegenConfig{});
    auto outcome = generator.fill_target(ws, {"main.py", "Data", "class", "stub"});
    CHECK(outcome.filled);
    CHECK(outcome.reprompts == 1);
    CHECK(ws.files["main.py"].find("return read(config)") != std::string::npos);
    CHECK(ws.files["main.py"].find("import yaml") != std::string::npos);
}

TEST_CASE("rewrites that drop an existing import are rejected") {
    Workspace ws;
    ws.files["main.py"] = kStubScript;
    // Defines both file symbols -> treated as a full rewrite, which loses
    // `import yaml` and must be refused every attempt.
    nlohmann::json script = {
        {"defaults",
         {{"fill",
           "```python\nclass Data:\n    \"\"\"d.\"\"\"\n\n    def load(self, config):\n"
           "        \"\"\"l.\"\"\"\n        return 1\n\n\ndef main():\n    \"\"\"m.\"\"\"\n"
           "    return 2\n```"}}}};
    auto g = testutil::make_scripted(script);
    CodegenConfig cfg;
    cfg.max_reprompts = 1;
    CodeGenerator generator(*g.gateway, cfg);
    auto outcome = generator.fill_target(ws, {"main.py", "Data", "class", "stub"});
    CHECK_FALSE(outcome.filled);
    CHECK(outcome.note.find("import") != std::string::npos);
    // The stub is retained untouched.
    CHECK(ws.files["main.py"] == kStubScript);
}

TEST_CASE("initial implementation fills every mandated stub") {
    auto script = testutil::load_json(testutil::fixture("script_reproduce.json"));
    auto g = testutil::make_scripted(script);
    CodeGenerator generator(*g.gateway, CodegenConfig{});
    std::vector<FillOutcome> log;
    Workspace ws = generator.initial_implementation(fixture_guides(), &log);
    REQUIRE(log.size() == 5);
    for (const auto& o : log) CHECK(o.filled);
    CHECK(ws.files["main.py"].find("GraphConv") != std::string::npos);
    CHECK(ws.files["main.py"].find("import math") != std::string::npos);
    CHECK(ws.files["main.py"].find("import yaml") != std::string::npos);
    // No stub remains among the mandated symbols.
    auto remaining = generator.list_fill_targets(ws);
    CHECK(remaining.empty());
}

TEST_CASE("workspaces round-trip through JSON") {
    Workspace ws;
    ws.files["main.py"] = "x = 1\n";
    ws.config_doc = "epochs: 200\n";
    Workspace back = workspace_from_json(to_json(ws));
    CHECK(back.files == ws.files);
    CHECK(back.config_doc == ws.config_doc);
}

}  // TEST_SUITE
