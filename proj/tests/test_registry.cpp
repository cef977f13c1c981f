#include "support.hpp"

#include "enrichkit/error.hpp"
#include "enrichkit/format_registry.hpp"
#include "enrichkit/util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace enrichkit;
using namespace testing;

namespace {

std::vector<InstructionRecord> pool(std::size_t n) {
    std::vector<InstructionRecord> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_record("p" + std::to_string(i), "t"));
    return out;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::invalid_argument;
}

} // namespace

TEST_SUITE("format_registry") {

TEST_CASE("k=1 from a pool of 500 is stable under a seed") {
    auto task = make_task("t", {"S"});
    auto recs = pool(800);
    WorkbenchConfig cfg;
    cfg.sampling_seed = 7;
    CHECK(cfg.pool_size == 500);
    CHECK(cfg.sample_size == 1);
    auto a = sample_examples(task, recs, cfg);
    auto b = sample_examples(task, recs, cfg);
    REQUIRE(a.size() == 1);
    CHECK(a == b);
    // Drawn from the first N only.
    CHECK(std::stoi(a[0].id.substr(1)) < 500);
}

TEST_CASE("k larger than the pool returns the pool") {
    auto task = make_task("t", {"S"});
    auto recs = pool(3);
    WorkbenchConfig cfg;
    cfg.sample_size = 5;
    auto s = sample_examples(task, recs, cfg);
    REQUIRE(s.size() == 3);
    std::set<std::string> ids;
    for (const auto& r : s) ids.insert(r.id);
    CHECK(ids.size() == 3);
}

TEST_CASE("sampling draws without replacement and varies with the seed") {
    auto task = make_task("t", {"S"});
    auto recs = pool(500);
    WorkbenchConfig cfg;
    cfg.sample_size = 20;
    std::set<std::vector<std::string>> distinct;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.sampling_seed = seed;
        auto s = sample_examples(task, recs, cfg);
        std::vector<std::string> ids;
        for (const auto& r : s) ids.push_back(r.id);
        CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 20);
        distinct.insert(ids);
    }
    CHECK(distinct.size() > 1);
}

TEST_CASE("empty pool and bad config") {
    auto task = make_task("t", {"S"});
    WorkbenchConfig cfg;
    CHECK(code_of([&] { sample_examples(task, {}, cfg); }) == Errc::empty_pool);
    WorkbenchConfig bad;
    bad.pool_size = 2;
    bad.sample_size = 3;
    CHECK_THROWS_AS(bad.validate(), Error);
    auto foreign = pool(2);
    foreign[1].task_name = "other";
    CHECK_THROWS_AS(sample_examples(task, foreign, cfg), Error);
}

TEST_CASE("parsing step structures") {
    auto numbered = parse_format_steps("Here is the format:\n"
                                       "1. **Summary**: What the CVE is.\n"
                                       "2. **Root Cause**: The weakness.\n"
                                       "3. **Exploitation**: How.\n"
                                       "4. **Impact**: Consequences.\n"
                                       "5. **Remediation**: Fixes.\n");
    REQUIRE(numbered.size() == 5);
    CHECK(numbered[0].name == "Summary");
    CHECK(numbered[0].instruction == "What the CVE is.");
    CHECK(numbered[4].name == "Remediation");

    auto stepped = parse_format_steps("Step 1) Context - set the scene\nStep 2) Answer - reply");
    REQUIRE(stepped.size() == 2);
    CHECK(stepped[1].name == "Answer");

    auto bolded = parse_format_steps("**Overview**\nDescribe it.\n\n**Details**\nGo deeper.");
    REQUIRE(bolded.size() == 2);
    CHECK(bolded[0].name == "Overview");
    CHECK(bolded[1].instruction == "Go deeper.");

    CHECK(parse_format_steps("Just write a good answer with some detail.").empty());
}

TEST_CASE("candidate generation from a five-step reply") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("format.generate", {"1. Summary: a\n2. Root Cause: b\n3. Exploitation: c\n4. Impact: d\n5. Remediation: e"});
    auto gw = make_gateway(model);
    std::vector<InstructionRecord> ex{make_record("e1", "cve", "What is CVE-1?", "A bug.")};
    CandidateOptions opts;
    opts.current_version = 3;
    auto fmt = generate_candidate("Explain a CVE.", ex, "specific", *gw, opts);
    CHECK(fmt.steps.size() == 5);
    CHECK(fmt.version == 4);
    CHECK(fmt.provenance == Provenance::llm_generated);
    CHECK(model->requests()[0].user_prompt.find("What is CVE-1?") != std::string::npos);
}

TEST_CASE("general prompt with no examples has no example block") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("format.generate", {"1. Concept: a\n2. Answer: b"});
    auto gw = make_gateway(model);
    auto fmt = generate_candidate("Answer security questions.", {}, "general", *gw);
    CHECK(fmt.steps.size() == 2);
    auto req = model->requests().at(0);
    CHECK(req.user_prompt.find("Example") == std::string::npos);
    CHECK(req.user_prompt.find("{{") == std::string::npos);
}

TEST_CASE("prose twice is unparseable") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("format.generate", {"Write clearly.", "Be thorough and accurate."});
    auto gw = make_gateway(model);
    CHECK(code_of([&] { generate_candidate("Explain.", {}, "general", *gw); }) == Errc::unparseable_format);
    CHECK(model->calls() == 2);
}

TEST_CASE("prompt kinds form an open set") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("format.generate", {"1. Only: step"});
    auto gw = make_gateway(model);
    PromptLibrary lib;
    CHECK_THROWS_AS(generate_candidate("Explain.", {}, "terse", *gw, {}), Error);
    lib.set("format.terse", {"You design formats.", "Task: {{task_description}}\n{{examples}}"});
    CandidateOptions opts;
    opts.prompts = &lib;
    CHECK(generate_candidate("Explain.", {}, "terse", *gw, opts).steps.size() == 1);
}

TEST_CASE("save and load round trip") {
    FormatRegistry reg;
    auto spec = make_task("rcm_mapping", {"Evidence", "Weakness", "Answer"}, true);
    spec.format.version = 0;
    int v = reg.save(spec);
    CHECK(v == 1);
    auto back = reg.load("rcm_mapping");
    CHECK(back.format.steps == spec.format.steps);
    CHECK(back.requires_search);
    CHECK(code_of([&] { reg.load("nope"); }) == Errc::unknown_task_name);
}

TEST_CASE("saving twice keeps both versions; stale saves conflict") {
    FormatRegistry reg;
    auto spec = make_task("t", {"A"});
    spec.format.version = 0;
    CHECK(reg.save(spec) == 1);
    spec.format.steps.push_back({"B", "more"});
    CHECK(reg.save(spec) == 2);
    CHECK(reg.versions("t") == std::vector<int>{1, 2});
    CHECK(reg.load("t", 1).format.steps.size() == 1);
    CHECK(reg.load("t").format.steps.size() == 2);
    spec.format.version = 2;
    CHECK(code_of([&] { reg.save(spec); }) == Errc::version_conflict);
    spec.format.version = 3;
    CHECK(reg.save(spec) == 3);
}

TEST_CASE("concurrent saves of one version: exactly one wins") {
    FormatRegistry reg;
    auto spec = make_task("t", {"A"});
    spec.format.version = 0;
    reg.save(spec);
    std::atomic<int> ok{0}, conflict{0};
    parallel_for(8, 8, [&](std::size_t i) {
        auto s = spec;
        s.format.version = 2;
        s.format.steps[0].instruction = "writer " + std::to_string(i);
        try {
            reg.save(s);
            ++ok;
        } catch (const Error& e) {
            if (e.code() == Errc::version_conflict) ++conflict;
        }
    });
    CHECK(ok == 1);
    CHECK(conflict == 7);
}

TEST_CASE("task files are human-editable and round trip") {
    auto spec = make_task("cve_explanation", {"Summary", "Impact"}, true, false, "Explain a CVE.\nInclude the CWE.");
    spec.format.provenance = Provenance::expert_edited;
    spec.format.steps[1].instruction = "Line one.\nLine two.";
    std::string text = serialize_task(spec);
    CHECK(text.find("## Summary") != std::string::npos);
    CHECK(text.find("provenance: expert_edited") != std::string::npos);
    CHECK(parse_task_file(text) == spec);
}

TEST_CASE("directory-backed registry persists versions as files") {
    TempDir dir;
    {
        FormatRegistry reg(dir.file("tasks"));
        auto spec = make_task("sigma", {"Purpose", "Logic"});
        spec.format.version = 0;
        reg.save(spec);
        spec.format.steps.push_back({"Tuning", "x"});
        spec.format.provenance = Provenance::expert_edited;
        reg.save(spec);
    }
    CHECK(std::filesystem::exists(dir.file("tasks/sigma/v0001.fmt")));
    CHECK(std::filesystem::exists(dir.file("tasks/sigma/v0002.fmt")));
    std::string v1 = read_file(dir.file("tasks/sigma/v0001.fmt"));
    FormatRegistry reopened(dir.file("tasks"));
    CHECK(reopened.versions("sigma") == std::vector<int>{1, 2});
    CHECK(reopened.load("sigma").format.provenance == Provenance::expert_edited);
    CHECK(reopened.load("sigma", 1).format.provenance == Provenance::llm_generated);
    // Older versions are never rewritten.
    CHECK(read_file(dir.file("tasks/sigma/v0001.fmt")) == v1);
}

TEST_CASE("shipped task registry loads") {
    FormatRegistry reg(ENRICHKIT_DATA_DIR "/tasks");
    auto names = reg.names();
    CHECK(names.size() >= 5);
    for (const auto& t : reg.current()) {
        CHECK_NOTHROW(t.validate());
        CHECK_FALSE(t.description.empty());
    }
    CHECK(reg.load("document_question_answering").requires_grounding_doc);
}

TEST_CASE("template invariants") {
    FormatTemplate f;
    CHECK_THROWS_AS(f.validate(), Error);
    f.steps = {{"A", ""}, {"A", ""}};
    CHECK_THROWS_AS(f.validate(), Error);
    f.steps = {{"", "x"}};
    CHECK_THROWS_AS(f.validate(), Error);
    TaskSpec t = make_task("x", {"A"});
    t.description = " ";
    CHECK_THROWS_AS(t.validate(), Error);
}

} // TEST_SUITE
