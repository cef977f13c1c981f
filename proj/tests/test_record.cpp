#include "support.hpp"

#include "enrichkit/classify.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <doctest.h>

using namespace enrichkit;
using namespace testing;

TEST_SUITE("record") {

TEST_CASE("empty file loads as an empty dataset") {
    TempDir dir;
    write_file(dir.file("empty.jsonl"), "");
    auto ds = load_dataset(dir.file("empty.jsonl"));
    CHECK(ds.handle.record_count == 0);
    CHECK(ds.records.empty());
}

TEST_CASE("three lines keep their ids in order") {
    TempDir dir;
    std::vector<InstructionRecord> recs{make_record("c"), make_record("a"), make_record("b")};
    persist_dataset(recs, dir.file("d.jsonl"));
    auto ds = load_dataset(dir.file("d.jsonl"));
    REQUIRE(ds.handle.record_count == 3);
    CHECK(ds.records[0].id == "c");
    CHECK(ds.records[1].id == "a");
    CHECK(ds.records[2].id == "b");
}

TEST_CASE("a line without a response is rejected with its line number") {
    TempDir dir;
    write_file(dir.file("bad.jsonl"),
               R"({"id":"1","task":"","instruction":"q","response":"a","grounding_doc":null,"origin":"seed_original","meta":{}})"
               "\n"
               R"({"id":"2","task":"","instruction":"q","grounding_doc":null,"origin":"seed_original","meta":{}})"
               "\n");
    try {
        load_dataset(dir.file("bad.jsonl"));
        FAIL("expected MalformedLine");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_line);
        CHECK(e.detail() == 2);
    }
}

TEST_CASE("missing file") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/x.jsonl"), Error);
    try {
        load_dataset("/nonexistent/x.jsonl");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::missing_file);
    }
}

TEST_CASE("persist then load reproduces every field") {
    TempDir dir;
    InstructionRecord r = make_record("r1", "cve_explanation", "What is CVE-2014-0160?", "Heartbleed.");
    r.grounding_doc = "An advisory.\nWith two lines.";
    r.meta = {{"source", "fixture"}, {"lang", "en"}};
    InstructionRecord e = make_record("r2", "cve_explanation");
    e.origin = Origin::enriched;
    e.meta[std::string(kFormatVersionKey)] = "3";
    std::vector<InstructionRecord> recs{r, e};
    persist_dataset(recs, dir.file("rt.jsonl"));
    auto back = load_dataset(dir.file("rt.jsonl")).records;
    REQUIRE(back.size() == 2);
    CHECK(back[0] == r);
    CHECK(back[1] == e);
}

TEST_CASE("enriched records must carry a format version") {
    nlohmann::json j = to_json(make_record("x"));
    j["origin"] = "enriched";
    CHECK_THROWS_AS(record_from_json(j), Error);
}

TEST_CASE("empty instruction or response is rejected") {
    nlohmann::json j = to_json(make_record("x"));
    j["instruction"] = "";
    CHECK_THROWS_AS(record_from_json(j), Error);
    j = to_json(make_record("x"));
    j["response"] = "   ";
    CHECK_THROWS_AS(record_from_json(j), Error);
}

TEST_CASE("ids are assigned when absent and duplicates rejected") {
    TempDir dir;
    write_file(dir.file("noid.jsonl"), R"({"instruction":"q1","response":"a1"})"
                                       "\n"
                                       R"({"instruction":"q1","response":"a1"})"
                                       "\n");
    auto ds = load_dataset(dir.file("noid.jsonl"));
    REQUIRE(ds.records.size() == 2);
    CHECK_FALSE(ds.records[0].id.empty());
    CHECK(ds.records[0].id != ds.records[1].id);
    CHECK(load_dataset(dir.file("noid.jsonl")).records[0].id == ds.records[0].id);

    write_file(dir.file("dup.jsonl"), R"({"id":"a","instruction":"q","response":"r"})"
                                      "\n"
                                      R"({"id":"a","instruction":"q","response":"r"})"
                                      "\n");
    CHECK_THROWS_AS(load_dataset(dir.file("dup.jsonl")), Error);
}

TEST_CASE("quarantine lines carry the error") {
    TempDir dir;
    append_quarantine(dir.file("q.jsonl"), make_record("q1"), "UnresolvableLabel: nothing matched");
    append_quarantine(dir.file("q.jsonl"), make_record("q2"), "MissingGroundingDoc: absent");
    auto lines = split_lines(read_file(dir.file("q.jsonl")));
    REQUIRE(lines.size() == 2);
    auto j = nlohmann::json::parse(lines[0]);
    CHECK(j["id"] == "q1");
    CHECK(j["error"] == "UnresolvableLabel: nothing matched");
    CHECK(j.contains("instruction"));
}

TEST_CASE("taxonomy has exactly ten labels") {
    CHECK(all_taxonomy_labels().size() == 10);
    for (auto l : all_taxonomy_labels()) CHECK(taxonomy_from_string(to_string(l)) == l);
    CHECK_FALSE(taxonomy_from_string("Blockchain").has_value());
}

} // TEST_SUITE

TEST_SUITE("partition") {

TEST_CASE("no records gives an empty bucket per task") {
    std::vector<TaskSpec> tasks{make_task("a", {"S"}), make_task("b", {"S"})};
    auto p = partition({}, tasks);
    REQUIRE(p.size() == 2);
    CHECK(p["a"].empty());
    CHECK(p["b"].empty());
}

TEST_CASE("four records over two tasks") {
    std::vector<TaskSpec> tasks{make_task("a", {"S"}), make_task("b", {"S"})};
    std::vector<InstructionRecord> recs{make_record("1", "a"), make_record("2", "b"), make_record("3", "a"),
                                        make_record("4", "b")};
    auto p = partition(recs, tasks);
    CHECK(p["a"].size() == 2);
    CHECK(p["b"].size() == 2);
    CHECK(p["a"][0].id == "1");
    CHECK(p["a"][1].id == "3");
}

TEST_CASE("unknown label") {
    std::vector<TaskSpec> tasks{make_task("a", {"S"})};
    std::vector<InstructionRecord> recs{make_record("1", "a"), make_record("2", "nonexistent")};
    try {
        partition(recs, tasks);
        FAIL("expected UnknownTask");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_task);
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("conservation over random labelings") {
    std::vector<TaskSpec> tasks{make_task("a", {"S"}), make_task("b", {"S"}), make_task("c", {"S"})};
    Rng rng(99);
    for (int round = 0; round < 50; ++round) {
        std::size_t n = rng.below(40);
        std::vector<InstructionRecord> recs;
        for (std::size_t i = 0; i < n; ++i)
            recs.push_back(make_record(std::to_string(round) + "-" + std::to_string(i), tasks[rng.below(3)].name));
        auto p = partition(recs, tasks);
        std::set<std::string> seen;
        std::size_t total = 0;
        for (const auto& [name, bucket] : p) {
            total += bucket.size();
            for (const auto& r : bucket) {
                CHECK(r.task_name == name);
                CHECK(seen.insert(r.id).second);
            }
        }
        CHECK(total == n);
    }
}

} // TEST_SUITE

TEST_SUITE("classify") {

std::vector<TaskSpec> two_tasks() {
    return {make_task("sigma_rule_explanation", {"S"}, false, false, "Explain a Sigma rule."),
            make_task("cve_explanation", {"S"}, true, false, "Explain a CVE.")};
}

TEST_CASE("bare task name reply is assigned") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("classify", {"sigma_rule_explanation"});
    auto gw = make_gateway(model);
    auto tasks = two_tasks();
    auto r = make_record("1");
    CHECK(classify_record(r, tasks, *gw) == "sigma_rule_explanation");
    CHECK(r.task_name == "sigma_rule_explanation");
}

TEST_CASE("reply outside the registry twice is unresolvable") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("classify", {"malware_analysis", "still_not_a_task"});
    auto gw = make_gateway(model);
    auto tasks = two_tasks();
    auto r = make_record("1");
    try {
        classify_record(r, tasks, *gw);
        FAIL("expected UnresolvableLabel");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unresolvable_label);
    }
    CHECK(model->calls() == 2);
    CHECK(r.task_name.empty());
}

TEST_CASE("second answer after a bad first one is used") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("classify", {"I am not sure.", "TASK: cve_explanation"});
    auto gw = make_gateway(model);
    auto tasks = two_tasks();
    auto r = make_record("1");
    CHECK(classify_record(r, tasks, *gw) == "cve_explanation");
}

TEST_CASE("cycling replies over 100 records split 50/50") {
    auto model = std::make_shared<ScriptedModel>();
    std::vector<std::string> cycle;
    for (int i = 0; i < 100; ++i) cycle.push_back(i % 2 ? "cve_explanation" : "sigma_rule_explanation");
    model->on("classify", cycle);
    auto gw = make_gateway(model);
    auto tasks = two_tasks();
    std::vector<InstructionRecord> recs;
    for (int i = 0; i < 100; ++i) {
        auto r = make_record("r" + std::to_string(i), "", "Instruction number " + std::to_string(i));
        classify_record(r, tasks, *gw);
        recs.push_back(r);
    }
    auto p = partition(recs, tasks);
    CHECK(p["sigma_rule_explanation"].size() == 50);
    CHECK(p["cve_explanation"].size() == 50);
}

TEST_CASE("reply matching") {
    auto tasks = two_tasks();
    CHECK(match_task_reply("TASK: cve_explanation", tasks) == "cve_explanation");
    CHECK(match_task_reply("\"sigma_rule_explanation\"", tasks) == "sigma_rule_explanation");
    CHECK_FALSE(match_task_reply("web_app_pentest", tasks).has_value());
}

} // TEST_SUITE
