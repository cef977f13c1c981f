#include "support.hpp"

#include "enrichkit/enrichment.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace enrichkit;
using namespace testing;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::invalid_argument;
}

struct Rig {
    std::shared_ptr<ScriptedModel> model = std::make_shared<ScriptedModel>();
    std::shared_ptr<MockSearch> search = std::make_shared<MockSearch>();
    std::shared_ptr<MockFetcher> fetcher = std::make_shared<MockFetcher>();
    std::shared_ptr<Gateway> gw;

    Rig() {
        gw = make_gateway(model);
        gw->set_search_backend(SearchBackendKind::web, search);
        gw->set_search_backend(SearchBackendKind::vector_store, search);
        gw->set_fetcher(fetcher);
    }

    // Every locator in `locs` serves a short parseable page.
    void pages(const std::vector<std::string>& locs) {
        for (const auto& l : locs) fetcher->page(l, "Body of " + l + ".");
    }
};

} // namespace

TEST_SUITE("enrichment") {

TEST_CASE("defaults") {
    PipelineConfig cfg;
    CHECK(cfg.K == 2);
    CHECK(cfg.R_max == 8);
    CHECK(cfg.R == 2);
    CHECK(cfg.evidence_cap == 4);
    CHECK_FALSE(cfg.summarize);
    CHECK_NOTHROW(cfg.validate());
    cfg.R = 9;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.evidence_cap = 5;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("two lines become the two queries") {
    Rig rig;
    rig.model->on("enrich.queries", {"1. log4j jndi exploit\n2. CVE-2021-44228 mitigation"});
    auto q = build_queries("Explain Log4Shell.", {}, *rig.gw);
    REQUIRE(q.size() == 2);
    CHECK(q[0] == "log4j jndi exploit");
    CHECK(q[1] == "CVE-2021-44228 mitigation");
}

TEST_CASE("duplicate lines: one regeneration then keyword fallback") {
    Rig rig;
    rig.model->on("enrich.queries", {"log4j exploit\nlog4j exploit"});
    rig.model->on("enrich.queries_retry", {"Log4j Exploit"});
    auto q = build_queries("Explain the Log4Shell remote code execution flaw.", {}, *rig.gw);
    REQUIRE(q.size() == 2);
    CHECK(q[0] != q[1]);
    CHECK(to_lower(q[0]) == "log4j exploit");
    CHECK(rig.model->calls() == 2);
}

TEST_CASE("K=1 gives a single query") {
    Rig rig;
    rig.model->on("enrich.queries", {"alpha query\nbeta query"});
    PipelineConfig cfg;
    cfg.K = 1;
    cfg.evidence_cap = 2;
    auto q = build_queries("Explain.", cfg, *rig.gw);
    REQUIRE(q.size() == 1);
    CHECK(q[0] == "alpha query");
}

TEST_CASE("filter keeps the approved subset in order") {
    Rig rig;
    FormatTemplate f = make_task("t", {"A"}).format;
    std::vector<std::string> qs{"first", "second"};
    rig.model->on("enrich.filter", {"Only the first is useful.\nKEEP: 1"});
    CHECK(filter_queries("i", "r", f, qs, *rig.gw) == std::vector<std::string>{"first"});

    Rig none;
    none.model->on("enrich.filter", {"KEEP: none"});
    CHECK(filter_queries("i", "r", f, qs, *none.gw).empty());

    Rig both;
    both.model->on("enrich.filter", {"KEEP: 2, 1"});
    CHECK(filter_queries("i", "r", f, qs, *both.gw) == qs);
}

TEST_CASE("garbled filter verdict keeps everything") {
    Rig rig;
    FormatTemplate f = make_task("t", {"A"}).format;
    std::vector<std::string> qs{"first", "second"};
    rig.model->on("enrich.filter", {"I think both are, hmm"});
    CHECK(filter_queries("i", "r", f, qs, *rig.gw) == qs);
    Rig out_of_range;
    out_of_range.model->on("enrich.filter", {"KEEP: 3"});
    CHECK(filter_queries("i", "r", f, qs, *out_of_range.gw) == qs);
}

TEST_CASE("all parseable: two queries yield four docs") {
    Rig rig;
    rig.search->set("q1", {"a1", "a2", "a3", "a4"});
    rig.search->set("q2", {"b1", "b2", "b3"});
    rig.pages({"a1", "a2", "a3", "a4", "b1", "b2", "b3"});
    std::vector<std::string> qs{"q1", "q2"};
    auto docs = retrieve_evidence(qs, {}, *rig.gw);
    REQUIRE(docs.size() == 4);
    CHECK(docs[0].locator == "a1");
    CHECK(docs[1].locator == "a2");
    CHECK(docs[2].locator == "b1");
    CHECK(docs[3].locator == "b2");
    CHECK(docs[0].source_query == "q1");
    CHECK(docs[2].rank == 1);
}

TEST_CASE("blocked results are skipped until R parseable") {
    Rig rig;
    rig.search->set("q", {"x1", "x2", "x3", "x4", "x5", "x6"});
    rig.fetcher->page("x1", "Forbidden", 403);
    rig.fetcher->page("x2", "<html><body>Please enable JavaScript</body></html>", 200, "text/html");
    rig.fetcher->page("x3", "", 200);
    rig.pages({"x4", "x5", "x6"});
    std::vector<std::string> qs{"q"};
    auto docs = retrieve_evidence(qs, {}, *rig.gw);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].rank == 4);
    CHECK(docs[1].rank == 5);
    // The sixth result is never fetched.
    auto fetched = rig.fetcher->fetched();
    CHECK(std::find(fetched.begin(), fetched.end(), "x6") == fetched.end());
}

TEST_CASE("same top document for both queries dedups to three") {
    Rig rig;
    rig.search->set("q1", {"shared", "a2", "a3"});
    rig.search->set("q2", {"shared", "b2", "b3"});
    rig.pages({"shared", "a2", "a3", "b2", "b3"});
    std::vector<std::string> qs{"q1", "q2"};
    auto docs = retrieve_evidence(qs, {}, *rig.gw);
    REQUIRE(docs.size() == 3);
    CHECK(docs[0].locator == "shared");
    CHECK(docs[1].locator == "a2");
    CHECK(docs[2].locator == "b2");
}

TEST_CASE("backend outage propagates") {
    Rig rig;
    auto gw = make_gateway(rig.model);
    std::vector<std::string> qs{"q"};
    CHECK(code_of([&] { retrieve_evidence(qs, {}, *gw); }) == Errc::backend_unavailable);
}

TEST_CASE("summarization replaces text and falls back on failure") {
    Rig rig;
    std::string long_text;
    for (int i = 0; i < 10000; ++i) long_text += "word ";
    EvidenceDoc doc{"q", "loc", "t", 1, long_text, false};
    std::string summary;
    for (int i = 0; i < 200; ++i) summary += "s ";
    rig.model->on("enrich.summarize", {summary});
    FormatTemplate f = make_task("t", {"Root Cause", "Impact"}).format;
    auto out = summarize_doc(doc, f, *rig.gw);
    CHECK(approx_tokens(out.text) == 200);
    CHECK_FALSE(out.truncated);
    auto req = rig.model->requests().back();
    CHECK(req.user_prompt.find("Root Cause") != std::string::npos);
    CHECK(req.user_prompt.find("Impact") != std::string::npos);

    auto failing = make_gateway(std::make_shared<FunctionChatModel>([](const CompletionRequest&) -> std::string {
        throw Error(Errc::upstream_failure, "down", 500);
    }));
    auto kept = summarize_doc(doc, f, *failing);
    CHECK(kept.text == long_text);
}

TEST_CASE("summarization is off by default") {
    Rig rig;
    auto task = make_task("t", {"Overview", "Answer"}, true);
    rig.model->on("enrich.queries", {"q1\nq2"});
    rig.model->on("enrich.filter", {"KEEP: 1, 2"});
    rig.model->on("enrich.rewrite", {conforming_answer(task.format)});
    rig.search->set_default({"d1", "d2"});
    rig.pages({"d1", "d2"});
    enrich_record(make_record("r", "t"), task, {}, *rig.gw);
    for (const auto& req : rig.model->requests()) CHECK(req.tag != "enrich.summarize");
}

TEST_CASE("context layout and no truncation when everything fits") {
    auto rec = make_record("r", "t", "What is Heartbleed?", "An OpenSSL bug.");
    FormatTemplate f = make_task("t", {"Summary", "Impact"}).format;
    std::vector<EvidenceDoc> ev{{"q1", "l1", "", 1, "first evidence", false}, {"q2", "l2", "", 1, "second", false}};
    auto ctx = assemble_context(rec, f, ev, {});
    CHECK(ctx.text.find("Summary") < ctx.text.find("What is Heartbleed?"));
    CHECK(ctx.text.find("What is Heartbleed?") < ctx.text.find("An OpenSSL bug."));
    CHECK(ctx.text.find("An OpenSSL bug.") < ctx.text.find("first evidence"));
    CHECK(ctx.text.find("first evidence") < ctx.text.find("second"));
    for (const auto& d : ctx.evidence) CHECK_FALSE(d.truncated);
}

TEST_CASE("tail-first truncation cuts only the last document") {
    auto rec = make_record("r", "t", "Question?", "Answer.");
    FormatTemplate f = make_task("t", {"A"}).format;
    auto body = [](int n) {
        std::string s;
        for (int i = 0; i < n; ++i) s += "w ";
        return s;
    };
    std::vector<EvidenceDoc> ev;
    for (int i = 0; i < 4; ++i) ev.push_back({"q", "l" + std::to_string(i), "", i + 1, body(100), false});
    PipelineConfig big;
    big.context_budget_tokens = 100000;
    std::size_t full = approx_tokens(assemble_context(rec, f, ev, big).text);

    PipelineConfig cfg;
    cfg.context_budget_tokens = static_cast<int>(full) - 50;
    auto ctx = assemble_context(rec, f, ev, cfg);
    CHECK(approx_tokens(ctx.text) <= static_cast<std::size_t>(cfg.context_budget_tokens));
    CHECK_FALSE(ctx.evidence[0].truncated);
    CHECK_FALSE(ctx.evidence[1].truncated);
    CHECK_FALSE(ctx.evidence[2].truncated);
    CHECK(ctx.evidence[3].truncated);
    CHECK(ctx.text.find("Question?") != std::string::npos);
    CHECK(ctx.text.find("Answer.") != std::string::npos);
}

TEST_CASE("budget smaller than the fixed part") {
    auto rec = make_record("r", "t", "A fairly long instruction with many words in it.", "Answer.");
    FormatTemplate f = make_task("t", {"A"}).format;
    PipelineConfig cfg;
    cfg.context_budget_tokens = 5;
    CHECK(code_of([&] { assemble_context(rec, f, {}, cfg); }) == Errc::budget_too_small);
}

TEST_CASE("step heading check") {
    FormatTemplate f = make_task("t", {"Root Cause", "Impact"}).format;
    CHECK(missing_step_headings("### Root Cause\nx\n## 2. Impact:\ny", f).empty());
    CHECK(missing_step_headings("**Root Cause**\nx\n**impact**\ny", f).empty());
    CHECK(missing_step_headings("Root Cause is x. Impact is y.", f).size() == 2);
    CHECK(missing_step_headings("### Root Cause\nx", f) == std::vector<std::string>{"Impact"});
}

TEST_CASE("attached document mode has no evidence") {
    Rig rig;
    auto task = make_task("doc_qa", {"Passage", "Answer"}, false, true);
    rig.model->on("enrich.rewrite", {conforming_answer(task.format)});
    auto rec = make_record("r", "doc_qa");
    rec.grounding_doc = "The advisory says firmware 3.4 fixes the flaw.";
    auto out = enrich_record(rec, task, {}, *rig.gw);
    CHECK(out.grounding_mode == GroundingMode::attached_doc);
    CHECK(out.evidence.empty());
    CHECK(rig.search->calls() == 0);
    CHECK(rig.model->requests().back().user_prompt.find("firmware 3.4") != std::string::npos);
}

TEST_CASE("search mode runs every step and respects the cap") {
    Rig rig;
    auto task = make_task("cve", {"Summary", "Impact"}, true);
    rig.model->on("enrich.queries", {"q1\nq2"});
    rig.model->on("enrich.filter", {"KEEP: 1, 2"});
    rig.model->on("enrich.rewrite", {conforming_answer(task.format)});
    std::vector<std::string> many;
    for (int i = 0; i < 8; ++i) many.push_back("d" + std::to_string(i));
    rig.search->set("q1", many);
    rig.search->set("q2", {"e1", "e2", "e3"});
    rig.pages(many);
    rig.pages({"e1", "e2", "e3"});
    auto out = enrich_record(make_record("r", "cve"), task, {}, *rig.gw);
    CHECK(out.grounding_mode == GroundingMode::searched);
    CHECK(out.evidence.size() == 4);
    std::vector<std::string> tags;
    for (const auto& r : rig.model->requests()) tags.push_back(r.tag);
    CHECK(tags == std::vector<std::string>{"enrich.queries", "enrich.filter", "enrich.rewrite"});
    CHECK(out.format_version == 1);
    CHECK(out.format_name == "cve");
}

TEST_CASE("both flags put the document before the evidence") {
    Rig rig;
    auto task = make_task("t", {"A"}, true, true);
    rig.model->on("enrich.queries", {"q1\nq2"});
    rig.model->on("enrich.filter", {"KEEP: 1"});
    rig.model->on("enrich.rewrite", {conforming_answer(task.format)});
    rig.search->set_default({"d1"});
    rig.pages({"d1"});
    auto rec = make_record("r", "t");
    rec.grounding_doc = "ATTACHED DOCUMENT TEXT";
    auto out = enrich_record(rec, task, {}, *rig.gw);
    CHECK(out.grounding_mode == GroundingMode::both);
    const auto& prompt = rig.model->requests().back().user_prompt;
    CHECK(prompt.find("ATTACHED DOCUMENT TEXT") < prompt.find("Body of d1."));
}

TEST_CASE("no flags is a pure reformat") {
    Rig rig;
    auto task = make_task("t", {"A", "B"});
    rig.model->on("enrich.rewrite", {conforming_answer(task.format)});
    auto out = enrich_record(make_record("r", "t"), task, {}, *rig.gw);
    CHECK(out.grounding_mode == GroundingMode::none);
    CHECK(rig.model->calls() == 1);
}

TEST_CASE("missing grounding document") {
    Rig rig;
    auto task = make_task("doc_qa", {"A"}, false, true);
    CHECK(code_of([&] { enrich_record(make_record("r", "doc_qa"), task, {}, *rig.gw); }) == Errc::missing_grounding_doc);
}

TEST_CASE("missing headings: one re-ask, then quarantine") {
    auto task = make_task("t", {"Alpha", "Beta"});
    Rig fixed;
    fixed.model->on("enrich.rewrite", {"### Alpha\nonly one", conforming_answer(task.format)});
    auto out = enrich_record(make_record("r", "t"), task, {}, *fixed.gw);
    CHECK(missing_step_headings(out.rewritten_response, task.format).empty());
    CHECK(fixed.model->requests().back().user_prompt.find("Beta") != std::string::npos);

    Rig broken;
    broken.model->on("enrich.rewrite", {"no headings", "still none"});
    CHECK(code_of([&] { enrich_record(make_record("r", "t"), task, {}, *broken.gw); }) == Errc::step_coverage);
    CHECK(broken.model->calls() == 2);
}

TEST_CASE("enrich_all keeps input order and quarantines failures") {
    auto task = make_task("t", {"A"});
    auto doc_task = make_task("d", {"A"}, false, true);
    auto model = std::make_shared<FunctionChatModel>([&](const CompletionRequest&) { return std::string("### A\nok"); });
    auto gw = make_gateway(model);
    std::vector<InstructionRecord> recs;
    for (int i = 0; i < 30; ++i)
        recs.push_back(make_record("r" + std::to_string(i), i % 7 == 3 ? "d" : "t", "Instruction " + std::to_string(i)));
    TaskLookup lookup = [&](const std::string& n) { return n == "d" ? doc_task : task; };
    auto out = enrich_all(recs, lookup, {}, *gw, 4);
    REQUIRE(out.size() == 30);
    for (int i = 0; i < 30; ++i) {
        CHECK(out[i].base.id == "r" + std::to_string(i));
        if (i % 7 == 3) {
            CHECK_FALSE(out[i].result);
            CHECK(out[i].error.rfind("MissingGroundingDoc:", 0) == 0);
        } else {
            CHECK(out[i].result);
        }
    }
}

TEST_CASE("enriched file round trip with evidence sidecar") {
    TempDir dir;
    auto rec = make_record("r1", "cve", "What is CVE-1?", "A bug.");
    EnrichedRecord e;
    e.base_id = "r1";
    e.rewritten_response = "### Summary\nDetails";
    e.format_name = "cve";
    e.format_version = 2;
    e.grounding_mode = GroundingMode::searched;
    e.evidence = {{"q1", "https://a", "A", 1, "alpha text", false}, {"q2", "https://b", "B", 3, "beta text", true}};
    std::vector<EnrichmentOutcome> outcomes{{rec, e, ""}, {make_record("r2", "cve"), std::nullopt, "StepCoverage: x"}};
    write_enriched(dir.file("e.jsonl"), outcomes);

    auto line = nlohmann::json::parse(split_lines(read_file(dir.file("e.jsonl")))[0]);
    CHECK(line["origin"] == "enriched");
    CHECK(line["meta"]["format_version"] == "2");
    CHECK(line["enriched_response"] == "### Summary\nDetails");
    CHECK(line["response"] == "A bug.");
    CHECK(line["format"]["name"] == "cve");
    CHECK(line["evidence"][1]["rank"] == 3);
    CHECK(line["evidence"][1]["truncated"] == true);
    CHECK_FALSE(line["evidence"][0].contains("text"));
    CHECK(std::filesystem::exists(dir.file("e.jsonl.evidence/" + sha256_hex("alpha text") + ".txt")));

    auto back = load_enriched(dir.file("e.jsonl"));
    REQUIRE(back.size() == 1);
    CHECK(back[0].base.id == "r1");
    CHECK(back[0].base.response == "A bug.");
    CHECK(back[0].enriched.evidence == e.evidence);
    CHECK(back[0].enriched.grounding_mode == GroundingMode::searched);
}

} // TEST_SUITE
