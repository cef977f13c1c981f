#include "support.hpp"

#include "enrichkit/error.hpp"
#include "enrichkit/eval.hpp"
#include "enrichkit/util.hpp"

#include <doctest.h>

using namespace enrichkit;
using namespace testing;
using json = nlohmann::json;

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

BenchmarkItem mcq(const std::string& id, const std::string& gold) {
    return benchmark_item_from_json(
        {{"id", id}, {"kind", "mcq_single"}, {"question", "Q " + id}, {"options", {{"A", "a"}, {"B", "b"}, {"C", "c"}, {"D", "d"}}}, {"answer", gold}});
}

Prediction pred(const std::string& id, const std::string& completion, BenchmarkKind kind) {
    Prediction p;
    p.item_id = id;
    p.raw_completion = completion;
    p.extracted = extract_answer(completion, kind);
    p.parse_ok = p.extracted.has_value();
    return p;
}

} // namespace

TEST_SUITE("eval") {

TEST_CASE("loading a four-item MCQ file") {
    TempDir dir;
    std::string body;
    for (int i = 0; i < 4; ++i) body += to_json(mcq("m" + std::to_string(i), "B")).dump() + "\n";
    write_file(dir.file("mcq.jsonl"), body);
    auto items = load_benchmark(dir.file("mcq.jsonl"));
    REQUIRE(items.size() == 4);
    for (const auto& it : items) CHECK(it.kind == BenchmarkKind::mcq_single);
}

TEST_CASE("RCM item with a CWE gold") {
    auto item = benchmark_item_from_json({{"id", "r1"}, {"kind", "rcm_mapping"},
                                          {"question", "User input rendered without encoding."}, {"answer", "CWE-79"}});
    CHECK(item.kind == BenchmarkKind::rcm_mapping);
    CHECK(item.gold == Answer{"CWE-79"});
}

TEST_CASE("malformed items") {
    CHECK(code_of([] { benchmark_item_from_json({{"id", "x"}, {"kind", "mcq_single"}, {"question", "Q"}, {"answer", "A"}}); }) ==
          Errc::malformed_item);
    CHECK(code_of([] {
              benchmark_item_from_json({{"id", "x"}, {"kind", "mcq_single"}, {"question", "Q"},
                                        {"options", {{"A", "a"}, {"B", "b"}}}, {"answer", "C"}});
          }) == Errc::malformed_item);
    CHECK(code_of([] {
              benchmark_item_from_json({{"id", "x"}, {"kind", "impact_multilabel"}, {"question", "Q"},
                                        {"answer", "Summon Dragons"}});
          }) == Errc::malformed_item);
    CHECK(code_of([] { benchmark_item_from_json({{"id", "x"}, {"kind", "essay"}, {"question", "Q"}, {"answer", "A"}}); }) ==
          Errc::malformed_item);
    CHECK(code_of([] { benchmark_kind_from_string("essay"); }) == Errc::unknown_kind);
}

TEST_CASE("shipped benchmark fixture loads") {
    auto items = load_benchmark(ENRICHKIT_DATA_DIR "/fixtures/benchmark.jsonl");
    std::set<BenchmarkKind> kinds;
    for (const auto& i : items) kinds.insert(i.kind);
    CHECK(kinds.size() == 5);
}

TEST_CASE("prompt rendering") {
    auto tmpl = EvalPromptTemplate::builtin();
    auto item = mcq("m", "A");
    auto p = render_prompt(item, tmpl);
    CHECK(p.find("<EXPL>") == std::string::npos);
    CHECK(p.find(tmpl.explanations.at(BenchmarkKind::mcq_single)) != std::string::npos);
    std::string tail = final_answer_instruction(BenchmarkKind::mcq_single);
    CHECK(p.size() >= tail.size());
    CHECK(p.compare(p.size() - tail.size(), tail.size(), tail) == 0);
    CHECK(p.find("A. a\nB. b") != std::string::npos);
    CHECK(render_prompt(item, tmpl) == p);

    auto impact = benchmark_item_from_json({{"id", "i"}, {"kind", "impact_multilabel"}, {"question", "CWE-787"},
                                            {"answer", {"Modify Data"}}});
    auto ip = render_prompt(impact, tmpl);
    CHECK(technical_impacts().size() == 8);
    for (const auto& name : technical_impacts()) CHECK(ip.find(name) != std::string::npos);
}

TEST_CASE("templates must contain the placeholder once") {
    CHECK_THROWS_AS(EvalPromptTemplate::parse("[scaffold]\nThink step by step."), Error);
    CHECK_THROWS_AS(EvalPromptTemplate::parse("[scaffold]\n<EXPL> and <EXPL>"), Error);
    auto t = EvalPromptTemplate::parse("[scaffold]\nBe careful.\n<EXPL>\n[expl.rcm_mapping]\nFind the CWE.");
    CHECK(t.explanations.at(BenchmarkKind::rcm_mapping) == "Find the CWE.");
    CHECK(t.explanations.at(BenchmarkKind::mcq_single) == EvalPromptTemplate::builtin().explanations.at(BenchmarkKind::mcq_single));
    auto shipped = EvalPromptTemplate::load(ENRICHKIT_DATA_DIR "/eval/template.txt");
    CHECK_NOTHROW(shipped.validate());
}

TEST_CASE("answer extraction") {
    CHECK(extract_answer("...reasoning... ANSWER: B", BenchmarkKind::mcq_single) == Answer{"B"});
    CHECK(extract_answer("ANSWER: CWE-79 ... ANSWER: CWE-89", BenchmarkKind::rcm_mapping) == Answer{"CWE-89"});
    CHECK_FALSE(extract_answer("I think it is B.", BenchmarkKind::mcq_single).has_value());
    CHECK(extract_answer("Answer: a, c", BenchmarkKind::mcq_multi) == Answer{"A", "C"});
    CHECK(extract_answer("ANSWER: (B)", BenchmarkKind::relationship_binary) == Answer{"B"});
    CHECK(extract_answer("ANSWER: read data, MODIFY DATA", BenchmarkKind::impact_multilabel) ==
          Answer{"Read Data", "Modify Data"});
    CHECK(extract_answer("ANSWER: cwe 119", BenchmarkKind::rcm_mapping) == Answer{"CWE-119"});
    CHECK_FALSE(extract_answer("ANSWER: A, B", BenchmarkKind::mcq_single).has_value());
    auto once = extract_answer("x\nANSWER: D", BenchmarkKind::mcq_single);
    CHECK(extract_answer("x\nANSWER: D", BenchmarkKind::mcq_single) == once);
}

TEST_CASE("scoring arithmetic") {
    std::vector<BenchmarkItem> items{mcq("1", "A"), mcq("2", "B"), mcq("3", "C"), mcq("4", "D")};
    std::vector<Prediction> preds{pred("1", "ANSWER: A", BenchmarkKind::mcq_single),
                                  pred("2", "ANSWER: B", BenchmarkKind::mcq_single),
                                  pred("3", "ANSWER: C", BenchmarkKind::mcq_single),
                                  pred("4", "ANSWER: A", BenchmarkKind::mcq_single)};
    auto r = score(items, preds, "mcq");
    CHECK(r.accuracy == 0.75);
    CHECK(r.correct == 3);

    std::vector<Prediction> reversed(preds.rbegin(), preds.rend());
    std::vector<BenchmarkItem> shuffled{items[2], items[0], items[3], items[1]};
    CHECK(score(shuffled, reversed).accuracy == 0.75);

    std::vector<Prediction> partial{preds[0]};
    auto missing = score(items, partial);
    CHECK(missing.missing == 3);
    CHECK(missing.accuracy == 0.25);
}

TEST_CASE("strict set match with Jaccard alongside") {
    auto item = benchmark_item_from_json({{"id", "i"}, {"kind", "impact_multilabel"}, {"question", "q"},
                                          {"answer", {"Modify Data", "Read Data"}}});
    std::vector<BenchmarkItem> items{item};
    std::vector<Prediction> preds{pred("i", "ANSWER: Read Data", BenchmarkKind::impact_multilabel)};
    auto r = score(items, preds);
    CHECK(r.accuracy == 0.0);
    CHECK(r.mean_jaccard == 0.5);
}

TEST_CASE("parse failures and quarantines are counted apart") {
    std::vector<BenchmarkItem> items{mcq("1", "A"), mcq("2", "B"), mcq("3", "C")};
    Prediction q;
    q.item_id = "3";
    q.error = "UpstreamFailure: down";
    std::vector<Prediction> preds{pred("1", "ANSWER: A", BenchmarkKind::mcq_single),
                                  pred("2", "no marker", BenchmarkKind::mcq_single), q};
    auto r = score(items, preds);
    CHECK(r.correct == 1);
    CHECK(r.parse_failures == 1);
    CHECK(r.quarantined == 1);
    CHECK(r.coverage == doctest::Approx(2.0 / 3.0));
    auto j = to_json(r);
    CHECK(j["parse_failures"] == 1);
    CHECK(render_eval_table(r).find("parse failures 1") != std::string::npos);
}

TEST_CASE("run_model uses temperature zero and one call per item") {
    std::vector<BenchmarkItem> items{mcq("1", "A"), mcq("2", "B")};
    std::atomic<int> calls{0};
    auto model = std::make_shared<FunctionChatModel>([&](const CompletionRequest& req) {
        ++calls;
        CHECK(req.temperature == 0.0);
        CHECK(req.tag.rfind("eval:", 0) == 0);
        return std::string("Reasoning.\nANSWER: A");
    });
    auto gw = make_gateway(model);
    auto preds = run_model(items, EvalPromptTemplate::builtin(), *gw);
    CHECK(calls == 2);
    CHECK(preds[0].parse_ok);
    CHECK(preds[1].extracted == Answer{"A"});
}

TEST_CASE("endpoint down: everything quarantined") {
    std::vector<BenchmarkItem> items{mcq("1", "A"), mcq("2", "B")};
    auto down = make_gateway(std::make_shared<FunctionChatModel>([](const CompletionRequest&) -> std::string {
        throw Error(Errc::upstream_failure, "connection refused", 0);
    }));
    auto preds = run_model(items, EvalPromptTemplate::builtin(), *down);
    auto r = score(items, preds);
    CHECK(r.quarantined == 2);
    CHECK(r.coverage == 0.0);
}

TEST_CASE("replayed runs give identical completions") {
    TempDir dir;
    std::vector<BenchmarkItem> items{mcq("1", "A"), mcq("2", "B")};
    auto first = make_gateway(make_oracle_model(items, "gold"), CacheMode::record, dir.file("c.jsonl"));
    auto a = run_model(items, EvalPromptTemplate::builtin(), *first);
    auto replay = make_gateway(nullptr, CacheMode::replay_strict, dir.file("c.jsonl"));
    auto b = run_model(items, EvalPromptTemplate::builtin(), *replay);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].raw_completion == b[i].raw_completion);
}

TEST_CASE("oracles") {
    std::vector<BenchmarkItem> items;
    for (int i = 0; i < 40; ++i) items.push_back(mcq("m" + std::to_string(i), std::string(1, "ABCD"[i % 4])));
    auto gw = make_gateway(make_oracle_model(items, "gold"));
    CHECK(score(items, run_model(items, EvalPromptTemplate::builtin(), *gw)).accuracy == 1.0);
    auto gc = make_gateway(make_oracle_model(items, "corrupt:0.25", 3));
    CHECK(score(items, run_model(items, EvalPromptTemplate::builtin(), *gc)).accuracy == 0.75);
    auto gp = make_gateway(make_oracle_model(items, "parsefail:0.1", 3));
    auto rp = score(items, run_model(items, EvalPromptTemplate::builtin(), *gp));
    CHECK(rp.parse_failures == 4);
    CHECK(rp.accuracy == 0.9);
    CHECK(oracle_mask(items, 0.25, 3).size() == 10);
    CHECK(oracle_mask(items, 0.25, 3) == oracle_mask(items, 0.25, 3));
    CHECK_THROWS_AS(make_oracle_model(items, "psychic"), Error);
}

TEST_CASE("taxonomy replies") {
    CHECK(parse_taxonomy_reply("AppSec, ThreatOps_IR") == LabelSet{TaxonomyLabel::AppSec, TaxonomyLabel::ThreatOps_IR});
    CHECK(parse_taxonomy_reply("Reasoning...\nCATEGORIES: CryptoSec") == LabelSet{TaxonomyLabel::CryptoSec});
    CHECK(parse_taxonomy_reply("lorem ipsum") == LabelSet{TaxonomyLabel::Other});
    CHECK(parse_taxonomy_reply("AppSec, Quantum") == LabelSet{TaxonomyLabel::AppSec});
}

TEST_CASE("taxonomy classification through the gateway") {
    auto model = std::make_shared<ScriptedModel>();
    model->on("taxonomy", {"CATEGORIES: NetSec, SecOps"});
    auto gw = make_gateway(model);
    auto labels = classify_taxonomy(mcq("m", "A"), *gw);
    CHECK(labels == LabelSet{TaxonomyLabel::NetSec, TaxonomyLabel::SecOps});
    auto prompt = model->requests()[0].user_prompt;
    for (auto l : all_taxonomy_labels()) CHECK(prompt.find(std::string(to_string(l))) != std::string::npos);
}

TEST_CASE("agreement percentages") {
    std::vector<ExternalLabeled> items;
    for (int i = 0; i < 200; ++i)
        items.push_back({"NetworkSecurity", i < 167 ? LabelSet{TaxonomyLabel::NetSec} : LabelSet{TaxonomyLabel::AppSec}});
    for (int i = 0; i < 10; ++i) items.push_back({"Cryptography", {TaxonomyLabel::CryptoSec, TaxonomyLabel::AppSec}});
    for (int i = 0; i < 5; ++i) items.push_back({"WebSecurity", {TaxonomyLabel::NetSec}});
    auto rows = validate_taxonomy_agreement(items);
    CHECK(rows["NetworkSecurity"].percent == 83.5);
    CHECK(rows["Cryptography"].percent == 100.0);
    CHECK(rows["WebSecurity"].percent == 0.0);
    CHECK_FALSE(rows["MemorySafety"].percent.has_value());
    CHECK(rows["MemorySafety"].items == 0);
}

TEST_CASE("per-taxonomy accuracy rows") {
    auto a = mcq("1", "A");
    a.taxonomy = LabelSet{TaxonomyLabel::CryptoSec, TaxonomyLabel::AppSec};
    auto b = mcq("2", "B");
    b.taxonomy = LabelSet{TaxonomyLabel::AppSec};
    std::vector<BenchmarkItem> items{a, b};
    std::vector<Prediction> preds{pred("1", "ANSWER: A", BenchmarkKind::mcq_single),
                                  pred("2", "ANSWER: C", BenchmarkKind::mcq_single)};
    auto r = score(items, preds);
    CHECK(r.per_taxonomy["CryptoSec"].accuracy == 1.0);
    CHECK(r.per_taxonomy["AppSec"].total == 2);
    CHECK(r.per_taxonomy["AppSec"].accuracy == 0.5);
}

} // TEST_SUITE
