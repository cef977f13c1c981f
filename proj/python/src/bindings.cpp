#include "enrichkit/assembly.hpp"
#include "enrichkit/config.hpp"
#include "enrichkit/enrichment.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/eval.hpp"
#include "enrichkit/judge.hpp"
#include "enrichkit/service.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <spdlog/spdlog.h>

namespace py = pybind11;
using json = nlohmann::json;
using namespace enrichkit;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
class Session {
public:
    Session(const std::string& config_text, const std::vector<std::string>& overrides) {
        Config cfg = Config::parse(config_text);
        for (const auto& o : overrides) cfg.set_assignment(o);
        rt_ = Runtime::build(cfg);
    }

    std::string config() const { return rt_->config.to_json().dump(); }

    std::string enrich(const std::string& records_json, int workers) {
        std::vector<InstructionRecord> records;
        for (const auto& j : json::parse(records_json)) records.push_back(record_from_json(j));
        auto registry = rt_->registry;
        std::vector<EnrichmentOutcome> outcomes;
        {
            py::gil_scoped_release release;
            outcomes = enrich_all(
                records, [&](const std::string& name) { return registry->load(name); }, rt_->pipeline, *rt_->gateway,
                workers > 0 ? workers : rt_->workers, *rt_->prompts);
        }
        json out = json::array();
        for (const auto& o : outcomes) {
            if (o.result) out.push_back(enriched_to_json(o.base, *o.result));
            else out.push_back({{"id", o.base.id}, {"error", o.error}});
        }
        return out.dump();
    }

    std::string judge(const std::string& inputs_json, int workers) {
        std::vector<JudgeInput> inputs;
        for (const auto& j : json::parse(inputs_json))
            inputs.push_back({j.at("record_id").get<std::string>(), j.value("task", std::string{}),
                              j.at("instruction").get<std::string>(), j.at("original").get<std::string>(),
                              j.at("rewritten").get<std::string>()});
        std::vector<JudgedRecord> judged;
        {
            py::gil_scoped_release release;
            judged = judge_all(inputs, *rt_->gateway, rt_->judge, workers > 0 ? workers : rt_->workers);
        }
        json out = json::array();
        for (const auto& r : judged) out.push_back(to_json(r));
        return out.dump();
    }

    void load_records(const std::string& records_json) {
        std::vector<InstructionRecord> records;
        for (const auto& j : json::parse(records_json)) records.push_back(record_from_json(j));
        service_ = std::make_unique<WorkbenchService>(*rt_, std::move(records));
    }

    std::pair<int, std::string> handle(const std::string& method, const std::string& path, const std::string& body,
                                       const std::map<std::string, std::string>& query) {
        if (!service_) service_ = std::make_unique<WorkbenchService>(*rt_, std::vector<InstructionRecord>{});
        HttpReply reply;
        {
            py::gil_scoped_release release;
            reply = service_->handle(method, path, body, query);
        }
        return {reply.status, reply.body.dump()};
    }

private:
    std::unique_ptr<Runtime> rt_;
    std::unique_ptr<WorkbenchService> service_;
};

std::string combine(const std::string& order1, const std::string& order2, bool strict) {
    return std::string(to_string(combine_readability(decision_from_string(order1), decision_from_string(order2), strict)));
}

std::string grounded(const std::string& order1, const std::string& order2, bool strict) {
    auto d1 = decision_from_string(order1), d2 = decision_from_string(order2);
    auto p1 = score_permutation(d1, true), p2 = score_permutation(d2, false);
    return json{{"final", std::string(to_string(combine_grounded(d1, d2, strict)))},
                {"points_A", p1.points_A + p2.points_A},
                {"points_B", p1.points_B + p2.points_B}}
        .dump();
}

std::string aggregate(const std::string& verdicts_json) {
    std::vector<JudgedRecord> recs;
    for (const auto& j : json::parse(verdicts_json)) recs.push_back(judged_from_json(j));
    auto report = aggregate_quality(recs);
    json j = to_json(report);
    j["table"] = render_quality_table(report);
    return j.dump();
}

std::optional<std::vector<std::string>> extract(const std::string& completion, const std::string& kind) {
    auto a = extract_answer(completion, benchmark_kind_from_string(kind));
    if (!a) return std::nullopt;
    return std::vector<std::string>(a->begin(), a->end());
}

std::string evaluate(const std::string& items_json, const std::string& oracle, std::uint64_t seed) {
    std::vector<BenchmarkItem> items;
    for (const auto& j : json::parse(items_json)) items.push_back(benchmark_item_from_json(j));
    Gateway gw(make_oracle_model(items, oracle, seed), std::make_shared<ReplayCache>(CacheMode::passthrough));
    auto report = score(items, run_model(items, EvalPromptTemplate::builtin(), gw));
    return to_json(report).dump();
}

std::string agreement(const std::string& items_json) {
    std::vector<ExternalLabeled> items;
    for (const auto& j : json::parse(items_json)) {
        ExternalLabeled e;
        e.external_category = j.at("category").get<std::string>();
        for (const auto& l : j.at("labels")) {
            auto label = taxonomy_from_string(l.get<std::string>());
            if (!label) throw Error(Errc::invalid_argument, "unknown taxonomy label " + l.get<std::string>());
            e.ours.insert(*label);
        }
        items.push_back(std::move(e));
    }
    json out = json::object();
    for (const auto& [cat, row] : validate_taxonomy_agreement(items))
        out[cat] = {{"items", row.items}, {"matched", row.matched},
                    {"percent", row.percent ? json(*row.percent) : json(nullptr)}};
    return out.dump();
}

std::string fast_subset(const std::string& records_json, const std::string& scores_json, const std::string& plan_json) {
    std::vector<InstructionRecord> records;
    for (const auto& j : json::parse(records_json)) records.push_back(record_from_json(j));
    auto scores = json::parse(scores_json).get<std::map<std::string, int>>();
    MixPlan plan = mix_plan_from_json(json::parse(plan_json));
    auto fast = select_fast_subset(records, plan, scores);
    json ids = json::array();
    for (const auto& r : fast.records) ids.push_back(r.id);
    return json{{"ids", ids}, {"target", fast.target}, {"insufficient", fast.insufficient}}.dump();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the enrichkit toolkit";
    spdlog::set_level(spdlog::level::warn);

    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
    error_type.call_once_and_store_result([&]() { return py::exception<Error>(m, "EnrichkitError"); });
    // The message is the same JSON error body the CLI and service emit.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error_type.get_stored(), error_body(e).dump().c_str());
        }
    });

    py::class_<Session>(m, "Session")
        .def(py::init<const std::string&, const std::vector<std::string>&>(), py::arg("config_text") = "",
             py::arg("overrides") = std::vector<std::string>{})
        .def("config", &Session::config)
        .def("enrich", &Session::enrich, py::arg("records_json"), py::arg("workers") = 0)
        .def("judge", &Session::judge, py::arg("inputs_json"), py::arg("workers") = 0)
        .def("load_records", &Session::load_records)
        .def("handle", &Session::handle, py::arg("method"), py::arg("path"), py::arg("body") = "",
             py::arg("query") = std::map<std::string, std::string>{});

    m.def("combine_readability", &combine, py::arg("order1"), py::arg("order2"), py::arg("strict") = false);
    m.def("grounded_outcome", &grounded, py::arg("order1"), py::arg("order2"), py::arg("strict") = false);
    m.def("aggregate_quality", &aggregate);
    m.def("extract_answer", &extract);
    m.def("evaluate", &evaluate, py::arg("items_json"), py::arg("oracle"), py::arg("seed") = 0);
    m.def("taxonomy_agreement", &agreement);
    m.def("fast_subset", &fast_subset);
}
