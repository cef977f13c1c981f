// enrichkit command line: one subcommand per pipeline stage.

#include "enrichkit/assembly.hpp"
#include "enrichkit/classify.hpp"
#include "enrichkit/config.hpp"
#include "enrichkit/enrichment.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/eval.hpp"
#include "enrichkit/judge.hpp"
#include "enrichkit/record.hpp"
#include "enrichkit/service.hpp"
#include "enrichkit/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <iostream>

using namespace enrichkit;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string log_level = "warn";
};

Config load_config(const Globals& g) {
    Config c = g.config_path.empty() ? Config{} : Config::load(g.config_path);
    for (const auto& o : g.overrides) c.set_assignment(o);
    return c;
}

void check_distinct(const std::string& in, const std::string& out) {
    std::error_code ec;
    if (!in.empty() && fs::exists(in) && fs::exists(out) && fs::equivalent(in, out, ec))
        throw Error(Errc::invalid_argument, "output " + out + " would overwrite input " + in);
}

json run_manifest(const std::string& command, const Runtime& rt, json counts, json inputs) {
    return {{"command", command},
            {"config", rt.config.to_json()},
            {"cache_mode", std::string(to_string(rt.cache->mode()))},
            {"seeds",
             {{"model", rt.config.get_u64("model.seed")},
              {"mix", rt.mix.seed},
              {"workbench", rt.workbench.sampling_seed}}},
            {"inputs", std::move(inputs)},
            {"counts", std::move(counts)}};
}

void write_manifest(const std::string& out, const json& manifest) {
    write_file(out + ".manifest.json", manifest.dump(2) + "\n");
}

std::map<std::string, TaskFlags> task_flags(const Runtime& rt) {
    std::map<std::string, TaskFlags> flags;
    for (const auto& t : rt.registry->current()) flags[t.name] = {t.requires_search, t.requires_grounding_doc};
    return flags;
}

int cmd_ingest(const Globals& g, const std::string& in, const std::string& out) {
    check_distinct(in, out);
    auto rt = Runtime::build(load_config(g));
    auto ds = load_dataset(in);
    persist_dataset(ds.records, out);
    write_manifest(out, run_manifest("ingest", *rt, {{"records", ds.records.size()}}, {{"in", in}}));
    std::cout << ds.records.size() << " records written to " << out << "\n";
    return 0;
}

int cmd_classify(const Globals& g, const std::string& in, const std::string& out, std::string quarantine) {
    check_distinct(in, out);
    auto rt = Runtime::build(load_config(g));
    auto ds = load_dataset(in);
    auto tasks = rt->registry->current();
    if (quarantine.empty()) quarantine = out + ".quarantine.jsonl";
    fs::remove(quarantine);

    std::vector<InstructionRecord> done(ds.records.size());
    std::vector<std::string> errors(ds.records.size());
    ClassifyOptions opts;
    opts.model_id = rt->pipeline.model_id;
    opts.prompts = rt->prompts.get();
    parallel_for(ds.records.size(), rt->workers, [&](std::size_t i) {
        InstructionRecord r = ds.records[i];
        try {
            if (r.task_name.empty()) classify_record(r, tasks, *rt->gateway, opts);
            else if (!rt->registry->contains(r.task_name))
                throw Error(Errc::unknown_task, "record " + r.id + " is labeled with unregistered task '" + r.task_name + "'");
        } catch (const Error& e) {
            errors[i] = std::string(to_string(e.code())) + ": " + e.what();
        }
        done[i] = std::move(r);
    });
    std::vector<InstructionRecord> labeled;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < done.size(); ++i) {
        if (errors[i].empty()) {
            labeled.push_back(done[i]);
        } else {
            append_quarantine(quarantine, done[i], errors[i]);
            ++bad;
        }
    }
    persist_dataset(labeled, out);
    auto parts = partition(labeled, tasks);
    json sizes = json::object();
    for (const auto& [name, recs] : parts) sizes[name] = recs.size();
    write_manifest(out, run_manifest("classify", *rt,
                                     {{"records", ds.records.size()}, {"labeled", labeled.size()}, {"quarantined", bad},
                                      {"per_task", sizes}},
                                     {{"in", in}}));
    std::cout << labeled.size() << " labeled, " << bad << " quarantined\n";
    return 0;
}

int cmd_enrich(const Globals& g, const std::string& in, const std::string& out, std::string quarantine, int workers) {
    check_distinct(in, out);
    auto rt = Runtime::build(load_config(g));
    if (workers > 0) rt->workers = workers;
    auto ds = load_dataset(in);
    auto registry = rt->registry;
    auto outcomes = enrich_all(
        ds.records, [&](const std::string& name) { return registry->load(name); }, rt->pipeline, *rt->gateway,
        rt->workers, *rt->prompts);
    write_enriched(out, outcomes);

    if (quarantine.empty()) quarantine = out + ".quarantine.jsonl";
    fs::remove(quarantine);
    std::size_t ok = 0, bad = 0, evidence = 0;
    json modes = json::object();
    for (const auto& o : outcomes) {
        if (o.result) {
            ++ok;
            evidence += o.result->evidence.size();
            std::string m(to_string(o.result->grounding_mode));
            modes[m] = modes.value(m, 0) + 1;
        } else {
            append_quarantine(quarantine, o.base, o.error);
            ++bad;
        }
    }
    json pipeline{{"K", rt->pipeline.K},
                  {"R_max", rt->pipeline.R_max},
                  {"R", rt->pipeline.R},
                  {"summarize", rt->pipeline.summarize},
                  {"evidence_cap", rt->pipeline.evidence_cap},
                  {"context_budget_tokens", rt->pipeline.context_budget_tokens}};
    auto manifest = run_manifest("enrich", *rt,
                                 {{"records", ds.records.size()}, {"enriched", ok}, {"quarantined", bad},
                                  {"evidence_docs", evidence}, {"grounding_modes", modes},
                                  {"upstream_calls", rt->gateway->upstream_calls()}},
                                 {{"in", in}});
    manifest["pipeline"] = pipeline;
    write_manifest(out, manifest);
    std::cout << ok << " enriched, " << bad << " quarantined\n";
    return 0;
}

int cmd_judge(const Globals& g, const std::string& in, const std::string& out, std::string report_path, int workers) {
    check_distinct(in, out);
    auto rt = Runtime::build(load_config(g));
    if (workers > 0) rt->workers = workers;
    auto lines = load_enriched(in);
    std::vector<JudgeInput> inputs;
    for (const auto& l : lines)
        inputs.push_back({l.base.id, l.base.task_name, l.base.instruction, l.base.response, l.enriched.rewritten_response});
    auto judged = judge_all(inputs, *rt->gateway, rt->judge, rt->workers);
    write_verdicts(out, judged);

    std::size_t failed = 0;
    for (const auto& j : judged) failed += !j.error.empty();
    if (report_path.empty()) report_path = out + ".report.json";
    json report_json = nullptr;
    if (judged.size() > failed) {
        auto report = aggregate_quality(judged);
        report_json = to_json(report);
        write_file(report_path, report_json.dump(2) + "\n");
        std::cout << render_quality_table(report, task_flags(*rt));
    }
    write_manifest(out, run_manifest("judge", *rt,
                                     {{"records", judged.size()}, {"judged", judged.size() - failed}, {"judge_failed", failed},
                                      {"upstream_calls", rt->gateway->upstream_calls()}},
                                     {{"in", in}, {"strict", rt->judge.strict}}));
    if (failed) std::cout << failed << " record(s) could not be judged; they keep their original answer\n";
    return 0;
}

int cmd_assemble(const Globals& g, const std::string& seed, const std::string& enriched, const std::string& verdicts,
                 const std::string& out, const std::string& val_out, const std::string& scores_path) {
    check_distinct(seed, out);
    check_distinct(enriched, out);
    auto rt = Runtime::build(load_config(g));
    auto seed_ds = load_dataset(seed);
    auto lines = enriched.empty() ? std::vector<EnrichedLine>{} : load_enriched(enriched);
    auto judged = verdicts.empty() ? std::vector<JudgedRecord>{} : load_verdicts(verdicts);
    std::map<std::string, int> scores;
    if (!scores_path.empty()) {
        try {
            scores = json::parse(read_file(scores_path)).get<std::map<std::string, int>>();
        } catch (const json::exception& e) {
            throw Error(Errc::malformed_line, scores_path + ": " + e.what());
        }
    }
    Gateway& gw = *rt->gateway;
    JudgeOptions jopts = rt->judge;
    SeedScorer scorer = [&](const InstructionRecord& r) { return judge_seed_quality(r.instruction, r.response, gw, jopts); };
    auto result = assemble(seed_ds.records, lines, judged, rt->mix, scores, scorer);

    json counts{{"seed_records", seed_ds.records.size()},
                {"enriched_used", result.enriched_used},
                {"judge_failed", result.judge_failed},
                {"fast_target", result.fast.target},
                {"fast_selected", result.fast.records.size()},
                {"fast_insufficient", result.fast.insufficient},
                {"train", result.split.train.size()},
                {"validation", result.split.validation.size()}};
    json extra = run_manifest("assemble", *rt, counts,
                              {{"seed", seed}, {"enriched", enriched}, {"verdicts", verdicts}, {"scores", scores_path}});
    extra["split"] = "train";
    emit(result.split.train, out, rt->mix, extra);
    if (!val_out.empty() && !result.split.validation.empty()) {
        extra["split"] = "validation";
        emit(result.split.validation, val_out, rt->mix, extra);
    }
    std::cout << result.split.train.size() << " train / " << result.split.validation.size() << " validation examples ("
              << result.fast.records.size() << " fast, " << result.enriched_used << " enriched)\n";
    return 0;
}

int cmd_eval(const Globals& g, const std::string& benchmark, const std::string& out, const std::string& oracle,
             const std::string& template_path, const std::string& predictions_path, std::string name,
             bool label_taxonomy, std::uint64_t oracle_seed) {
    auto rt = Runtime::build(load_config(g));
    auto items = load_benchmark(benchmark);
    EvalPromptTemplate tmpl = template_path.empty() ? EvalPromptTemplate::builtin() : EvalPromptTemplate::load(template_path);
    if (label_taxonomy) {
        TaxonomyOptions topts{rt->pipeline.model_id, rt->prompts.get()};
        for (auto& item : items)
            if (!item.taxonomy) item.taxonomy = classify_taxonomy(item, *rt->gateway, topts);
    }
    EvalRunOptions opts;
    opts.model_id = rt->pipeline.model_id;
    opts.workers = rt->workers;
    std::vector<Prediction> preds;
    if (!oracle.empty()) {
        Gateway gw(make_oracle_model(items, oracle, oracle_seed), std::make_shared<ReplayCache>(CacheMode::passthrough));
        preds = run_model(items, tmpl, gw, opts);
    } else {
        preds = run_model(items, tmpl, *rt->gateway, opts);
    }
    if (name.empty()) name = fs::path(benchmark).stem().string();
    auto report = score(items, preds, name);
    write_file(out, to_json(report).dump(2) + "\n");
    if (!predictions_path.empty()) {
        std::string body;
        for (const auto& p : preds) body += to_json(p).dump() + "\n";
        write_file(predictions_path, body);
    }
    auto manifest = run_manifest("eval", *rt,
                                 {{"items", report.total}, {"correct", report.correct},
                                  {"parse_failures", report.parse_failures}, {"quarantined", report.quarantined}},
                                 {{"benchmark", benchmark}, {"oracle", oracle}, {"template", template_path}});
    write_manifest(out, manifest);
    std::cout << render_eval_table(report);
    return 0;
}

int cmd_report(const Globals& g, const std::string& verdicts, const std::string& out) {
    auto rt = Runtime::build(load_config(g));
    auto judged = load_verdicts(verdicts);
    auto report = aggregate_quality(judged);
    auto flags = task_flags(*rt);
    std::string table = render_quality_table(report, flags);
    if (!out.empty()) {
        json j = to_json(report);
        j["table"] = table;
        write_file(out, j.dump(2) + "\n");
        write_manifest(out, run_manifest("report", *rt, {{"records", judged.size()}}, {{"verdicts", verdicts}}));
    }
    std::cout << table;
    return 0;
}

WorkbenchService* g_service = nullptr;

int cmd_serve(const Globals& g, std::string host, int port) {
    auto rt = Runtime::build(load_config(g));
    std::vector<InstructionRecord> records;
    if (!rt->config.get("dataset.path").empty()) records = load_dataset(rt->config.get("dataset.path")).records;
    if (host.empty()) host = rt->config.get("service.host");
    if (port < 0) port = rt->config.get_int("service.port");
    WorkbenchService svc(*rt, std::move(records));
    g_service = &svc;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    svc.serve(host, port, [](int bound) { std::cout << "listening on port " << bound << std::endl; });
    g_service = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instruction dataset enrichment toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Settings file (key = value)");
    app.add_option("--set", g.overrides, "Override a setting, key=value")->take_all();
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")->capture_default_str();

    std::string in, out, quarantine, report, seed, enriched, verdicts, val_out, scores, benchmark, oracle, tmpl,
        predictions, name, host;
    int workers = 0, port = -1;
    bool label_taxonomy = false;
    std::uint64_t oracle_seed = 0;

    auto* ingest = app.add_subcommand("ingest", "Validate records and assign missing ids");
    ingest->add_option("--in", in)->required();
    ingest->add_option("--out", out)->required();

    auto* classify = app.add_subcommand("classify", "Label records with registered tasks");
    classify->add_option("--in", in)->required();
    classify->add_option("--out", out)->required();
    classify->add_option("--quarantine", quarantine);

    auto* enrich = app.add_subcommand("enrich", "Search, ground and rewrite labeled records");
    enrich->add_option("--in", in)->required();
    enrich->add_option("--out", out)->required();
    enrich->add_option("--quarantine", quarantine);
    enrich->add_option("--workers", workers);

    auto* judge = app.add_subcommand("judge", "Judge rewrites for readability and factuality");
    judge->add_option("--in", in)->required();
    judge->add_option("--out", out)->required();
    judge->add_option("--report", report);
    judge->add_option("--workers", workers);

    auto* assemble_cmd = app.add_subcommand("assemble", "Build the training mix");
    assemble_cmd->add_option("--seed", seed, "Seed dataset (fast subset source)")->required();
    assemble_cmd->add_option("--enriched", enriched);
    assemble_cmd->add_option("--verdicts", verdicts);
    assemble_cmd->add_option("--out", out)->required();
    assemble_cmd->add_option("--val-out", val_out);
    assemble_cmd->add_option("--scores", scores, "JSON object of seed record id -> 1-10 score");

    auto* eval = app.add_subcommand("eval", "Run and score a benchmark");
    eval->add_option("--benchmark", benchmark)->required();
    eval->add_option("--out", out)->required();
    eval->add_option("--oracle", oracle, "gold, corrupt:<p> or parsefail:<p>");
    eval->add_option("--oracle-seed", oracle_seed);
    eval->add_option("--template", tmpl);
    eval->add_option("--predictions", predictions);
    eval->add_option("--name", name);
    eval->add_flag("--label-taxonomy", label_taxonomy, "Classify items that carry no taxonomy labels");

    auto* report_cmd = app.add_subcommand("report", "Aggregate a verdict file");
    report_cmd->add_option("--verdicts", verdicts)->required();
    report_cmd->add_option("--out", out);

    auto* serve = app.add_subcommand("serve", "Run the workbench HTTP service");
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    auto logger = spdlog::stderr_color_mt("enrichkit");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(g.log_level));

    try {
        if (*ingest) return cmd_ingest(g, in, out);
        if (*classify) return cmd_classify(g, in, out, quarantine);
        if (*enrich) return cmd_enrich(g, in, out, quarantine, workers);
        if (*judge) return cmd_judge(g, in, out, report, workers);
        if (*assemble_cmd) return cmd_assemble(g, seed, enriched, verdicts, out, val_out, scores);
        if (*eval) return cmd_eval(g, benchmark, out, oracle, tmpl, predictions, name, label_taxonomy, oracle_seed);
        if (*report_cmd) return cmd_report(g, verdicts, out);
        if (*serve) return cmd_serve(g, host, port);
    } catch (const Error& e) {
        std::cerr << error_body(e).dump() << std::endl;
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}, {"detail", 0}}.dump() << std::endl;
        return 2;
    }
    return 1;
}
