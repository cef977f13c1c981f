#include "enrichkit/enrichment.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace enrichkit {

void PipelineConfig::validate() const {
    if (K <= 0 || R_max <= 0 || R <= 0 || evidence_cap <= 0 || context_budget_tokens <= 0)
        throw Error(Errc::invalid_argument, "pipeline parameters must be positive");
    if (R > R_max) throw Error(Errc::invalid_argument, "R must not exceed R_max");
    if (evidence_cap > K * R) throw Error(Errc::invalid_argument, "evidence_cap must not exceed K*R");
    if (max_output_tokens <= 0) throw Error(Errc::invalid_argument, "max_output_tokens must be positive");
}

std::string_view to_string(GroundingMode mode) {
    switch (mode) {
    case GroundingMode::attached_doc: return "attached_doc";
    case GroundingMode::searched: return "searched";
    case GroundingMode::both: return "both";
    case GroundingMode::none: return "none";
    }
    return "none";
}

GroundingMode grounding_mode_from_string(std::string_view s) {
    if (s == "attached_doc") return GroundingMode::attached_doc;
    if (s == "searched") return GroundingMode::searched;
    if (s == "both") return GroundingMode::both;
    if (s == "none") return GroundingMode::none;
    throw Error(Errc::invalid_argument, "unknown grounding mode '" + std::string(s) + "'");
}

namespace {

CompletionRequest make_request(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars,
                               const PipelineConfig& cfg, std::string tag, int max_tokens) {
    CompletionRequest req;
    req.system_prompt = tmpl.system;
    req.user_prompt = render(tmpl.user, vars);
    req.model_id = cfg.model_id;
    req.max_output_tokens = max_tokens;
    req.tag = std::move(tag);
    return req;
}

std::string normalize_query(std::string_view q) {
    std::string out;
    bool space = false;
    for (char c : q) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::vector<std::string> parse_query_lines(std::string_view reply) {
    static const std::regex bullet(R"(^(?:[-*]|\d{1,2}[.)])\s*)");
    std::vector<std::string> out;
    for (auto& raw : split_lines(reply)) {
        std::string line = trim(raw);
        if (line.empty()) continue;
        line = std::regex_replace(line, bullet, "");
        line = trim(line);
        while (line.size() >= 2 && (line.front() == '"' || line.front() == '\'') && line.back() == line.front())
            line = trim(std::string_view(line).substr(1, line.size() - 2));
        if (line.empty() || line.back() == ':') continue; // preamble ("Here are two queries:")
        out.push_back(line);
    }
    return out;
}

void add_distinct(std::vector<std::string>& into, std::set<std::string>& seen, const std::vector<std::string>& from,
                  std::size_t k) {
    for (const auto& q : from) {
        if (into.size() >= k) return;
        if (seen.insert(normalize_query(q)).second) into.push_back(q);
    }
}

} // namespace

std::vector<std::string> build_queries(std::string_view instruction, const PipelineConfig& cfg, Gateway& gateway,
                                       const PromptLibrary& prompts) {
    if (trim(instruction).empty()) throw Error(Errc::invalid_argument, "instruction is empty");
    if (cfg.K <= 0) throw Error(Errc::invalid_argument, "K must be positive");
    const auto k = static_cast<std::size_t>(cfg.K);
    const std::string inst(instruction);

    std::vector<std::string> out;
    std::set<std::string> seen;
    auto req = make_request(prompts.get(prompt_names::queries), {{"instruction", inst}, {"k", std::to_string(k)}},
                            cfg, "enrich.queries", 512);
    add_distinct(out, seen, parse_query_lines(gateway.complete(req)), k);

    if (out.size() < k) {
        std::string existing;
        for (const auto& q : out) existing += q + "\n";
        auto retry = make_request(prompts.get(prompt_names::queries_retry),
                                  {{"instruction", inst}, {"k", std::to_string(k - out.size())}, {"existing", existing}},
                                  cfg, "enrich.queries_retry", 512);
        add_distinct(out, seen, parse_query_lines(gateway.complete(retry)), k);
    }

    if (out.size() < k) {
        // Keyword fallback: the instruction's content words, then growing
        // keyword windows, so the result is distinct for any non-empty instruction.
        auto words = keywords(instruction);
        std::vector<std::string> fallback;
        if (!words.empty()) {
            std::string all;
            for (const auto& w : words) all += (all.empty() ? "" : " ") + w;
            fallback.push_back(all);
            for (std::size_t n = 1; n <= words.size(); ++n) {
                std::string q;
                for (std::size_t i = 0; i < n; ++i) q += (i ? " " : "") + words[i];
                fallback.push_back(q);
            }
            for (const auto& w : words) fallback.push_back(w);
        }
        fallback.push_back(trim(instruction));
        add_distinct(out, seen, fallback, k);
        for (std::size_t n = 2; out.size() < k; ++n)
            add_distinct(out, seen, {trim(instruction) + " " + std::to_string(n)}, k);
    }
    return out;
}

std::vector<std::string> filter_queries(std::string_view instruction, std::string_view response,
                                        const FormatTemplate& format, std::span<const std::string> queries,
                                        Gateway& gateway, const PipelineConfig& cfg, const PromptLibrary& prompts) {
    if (queries.empty()) return {};
    std::string fmt, numbered;
    for (std::size_t i = 0; i < format.steps.size(); ++i)
        fmt += std::to_string(i + 1) + ". " + format.steps[i].name + ": " + format.steps[i].instruction + "\n";
    for (std::size_t i = 0; i < queries.size(); ++i) numbered += std::to_string(i + 1) + ". " + queries[i] + "\n";

    auto req = make_request(prompts.get(prompt_names::filter),
                            {{"instruction", std::string(instruction)}, {"response", std::string(response)},
                             {"format", fmt}, {"queries", numbered}},
                            cfg, "enrich.filter", 512);
    std::string reply = gateway.complete(req);

    auto keep_all = [&](const char* why) {
        spdlog::warn("query filter reply {}; keeping all {} queries", why, queries.size());
        return std::vector<std::string>(queries.begin(), queries.end());
    };

    auto lines = split_lines(reply);
    std::string verdict;
    bool found = false;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string t = trim(*it);
        while (!t.empty() && (t.front() == '*' || t.front() == '`')) t.erase(0, 1);
        if (starts_with_ci(t, "keep:")) {
            verdict = trim(std::string_view(t).substr(5));
            found = true;
            break;
        }
    }
    if (!found) return keep_all("has no KEEP line");
    while (!verdict.empty() && (verdict.back() == '*' || verdict.back() == '`' || verdict.back() == '.'))
        verdict.pop_back();
    if (to_lower(trim(verdict)) == "none" || trim(verdict).empty()) return {};

    std::set<std::size_t> keep;
    std::stringstream ss(verdict);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = trim(item);
        if (t.empty()) continue;
        if (!std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }))
            return keep_all("is unparseable");
        std::size_t idx = std::stoul(t);
        if (idx == 0 || idx > queries.size()) return keep_all("names an out-of-range query");
        keep.insert(idx - 1);
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < queries.size(); ++i)
        if (keep.count(i)) out.push_back(queries[i]);
    return out;
}

std::vector<EvidenceDoc> retrieve_evidence(std::span<const std::string> queries, const PipelineConfig& cfg,
                                           Gateway& gateway) {
    cfg.validate();
    std::vector<EvidenceDoc> out;
    std::set<std::string> seen;
    for (const auto& q : queries) {
        auto results = gateway.search(q, cfg.backend, cfg.R_max);
        int retained = 0;
        for (const auto& r : results) {
            if (retained >= cfg.R) break;
            std::string text;
            try {
                text = gateway.fetch_and_extract(r.locator);
            } catch (const Error& e) {
                if (e.code() != Errc::unparseable) throw;
                continue;
            }
            ++retained;
            if (!seen.insert(r.locator).second) continue;
            out.push_back({q, r.locator, r.title, r.rank, std::move(text), false});
        }
    }
    if (out.size() > static_cast<std::size_t>(cfg.evidence_cap)) out.resize(static_cast<std::size_t>(cfg.evidence_cap));
    return out;
}

EvidenceDoc summarize_doc(const EvidenceDoc& doc, const FormatTemplate& format, Gateway& gateway,
                          const PipelineConfig& cfg, const PromptLibrary& prompts) {
    std::string steps;
    for (const auto& s : format.steps) steps += "- " + s.name + ": " + s.instruction + "\n";
    auto req = make_request(prompts.get(prompt_names::summarize), {{"format_steps", steps}, {"document", doc.text}},
                            cfg, "enrich.summarize", 1024);
    try {
        std::string summary = trim(gateway.complete(req));
        if (summary.empty()) return doc;
        EvidenceDoc out = doc;
        out.text = std::move(summary);
        out.truncated = false;
        return out;
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_argument) throw;
        spdlog::warn("summary of {} failed ({}); keeping the full document", doc.locator, e.what());
        return doc;
    }
}

namespace {

std::string format_block(const FormatTemplate& format) {
    std::string out = "## Answer format\n";
    for (std::size_t i = 0; i < format.steps.size(); ++i)
        out += std::to_string(i + 1) + ". " + format.steps[i].name + ": " + format.steps[i].instruction + "\n";
    return out;
}

std::string evidence_header(std::size_t index, const EvidenceDoc& doc, bool truncated) {
    std::string out = "## Evidence " + std::to_string(index);
    if (truncated) out += " (truncated)";
    out += "\nQuery: " + doc.source_query + "\nSource: " + doc.locator + "\n";
    return out;
}

std::string grounding_header(bool truncated) {
    return truncated ? "## Grounding document (truncated)\n" : "## Grounding document\n";
}

} // namespace

AssembledContext assemble_context(const InstructionRecord& record, const FormatTemplate& format,
                                  std::span<const EvidenceDoc> evidence, const PipelineConfig& cfg,
                                  bool include_grounding_doc) {
    if (cfg.context_budget_tokens <= 0) throw Error(Errc::invalid_argument, "context budget must be positive");
    const std::size_t budget = static_cast<std::size_t>(cfg.context_budget_tokens);

    std::string fixed = format_block(format) + "\n## Instruction\n" + record.instruction + "\n\n## Original answer\n" +
                        record.response + "\n";
    std::size_t used = approx_tokens(fixed);
    if (used > budget)
        throw Error(Errc::budget_too_small, "format, instruction and answer need " + std::to_string(used) +
                                                " tokens; budget is " + std::to_string(budget));

    // Blocks in layout order; the budget is granted front to back so the tail is cut first.
    struct Block {
        std::string body;
        std::function<std::string(bool)> header;
        bool truncated = false;
    };
    std::vector<Block> blocks;
    bool with_doc = include_grounding_doc && record.grounding_doc && !record.grounding_doc->empty();
    if (with_doc) blocks.push_back({*record.grounding_doc, grounding_header});
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        const EvidenceDoc& doc = evidence[i];
        blocks.push_back({doc.text, [i, &doc](bool t) { return evidence_header(i + 1, doc, t); }});
    }

    std::string text = fixed;
    for (auto& b : blocks) {
        std::string header = b.header(false);
        std::size_t need = approx_tokens(header) + approx_tokens(b.body);
        if (used + need <= budget) {
            text += "\n" + header + b.body + "\n";
            used += need;
            continue;
        }
        b.truncated = true;
        header = b.header(true);
        std::size_t head = approx_tokens(header);
        if (used + head >= budget) continue; // nothing of the body fits
        std::string_view kept = truncate_tokens(b.body, budget - used - head);
        text += "\n" + header + std::string(kept) + "\n";
        used += head + approx_tokens(kept);
    }

    AssembledContext out;
    out.text = std::move(text);
    std::size_t bi = 0;
    if (with_doc) out.grounding_truncated = blocks[bi++].truncated;
    for (const auto& doc : evidence) {
        EvidenceDoc d = doc;
        d.truncated = blocks[bi++].truncated;
        out.evidence.push_back(std::move(d));
    }
    return out;
}

std::vector<std::string> missing_step_headings(std::string_view answer, const FormatTemplate& format) {
    static const std::regex numbering(R"(^(?:step\s+)?\d{1,2}[.):]?\s+)", std::regex::icase);
    std::set<std::string> headings;
    for (const auto& raw : split_lines(answer)) {
        std::string line = trim(raw);
        bool heading = false;
        if (!line.empty() && line.front() == '#') {
            std::size_t n = line.find_first_not_of('#');
            if (n != std::string::npos && n <= 6) {
                line = trim(std::string_view(line).substr(n));
                heading = true;
            }
        } else if (line.size() > 4 && line.rfind("**", 0) == 0) {
            std::size_t close = line.find("**", 2);
            if (close != std::string::npos) {
                std::string rest = trim(std::string_view(line).substr(close + 2));
                if (rest.empty() || rest == ":") {
                    line = line.substr(2, close - 2);
                    heading = true;
                }
            }
        }
        if (!heading) continue;
        while (line.size() >= 4 && line.rfind("**", 0) == 0 && line.size() >= 2 &&
               line.compare(line.size() - 2, 2, "**") == 0)
            line = trim(std::string_view(line).substr(2, line.size() - 4));
        line = std::regex_replace(line, numbering, "");
        while (!line.empty() && (line.back() == ':' || line.back() == '*')) line.pop_back();
        headings.insert(to_lower(trim(line)));
    }
    std::vector<std::string> missing;
    for (const auto& step : format.steps)
        if (!headings.count(to_lower(trim(step.name)))) missing.push_back(step.name);
    return missing;
}

EnrichedRecord enrich_record(const InstructionRecord& record, const TaskSpec& task, const PipelineConfig& cfg,
                             Gateway& gateway, const PromptLibrary& prompts) {
    cfg.validate();
    task.format.validate();
    if (record.task_name != task.name)
        throw Error(Errc::invalid_argument, "record " + record.id + " belongs to task '" + record.task_name + "'");

    bool attached = task.requires_grounding_doc;
    if (attached && (!record.grounding_doc || trim(*record.grounding_doc).empty()))
        throw Error(Errc::missing_grounding_doc, "record " + record.id + " has no grounding document");
    bool searched = task.requires_search;

    EnrichedRecord out;
    out.base_id = record.id;
    out.format_name = task.name;
    out.format_version = task.format.version;
    out.grounding_mode = attached && searched ? GroundingMode::both
                         : attached           ? GroundingMode::attached_doc
                         : searched           ? GroundingMode::searched
                                              : GroundingMode::none;

    std::vector<EvidenceDoc> evidence;
    if (searched) {
        auto queries = build_queries(record.instruction, cfg, gateway, prompts);
        auto kept = filter_queries(record.instruction, record.response, task.format, queries, gateway, cfg, prompts);
        evidence = retrieve_evidence(kept, cfg, gateway);
        if (cfg.summarize)
            for (auto& d : evidence) d = summarize_doc(d, task.format, gateway, cfg, prompts);
    }

    auto ctx = assemble_context(record, task.format, evidence, cfg, attached);
    std::string headings;
    for (const auto& s : task.format.steps) headings += "### " + s.name + "\n";
    auto req = make_request(prompts.get(prompt_names::rewrite), {{"context", ctx.text}, {"headings", headings}}, cfg,
                            "enrich.rewrite", cfg.max_output_tokens);

    std::string answer = trim(gateway.complete(req));
    auto missing = missing_step_headings(answer, task.format);
    if (answer.empty() || !missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        req.user_prompt += "\n\nYour previous answer was missing these headings: " + names +
                           ". Write the complete answer again with every required heading.";
        answer = trim(gateway.complete(req));
        missing = missing_step_headings(answer, task.format);
        if (answer.empty() || !missing.empty())
            throw Error(Errc::step_coverage, "record " + record.id + ": rewrite lacks headings for " +
                                                 std::to_string(missing.size()) + " format step(s)");
    }
    out.rewritten_response = std::move(answer);
    out.evidence = std::move(ctx.evidence);
    return out;
}

std::vector<EnrichmentOutcome> enrich_all(std::span<const InstructionRecord> records, const TaskLookup& lookup,
                                          const PipelineConfig& cfg, Gateway& gateway, int workers,
                                          const PromptLibrary& prompts) {
    cfg.validate();
    if (workers <= 0) throw Error(Errc::invalid_argument, "worker count must be positive");
    std::vector<EnrichmentOutcome> out(records.size());
    parallel_for(records.size(), workers, [&](std::size_t i) {
        auto& slot = out[i];
        slot.base = records[i];
        try {
            TaskSpec task = lookup(records[i].task_name);
            slot.result = enrich_record(records[i], task, cfg, gateway, prompts);
        } catch (const Error& e) {
            slot.error = std::string(to_string(e.code())) + ": " + e.what();
        } catch (const std::exception& e) {
            slot.error = std::string("Internal: ") + e.what();
        }
    });
    return out;
}

nlohmann::json enriched_to_json(const InstructionRecord& base, const EnrichedRecord& enriched) {
    InstructionRecord rec = base;
    rec.origin = Origin::enriched;
    rec.meta[std::string(kFormatVersionKey)] = std::to_string(enriched.format_version);
    nlohmann::json j = to_json(rec);
    j["enriched_response"] = enriched.rewritten_response;
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& d : enriched.evidence)
        ev.push_back({{"query", d.source_query},
                      {"locator", d.locator},
                      {"title", d.title},
                      {"rank", d.rank},
                      {"truncated", d.truncated},
                      {"content_sha256", sha256_hex(d.text)}});
    j["evidence"] = std::move(ev);
    j["format"] = {{"name", enriched.format_name}, {"version", enriched.format_version}};
    j["grounding_mode"] = std::string(to_string(enriched.grounding_mode));
    return j;
}

EnrichedLine enriched_from_json(const nlohmann::json& j) {
    EnrichedLine out;
    try {
        out.base = record_from_json(j);
        out.enriched.base_id = out.base.id;
        out.enriched.rewritten_response = j.at("enriched_response").get<std::string>();
        out.enriched.format_name = j.at("format").at("name").get<std::string>();
        out.enriched.format_version = j.at("format").at("version").get<int>();
        out.enriched.grounding_mode = grounding_mode_from_string(j.at("grounding_mode").get<std::string>());
        for (const auto& e : j.at("evidence")) {
            EvidenceDoc d;
            d.source_query = e.at("query").get<std::string>();
            d.locator = e.at("locator").get<std::string>();
            d.title = e.value("title", "");
            d.rank = e.at("rank").get<int>();
            d.truncated = e.value("truncated", false);
            out.enriched.evidence.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::malformed_line, std::string("enriched record: ") + e.what());
    }
    if (out.enriched.rewritten_response.empty()) throw Error(Errc::malformed_line, "enriched_response is empty");
    return out;
}

void write_enriched(const std::string& path, std::span<const EnrichmentOutcome> outcomes) {
    namespace fs = std::filesystem;
    const fs::path sidecar = path + ".evidence";
    std::string body;
    for (const auto& o : outcomes) {
        if (!o.result) continue;
        body += enriched_to_json(o.base, *o.result).dump() + "\n";
        for (const auto& d : o.result->evidence) {
            fs::path file = sidecar / (sha256_hex(d.text) + ".txt");
            if (!fs::exists(file)) write_file(file.string(), d.text);
        }
    }
    write_file(path, body);
}

std::vector<EnrichedLine> load_enriched(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<EnrichedLine> out;
    std::string line;
    int lineno = 0;
    const std::string sidecar = path + ".evidence/";
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::malformed_line, path + ": line " + std::to_string(lineno) + " is not JSON", lineno);
        }
        EnrichedLine e;
        try {
            e = enriched_from_json(j);
        } catch (const Error& err) {
            throw Error(Errc::malformed_line, path + ": line " + std::to_string(lineno) + ": " + err.what(), lineno);
        }
        const auto& ev = j.at("evidence");
        for (std::size_t i = 0; i < e.enriched.evidence.size(); ++i) {
            std::string sha = ev[i].value("content_sha256", "");
            if (!sha.empty() && std::filesystem::exists(sidecar + sha + ".txt"))
                e.enriched.evidence[i].text = read_file(sidecar + sha + ".txt");
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace enrichkit
