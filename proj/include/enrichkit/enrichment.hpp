#pragma once

#include "enrichkit/gateway.hpp"
#include "enrichkit/prompts.hpp"
#include "enrichkit/record.hpp"
#include "enrichkit/task.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace enrichkit {

struct PipelineConfig {
    int K = 2;             // candidate queries per instruction
    int R_max = 8;         // results retrieved per query
    int R = 2;             // parseable results retained per query
    bool summarize = false;
    int evidence_cap = 4;  // must not exceed K * R
    int context_budget_tokens = 12000;
    SearchBackendKind backend = SearchBackendKind::web;
    std::string model_id;
    int max_output_tokens = 4096;

    void validate() const;
};

struct EvidenceDoc {
    std::string source_query;
    std::string locator;
    std::string title;
    int rank = 0;
    std::string text;
    bool truncated = false;

    bool operator==(const EvidenceDoc&) const = default;
};

enum class GroundingMode { attached_doc, searched, both, none };

std::string_view to_string(GroundingMode mode);
GroundingMode grounding_mode_from_string(std::string_view s);

struct EnrichedRecord {
    std::string base_id;
    std::string rewritten_response;
    std::vector<EvidenceDoc> evidence;
    std::string format_name;
    int format_version = 0;
    GroundingMode grounding_mode = GroundingMode::none;
};

std::vector<std::string> build_queries(std::string_view instruction, const PipelineConfig& cfg, Gateway& gateway,
                                       const PromptLibrary& prompts = PromptLibrary::builtin());

// Subset of `queries` in input order. A reply without a parseable KEEP line
// keeps every query and logs a warning.
std::vector<std::string> filter_queries(std::string_view instruction, std::string_view response,
                                        const FormatTemplate& format, std::span<const std::string> queries,
                                        Gateway& gateway, const PipelineConfig& cfg = {},
                                        const PromptLibrary& prompts = PromptLibrary::builtin());

// Per query: top R_max results in rank order, first R parseable retained.
// Then global dedup by locator and the evidence cap, in (query, rank) order.
std::vector<EvidenceDoc> retrieve_evidence(std::span<const std::string> queries, const PipelineConfig& cfg,
                                           Gateway& gateway);

// Falls back to the unchanged document when the gateway fails.
EvidenceDoc summarize_doc(const EvidenceDoc& doc, const FormatTemplate& format, Gateway& gateway,
                          const PipelineConfig& cfg = {}, const PromptLibrary& prompts = PromptLibrary::builtin());

struct AssembledContext {
    std::string text;
    std::vector<EvidenceDoc> evidence; // truncated flags set
    bool grounding_truncated = false;
};

// Layout: format, instruction, original answer, grounding document (when
// `include_grounding_doc`), evidence in order. Over budget, evidence is cut
// from the tail, then the grounding document; throws Error(budget_too_small)
// when format + instruction + answer alone exceed the budget.
AssembledContext assemble_context(const InstructionRecord& record, const FormatTemplate& format,
                                  std::span<const EvidenceDoc> evidence, const PipelineConfig& cfg,
                                  bool include_grounding_doc = false);

// Step names with no matching heading line in `answer`.
std::vector<std::string> missing_step_headings(std::string_view answer, const FormatTemplate& format);

EnrichedRecord enrich_record(const InstructionRecord& record, const TaskSpec& task, const PipelineConfig& cfg,
                             Gateway& gateway, const PromptLibrary& prompts = PromptLibrary::builtin());

struct EnrichmentOutcome {
    InstructionRecord base;
    std::optional<EnrichedRecord> result;
    std::string error; // "<Code>: <message>" when quarantined
};

using TaskLookup = std::function<TaskSpec(const std::string& task_name)>;

// Runs enrich_record over `records` with `workers` threads. Outcomes are in
// input order regardless of completion order.
std::vector<EnrichmentOutcome> enrich_all(std::span<const InstructionRecord> records, const TaskLookup& lookup,
                                          const PipelineConfig& cfg, Gateway& gateway, int workers,
                                          const PromptLibrary& prompts = PromptLibrary::builtin());

// Enriched JSONL line: the base record (origin "enriched", meta.format_version)
// plus enriched_response, evidence, format and grounding_mode.
nlohmann::json enriched_to_json(const InstructionRecord& base, const EnrichedRecord& enriched);

struct EnrichedLine {
    InstructionRecord base; // response holds the original answer
    EnrichedRecord enriched;
};

EnrichedLine enriched_from_json(const nlohmann::json& j);

// Writes the JSONL file and the evidence bodies into "<path>.evidence/<sha256>.txt".
void write_enriched(const std::string& path, std::span<const EnrichmentOutcome> outcomes);
std::vector<EnrichedLine> load_enriched(const std::string& path);

} // namespace enrichkit
