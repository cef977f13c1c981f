#pragma once

#include "enrichkit/gateway.hpp"
#include "enrichkit/prompts.hpp"
#include "enrichkit/record.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace enrichkit {

enum class BenchmarkKind { mcq_single, mcq_multi, rcm_mapping, relationship_binary, impact_multilabel };

std::string_view to_string(BenchmarkKind kind);
// Throws Error(unknown_kind).
BenchmarkKind benchmark_kind_from_string(std::string_view s);
std::span<const BenchmarkKind> all_benchmark_kinds();

// The eight CWE technical impacts, in canonical spelling.
const std::vector<std::string>& technical_impacts();
// Case-insensitive; "Gain Privileges / Assume Identity" style variants accepted.
std::optional<std::string> canonical_impact(std::string_view s);

// Normalized answer: option letters (upper case), "CWE-<n>", or canonical impact names.
using Answer = std::set<std::string>;

std::string format_answer(const Answer& a);

struct BenchmarkItem {
    std::string id;
    BenchmarkKind kind = BenchmarkKind::mcq_single;
    std::string question;
    std::vector<std::pair<std::string, std::string>> options; // (label, text)
    Answer gold;
    std::optional<LabelSet> taxonomy;
};

// Validates kind-specific shape; throws Error(malformed_item) naming the id.
BenchmarkItem benchmark_item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchmarkItem& item);
std::vector<BenchmarkItem> load_benchmark(const std::string& path);

struct EvalPromptTemplate {
    std::string scaffold; // contains <EXPL> exactly once
    std::map<BenchmarkKind, std::string> explanations;

    void validate() const;
    static const EvalPromptTemplate& builtin();
    // Sections "[scaffold]" and "[expl.<kind>]"; kinds not given keep the built-in text.
    static EvalPromptTemplate parse(std::string_view text);
    static EvalPromptTemplate load(const std::string& path);
};

inline constexpr std::string_view kExplToken = "<EXPL>";

std::string final_answer_instruction(BenchmarkKind kind);
std::string render_prompt(const BenchmarkItem& item, const EvalPromptTemplate& tmpl);

// Payload of the last "ANSWER:" marker, parsed per kind; nullopt when absent
// or unparseable.
std::optional<Answer> extract_answer(std::string_view completion, BenchmarkKind kind);

struct Prediction {
    std::string item_id;
    std::string raw_completion;
    std::optional<Answer> extracted;
    bool parse_ok = false;
    std::string error; // quarantined: no completion was obtained
};

struct EvalRunOptions {
    std::string model_id;
    std::string system_prompt = "You answer cybersecurity evaluation questions.";
    int workers = 1;
    int max_output_tokens = 2048;
};

// Temperature 0, one completion per item, tagged "eval:<id>". Items whose
// completion fails are quarantined (Prediction.error set), not thrown.
std::vector<Prediction> run_model(std::span<const BenchmarkItem> items, const EvalPromptTemplate& tmpl,
                                  Gateway& gateway, const EvalRunOptions& opts = {});

struct AccuracyRow {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0;
};

struct EvalReport {
    std::string benchmark;
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t parse_failures = 0;
    std::size_t quarantined = 0;
    std::size_t missing = 0;
    double accuracy = 0;
    double mean_jaccard = 0;
    double parse_failure_rate = 0;
    double coverage = 0; // share of items with a completion
    std::map<std::string, AccuracyRow> per_kind;
    std::map<std::string, AccuracyRow> per_taxonomy;
};

double jaccard(const Answer& a, const Answer& b);

// Strict match per item; missing predictions count as incorrect.
EvalReport score(std::span<const BenchmarkItem> items, std::span<const Prediction> predictions,
                 std::string benchmark = {});

nlohmann::json to_json(const EvalReport& r);
std::string render_eval_table(const EvalReport& r);

nlohmann::json to_json(const Prediction& p);

// Deterministic stand-in models keyed on the "eval:<id>" tag:
//   "gold"          always answers the gold value
//   "corrupt:<p>"   answers wrongly on exactly round(p * n) items
//   "parsefail:<p>" omits the answer marker on exactly round(p * n) items
std::shared_ptr<ChatModel> make_oracle_model(std::span<const BenchmarkItem> items, std::string_view spec,
                                             std::uint64_t seed = 0);

// Ids affected by a p-fraction oracle: round(p * n) of them, chosen by seeded shuffle.
std::set<std::string> oracle_mask(std::span<const BenchmarkItem> items, double p, std::uint64_t seed);

struct TaxonomyOptions {
    std::string model_id;
    const PromptLibrary* prompts = nullptr;
};

LabelSet parse_taxonomy_reply(std::string_view reply);
LabelSet classify_taxonomy(const BenchmarkItem& item, Gateway& gateway, const TaxonomyOptions& opts = {});

// External category -> internal label used to judge agreement.
const std::map<std::string, TaxonomyLabel>& default_external_mapping();

struct ExternalLabeled {
    std::string external_category;
    LabelSet ours;
};

struct AgreementRow {
    std::size_t items = 0;
    std::size_t matched = 0;
    std::optional<double> percent; // absent when the category has no items
};

// Share of items whose label set contains the mapped internal label, per
// external category, rounded to one decimal. Every mapped category appears.
std::map<std::string, AgreementRow> validate_taxonomy_agreement(
    std::span<const ExternalLabeled> items, const std::map<std::string, TaxonomyLabel>& mapping = default_external_mapping());

} // namespace enrichkit
