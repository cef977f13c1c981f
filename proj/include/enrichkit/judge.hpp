#pragma once

#include "enrichkit/gateway.hpp"
#include "enrichkit/prompts.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace enrichkit {

// Decision of one judge call, in slot terms.
enum class Decision { first, second, tie, both_bad };

enum class ReadabilityOutcome { rewritten, original, tie, inconsistent };

std::string_view to_string(Decision d);
Decision decision_from_string(std::string_view s);
std::string_view to_string(ReadabilityOutcome o);
ReadabilityOutcome readability_outcome_from_string(std::string_view s);

struct ReadabilityVerdict {
    Decision order1 = Decision::tie; // original in slot 1, rewritten in slot 2
    Decision order2 = Decision::tie; // rewritten in slot 1, original in slot 2
    ReadabilityOutcome outcome = ReadabilityOutcome::tie;
};

struct JudgeOptions {
    std::string model_id;
    // Count a tie in one order plus a preference in the other as inconsistent
    // instead of a win for the preferred side.
    bool strict = false;
    const PromptLibrary* prompts = nullptr;
};

// Outcome of the two order decisions; a pure function.
ReadabilityOutcome combine_readability(Decision order1, Decision order2, bool strict = false);

// Last "VERDICT: <token>" line; tokens 1, 2, tie and (when allowed) both_bad.
std::optional<Decision> parse_verdict(std::string_view reply, bool allow_both_bad = false);

// Last "SCORE: <int>" line, or a reply that is a bare integer. Range is not checked.
std::optional<int> parse_score(std::string_view reply);

ReadabilityVerdict judge_readability(std::string_view instruction, std::string_view original,
                                     std::string_view rewritten, Gateway& gateway, const JudgeOptions& opts = {});

// Integer in [1, 10]; one re-ask on an unparseable or out-of-range reply,
// then Error(unparseable_score).
int judge_factuality(std::string_view original, std::string_view rewritten, Gateway& gateway,
                     const JudgeOptions& opts = {});

// Standalone 1-10 quality score of a seed pair.
int judge_seed_quality(std::string_view instruction, std::string_view response, Gateway& gateway,
                       const JudgeOptions& opts = {});

inline const std::vector<std::string>& grounded_dimensions() {
    static const std::vector<std::string> dims{"Contextual Accuracy", "Helpfulness", "Relevance",
                                               "Conciseness",         "Completeness", "Length Bias"};
    return dims;
}

enum class GroundedFinal { A, B, tie, both_bad, inconsistent };

std::string_view to_string(GroundedFinal f);

struct GroundedPermutation {
    Decision decision = Decision::tie; // slot terms
    int points_A = 0;
    int points_B = 0;
    std::map<std::string, std::string> notes; // dimension -> note
};

struct GroundedVerdict {
    GroundedPermutation order1; // A in slot 1
    GroundedPermutation order2; // B in slot 1
    GroundedFinal final = GroundedFinal::tie;
    int total_A() const { return order1.points_A + order2.points_A; }
    int total_B() const { return order1.points_B + order2.points_B; }
};

// Points for one permutation given who won it: winner 3, loser 0, tie 1 each,
// both_bad 0 each.
GroundedPermutation score_permutation(Decision decision, bool a_in_first_slot);
GroundedFinal combine_grounded(Decision order1, Decision order2, bool strict = false);
std::map<std::string, std::string> parse_dimension_notes(std::string_view reply);

// `grounding_docs` must be non-empty unless `ungrounded` is set.
GroundedVerdict judge_grounded_pair(std::string_view question, std::string_view answer_a, std::string_view answer_b,
                                    std::span<const std::string> grounding_docs, Gateway& gateway,
                                    const JudgeOptions& opts = {}, bool ungrounded = false);

struct JudgedRecord {
    std::string record_id;
    std::string task;
    std::optional<ReadabilityVerdict> verdict;
    std::optional<int> factuality;
    std::string error; // set when judging failed; the original answer is kept
};

struct JudgeInput {
    std::string record_id;
    std::string task;
    std::string instruction;
    std::string original;
    std::string rewritten;
};

// Readability and factuality for each input with `workers` threads; results
// in input order. A failed judgment is recorded in `error`, not thrown.
std::vector<JudgedRecord> judge_all(std::span<const JudgeInput> inputs, Gateway& gateway, const JudgeOptions& opts,
                                    int workers);

nlohmann::json to_json(const JudgedRecord& r);
JudgedRecord judged_from_json(const nlohmann::json& j);
void write_verdicts(const std::string& path, std::span<const JudgedRecord> records);
std::vector<JudgedRecord> load_verdicts(const std::string& path);

struct QualityRow {
    std::size_t judged = 0;
    std::size_t rewritten = 0, original = 0, tie = 0, inconsistent = 0;
    double pct_rewritten = 0, pct_original = 0, pct_tie = 0, pct_inconsistent = 0;
    std::size_t scored = 0;
    std::optional<double> mean_factuality;
    std::size_t failed = 0;
};

struct QualityReport {
    std::map<std::string, QualityRow> per_task;
    QualityRow overall;
};

// Percentages and the mean are rounded to 2 decimals. Throws
// Error(empty_input) when no record carries a verdict or a score.
QualityReport aggregate_quality(std::span<const JudgedRecord> records);

nlohmann::json to_json(const QualityReport& report);

struct TaskFlags {
    bool requires_search = false;
    bool requires_grounding_doc = false;
};

// Fixed-width per-task table; [S] marks search tasks, [G] grounding-document tasks.
std::string render_quality_table(const QualityReport& report, const std::map<std::string, TaskFlags>& flags = {});

} // namespace enrichkit
