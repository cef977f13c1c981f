#pragma once

#include "enrichkit/enrichment.hpp"
#include "enrichkit/judge.hpp"
#include "enrichkit/record.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace enrichkit {

enum class DepthTag { step_by_step, concise };
enum class ExampleOrigin { enriched, original_fast };

std::string_view to_string(DepthTag t);
std::string_view to_string(ExampleOrigin o);

struct Message {
    std::string role; // system, user or assistant
    std::string content;

    bool operator==(const Message&) const = default;
};

struct TrainingExample {
    std::vector<Message> messages;
    DepthTag depth_tag = DepthTag::concise;
    ExampleOrigin origin = ExampleOrigin::original_fast;
    std::string record_id;

    bool operator==(const TrainingExample&) const = default;
};

struct MixPlan {
    double fast_fraction = 0.25;
    int min_quality_score = 8;        // seed records scored 1-10 by the judge
    int length_ceiling_tokens = 300;  // "short" answers are strictly below this
    std::string curriculum = "original_then_enriched";
    double heldout_ratio = 0.05;
    std::uint64_t seed = 0;
    std::string system_prompt;        // optional system message

    void validate() const;
};

nlohmann::json to_json(const MixPlan& plan);
MixPlan mix_plan_from_json(const nlohmann::json& j);

const std::vector<std::string>& step_by_step_phrases();
const std::vector<std::string>& concise_phrases();

// Enriched records become step_by_step examples, seed originals concise ones.
// The suffix phrase is a pure function of (plan.seed, record id).
TrainingExample tag_depth(const InstructionRecord& record, const MixPlan& plan);

using SeedScorer = std::function<int(const InstructionRecord&)>;

struct FastSubset {
    std::vector<InstructionRecord> records; // input order
    std::size_t target = 0;
    std::size_t qualified_seen = 0;
    bool insufficient = false; // fewer qualifying records than the target
};

// Short, high-scoring seed records, round(fast_fraction * n) of them.
// Candidates are visited in seeded order; scores missing from `scores` come
// from `scorer` on demand (no scorer: the candidate does not qualify).
FastSubset select_fast_subset(std::span<const InstructionRecord> seed_records, const MixPlan& plan,
                              const std::map<std::string, int>& scores, const SeedScorer& scorer = {});

// original_fast block first, then enriched; each block shuffled under the seed.
std::vector<TrainingExample> order_curriculum(std::vector<TrainingExample> original_block,
                                              std::vector<TrainingExample> enriched_block, const MixPlan& plan);

struct SplitResult {
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> validation;
};

// Stratified by origin: round(ratio * group) of each origin go to validation.
// Relative order is preserved on both sides.
SplitResult split_heldout(std::span<const TrainingExample> examples, const MixPlan& plan);

nlohmann::json to_json(const TrainingExample& e);
TrainingExample training_example_from_json(const nlohmann::json& j);

// Writes the JSONL and "<path>.manifest.json". `extra` is merged into the manifest.
void emit(std::span<const TrainingExample> examples, const std::string& path, const MixPlan& plan,
          const nlohmann::json& extra = nlohmann::json::object());
std::vector<TrainingExample> load_training(const std::string& path);

struct AssemblyResult {
    SplitResult split;
    FastSubset fast;
    std::size_t enriched_used = 0;
    std::size_t judge_failed = 0;
};

// Enriched lines whose judgment failed keep their original answer.
AssemblyResult assemble(std::span<const InstructionRecord> seed_records, std::span<const EnrichedLine> enriched,
                        std::span<const JudgedRecord> verdicts, const MixPlan& plan,
                        const std::map<std::string, int>& seed_scores, const SeedScorer& scorer = {});

} // namespace enrichkit
