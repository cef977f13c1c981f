#include "enrichkit/assembly.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace enrichkit {

std::string_view to_string(DepthTag t) { return t == DepthTag::step_by_step ? "step_by_step" : "concise"; }
std::string_view to_string(ExampleOrigin o) { return o == ExampleOrigin::enriched ? "enriched" : "original_fast"; }

void MixPlan::validate() const {
    if (!(fast_fraction > 0.0 && fast_fraction <= 1.0))
        throw Error(Errc::invalid_argument, "fast_fraction must be in (0, 1]");
    if (!(heldout_ratio > 0.0 && heldout_ratio < 0.5))
        throw Error(Errc::invalid_argument, "heldout_ratio must be in (0, 0.5)");
    if (length_ceiling_tokens <= 0) throw Error(Errc::invalid_argument, "length_ceiling_tokens must be positive");
    if (min_quality_score < 1 || min_quality_score > 10)
        throw Error(Errc::invalid_argument, "min_quality_score must be in [1, 10]");
    if (curriculum != "original_then_enriched")
        throw Error(Errc::invalid_argument, "unknown curriculum '" + curriculum + "'");
}

nlohmann::json to_json(const MixPlan& plan) {
    return {{"fast_fraction", plan.fast_fraction},
            {"min_quality_score", plan.min_quality_score},
            {"length_ceiling_tokens", plan.length_ceiling_tokens},
            {"curriculum", plan.curriculum},
            {"heldout_ratio", plan.heldout_ratio},
            {"seed", plan.seed},
            {"system_prompt", plan.system_prompt}};
}

MixPlan mix_plan_from_json(const nlohmann::json& j) {
    MixPlan p;
    p.fast_fraction = j.value("fast_fraction", p.fast_fraction);
    p.min_quality_score = j.value("min_quality_score", p.min_quality_score);
    p.length_ceiling_tokens = j.value("length_ceiling_tokens", p.length_ceiling_tokens);
    p.curriculum = j.value("curriculum", p.curriculum);
    p.heldout_ratio = j.value("heldout_ratio", p.heldout_ratio);
    p.seed = j.value("seed", p.seed);
    p.system_prompt = j.value("system_prompt", p.system_prompt);
    p.validate();
    return p;
}

const std::vector<std::string>& step_by_step_phrases() {
    static const std::vector<std::string> pool{
        "Think through this step by step.",
        "Explain your reasoning step by step.",
        "Work through the answer step by step before concluding.",
        "Walk me through it step by step.",
    };
    return pool;
}

const std::vector<std::string>& concise_phrases() {
    static const std::vector<std::string> pool{
        "Answer concisely.",
        "Give a short, direct answer.",
        "Keep the answer brief.",
        "Respond in a few sentences.",
    };
    return pool;
}

TrainingExample tag_depth(const InstructionRecord& record, const MixPlan& plan) {
    TrainingExample ex;
    ex.record_id = record.id;
    bool enriched = record.origin == Origin::enriched;
    ex.origin = enriched ? ExampleOrigin::enriched : ExampleOrigin::original_fast;
    ex.depth_tag = enriched ? DepthTag::step_by_step : DepthTag::concise;
    const auto& pool = enriched ? step_by_step_phrases() : concise_phrases();
    const std::string& phrase = pool[fnv1a64(record.id, plan.seed) % pool.size()];
    if (!plan.system_prompt.empty()) ex.messages.push_back({"system", plan.system_prompt});
    ex.messages.push_back({"user", record.instruction + "\n\n" + phrase});
    ex.messages.push_back({"assistant", record.response});
    return ex;
}

FastSubset select_fast_subset(std::span<const InstructionRecord> seed_records, const MixPlan& plan,
                              const std::map<std::string, int>& scores, const SeedScorer& scorer) {
    plan.validate();
    FastSubset out;
    out.target = static_cast<std::size_t>(std::llround(plan.fast_fraction * static_cast<double>(seed_records.size())));

    std::vector<std::size_t> order(seed_records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(plan.seed);
    rng.shuffle(order);

    std::vector<std::size_t> chosen;
    for (std::size_t idx : order) {
        if (chosen.size() >= out.target) break;
        const auto& r = seed_records[idx];
        if (approx_tokens(r.response) >= static_cast<std::size_t>(plan.length_ceiling_tokens)) continue;
        std::optional<int> score;
        if (auto it = scores.find(r.id); it != scores.end()) {
            score = it->second;
        } else if (scorer) {
            try {
                score = scorer(r);
            } catch (const Error& e) {
                spdlog::warn("seed record {} could not be scored: {}", r.id, e.what());
            }
        }
        if (!score || *score < plan.min_quality_score) continue;
        ++out.qualified_seen;
        chosen.push_back(idx);
    }
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t idx : chosen) out.records.push_back(seed_records[idx]);
    if (out.records.size() < out.target) {
        out.insufficient = true;
        spdlog::warn("only {} seed records qualify for the fast subset; target was {}", out.records.size(), out.target);
    }
    return out;
}

std::vector<TrainingExample> order_curriculum(std::vector<TrainingExample> original_block,
                                              std::vector<TrainingExample> enriched_block, const MixPlan& plan) {
    for (const auto& e : original_block)
        if (e.origin != ExampleOrigin::original_fast)
            throw Error(Errc::invalid_argument, "example " + e.record_id + " is not original_fast");
    for (const auto& e : enriched_block)
        if (e.origin != ExampleOrigin::enriched)
            throw Error(Errc::invalid_argument, "example " + e.record_id + " is not enriched");
    Rng first(plan.seed);
    first.shuffle(original_block);
    Rng second(plan.seed ^ 0x9e3779b97f4a7c15ULL);
    second.shuffle(enriched_block);
    std::vector<TrainingExample> out = std::move(original_block);
    out.insert(out.end(), std::make_move_iterator(enriched_block.begin()), std::make_move_iterator(enriched_block.end()));
    return out;
}

SplitResult split_heldout(std::span<const TrainingExample> examples, const MixPlan& plan) {
    plan.validate();
    std::map<ExampleOrigin, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < examples.size(); ++i) groups[examples[i].origin].push_back(i);

    std::set<std::size_t> held;
    for (auto& [origin, idx] : groups) {
        auto n = static_cast<std::size_t>(std::llround(plan.heldout_ratio * static_cast<double>(idx.size())));
        Rng rng(plan.seed + 1 + static_cast<std::uint64_t>(origin));
        std::vector<std::size_t> pick = idx;
        rng.shuffle(pick);
        held.insert(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n));
    }
    SplitResult out;
    for (std::size_t i = 0; i < examples.size(); ++i)
        (held.count(i) ? out.validation : out.train).push_back(examples[i]);
    return out;
}

nlohmann::json to_json(const TrainingExample& e) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : e.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"messages", std::move(msgs)},
            {"depth_tag", std::string(to_string(e.depth_tag))},
            {"origin", std::string(to_string(e.origin))},
            {"record_id", e.record_id}};
}

TrainingExample training_example_from_json(const nlohmann::json& j) {
    TrainingExample e;
    try {
        for (const auto& m : j.at("messages")) e.messages.push_back({m.at("role"), m.at("content")});
        std::string depth = j.at("depth_tag"), origin = j.at("origin");
        if (depth != "step_by_step" && depth != "concise") throw Error(Errc::malformed_line, "bad depth_tag " + depth);
        if (origin != "enriched" && origin != "original_fast") throw Error(Errc::malformed_line, "bad origin " + origin);
        e.depth_tag = depth == "step_by_step" ? DepthTag::step_by_step : DepthTag::concise;
        e.origin = origin == "enriched" ? ExampleOrigin::enriched : ExampleOrigin::original_fast;
        e.record_id = j.at("record_id");
    } catch (const nlohmann::json::exception& ex) {
        throw Error(Errc::malformed_line, std::string("training example: ") + ex.what());
    }
    auto assistants = std::count_if(e.messages.begin(), e.messages.end(), [](const Message& m) { return m.role == "assistant"; });
    if (assistants != 1) throw Error(Errc::malformed_line, "training example needs exactly one assistant message");
    if ((e.depth_tag == DepthTag::step_by_step) != (e.origin == ExampleOrigin::enriched))
        throw Error(Errc::malformed_line, "depth_tag does not match origin");
    return e;
}

void emit(std::span<const TrainingExample> examples, const std::string& path, const MixPlan& plan,
          const nlohmann::json& extra) {
    if (examples.empty()) throw Error(Errc::empty_input, "nothing to emit");
    std::string body;
    std::size_t enriched = 0;
    for (const auto& e : examples) {
        body += to_json(e).dump() + "\n";
        if (e.origin == ExampleOrigin::enriched) ++enriched;
    }
    write_file(path, body);

    nlohmann::json manifest{
        {"plan", to_json(plan)},
        {"counts", {{"examples", examples.size()}, {"enriched", enriched}, {"original_fast", examples.size() - enriched}}},
        // Recorded for the downstream fine-tuning run; not used here.
        {"training_hyperparameters",
         {{"learning_rate", 4e-5}, {"warmup_ratio", 0.15}, {"context_length", 8192}, {"batch_size", 3072}, {"epochs", 2}}},
    };
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
    write_file(path + ".manifest.json", manifest.dump(2) + "\n");
}

std::vector<TrainingExample> load_training(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<TrainingExample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(training_example_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(Errc::malformed_line, path + ": line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
    return out;
}

AssemblyResult assemble(std::span<const InstructionRecord> seed_records, std::span<const EnrichedLine> enriched,
                        std::span<const JudgedRecord> verdicts, const MixPlan& plan,
                        const std::map<std::string, int>& seed_scores, const SeedScorer& scorer) {
    plan.validate();
    AssemblyResult out;
    std::set<std::string> failed;
    for (const auto& v : verdicts)
        if (!v.error.empty()) failed.insert(v.record_id);

    std::vector<TrainingExample> enriched_block;
    for (const auto& line : enriched) {
        InstructionRecord r = line.base;
        r.origin = Origin::enriched;
        if (failed.count(r.id)) {
            r.meta["judge_failed"] = "true";
            ++out.judge_failed;
        } else {
            r.response = line.enriched.rewritten_response;
        }
        enriched_block.push_back(tag_depth(r, plan));
    }
    out.enriched_used = enriched_block.size();

    out.fast = select_fast_subset(seed_records, plan, seed_scores, scorer);
    std::vector<TrainingExample> original_block;
    for (auto r : out.fast.records) {
        r.origin = Origin::seed_original;
        original_block.push_back(tag_depth(r, plan));
    }
    auto sequence = order_curriculum(std::move(original_block), std::move(enriched_block), plan);
    out.split = split_heldout(sequence, plan);
    return out;
}

} // namespace enrichkit
