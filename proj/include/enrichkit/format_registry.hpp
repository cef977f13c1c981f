#pragma once

#include "enrichkit/gateway.hpp"
#include "enrichkit/prompts.hpp"
#include "enrichkit/record.hpp"
#include "enrichkit/task.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace enrichkit {

struct WorkbenchConfig {
    int pool_size = 500; // examples considered per task
    int sample_size = 1; // k shown to the expert
    std::uint64_t sampling_seed = 0;

    void validate() const;
};

// min(k, pool) records drawn without replacement from the first N records of
// the task; deterministic for a given seed.
std::vector<InstructionRecord> sample_examples(const TaskSpec& task, std::span<const InstructionRecord> records,
                                               const WorkbenchConfig& cfg);

// Recognises numbered lists ("1. **Name**: text", "Step 2) Name - text") and
// bolded headings ("**Name**" followed by text). Returns no steps for anything else.
std::vector<FormatStep> parse_format_steps(std::string_view text);

struct CandidateOptions {
    std::string model_id;
    double temperature = 0.0;
    int current_version = 0; // the candidate is stamped current_version + 1
    const PromptLibrary* prompts = nullptr;
};

// `prompt_kind` names a "format.<kind>" prompt ("specific", "general", or any
// prompt added to the library). Throws Error(unparseable_format) when the reply
// has no step structure after one re-ask.
FormatTemplate generate_candidate(std::string_view task_description, std::span<const InstructionRecord> examples,
                                  std::string_view prompt_kind, Gateway& gateway, const CandidateOptions& opts = {});

// Human-editable task file: "key: value" header, a blank line, then one
// "## <step name>" block per step.
std::string serialize_task(const TaskSpec& task);
TaskSpec parse_task_file(std::string_view text);

// Versioned task/format store. With a root directory each saved version is
// written to <root>/<task>/v<NNNN>.fmt and never rewritten.
class FormatRegistry {
public:
    explicit FormatRegistry(std::string root = {});

    // Version 0 in spec.format means "next"; any other value must equal
    // latest + 1 or Error(version_conflict) is thrown. Returns the stored version.
    int save(TaskSpec spec);

    TaskSpec load(std::string_view name) const;
    TaskSpec load(std::string_view name, int version) const;
    std::vector<int> versions(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::vector<TaskSpec> current() const;
    std::vector<std::string> names() const;

private:
    void persist(const TaskSpec& spec) const;

    std::string root_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::vector<TaskSpec>, std::less<>> history_;
};

} // namespace enrichkit
