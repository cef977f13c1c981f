#pragma once

#include "enrichkit/gateway.hpp"
#include "enrichkit/prompts.hpp"
#include "enrichkit/record.hpp"
#include "enrichkit/task.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace enrichkit {

using Partition = std::map<std::string, std::vector<InstructionRecord>>;

// Buckets records by task name. Every registered task gets a key, even when
// empty. Throws Error(unknown_task) for unlabeled records or labels outside `tasks`.
Partition partition(std::span<const InstructionRecord> records, std::span<const TaskSpec> tasks);

struct ClassifyOptions {
    std::string model_id;
    const PromptLibrary* prompts = nullptr;
};

// Asks the gateway which registered task the record belongs to, re-asking once
// when the reply names no registered task; then Error(unresolvable_label).
// On success the name is written to record.task_name.
std::string classify_record(InstructionRecord& record, std::span<const TaskSpec> tasks, Gateway& gateway,
                            const ClassifyOptions& opts = {});

// Normalises a classifier reply ("TASK: name", quoted or bare) to a task name if it
// names a registered task.
std::optional<std::string> match_task_reply(std::string_view reply, std::span<const TaskSpec> tasks);

} // namespace enrichkit
