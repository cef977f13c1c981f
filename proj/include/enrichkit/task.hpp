#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace enrichkit {

enum class Provenance { llm_generated, expert_edited };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct FormatStep {
    std::string name;
    std::string instruction;

    bool operator==(const FormatStep&) const = default;
};

// The stepwise answer format bound to a task.
struct FormatTemplate {
    std::vector<FormatStep> steps;
    int version = 0; // 0 = not yet saved
    Provenance provenance = Provenance::llm_generated;

    bool operator==(const FormatTemplate&) const = default;

    // At least one step, step names non-empty and unique.
    void validate() const;
    std::vector<std::string> step_names() const;
};

struct TaskSpec {
    std::string name;
    std::string description;
    FormatTemplate format;
    bool requires_search = false;
    bool requires_grounding_doc = false;

    bool operator==(const TaskSpec&) const = default;

    void validate() const;
};

nlohmann::json to_json(const FormatTemplate& f);
FormatTemplate format_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TaskSpec& t);
TaskSpec task_from_json(const nlohmann::json& j);

} // namespace enrichkit
