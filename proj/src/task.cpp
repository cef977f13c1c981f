#include "enrichkit/task.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <cctype>
#include <set>

namespace enrichkit {

using nlohmann::json;

std::string_view to_string(Provenance p) {
    return p == Provenance::expert_edited ? "expert_edited" : "llm_generated";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "llm_generated") return Provenance::llm_generated;
    if (s == "expert_edited") return Provenance::expert_edited;
    throw Error(Errc::invalid_argument, "unknown provenance '" + std::string(s) + "'");
}

void FormatTemplate::validate() const {
    if (steps.empty()) throw Error(Errc::invalid_argument, "format has no steps");
    std::set<std::string> names;
    for (const auto& s : steps) {
        if (trim(s.name).empty()) throw Error(Errc::invalid_argument, "format step with empty name");
        if (s.name.find('\n') != std::string::npos)
            throw Error(Errc::invalid_argument, "format step name spans lines: " + s.name);
        if (!names.insert(s.name).second) throw Error(Errc::invalid_argument, "duplicate step name: " + s.name);
    }
    if (version < 0) throw Error(Errc::invalid_argument, "negative format version");
}

std::vector<std::string> FormatTemplate::step_names() const {
    std::vector<std::string> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.name);
    return out;
}

void TaskSpec::validate() const {
    if (name.empty()) throw Error(Errc::invalid_argument, "task name is empty");
    for (char c : name) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
        if (!ok) throw Error(Errc::invalid_argument, "task name has invalid character: " + name);
    }
    if (trim(description).empty()) throw Error(Errc::invalid_argument, "task " + name + " has empty description");
    format.validate();
}

json to_json(const FormatTemplate& f) {
    json steps = json::array();
    for (const auto& s : f.steps) steps.push_back({{"name", s.name}, {"instruction", s.instruction}});
    return {{"steps", steps}, {"version", f.version}, {"provenance", to_string(f.provenance)}};
}

FormatTemplate format_from_json(const json& j) {
    FormatTemplate f;
    for (const auto& s : j.at("steps"))
        f.steps.push_back({s.at("name").get<std::string>(), s.value("instruction", std::string{})});
    f.version = j.value("version", 0);
    f.provenance = provenance_from_string(j.value("provenance", std::string("llm_generated")));
    return f;
}

json to_json(const TaskSpec& t) {
    return {{"name", t.name},
            {"description", t.description},
            {"format", to_json(t.format)},
            {"requires_search", t.requires_search},
            {"requires_grounding_doc", t.requires_grounding_doc}};
}

TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.description = j.value("description", std::string{});
    if (j.contains("format")) t.format = format_from_json(j.at("format"));
    t.requires_search = j.value("requires_search", false);
    t.requires_grounding_doc = j.value("requires_grounding_doc", false);
    return t;
}

} // namespace enrichkit
