#pragma once

#include "enrichkit/assembly.hpp"
#include "enrichkit/enrichment.hpp"
#include "enrichkit/format_registry.hpp"
#include "enrichkit/gateway.hpp"
#include "enrichkit/judge.hpp"
#include "enrichkit/prompts.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace enrichkit {

// Flat "key = value" settings. Lines starting with '#' are comments and
// ${NAME} is replaced by the environment variable NAME (an unset variable is
// an error). Unknown keys are rejected so typos surface at startup.
class Config {
public:
    using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

    Config() = default;
    static Config parse(std::string_view text, const EnvLookup& env = {});
    static Config load(const std::string& path, const EnvLookup& env = {});
    static const std::map<std::string, std::string>& defaults();

    // "key=value" override; same validation as the file.
    void set(const std::string& key, const std::string& value);
    void set_assignment(std::string_view assignment);

    std::string get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    // Effective settings with secrets left out.
    nlohmann::json to_json() const;

private:
    std::map<std::string, std::string> values_;
};

PipelineConfig pipeline_config(const Config& cfg);
WorkbenchConfig workbench_config(const Config& cfg);
MixPlan mix_plan(const Config& cfg);
JudgeOptions judge_options(const Config& cfg);

// Everything a stage needs, built once from a Config.
struct Runtime {
    Config config;
    std::shared_ptr<ReplayCache> cache;
    std::shared_ptr<Gateway> gateway;
    std::shared_ptr<FormatRegistry> registry;
    std::shared_ptr<PromptLibrary> prompts;
    PipelineConfig pipeline;
    WorkbenchConfig workbench;
    MixPlan mix;
    JudgeOptions judge;
    int workers = 1;

    // model.endpoint "simulated" (the default) selects the offline simulated
    // model; anything else is an OpenAI-compatible chat completions URL.
    static std::unique_ptr<Runtime> build(const Config& cfg, std::shared_ptr<ChatModel> model_override = {});
};

} // namespace enrichkit
