#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace enrichkit {

enum class Errc {
    invalid_argument,
    missing_file,
    malformed_line,
    unknown_task,
    unresolvable_label,
    upstream_failure,
    cache_miss,
    backend_unavailable,
    unparseable,
    empty_pool,
    unparseable_format,
    unknown_task_name,
    version_conflict,
    budget_too_small,
    missing_grounding_doc,
    step_coverage,
    unparseable_judgment,
    unparseable_score,
    empty_input,
    io_failure,
    malformed_item,
    unknown_kind,
    config,
};

// Stable identifier used in quarantine files, error JSON and HTTP payloads.
std::string_view to_string(Errc code);

// Process exit code for the CLI: 1 usage, 2 data, 3 upstream.
int exit_code_for(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, int detail = 0)
        : std::runtime_error(message), code_(code), detail_(detail) {}

    Errc code() const noexcept { return code_; }

    // Line number for malformed_line, HTTP status for upstream_failure.
    int detail() const noexcept { return detail_; }

private:
    Errc code_;
    int detail_;
};

} // namespace enrichkit
