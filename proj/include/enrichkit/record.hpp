#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace enrichkit {

enum class Origin { seed_original, enriched };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view s);

// meta key that every enriched record carries.
inline constexpr std::string_view kFormatVersionKey = "format_version";

struct InstructionRecord {
    std::string id;
    std::string task_name; // empty until classified
    std::string instruction;
    std::string response;
    std::optional<std::string> grounding_doc;
    Origin origin = Origin::seed_original;
    std::map<std::string, std::string> meta;

    bool operator==(const InstructionRecord&) const = default;
};

enum class SplitTag { full, train, validation };

struct DatasetHandle {
    std::string locator;
    std::size_t record_count = 0;
    SplitTag split_tag = SplitTag::full;
};

struct Dataset {
    DatasetHandle handle;
    std::vector<InstructionRecord> records;
};

nlohmann::json to_json(const InstructionRecord& record);

// Throws Error(malformed_line) with a message describing the schema violation;
// the caller supplies the line number.
InstructionRecord record_from_json(const nlohmann::json& j);

// Id assigned at ingest when a line carries none: content hash plus ordinal.
std::string derive_record_id(const InstructionRecord& record, std::size_t ordinal);

Dataset load_dataset(const std::string& locator, SplitTag split = SplitTag::full);
DatasetHandle persist_dataset(std::span<const InstructionRecord> records, const std::string& locator,
                              SplitTag split = SplitTag::full);

// Appends one JSONL line per record with an extra "error" field.
void append_quarantine(const std::string& locator, const InstructionRecord& record, std::string_view error);

enum class TaxonomyLabel {
    GCR,
    NetSec,
    AppSec,
    CloudSec,
    IAM_ZT,
    SecOps,
    ThreatOps_IR,
    CryptoSec,
    HumanSec,
    Other,
};

inline constexpr std::size_t kTaxonomySize = 10;

std::string_view to_string(TaxonomyLabel label);
std::optional<TaxonomyLabel> taxonomy_from_string(std::string_view s);
std::span<const TaxonomyLabel> all_taxonomy_labels();

using LabelSet = std::set<TaxonomyLabel>;

} // namespace enrichkit
