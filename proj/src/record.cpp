#include "enrichkit/record.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <unordered_set>

namespace enrichkit {

using nlohmann::json;

std::string_view to_string(Origin origin) {
    return origin == Origin::enriched ? "enriched" : "seed_original";
}

Origin origin_from_string(std::string_view s) {
    if (s == "seed_original") return Origin::seed_original;
    if (s == "enriched") return Origin::enriched;
    throw Error(Errc::malformed_line, "unknown origin '" + std::string(s) + "'");
}

json to_json(const InstructionRecord& r) {
    json j;
    j["id"] = r.id;
    j["task"] = r.task_name;
    j["instruction"] = r.instruction;
    j["response"] = r.response;
    j["grounding_doc"] = r.grounding_doc ? json(*r.grounding_doc) : json(nullptr);
    j["origin"] = to_string(r.origin);
    j["meta"] = r.meta;
    return j;
}

namespace {

std::string required_text(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end()) throw Error(Errc::malformed_line, std::string("missing field \"") + field + "\"");
    if (!it->is_string()) throw Error(Errc::malformed_line, std::string("field \"") + field + "\" is not a string");
    std::string value = it->get<std::string>();
    if (trim(value).empty()) throw Error(Errc::malformed_line, std::string("field \"") + field + "\" is empty");
    return value;
}

std::optional<std::string> optional_text(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(Errc::malformed_line, std::string("field \"") + field + "\" is not a string");
    return it->get<std::string>();
}

} // namespace

InstructionRecord record_from_json(const json& j) {
    if (!j.is_object()) throw Error(Errc::malformed_line, "line is not a JSON object");
    InstructionRecord r;
    r.id = optional_text(j, "id").value_or("");
    r.task_name = optional_text(j, "task").value_or("");
    r.instruction = required_text(j, "instruction");
    r.response = required_text(j, "response");
    r.grounding_doc = optional_text(j, "grounding_doc");
    if (auto origin = optional_text(j, "origin")) r.origin = origin_from_string(*origin);
    if (auto it = j.find("meta"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw Error(Errc::malformed_line, "field \"meta\" is not an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) throw Error(Errc::malformed_line, "meta value for \"" + k + "\" is not a string");
            r.meta[k] = v.get<std::string>();
        }
    }
    if (r.origin == Origin::enriched && !r.meta.count(std::string(kFormatVersionKey)))
        throw Error(Errc::malformed_line, "enriched record lacks meta.format_version");
    return r;
}

std::string derive_record_id(const InstructionRecord& record, std::size_t ordinal) {
    std::string digest = sha256_hex(record.instruction + '\x1f' + record.response);
    return "r" + digest.substr(0, 12) + "-" + std::to_string(ordinal);
}

Dataset load_dataset(const std::string& locator, SplitTag split) {
    if (!std::filesystem::is_regular_file(locator)) throw Error(Errc::missing_file, "no such dataset: " + locator);
    std::ifstream in(locator, std::ios::binary);
    if (!in) throw Error(Errc::missing_file, "cannot open dataset: " + locator);

    Dataset ds;
    ds.handle.locator = locator;
    ds.handle.split_tag = split;
    std::unordered_set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        InstructionRecord r;
        try {
            r = record_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(Errc::malformed_line, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
        } catch (const Error& e) {
            throw Error(Errc::malformed_line, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        if (r.id.empty()) r.id = derive_record_id(r, ds.records.size());
        if (!ids.insert(r.id).second)
            throw Error(Errc::malformed_line, "line " + std::to_string(line_no) + ": duplicate id " + r.id, line_no);
        ds.records.push_back(std::move(r));
    }
    ds.handle.record_count = ds.records.size();
    return ds;
}

DatasetHandle persist_dataset(std::span<const InstructionRecord> records, const std::string& locator,
                              SplitTag split) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    write_file(locator, out);
    return DatasetHandle{locator, records.size(), split};
}

void append_quarantine(const std::string& locator, const InstructionRecord& record, std::string_view error) {
    static std::mutex mu;
    json j = to_json(record);
    j["error"] = std::string(error);
    std::lock_guard lock(mu);
    std::filesystem::path p(locator);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(locator, std::ios::binary | std::ios::app);
    if (!out) throw Error(Errc::io_failure, "cannot append to " + locator);
    out << j.dump() << '\n';
}

namespace {

constexpr std::array<TaxonomyLabel, kTaxonomySize> kLabels = {
    TaxonomyLabel::GCR,    TaxonomyLabel::NetSec,       TaxonomyLabel::AppSec,    TaxonomyLabel::CloudSec,
    TaxonomyLabel::IAM_ZT, TaxonomyLabel::SecOps,       TaxonomyLabel::ThreatOps_IR,
    TaxonomyLabel::CryptoSec, TaxonomyLabel::HumanSec,  TaxonomyLabel::Other};

} // namespace

std::string_view to_string(TaxonomyLabel label) {
    switch (label) {
    case TaxonomyLabel::GCR: return "GCR";
    case TaxonomyLabel::NetSec: return "NetSec";
    case TaxonomyLabel::AppSec: return "AppSec";
    case TaxonomyLabel::CloudSec: return "CloudSec";
    case TaxonomyLabel::IAM_ZT: return "IAM_ZT";
    case TaxonomyLabel::SecOps: return "SecOps";
    case TaxonomyLabel::ThreatOps_IR: return "ThreatOps_IR";
    case TaxonomyLabel::CryptoSec: return "CryptoSec";
    case TaxonomyLabel::HumanSec: return "HumanSec";
    case TaxonomyLabel::Other: return "Other";
    }
    return "Other";
}

std::optional<TaxonomyLabel> taxonomy_from_string(std::string_view s) {
    // Case-insensitive; spaces and dashes are accepted in place of underscores.
    std::string norm;
    for (char c : trim(s)) {
        if (c == ' ' || c == '-') c = '_';
        norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    for (auto label : kLabels)
        if (to_lower(to_string(label)) == norm) return label;
    return std::nullopt;
}

std::span<const TaxonomyLabel> all_taxonomy_labels() { return kLabels; }

} // namespace enrichkit
