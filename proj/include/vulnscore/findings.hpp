#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vulnscore/features.hpp"

namespace vulnscore {

/// Normalized static-analysis finding categories. Each non-Other category
/// feeds one layer-1 feature.
enum class FindingCategory { BufferWrite, NullDeref, UseAfterFree, MemoryLeak, StackReturn, UseBeforeDef, Other };

std::string_view to_string(FindingCategory category);
FindingCategory parse_finding_category(std::string_view text);
/// Layer-1 feature name for a category; empty for Other.
std::string_view layer1_feature(FindingCategory category);

struct Finding {
    FindingCategory category = FindingCategory::Other;
    std::string file;
    std::size_t line = 1;
    std::string tool;
    std::string raw_message;

    bool operator==(const Finding&) const = default;
};

/// Problem with a single report element; the element is skipped.
struct ElementError {
    std::size_t line = 0;
    std::string message;

    bool operator==(const ElementError&) const = default;
};

struct FindingsReport {
    std::string tool;
    std::vector<Finding> findings;
    std::vector<ElementError> errors;
    // splint lines that matched no diagnostic pattern (banners, "(in function ...)" headers).
    std::size_t unmatched_lines = 0;

    bool operator==(const FindingsReport&) const = default;
};

/// cppcheck error id -> category table.
class CppcheckIdMap {
public:
    CppcheckIdMap() = default;
    explicit CppcheckIdMap(std::map<std::string, FindingCategory> ids) : ids_(std::move(ids)) {}

    static const CppcheckIdMap& builtin();
    /// Expects a flat object `{ "<id>": "<Category>", ... }`.
    static CppcheckIdMap from_json(const nlohmann::json& doc);
    static CppcheckIdMap load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;

    FindingCategory category_for(std::string_view id) const;
    const std::map<std::string, FindingCategory>& entries() const { return ids_; }

private:
    std::map<std::string, FindingCategory> ids_;
};

struct SplintRule {
    std::vector<std::string> all_of; // lower-case substrings
    FindingCategory category = FindingCategory::Other;
};

/// Ordered keyword rules for splint messages; first match wins, case-insensitive.
class SplintRules {
public:
    SplintRules() = default;
    explicit SplintRules(std::vector<SplintRule> rules);

    static const SplintRules& builtin();
    /// Expects `[ { "all_of": [...], "category": "..." }, ... ]`.
    static SplintRules from_json(const nlohmann::json& doc);
    static SplintRules load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;

    FindingCategory classify(std::string_view message) const;
    const std::vector<SplintRule>& rules() const { return rules_; }

private:
    std::vector<SplintRule> rules_;
};

/// Parses cppcheck XML (version 1 attributes or version 2 `<location>` children).
/// Throws FormatError on malformed XML; bad elements land in `errors`.
FindingsReport parse_cppcheck_xml(std::string_view text,
                                  const CppcheckIdMap& ids = CppcheckIdMap::builtin());

/// Parses splint plain-text output. Never throws on content.
FindingsReport parse_splint_text(std::string_view text,
                                 const SplintRules& rules = SplintRules::builtin());

/// Reads a report file and dispatches on content: XML goes to the cppcheck
/// parser, anything else to the splint parser.
FindingsReport parse_findings_file(const std::filesystem::path& path,
                                   const CppcheckIdMap& ids = CppcheckIdMap::builtin(),
                                   const SplintRules& rules = SplintRules::builtin());

/// Counts findings per category into the six l1.* features.
///
/// Identical (tool, category, file, line) findings count once; the same
/// location reported by two different tools counts twice.
FeatureVector aggregate_layer1(std::span<const FindingsReport> reports);
FeatureVector aggregate_layer1(const FindingsReport& report);

/// Maps every l1.* count to min(count, 1).
FeatureVector binarize_layer1(FeatureVector features);

} // namespace vulnscore
